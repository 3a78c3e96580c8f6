"""Experiment plumbing: config files, scenario library, runners, CLI, plots."""

from . import cli, config, plots, runner, scenarios  # noqa: F401
