"""
This Source Code Form is subject to the terms of the Mozilla Public
License, v. 2.0. If a copy of the MPL was not distributed with this
file, You can obtain one at http://mozilla.org/MPL/2.0/.
"""

from __future__ import annotations

import pathlib
import sys
from typing import TYPE_CHECKING, TextIO

from utilities.constants import EXIT_OK
from utilities.containers.scenario import ScenarioSpec
from utilities.simulation import resolve_workers, run_size_power

from ._common import add_fit_arguments, render

if TYPE_CHECKING:
    import argparse

    from utilities.containers.run import RunConfig

__all__ = ("cmd_simulate", "setup")


def cmd_simulate(config: RunConfig, *, stdout: TextIO | None = None) -> int:
    stdout = stdout or sys.stdout
    spec = ScenarioSpec.from_toml(config.input)
    if config.seed is not None:
        spec = spec._replace(seed=config.seed).validate()

    summary = run_size_power(
        spec,
        workers=resolve_workers(config.workers, config.configured_workers),
        chunk_size=config.chunk_size,
        cfg=config.fit,
    )
    stdout.write(render(config.output, summary.to_dict(), summary.to_rows()))
    return EXIT_OK


def setup(subparsers: argparse._SubParsersAction[argparse.ArgumentParser]) -> None:  # pyright: ignore[reportPrivateUsage]
    parser = subparsers.add_parser("simulate", help="run a Monte-Carlo size/power scenario")
    parser.add_argument("input", type=pathlib.Path, help="scenario TOML file")
    parser.add_argument("--seed", type=int, default=None, help="override the scenario's root seed")
    parser.add_argument("--workers", type=int, default=None, help="worker processes (overrides RAO_THREADS)")
    add_fit_arguments(parser)
    parser.set_defaults(callback=cmd_simulate)
