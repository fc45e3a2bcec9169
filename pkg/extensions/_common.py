"""
This Source Code Form is subject to the terms of the Mozilla Public
License, v. 2.0. If a copy of the MPL was not distributed with this
file, You can obtain one at http://mozilla.org/MPL/2.0/.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Any

from utilities.flags import OutputFormat
from utilities.formats import dumps, to_csv

if TYPE_CHECKING:
    import argparse
    from collections.abc import Mapping, Sequence

__all__ = ("add_fit_arguments", "render")


def add_fit_arguments(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("fit", "overrides for the [fit] configuration section")
    group.add_argument("--tolerance", type=float, default=None, help="relative convergence tolerance")
    group.add_argument("--max-iterations", type=int, default=None, help="iteration cap per fit")
    group.add_argument("--damping", type=float, default=None, help="fixed-point damping factor in (0, 1]")
    parser.add_argument(
        "--format",
        choices=[member.value for member in OutputFormat],
        default=None,
        help="output format (defaults to the [output] configuration section)",
    )


def render(output: OutputFormat, document: Any, rows: Sequence[Mapping[str, Any]]) -> str:
    if output is OutputFormat.csv:
        return to_csv(rows)
    return dumps(document) + "\n"
