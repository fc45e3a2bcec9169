"""
This Source Code Form is subject to the terms of the Mozilla Public
License, v. 2.0. If a copy of the MPL was not distributed with this
file, You can obtain one at http://mozilla.org/MPL/2.0/.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Literal, TypedDict

if TYPE_CHECKING:
    from typing import NotRequired


__all__ = ("Config",)


class LoggingSection(TypedDict):
    level: str
    stream: bool
    sentry_dsn: NotRequired[str]


class FitSection(TypedDict):
    tolerance: NotRequired[float]
    max_iterations: NotRequired[int]
    damping: NotRequired[float]


class SimulationSection(TypedDict):
    workers: NotRequired[int]
    chunk_size: NotRequired[int]


class OutputSection(TypedDict):
    format: Literal["json", "csv"]


class Config(TypedDict):
    logging: LoggingSection
    fit: NotRequired[FitSection]
    simulation: NotRequired[SimulationSection]
    output: NotRequired[OutputSection]
