"""
This Source Code Form is subject to the terms of the Mozilla Public
License, v. 2.0. If a copy of the MPL was not distributed with this
file, You can obtain one at http://mozilla.org/MPL/2.0/.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Literal, TypedDict

if TYPE_CHECKING:
    from typing import NotRequired


__all__ = ("ScenarioDocument",)


class GaussianTable(TypedDict):
    mu: NotRequired[list[float]]
    sigma2: NotRequired[list[float]]
    # exactly one of the three correlation spellings.
    corr: NotRequired[list[list[float]]]
    rho: NotRequired[float]
    pair: NotRequired[list[float]]


class ContaminationTable(TypedDict):
    epsilon: float
    kind: Literal["shift", "scale", "point"]
    shift: NotRequired[list[float] | float]
    factor: NotRequired[float]
    point: NotRequired[list[float] | float]


class GeneratorTable(TypedDict):
    kind: Literal["gaussian", "contaminated", "heavy_tailed"]
    clean: NotRequired[GaussianTable]
    contamination: NotRequired[ContaminationTable]
    df: NotRequired[float]


class NullTable(TypedDict):
    kind: str
    rho0: NotRequired[float]
    r0: NotRequired[list[list[float]]]


class ScenarioTable(TypedDict):
    name: str
    n: int
    p: int
    replications: int
    alpha: float
    seed: int
    beta: list[float]


class ScenarioDocument(TypedDict):
    scenario: ScenarioTable
    generator: GeneratorTable
    tests: list[NullTable]
