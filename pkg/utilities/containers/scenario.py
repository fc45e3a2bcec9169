"""
This Source Code Form is subject to the terms of the Mozilla Public
License, v. 2.0. If a copy of the MPL was not distributed with this
file, You can obtain one at http://mozilla.org/MPL/2.0/.
"""

from __future__ import annotations

import math
import tomllib
from typing import TYPE_CHECKING, Any, NamedTuple

import numpy as np

from utilities.exceptions import DataError, EmptySummaryError, RaoError
from utilities.flags import Contaminant, Generator, HypothesisKind, NullParameter
from utilities.matrix_ops import equicorrelation, validate_correlation

from .params import GaussianParams

if TYPE_CHECKING:
    import pathlib
    from collections.abc import Mapping
    from typing import Self

    from utilities._types.scenario import ContaminationTable, GaussianTable, GeneratorTable, NullTable
    from utilities.matrix_ops import FloatArray

__all__ = (
    "GeneratorSpec",
    "NullSpec",
    "ScenarioSpec",
)


def _vector(value: list[float] | float, p: int, *, name: str) -> FloatArray:
    array = np.asarray(value, dtype=np.float64)
    if array.ndim == 0:
        array = np.full(p, float(array))
    if array.shape != (p,):
        raise DataError(f"{name} must have {p} entries, got {array.size}.")
    return array


def _clean_params(table: GaussianTable | None, p: int) -> GaussianParams:
    from utilities.simulation import correlation_with_pair  # noqa: PLC0415 # simulation imports this module

    table = table or {}
    spellings = [key for key in ("corr", "rho", "pair") if key in table]
    if len(spellings) > 1:
        raise DataError(f"clean parameters set the correlation more than once ({', '.join(spellings)}).")

    try:
        if "corr" in table:
            corr = validate_correlation(table["corr"], name="clean correlation")
        elif "rho" in table:
            corr = equicorrelation(table["rho"], p)
        elif "pair" in table:
            i, j, rho = table["pair"]
            corr = correlation_with_pair(p, int(i), int(j), rho)
        else:
            corr = np.eye(p)
        return GaussianParams(
            _vector(table.get("mu", 0.0), p, name="mu"),
            _vector(table.get("sigma2", 1.0), p, name="sigma2"),
            corr,
        )
    except DataError:
        raise
    except (RaoError, ValueError) as exc:
        raise DataError(f"invalid clean parameters: {exc}") from exc


class GeneratorSpec(NamedTuple):
    """How one replication's sample is drawn.

    ``shift`` and ``point`` are only read for their contaminant kind; ``factor`` inflates the covariance of
    scale contaminants; ``df`` is the degrees of freedom of the heavy-tailed scale mixture.
    """

    kind: Generator
    clean: GaussianParams
    epsilon: float = 0.0
    contaminant: Contaminant | None = None
    shift: FloatArray | None = None
    factor: float = 1.0
    point: FloatArray | None = None
    df: float | None = None

    def describe(self) -> str:
        match self.kind:
            case Generator.contaminated:
                return f"contaminated({self.contaminant.value if self.contaminant else '?'}, epsilon={self.epsilon})"
            case Generator.heavy_tailed:
                return f"heavy_tailed(df={self.df})"
            case _:
                return "gaussian"

    @classmethod
    def from_mapping(cls, table: GeneratorTable, p: int) -> Self:
        try:
            kind = Generator(table.get("kind", "gaussian"))
        except ValueError as exc:
            raise DataError(f"unknown generator kind {table.get('kind')!r}.") from exc
        clean = _clean_params(table.get("clean"), p)

        match kind:
            case Generator.gaussian:
                return cls(kind=kind, clean=clean)
            case Generator.heavy_tailed:
                df = float(table.get("df", 0.0))
                if not (df > 0 and math.isfinite(df)):
                    raise DataError(f"heavy-tailed generator needs positive finite df, got {df!r}.")
                return cls(kind=kind, clean=clean, df=df)
            case Generator.contaminated:
                if "contamination" not in table:
                    raise DataError("contaminated generator needs a [generator.contamination] table.")
                return cls._contaminated(clean, table["contamination"], p)

    @classmethod
    def _contaminated(cls, clean: GaussianParams, table: ContaminationTable, p: int) -> Self:
        epsilon = float(table.get("epsilon", -1.0))
        if not 0 <= epsilon < 1:
            raise DataError(f"contamination weight must lie in [0, 1), got {epsilon!r}.")
        try:
            contaminant = Contaminant(table.get("kind"))
        except ValueError as exc:
            raise DataError(f"unknown contaminant kind {table.get('kind')!r}.") from exc

        spec = cls(kind=Generator.contaminated, clean=clean, epsilon=epsilon, contaminant=contaminant)
        match contaminant:
            case Contaminant.shift:
                return spec._replace(shift=_vector(table.get("shift", 0.0), p, name="shift"))
            case Contaminant.scale:
                factor = float(table.get("factor", 0.0))
                if not factor > 0:
                    raise DataError(f"scale contaminant needs a positive factor, got {factor!r}.")
                return spec._replace(factor=factor)
            case Contaminant.point:
                return spec._replace(point=_vector(table.get("point", 0.0), p, name="point"))


class NullSpec(NamedTuple):
    kind: HypothesisKind
    rho0: float | None = None
    r0: FloatArray | None = None

    @property
    def label(self) -> str:
        if self.rho0 is not None:
            return f"{self.kind.cli_name}(rho0={self.rho0})"
        return self.kind.cli_name

    @classmethod
    def from_mapping(cls, table: NullTable, p: int) -> Self:
        try:
            kind = HypothesisKind.from_name(str(table.get("kind", "")))
        except RaoError as exc:
            raise DataError(str(exc)) from exc

        match kind.null_parameter:
            case NullParameter.rho:
                if "rho0" not in table:
                    raise DataError(f"the {kind.cli_name} test needs rho0.")
                return cls(kind=kind, rho0=float(table["rho0"]))
            case NullParameter.matrix:
                if "r0" not in table:
                    raise DataError(f"the {kind.cli_name} test needs an r0 matrix.")
                try:
                    r0 = validate_correlation(table["r0"], name="r0")
                except RaoError as exc:
                    raise DataError(str(exc)) from exc
                if r0.shape[0] != p:
                    raise DataError(f"r0 has order {r0.shape[0]} but the scenario has p={p}.")
                return cls(kind=kind, r0=r0)
            case NullParameter.none:
                return cls(kind=kind)


class ScenarioSpec(NamedTuple):
    """A size/power experiment: sample shape, generator, tests, β values, replications, level and root seed."""

    name: str
    n: int
    p: int
    generator: GeneratorSpec
    tests: tuple[NullSpec, ...]
    betas: tuple[float, ...]
    replications: int
    alpha: float = 0.05
    seed: int = 0

    def validate(self) -> Self:
        if self.replications == 0:
            raise EmptySummaryError(f"scenario {self.name!r} has zero replications.")
        if self.replications < 0:
            raise DataError(f"replication count must be positive, got {self.replications}.")
        if self.n < 2:
            raise DataError(f"scenario needs n >= 2, got {self.n}.")
        if self.p < 1 or self.generator.clean.p != self.p:
            raise DataError(f"scenario p={self.p} does not match the generator's dimension {self.generator.clean.p}.")
        if not 0 < self.alpha < 1:
            raise DataError(f"significance level must lie in (0, 1), got {self.alpha!r}.")
        if not 0 <= self.generator.epsilon < 1:
            raise DataError(f"contamination weight must lie in [0, 1), got {self.generator.epsilon!r}.")
        if not self.tests:
            raise DataError(f"scenario {self.name!r} lists no tests.")
        if any(not (beta >= 0 and math.isfinite(beta)) for beta in self.betas):
            raise DataError(f"beta values must be finite and non-negative, got {list(self.betas)!r}.")
        if not self.betas and any(test.kind.uses_beta for test in self.tests):
            raise DataError(f"scenario {self.name!r} lists no beta values.")
        if self.seed < 0:
            raise DataError(f"seed must be non-negative, got {self.seed}.")
        return self

    @classmethod
    def from_mapping(cls, document: Mapping[str, Any]) -> Self:
        try:
            scenario = document["scenario"]
            p = int(scenario["p"])
            spec = cls(
                name=str(scenario.get("name", "scenario")),
                n=int(scenario["n"]),
                p=p,
                generator=GeneratorSpec.from_mapping(document.get("generator", {"kind": "gaussian"}), p),
                tests=tuple(NullSpec.from_mapping(table, p) for table in document.get("tests", [])),
                betas=tuple(float(beta) for beta in scenario.get("beta", [0.0])),
                replications=int(scenario["replications"]),
                alpha=float(scenario.get("alpha", 0.05)),
                seed=int(scenario.get("seed", 0)),
            )
        except KeyError as exc:
            raise DataError(f"scenario is missing the required key {exc.args[0]!r}.") from exc
        except (TypeError, ValueError) as exc:
            if isinstance(exc, RaoError):
                raise
            raise DataError(f"malformed scenario: {exc}") from exc

        return spec.validate()

    @classmethod
    def from_toml(cls, path: pathlib.Path) -> Self:
        try:
            with path.open("rb") as fp:
                document = tomllib.load(fp)
        except FileNotFoundError as exc:
            raise DataError(f"scenario file {str(path)!r} does not exist.") from exc
        except tomllib.TOMLDecodeError as exc:
            raise DataError(f"scenario file {str(path)!r} is not valid TOML: {exc}") from exc

        return cls.from_mapping(document)
