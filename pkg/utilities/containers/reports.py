"""
This Source Code Form is subject to the terms of the Mozilla Public
License, v. 2.0. If a copy of the MPL was not distributed with this
file, You can obtain one at http://mozilla.org/MPL/2.0/.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Any, NamedTuple

from utilities.constants import SCHEMA
from utilities.flags import HypothesisKind

if TYPE_CHECKING:
    from typing import Self

__all__ = (
    "CellSummary",
    "MonteCarloSummary",
    "TestReport",
)


class TestReport(NamedTuple):
    """One test evaluated at one β.

    ``fit`` is the serialisable summary of the restricted fit behind the statistic, ``None`` for the
    likelihood-ratio baseline. ``null`` records the null parameters (``rho0`` or ``r0``) as given,
    ``None`` when there are none.
    """

    __test__ = False  # not a pytest class

    kind: HypothesisKind
    beta: float | None
    statistic: float
    df: int
    p_value: float
    n: int
    p: int
    fit: dict[str, Any] | None = None
    null: dict[str, Any] | None = None

    def __repr__(self) -> str:
        return (
            f"<TestReport kind={self.kind.value!r} beta={self.beta} statistic={self.statistic:.6g} df={self.df} "
            f"p_value={self.p_value:.4g}>"
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema": SCHEMA,
            "kind": self.kind.value,
            "beta": self.beta,
            "statistic": self.statistic,
            "df": self.df,
            "p_value": self.p_value,
            "n": self.n,
            "p": self.p,
            "null": self.null or {},
            "fit": self.fit,
        }

    def to_row(self) -> dict[str, Any]:
        row = {key: value for key, value in self.to_dict().items() if key not in {"schema", "null", "fit"}}
        row["converged"] = None if self.fit is None else self.fit["converged"]
        row["iterations"] = None if self.fit is None else self.fit["iterations"]
        return row

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Self:
        return cls(
            kind=HypothesisKind(data["kind"]),
            beta=data["beta"],
            statistic=data["statistic"],
            df=data["df"],
            p_value=data["p_value"],
            n=data["n"],
            p=data["p"],
            fit=data.get("fit"),
            null=data.get("null") or None,
        )


class CellSummary(NamedTuple):
    """Monte-Carlo tallies for one (test, β) cell.

    ``completed`` plus the failure counts always equals ``replications``.
    """

    kind: HypothesisKind
    label: str
    beta: float | None
    df: int
    replications: int
    completed: int
    rejections: int
    rejection_rate: float
    standard_error: float
    statistic_mean: float | None
    statistic_variance: float | None
    ks_distance: float | None
    failures: dict[str, int]

    @property
    def failure_count(self) -> int:
        return sum(self.failures.values())

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "test": self.label,
            "beta": self.beta,
            "df": self.df,
            "replications": self.replications,
            "completed": self.completed,
            "rejections": self.rejections,
            "rejection_rate": self.rejection_rate,
            "standard_error": self.standard_error,
            "statistic_mean": self.statistic_mean,
            "statistic_variance": self.statistic_variance,
            "ks_distance": self.ks_distance,
            "failures": dict(sorted(self.failures.items())),
        }


class MonteCarloSummary(NamedTuple):
    name: str
    n: int
    p: int
    replications: int
    alpha: float
    seed: int
    generator: str
    cells: tuple[CellSummary, ...]

    def cell(self, kind: HypothesisKind, beta: float | None, *, label: str | None = None) -> CellSummary:
        for cell in self.cells:
            if cell.kind is kind and cell.beta == beta and label in {None, cell.label}:
                return cell
        raise KeyError((label or kind.value, beta))

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema": SCHEMA,
            "scenario": self.name,
            "n": self.n,
            "p": self.p,
            "replications": self.replications,
            "alpha": self.alpha,
            "seed": self.seed,
            "generator": self.generator,
            "cells": [cell.to_dict() for cell in self.cells],
        }

    def to_rows(self) -> list[dict[str, Any]]:
        rows: list[dict[str, Any]] = []
        for cell in self.cells:
            row = {"scenario": self.name, "n": self.n, "p": self.p, "alpha": self.alpha, "seed": self.seed}
            row.update(cell.to_dict())
            row["failures"] = cell.failure_count
            rows.append(row)
        return rows
