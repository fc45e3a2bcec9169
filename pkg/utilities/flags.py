"""
This Source Code Form is subject to the terms of the Mozilla Public
License, v. 2.0. If a copy of the MPL was not distributed with this
file, You can obtain one at http://mozilla.org/MPL/2.0/.
"""

from __future__ import annotations

import enum
from typing import TYPE_CHECKING

from .exceptions import DomainError

if TYPE_CHECKING:
    from typing import Self

__all__ = (
    "Contaminant",
    "Generator",
    "HypothesisKind",
    "NullParameter",
    "OutputFormat",
)


class NullParameter(enum.Enum):
    none = "none"
    matrix = "r0"
    rho = "rho0"


class HypothesisKind(enum.Enum):
    specified = "specified-R"
    equicorr_fixed = "equicorr-fixed"
    independence = "independence"
    equicorr_free = "equicorr-free"
    bivariate = "bivariate"
    bartlett = "bartlett-lrt"

    @classmethod
    def from_name(cls, name: str) -> Self:
        """Accept report values (``specified-R``), CLI spellings (``specified``) and member names."""
        key = name.strip().lower().replace("_", "-")
        for member in cls:
            if key in {member.value.lower(), member.cli_name}:
                return member
        valid = ", ".join(member.cli_name for member in cls)
        raise DomainError(f"unknown test kind {name!r}; expected one of: {valid}.")

    @property
    def cli_name(self) -> str:
        return self.name.replace("_", "-")

    @property
    def null_parameter(self) -> NullParameter:
        match self:
            case HypothesisKind.specified:
                return NullParameter.matrix
            case HypothesisKind.equicorr_fixed | HypothesisKind.bivariate:
                return NullParameter.rho
            case _:
                return NullParameter.none

    @property
    def uses_beta(self) -> bool:
        return self is not HypothesisKind.bartlett

    def degrees_of_freedom(self, p: int) -> int:
        pairs = p * (p - 1) // 2
        # one common correlation is estimated under the free null.
        return pairs - 1 if self is HypothesisKind.equicorr_free else pairs


class Generator(enum.Enum):
    gaussian = "gaussian"
    contaminated = "contaminated"
    heavy_tailed = "heavy_tailed"


class Contaminant(enum.Enum):
    shift = "shift"
    scale = "scale"
    point = "point"


class OutputFormat(enum.Enum):
    json = "json"
    csv = "csv"
