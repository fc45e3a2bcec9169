"""
This Source Code Form is subject to the terms of the Mozilla Public
License, v. 2.0. If a copy of the MPL was not distributed with this
file, You can obtain one at http://mozilla.org/MPL/2.0/.
"""

from __future__ import annotations

import math
from typing import TYPE_CHECKING, NamedTuple

from utilities.exceptions import DomainError
from utilities.flags import HypothesisKind, NullParameter, OutputFormat

from .fits import FitConfig

if TYPE_CHECKING:
    import argparse
    import pathlib
    from typing import Self

    from utilities._types.config import Config

__all__ = ("RunConfig", "parse_betas", "parse_kinds")


def parse_betas(text: str) -> tuple[float, ...]:
    """``"0,0.25,0.5"`` -> ``(0.0, 0.25, 0.5)``."""
    try:
        betas = tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise DomainError(f"beta list {text!r} is not a comma-separated list of numbers.") from exc
    if not betas:
        raise DomainError("at least one beta value is needed.")
    if any(not (beta >= 0 and math.isfinite(beta)) for beta in betas):
        raise DomainError(f"beta values must be finite and non-negative, got {text!r}.")
    return betas


def parse_kinds(values: list[str]) -> tuple[HypothesisKind, ...]:
    kinds: list[HypothesisKind] = []
    for value in values:
        for part in value.split(","):
            if part.strip() and (kind := HypothesisKind.from_name(part)) not in kinds:
                kinds.append(kind)
    if not kinds:
        raise DomainError("at least one test kind is needed.")
    return tuple(kinds)


class RunConfig(NamedTuple):
    """A parsed command line merged over the configuration file. Flags win over configuration values."""

    subcommand: str
    input: pathlib.Path
    kinds: tuple[HypothesisKind, ...] = ()
    r0_path: pathlib.Path | None = None
    rho0: float | None = None
    betas: tuple[float, ...] = (0.0,)
    fit: FitConfig = FitConfig()
    output: OutputFormat = OutputFormat.json
    seed: int | None = None
    workers: int | None = None
    configured_workers: int | None = None
    chunk_size: int | None = None

    def validate(self) -> Self:
        if self.subcommand not in {"test", "simulate"}:
            raise DomainError(f"unknown subcommand {self.subcommand!r}.")
        if any(not beta >= 0 for beta in self.betas):
            raise DomainError("beta values must be non-negative.")
        self.fit.validate()
        if self.subcommand == "simulate":
            return self

        if not self.kinds:
            raise DomainError("at least one test kind is needed.")
        needed = {kind.null_parameter for kind in self.kinds}
        if NullParameter.matrix in needed and self.r0_path is None:
            raise DomainError("the specified test needs --r0.")
        if NullParameter.matrix not in needed and self.r0_path is not None:
            raise DomainError("--r0 is only used by the specified test.")
        if NullParameter.rho in needed and self.rho0 is None:
            names = ", ".join(kind.cli_name for kind in self.kinds if kind.null_parameter is NullParameter.rho)
            raise DomainError(f"--rho0 is needed by: {names}.")
        if NullParameter.rho not in needed and self.rho0 is not None:
            raise DomainError("--rho0 is only used by the equicorr-fixed and bivariate tests.")
        return self

    @classmethod
    def from_namespace(cls, args: argparse.Namespace, config: Config) -> Self:
        output = args.format or config.get("output", {}).get("format", "json")
        try:
            output_format = OutputFormat(output)
        except ValueError as exc:
            raise DomainError(f"unknown output format {output!r}.") from exc
        simulation = config.get("simulation", {})
        return cls(
            subcommand=args.command,
            input=args.input,
            kinds=parse_kinds(args.kind) if getattr(args, "kind", None) else (),
            r0_path=getattr(args, "r0", None),
            rho0=getattr(args, "rho0", None),
            betas=parse_betas(args.beta) if getattr(args, "beta", None) else (0.0,),
            fit=FitConfig.from_section(
                config.get("fit"),
                tolerance=args.tolerance,
                max_iterations=args.max_iterations,
                damping=args.damping,
            ),
            output=output_format,
            seed=getattr(args, "seed", None),
            workers=getattr(args, "workers", None),
            configured_workers=simulation.get("workers"),
            chunk_size=simulation.get("chunk_size"),
        ).validate()
