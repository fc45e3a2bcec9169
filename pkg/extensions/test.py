"""
This Source Code Form is subject to the terms of the Mozilla Public
License, v. 2.0. If a copy of the MPL was not distributed with this
file, You can obtain one at http://mozilla.org/MPL/2.0/.
"""

from __future__ import annotations

import logging
import pathlib
import sys
from typing import TYPE_CHECKING, TextIO

from utilities.constants import EXIT_NUMERICAL_ERROR, EXIT_OK
from utilities.exceptions import DataError, RaoError
from utilities.flags import HypothesisKind
from utilities.formats import read_correlation, read_sample
from utilities.score_tests import run_test

from ._common import add_fit_arguments, render

if TYPE_CHECKING:
    import argparse

    from utilities.containers.reports import TestReport
    from utilities.containers.run import RunConfig

__all__ = ("cmd_test", "setup")

LOGGER = logging.getLogger(__name__)


def cmd_test(config: RunConfig, *, stdout: TextIO | None = None, stderr: TextIO | None = None) -> int:
    """Run every requested test at every β and write one report per pair.

    Numerical failures are reported per β on standard error and the remaining β values still run; the exit status
    is then the numerical-error code.
    """
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    sample = read_sample(config.input)
    n, p = sample.shape
    if p < 2:
        raise DataError(f"{config.input} has {p} column; every test needs at least two.")

    r0 = None
    if config.r0_path is not None:
        r0 = read_correlation(config.r0_path)
        if r0.shape[0] != p:
            raise DataError(
                f"R0 in {config.r0_path} is {r0.shape[0]} x {r0.shape[0]} but {config.input} has {p} columns."
            )
    if HypothesisKind.bartlett in config.kinds and n <= p:
        stderr.write(f"warning: n={n} does not exceed p={p}; the likelihood-ratio test is undefined.\n")

    reports: list[TestReport] = []
    status = EXIT_OK
    for kind in config.kinds:
        for beta in config.betas if kind.uses_beta else (None,):
            try:
                report = run_test(
                    kind,
                    sample,
                    beta,
                    config.fit,
                    r0=r0 if kind is HypothesisKind.specified else None,
                    rho0=config.rho0 if kind in {HypothesisKind.equicorr_fixed, HypothesisKind.bivariate} else None,
                )
            except RaoError as exc:
                if exc.exit_code != EXIT_NUMERICAL_ERROR:
                    raise
                LOGGER.warning("[Test] -> %s :: beta=%r failed: %s", kind.value, beta, exc)
                stderr.write(f"error: {kind.cli_name} at beta={beta}: {exc}\n")
                status = EXIT_NUMERICAL_ERROR
                continue
            reports.append(report)

    document = [report.to_dict() for report in reports]
    stdout.write(render(config.output, document, [report.to_row() for report in reports]))
    return status


def setup(subparsers: argparse._SubParsersAction[argparse.ArgumentParser]) -> None:  # pyright: ignore[reportPrivateUsage]
    parser = subparsers.add_parser("test", help="run β-score tests on a dataset")
    parser.add_argument("input", type=pathlib.Path, help="comma-delimited sample, rows are observations")
    parser.add_argument(
        "--kind",
        action="append",
        required=True,
        help="test kind, repeatable or comma-separated: "
        + ", ".join(kind.cli_name for kind in HypothesisKind),
    )
    parser.add_argument("--beta", default="0", help="comma-separated β values (default: 0)")
    parser.add_argument("--r0", type=pathlib.Path, default=None, help="p x p correlation matrix for the specified test")
    parser.add_argument("--rho0", type=float, default=None, help="null correlation for equicorr-fixed and bivariate")
    add_fit_arguments(parser)
    parser.set_defaults(callback=cmd_test)
