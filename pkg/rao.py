"""
This Source Code Form is subject to the terms of the Mozilla Public
License, v. 2.0. If a copy of the MPL was not distributed with this
file, You can obtain one at http://mozilla.org/MPL/2.0/.
"""

from __future__ import annotations

import argparse
import importlib
import logging
import pathlib
import sys
import tomllib
from logging.handlers import RotatingFileHandler
from typing import TYPE_CHECKING

import sentry_sdk

from extensions import EXTENSIONS
from utilities.constants import EXIT_USAGE_ERROR
from utilities.containers.run import RunConfig
from utilities.exceptions import DataError, RaoError, sentry_before_send

if TYPE_CHECKING:
    from collections.abc import Sequence
    from typing import Self

    from utilities._types.config import Config, LoggingSection

LOGGER = logging.getLogger("root.rao")

ROOT = pathlib.Path(__file__).parent
_CONFIG_PATHS = (ROOT / "configs/config.toml", ROOT / "configs/config-template.toml")


def load_config(path: pathlib.Path | None = None) -> Config:
    """Read the TOML configuration, falling back to the shipped template when no ``config.toml`` exists."""
    candidates = (path,) if path is not None else _CONFIG_PATHS
    for candidate in candidates:
        if not candidate.exists():
            continue
        try:
            with candidate.open("rb") as fp:
                return tomllib.load(fp)  # pyright: ignore[reportReturnType] # can't narrow this legally for some reason.
        except tomllib.TOMLDecodeError as exc:
            raise DataError(f"configuration file {str(candidate)!r} is not valid TOML: {exc}") from exc

    raise DataError(f"no configuration file found (looked for {', '.join(str(c) for c in candidates)}).")


class LogHandler:
    def __init__(
        self,
        config: LoggingSection,
        *,
        max_bytes: int | None = None,
        logging_path: pathlib.Path | None = None,
    ) -> None:
        self.log: logging.Logger = logging.getLogger()
        self.max_bytes: int = max_bytes or 10 * 1024 * 1024
        self.logging_path = logging_path or pathlib.Path("./logs/")
        self.logging_path.mkdir(parents=True, exist_ok=True)
        self.level: int = logging.getLevelNamesMapping().get(str(config.get("level", "INFO")).upper(), logging.INFO)
        self.stream: bool = config.get("stream", False)
        self.sentry_dsn: str | None = config.get("sentry_dsn")
        self._handlers: list[logging.Handler] = []

    def __enter__(self: Self) -> Self:
        self.log.setLevel(self.level)
        handler = RotatingFileHandler(
            filename=self.logging_path / "rao.log",
            encoding="utf-8",
            mode="a",
            maxBytes=self.max_bytes,
            backupCount=5,
        )
        dt_fmt = "%Y-%m-%d %H:%M:%S"
        fmt = logging.Formatter("[{asctime}] [{levelname:<7}] {name}: {message}", dt_fmt, style="{")
        handler.setFormatter(fmt)
        self._handlers.append(handler)
        if self.sentry_dsn:
            sentry_sdk.init(dsn=self.sentry_dsn, traces_sample_rate=1.0, before_send=sentry_before_send)

        if self.stream:
            stream_handler = logging.StreamHandler(sys.stderr)
            stream_handler.setFormatter(fmt)
            self._handlers.append(stream_handler)

        for hdlr in self._handlers:
            self.log.addHandler(hdlr)
        return self

    def __exit__(self, *args: object) -> None:
        # only ours; the host process may have its own handlers on the root logger.
        for hdlr in self._handlers:
            hdlr.close()
            self.log.removeHandler(hdlr)
        self._handlers.clear()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rao", description="Robust Rao β-score tests on correlation matrices.")
    parser.add_argument(
        "--config",
        type=pathlib.Path,
        default=None,
        help="configuration TOML (default: configs/config.toml, then the template)",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for extension in EXTENSIONS:
        importlib.import_module(extension.name).setup(subparsers)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help and 2 on usage errors.
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE_ERROR

    try:
        config = load_config(args.config)
    except RaoError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return exc.exit_code

    with LogHandler(config.get("logging", {})):
        try:
            run_config = RunConfig.from_namespace(args, config)
            LOGGER.debug("[CLI] -> %s :: %r", args.command, run_config)
            return args.callback(run_config)
        except RaoError as exc:
            LOGGER.error("[CLI] -> %s :: %s: %s", args.command, type(exc).__name__, exc)
            sys.stderr.write(f"error: {exc}\n")
            return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
