"""
This Source Code Form is subject to the terms of the Mozilla Public
License, v. 2.0. If a copy of the MPL was not distributed with this
file, You can obtain one at http://mozilla.org/MPL/2.0/.
"""

SCHEMA: str = "rao-beta-score/1"

EXIT_OK: int = 0
EXIT_USAGE_ERROR: int = 2
EXIT_DATA_ERROR: int = 3
EXIT_NUMERICAL_ERROR: int = 4

DEFAULT_TOLERANCE: float = 1e-10
DEFAULT_MAX_ITERATIONS: int = 500
DEFAULT_DAMPING: float = 1.0

# input symmetry is accepted within this relative slack, then averaged.
SYMMETRY_TOLERANCE: float = 1e-12
# index maps replace dense structural matrices above this order.
DENSE_STRUCTURE_LIMIT: int = 64
BIVARIATE_DENOMINATOR_FLOOR: float = 1e-12
# a robust fit has collapsed once its weights rest on fewer observations than this,
# or a variance falls below this fraction of its starting value.
MIN_EFFECTIVE_OBSERVATIONS: float = 2.0
VARIANCE_COLLAPSE_RATIO: float = 1e-12

WORKERS_ENV_VAR: str = "RAO_THREADS"

__all__ = (
    "BIVARIATE_DENOMINATOR_FLOOR",
    "DEFAULT_DAMPING",
    "DEFAULT_MAX_ITERATIONS",
    "DEFAULT_TOLERANCE",
    "DENSE_STRUCTURE_LIMIT",
    "EXIT_DATA_ERROR",
    "EXIT_NUMERICAL_ERROR",
    "EXIT_OK",
    "EXIT_USAGE_ERROR",
    "MIN_EFFECTIVE_OBSERVATIONS",
    "SCHEMA",
    "SYMMETRY_TOLERANCE",
    "VARIANCE_COLLAPSE_RATIO",
    "WORKERS_ENV_VAR",
)
