"""Hot numerical kernels with a compiled core and a pure-numpy fallback.

At import we prefer the Cython extension (built by setup.py) and fall back
to the numpy implementations in ``_pure`` when it is absent. Both expose the
same functions with the same semantics; ``benchmarks/bench_kernels.py``
compares their speed and the test suite checks their agreement.
"""

from . import _pure

try:
    from . import _speedups as _impl

    BACKEND = "cython"
except ImportError:  # extension not built: pure install
    _impl = _pure
    BACKEND = "pure"

logistic_scan = _impl.logistic_scan
ld_prune_greedy = _impl.ld_prune_greedy
prepare_columns = _pure.prepare_columns

ETA_CAP = _pure.ETA_CAP
BETA_CAP = _pure.BETA_CAP
MU_EPS = _pure.MU_EPS


def backend() -> str:
    """Which kernel implementation is active: "cython" or "pure"."""
    return BACKEND
