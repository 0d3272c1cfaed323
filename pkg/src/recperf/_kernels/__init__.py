"""Kernel backend selection: compiled Cython core when built, otherwise the
pure-Python fallback.  Both expose the same surface:

- ``gather_reduce(table, indices, seg_starts)``: per-segment row sums
- ``LruCache(num_sets, ways)`` with ``run(lines) -> (hits, misses)``
"""

try:
    from . import _core as _backend
    HAVE_COMPILED = True
except ImportError:
    from . import pyref as _backend
    HAVE_COMPILED = False

from . import pyref  # always importable, used by benchmarks and parity tests

gather_reduce = _backend.gather_reduce
LruCache = _backend.LruCache


def backend_name() -> str:
    return _backend.BACKEND
