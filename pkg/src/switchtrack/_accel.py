"""Numba acceleration toggle.

Hot kernels in :mod:`switchtrack._kernels` are decorated with
:func:`maybe_njit`. When numba is importable and the ``SWITCHTRACK_NUMBA``
environment variable is not set to ``0``/``false``/``off``, kernels compile
in nopython mode; otherwise the plain Python/NumPy implementations run
unchanged. The choice is made once at import time, so a process uses one
path consistently. ``benchmarks/bench_engine.py`` compares the two paths in
subprocesses.
"""

import os


def _flag_enabled() -> bool:
    raw = os.environ.get("SWITCHTRACK_NUMBA", "auto").strip().lower()
    return raw not in ("0", "false", "off", "no")


def _numba_importable() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


USING_NUMBA = _flag_enabled() and _numba_importable()

if USING_NUMBA:
    from numba import njit as _njit

    def maybe_njit(func=None, **options):
        options.setdefault("cache", True)
        if func is None:
            return _njit(**options)
        return _njit(**options)(func)

else:

    def maybe_njit(func=None, **options):
        if func is None:
            return lambda f: f
        return func
