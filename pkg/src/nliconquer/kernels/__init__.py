"""Numeric kernels with a compiled default and a pure-numpy fallback.

Set NLICONQUER_NO_NUMBA=1 to force the numpy path; it is also selected
automatically when numba is not importable. Both backends expose the same
functions and are expected to agree to quadrature tolerance.
"""

import os

from .common import DEFAULT_RTOL, MAX_DEPTH

_force_numpy = os.environ.get("NLICONQUER_NO_NUMBA", "").strip() not in ("", "0")

if not _force_numpy:
    try:
        from . import quad_numba as _quad
        from . import trees_numba as _trees

        BACKEND = "numba"
    except ImportError:
        _force_numpy = True

if _force_numpy:
    from . import quad_numpy as _quad
    from . import trees_numpy as _trees

    BACKEND = "numpy"

adaptive_eta = _quad.adaptive_eta
full_spectrum_raw = _quad.full_spectrum_raw
build_histograms = _trees.build_histograms
predict_forest = _trees.predict_forest


def warmup() -> None:
    """Trigger any one-time compilation in the active backend."""
    _quad.warmup()
    _trees.warmup()


def load_backend(name: str) -> dict:
    """Return the named backend's kernel functions, importing it on demand.

    Used by the benchmark to compare both paths regardless of which one is
    active. Raises ImportError if the compiled backend is unavailable.
    """
    if name == "numba":
        from . import quad_numba, trees_numba

        return {
            "adaptive_eta": quad_numba.adaptive_eta,
            "full_spectrum_raw": quad_numba.full_spectrum_raw,
            "build_histograms": trees_numba.build_histograms,
            "predict_forest": trees_numba.predict_forest,
            "warmup": lambda: (quad_numba.warmup(), trees_numba.warmup()),
        }
    if name == "numpy":
        from . import quad_numpy, trees_numpy

        return {
            "adaptive_eta": quad_numpy.adaptive_eta,
            "full_spectrum_raw": quad_numpy.full_spectrum_raw,
            "build_histograms": trees_numpy.build_histograms,
            "predict_forest": trees_numpy.predict_forest,
            "warmup": lambda: (quad_numpy.warmup(), trees_numpy.warmup()),
        }
    raise ValueError(f"unknown backend {name!r}")
