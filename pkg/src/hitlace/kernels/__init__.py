"""Sampling kernels for path generation and sample-path linking.

A compiled core (``hitlace.kernels._core``, Cython) is preferred when the
extension was built; otherwise a pure-Python fallback with identical
semantics is used.  Both consume uniforms from a ``numpy.random.Generator``
in the same order, so results are bit-identical across backends for a given
seed (the extension is compiled with FP contraction disabled).
"""

from . import _fallback

try:
    from . import _core as _impl
    BACKEND = "compiled"
except ImportError:  # extension not built
    _impl = _fallback
    BACKEND = "fallback"

sample_path = _impl.sample_path
link_path = _impl.link_path
sample_linked_pairs = _impl.sample_linked_pairs


def get_backend(name: str):
    """Return a specific backend module ('compiled' or 'fallback').

    Used by the benchmark suite and the cross-backend equivalence tests.
    """
    if name == "fallback":
        return _fallback
    if name == "compiled":
        if BACKEND != "compiled":
            raise ImportError("compiled kernel extension is not available")
        return _impl
    raise ValueError(f"unknown backend {name!r}")
