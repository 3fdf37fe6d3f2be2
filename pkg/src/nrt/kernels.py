"""Backend dispatch for the hot kernels.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
numpy versions in ``_pykernels`` are. Set ``NRT_PURE_PYTHON=1`` to force the
fallback. Callers must go through this module's attributes (not
``from nrt.kernels import ...``) so that :func:`set_backend` takes effect.
"""
import os

from nrt import _pykernels

try:
    from nrt import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_FUNCS = (
    "sigmoid",
    "gru_gates",
    "gru_blend",
    "gru_blend_backward",
    "gru_reset_backward",
    "log_softmax_cols",
    "softmax_cols",
    "softmax_xent_cols",
    "lcs_length",
)

BACKEND = None


def available_backends():
    return ["python"] + (["cython"] if _ckernels is not None else [])


def set_backend(name):
    """Rebind every kernel to the ``"python"`` or ``"cython"`` implementation."""
    global BACKEND
    if name == "cython":
        if _ckernels is None:
            raise ImportError("nrt._ckernels is not built; reinstall with Cython available")
        impl = _ckernels
    elif name == "python":
        impl = _pykernels
    else:
        raise ValueError(f"unknown kernel backend {name!r}")
    g = globals()
    for fn in _FUNCS:
        g[fn] = getattr(impl, fn)
    BACKEND = name


if os.environ.get("NRT_PURE_PYTHON") or _ckernels is None:
    set_backend("python")
else:
    set_backend("cython")
