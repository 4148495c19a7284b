"""Backend selection for the CTM relaxation kernel.

The compiled extension is used when it was built; otherwise the numpy
implementation takes over. Both expose ``relax`` with the same signature.
"""

from . import _pykernel

try:
    from . import _ckernel
except ImportError:  # extension not built
    _ckernel = None

_BACKENDS = {"python": _pykernel}
if _ckernel is not None:
    _BACKENDS["compiled"] = _ckernel

BACKEND = "compiled" if _ckernel is not None else "python"


def available() -> list[str]:
    return sorted(_BACKENDS)


def use_backend(name: str) -> None:
    """Select the kernel used by default (``"compiled"`` or ``"python"``)."""
    global BACKEND
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} not available; have {available()}")
    BACKEND = name


def relax(*args, backend=None):
    return _BACKENDS[backend or BACKEND].relax(*args)
