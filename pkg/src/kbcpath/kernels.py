"""Selects the training kernel: compiled extension if importable, NumPy otherwise.

>>> from kbcpath import kernels
>>> kernels.available_backends()[-1]
'python'
"""

import logging

from . import _fallback
from .errors import ValidationError

log = logging.getLogger(__name__)

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_BACKENDS = {"python": _fallback.batch_loss_grad}
if _compiled is not None:
    _BACKENDS["compiled"] = _compiled.batch_loss_grad

_active = "compiled" if _compiled is not None else "python"


def available_backends():
    return sorted(_BACKENDS)


def active_backend():
    return _active


def set_backend(name):
    """Force a backend by name (``"compiled"`` or ``"python"``)."""
    global _active
    get_kernel(name)
    _active = name


def get_kernel(name=None):
    name = name or _active
    if name not in _BACKENDS:
        raise ValidationError(f"backend {name!r} not available; have {available_backends()}")
    return _BACKENDS[name]
