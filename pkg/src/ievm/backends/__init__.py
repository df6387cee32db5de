"""Kernel backend selection.

Two interchangeable implementations of the numeric kernels exist: compiled
Cython (``cy_kernels``, built by setup.py when a toolchain is present) and
pure numpy (``np_backend``). The compiled one is used when importable, unless
the ``IEVM_BACKEND`` environment variable ("cython" or "numpy") or
:func:`set_backend` says otherwise. Results agree to floating-point noise;
within one backend all kernels are deterministic.
"""

from __future__ import annotations

import os
from types import ModuleType

from ..errors import ConfigError
from . import np_backend

try:  # pragma: no cover - depends on the build environment
    from . import cy_kernels as _cy_backend
except ImportError:  # pragma: no cover
    _cy_backend = None

_NAMES = ("numpy", "cython")


def available_backends() -> tuple[str, ...]:
    return _NAMES if _cy_backend is not None else ("numpy",)


def _resolve(name: str) -> ModuleType:
    if name == "numpy":
        return np_backend
    if name == "cython":
        if _cy_backend is None:
            raise ConfigError(
                "compiled backend requested but ievm.backends.cy_kernels is not "
                "built; run `python setup.py build_ext --inplace` or use "
                "IEVM_BACKEND=numpy"
            )
        return _cy_backend
    raise ConfigError(f"unknown backend {name!r}; choose one of {_NAMES}")


def _initial() -> tuple[str, ModuleType]:
    forced = os.environ.get("IEVM_BACKEND")
    if forced:
        return forced, _resolve(forced)
    if _cy_backend is not None:
        return "cython", _cy_backend
    return "numpy", np_backend


_active_name, _active = _initial()


def set_backend(name: str) -> None:
    global _active_name, _active
    _active = _resolve(name)
    _active_name = name


def active_backend() -> str:
    return _active_name


def get() -> ModuleType:
    return _active
