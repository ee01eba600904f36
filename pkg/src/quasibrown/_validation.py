from __future__ import annotations

import numpy as np

from .exceptions import StructuralError, ValidationError


def as_time_grid(times, name="times") -> np.ndarray:
    t = np.atleast_1d(np.asarray(times, dtype=float))
    if t.ndim != 1:
        raise StructuralError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(t)):
        raise ValidationError(f"{name} contains non-finite values")
    if t.size > 1 and np.any(np.diff(t) <= 0):
        raise ValidationError(f"{name} must be strictly increasing")
    return t


def as_finite(x, name, dtype=float) -> np.ndarray:
    arr = np.asarray(x, dtype=dtype)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def check_positive(value, name):
    if not np.isfinite(value) or value <= 0:
        raise ValidationError(f"{name} must be positive, got {value!r}")
    return float(value)


def as_square(m, name) -> np.ndarray:
    arr = np.asarray(m)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise StructuralError(f"{name} must be a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def check_hermitian(m, name, atol=1e-12) -> np.ndarray:
    arr = as_square(m, name)
    scale = max(1.0, float(np.max(np.abs(arr))) if arr.size else 1.0)
    if np.max(np.abs(arr - arr.conj().T), initial=0.0) > atol * scale:
        raise ValidationError(f"{name} is not Hermitian")
    return arr


def check_normalized(psi, name="psi", atol=1e-10) -> np.ndarray:
    v = np.asarray(psi, dtype=complex)
    if v.ndim != 1:
        raise StructuralError(f"{name} must be a vector")
    nrm = np.linalg.norm(v)
    if abs(nrm - 1.0) > atol:
        raise ValidationError(f"{name} must be normalized (norm={nrm!r})")
    return v
