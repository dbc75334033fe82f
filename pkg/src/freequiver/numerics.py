"""Numeric policy: norms, relative residuals, rank and invertibility thresholds.

Everything downstream (representations, evaluation, derivatives, the harness)
funnels its tolerance decisions through this module so the conventions stay in
one place:

* scalars are complex128 throughout;
* pass/fail norms are operator 2-norms (largest singular value); Frobenius
  norms are used only inside residual assembly where noted;
* residuals are relative: raw / (1 + product of operand norms);
* a square matrix counts as invertible iff sigma_min > 1e-10 * sigma_max;
* numerical nullspaces keep singular vectors with
  sigma <= max(shape) * eps * sigma_max * 10 unless an explicit cutoff is given.
"""

from __future__ import annotations

import numpy as np

DEFAULT_TOL = 1e-9
INVERTIBILITY_RTOL = 1e-10

_EPS = float(np.finfo(np.float64).eps)


def as_complex_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {a.shape}")
    return a


def op_norm(m) -> float:
    """Operator 2-norm; 0.0 for matrices with an empty axis."""
    a = np.asarray(m)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def frob_norm(m) -> float:
    a = np.asarray(m)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a))


def rel_residual(raw: float, *operands) -> float:
    """raw / (1 + product of operand 2-norms)."""
    denom = 1.0
    for m in operands:
        denom_factor = op_norm(m) if not np.isscalar(m) else abs(m)
        denom *= denom_factor
    return float(raw) / (1.0 + denom)


def rel_diff(a, b) -> float:
    """Relative difference ‖a−b‖₂ / (1 + ‖a‖₂·‖b‖₂) between two matrices."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return rel_residual(op_norm(a - b), a, b)


def singular_values(m) -> np.ndarray:
    a = np.asarray(m)
    if a.size == 0:
        return np.zeros(0)
    return np.linalg.svd(a, compute_uv=False)


def is_invertible(m, rtol: float = INVERTIBILITY_RTOL) -> bool:
    """Square matrix invertibility test: sigma_min > rtol * sigma_max.

    Zero-size square matrices count as invertible (empty product convention).
    """
    a = np.asarray(m)
    if a.shape[0] != a.shape[1]:
        return False
    if a.shape[0] == 0:
        return True
    s = singular_values(a)
    return bool(s[-1] > rtol * s[0])


def has_full_column_rank(m, rtol: float = INVERTIBILITY_RTOL) -> bool:
    a = np.asarray(m)
    rows, cols = a.shape
    if cols == 0:
        return True
    if rows < cols:
        return False
    s = singular_values(a)
    return bool(s[-1] > rtol * s[0])


def has_full_row_rank(m, rtol: float = INVERTIBILITY_RTOL) -> bool:
    return has_full_column_rank(np.asarray(m).T, rtol=rtol)


def nullspace_cutoff(s: np.ndarray, shape: tuple[int, int]) -> float:
    """Default rank cutoff: max(shape) * machine eps * sigma_max * 10."""
    if s.size == 0:
        return 0.0
    return max(shape) * _EPS * float(s[0]) * 10.0


def nullspace(m, tol: float | None = None) -> np.ndarray:
    """Orthonormal basis (rows) of the numerical nullspace of m.

    tol, when given, keeps singular vectors with sigma <= tol * sigma_max;
    otherwise the default cutoff from nullspace_cutoff applies. The m == "no
    constraints" case (zero rows) returns the identity basis.
    """
    a = np.asarray(m, dtype=np.complex128)
    rows, cols = a.shape
    if cols == 0:
        return np.zeros((0, 0), dtype=np.complex128)
    if rows == 0:
        return np.eye(cols, dtype=np.complex128)
    _, s, vh = np.linalg.svd(a, full_matrices=True)
    cutoff = (tol * float(s[0])) if tol is not None else nullspace_cutoff(s, a.shape)
    rank = int(np.sum(s > cutoff))
    # rows of vh are conjugated right singular vectors; undo the conjugation so
    # each returned row r satisfies a @ r ≈ 0
    return np.conj(vh[rank:])
