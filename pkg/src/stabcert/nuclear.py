r"""Nuclear-norm regularizer: value, prox, subgradient tests, joint factorization.

The nuclear norm of ``X`` is the sum of its singular values.  A matrix
``Y`` is a subgradient at ``X`` exactly when

.. math:: \sigma_{\max}(Y) \le 1 \quad\text{and}\quad \|X\|_* = \langle Y, X\rangle ,

and any such pair shares singular frames: there are orthogonal ``U``, ``V``
with ``X = U [diag(sigma_x), 0; 0, 0] V^T`` and
``Y = U [I_p, 0; 0, diag(lambda_y)] V^T`` where ``p`` counts the unit
singular values of ``Y`` and ``r = len(sigma_x) <= p``.  That joint shape
is what :func:`simultaneous_svd` recovers; all the geometry downstream
(stability subspace, inverse-image distances, relative approximations)
reads off it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (
    InfeasibleApproximationError,
    JointDecompositionError,
    NotASubgradientError,
)
from .linalg import RANK_TOL, psd_project, svd

# A singular value of a dual matrix counts as unit when within this of 1.
UNIT_TOL = 1e-7


@dataclass(frozen=True)
class NuclearShape:
    """Regularizer descriptor: the matrix shape behind a vectorized unknown."""

    n1: int
    n2: int

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1:
            raise ValueError("matrix dimensions must be positive")

    @property
    def n(self) -> int:
        return self.n1 * self.n2

    def as_matrix(self, x) -> np.ndarray:
        """Row-major reshape of a vectorized unknown; matrices pass through."""
        x = np.asarray(x, dtype=float)
        return x.reshape(self.n1, self.n2)

    def as_vector(self, mat) -> np.ndarray:
        return np.asarray(mat, dtype=float).reshape(-1)


class SubgradientCheck(NamedTuple):
    ok: bool
    spectral_gap: float  # max(sigma_max(Y) - 1, 0)
    fenchel_gap: float  # |  ||X||_*  -  <Y, X>  |


def nuclear_norm(x: np.ndarray) -> float:
    """Sum of singular values."""
    x = np.asarray(x, dtype=float)
    return float(np.linalg.svd(x, compute_uv=False).sum())


def prox_nuclear(x: np.ndarray, t: float) -> np.ndarray:
    """Singular value soft threshold with level ``t``."""
    if t < 0:
        raise ValueError("prox parameter must be nonnegative")
    x = np.asarray(x, dtype=float)
    u, s, vt = np.linalg.svd(x, full_matrices=False)
    return (u * np.maximum(s - t, 0.0)) @ vt


def is_subgradient_nuclear(
    x: np.ndarray, y: np.ndarray, tol: float = UNIT_TOL
) -> SubgradientCheck:
    """Test ``y`` against the nuclear-norm subdifferential at ``x``.

    Passes when the spectral norm of ``y`` is at most ``1 + tol`` and the
    Fenchel gap ``| ||x||_* - <y, x> |`` is at most ``tol * (1 + ||x||_*)``.
    Both gaps are reported whatever the verdict.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    nn = nuclear_norm(x)
    smax = float(np.linalg.svd(y, compute_uv=False)[0])
    spectral_gap = max(smax - 1.0, 0.0)
    fenchel_gap = abs(nn - float(np.sum(y * x)))
    ok = smax <= 1.0 + tol and fenchel_gap <= tol * (1.0 + nn)
    return SubgradientCheck(ok, spectral_gap, fenchel_gap)


@dataclass(frozen=True)
class SimultaneousSVD:
    """Joint singular frames of a primal-dual pair.

    ``ubar`` and ``vbar`` are square orthogonal; ``sigma_x`` holds the
    ``r`` positive singular values of the primal, ``lambda_y`` the
    sub-unit singular values of the dual (length ``min(n1, n2) - p``),
    with ``r <= p``.
    """

    ubar: np.ndarray
    vbar: np.ndarray
    sigma_x: np.ndarray
    lambda_y: np.ndarray
    r: int
    p: int

    @property
    def n1(self) -> int:
        return self.ubar.shape[0]

    @property
    def n2(self) -> int:
        return self.vbar.shape[0]

    @property
    def k(self) -> int:
        return min(self.n1, self.n2)

    def singular_values_y(self) -> np.ndarray:
        """All ``k`` dual singular values, unit block first."""
        return np.concatenate([np.ones(self.p), self.lambda_y])

    def reconstruct_x(self) -> np.ndarray:
        return (self.ubar[:, : self.r] * self.sigma_x) @ self.vbar[:, : self.r].T

    def reconstruct_y(self) -> np.ndarray:
        return (self.ubar[:, : self.k] * self.singular_values_y()) @ self.vbar[:, : self.k].T


def simultaneous_svd(x: np.ndarray, y: np.ndarray, tol: float = UNIT_TOL) -> SimultaneousSVD:
    """Recover joint singular frames of a subgradient pair.

    Factors ``x + y`` once: its singular values split into the primal block
    (values above 1), the shared unit block, and the dual tail, and its
    frames diagonalize both matrices at once.  A reconstruction residual
    above ``1e-6 * (1 + norm)`` on either matrix raises
    :class:`JointDecompositionError`; valid pairs land near machine
    precision.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    check = is_subgradient_nuclear(x, y, tol)
    if not check.ok:
        raise NotASubgradientError(
            "pair fails the subgradient test "
            f"(spectral gap {check.spectral_gap:.3e}, fenchel gap {check.fenchel_gap:.3e})"
        )
    ubar, _, vbar = svd(x + y)
    sx = np.linalg.svd(x, compute_uv=False)
    sy = np.linalg.svd(y, compute_uv=False)
    r = int(np.sum(sx > RANK_TOL * sx[0])) if sx.size and sx[0] > 0 else 0
    p = int(np.sum(sy >= 1.0 - tol))
    k = min(x.shape)
    if r > p:
        raise JointDecompositionError(
            f"primal rank {r} exceeds the dual unit count {p}"
        )
    dec = SimultaneousSVD(ubar, vbar, sx[:r].copy(), sy[p:k].copy(), r, p)
    res_x = float(np.linalg.norm(dec.reconstruct_x() - x))
    res_y = float(np.linalg.norm(dec.reconstruct_y() - y))
    if res_x > 1e-6 * (1.0 + np.linalg.norm(x)) or res_y > 1e-6 * (
        1.0 + np.linalg.norm(y)
    ):
        raise JointDecompositionError(
            f"joint factorization residuals {res_x:.3e} / {res_y:.3e} too large; "
            "the pair violates the subgradient relation beyond tolerance"
        )
    return dec


def p_count(y: np.ndarray, tol: float = UNIT_TOL) -> int:
    """Number of unit singular values of a dual matrix."""
    s = np.linalg.svd(np.asarray(y, dtype=float), compute_uv=False)
    return int(np.sum(s >= 1.0 - tol))


def subdominant_gamma(y: np.ndarray, tol: float = UNIT_TOL) -> float:
    """Largest singular value strictly below the unit block, 0 when there is none."""
    s = np.linalg.svd(np.asarray(y, dtype=float), compute_uv=False)
    below = s[s < 1.0 - tol]
    return float(below[0]) if below.size else 0.0


def tangent_subspace_basis(dec: SimultaneousSVD) -> np.ndarray:
    """Orthonormal basis of the symmetric top-block subspace, vectorized.

    Spans ``{ U1 S V1^T : S symmetric p x p }`` where ``U1``/``V1`` are the
    leading ``p`` joint frame columns; this is the subspace of directions
    the minimizer may move along.  Columns are row-major vectorizations of
    ``n1 x n2`` matrices, ``p (p + 1) / 2`` of them: the diagonal images
    first, then the symmetrized off-diagonal pairs.
    """
    p = dec.p
    n = dec.n1 * dec.n2
    if p == 0:
        return np.zeros((n, 0))
    u1 = dec.ubar[:, :p]
    v1 = dec.vbar[:, :p]
    cols = [np.outer(u1[:, i], v1[:, i]).ravel() for i in range(p)]
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    for i in range(p):
        for j in range(i + 1, p):
            m = (np.outer(u1[:, i], v1[:, j]) + np.outer(u1[:, j], v1[:, i])) * inv_sqrt2
            cols.append(m.ravel())
    return np.column_stack(cols)


def inverse_subdiff_distance(x: np.ndarray, dec: SimultaneousSVD) -> float:
    """Distance from ``x`` to the inverse image of the dual matrix of ``dec``.

    The inverse image is ``{ U1 Z V1^T : Z psd symmetric p x p }``.  In the
    joint frame the squared distance splits into the gap between the top
    left block and its psd projection plus all mass outside that block.
    """
    x = np.asarray(x, dtype=float)
    xt = dec.ubar.T @ x @ dec.vbar
    p = dec.p
    x11 = xt[:p, :p]
    rest = xt.copy()
    rest[:p, :p] = 0.0
    off = float(np.sum(rest * rest))
    d2 = float(np.linalg.norm(x11 - psd_project(x11)) ** 2) + off
    return float(np.sqrt(max(d2, 0.0)))


def relative_approx_nuclear(x: np.ndarray, y: np.ndarray, p_ref: int, tol: float = UNIT_TOL):
    """Split a dual matrix into boundary and interior parts relative to ``p_ref``.

    Given a subgradient pair whose dual has ``q < p_ref`` unit singular
    values, returns ``(lam, yhat, ytilde)`` with ``lam`` the ``p_ref``-th
    singular value of ``y``, ``yhat`` having exactly ``p_ref`` unit values,
    ``ytilde`` exactly ``q``, both subgradients at ``x``, and
    ``lam * yhat + (1 - lam) * ytilde == y``.  When ``q == p_ref`` already,
    returns ``(1, y, y)``.

    Raises :class:`InfeasibleApproximationError` when ``p_ref`` is not
    reachable: more unit values than requested, ``p_ref`` beyond the
    singular spectrum, or a primal rank above ``q`` (those directions are
    pinned at 1 and cannot be shrunk).
    """
    dec = simultaneous_svd(x, y, tol)
    q = dec.p
    k = dec.k
    if p_ref < 0 or p_ref > k:
        raise InfeasibleApproximationError(
            f"reference count {p_ref} outside the spectrum (0..{k})"
        )
    if q > p_ref:
        raise InfeasibleApproximationError(
            f"dual already has {q} unit singular values, more than requested {p_ref}"
        )
    y = np.asarray(y, dtype=float)
    if q == p_ref:
        return 1.0, y.copy(), y.copy()
    if dec.r > q:
        raise InfeasibleApproximationError(
            f"primal rank {dec.r} exceeds the dual unit count {q}"
        )
    sy = dec.singular_values_y()
    lam = float(sy[p_ref - 1])
    if lam >= 1.0 - tol:
        raise InfeasibleApproximationError(
            f"singular value {p_ref} of the dual is already at the unit threshold"
        )
    d_hat = np.concatenate([np.ones(p_ref), sy[p_ref:]])
    mid = (sy[q : p_ref - 1] - lam) / (1.0 - lam)
    d_tilde = np.concatenate([np.ones(q), mid, [0.0], sy[p_ref:]])
    uk = dec.ubar[:, :k]
    vk = dec.vbar[:, :k]
    yhat = (uk * d_hat) @ vk.T
    ytilde = (uk * d_tilde) @ vk.T
    return lam, yhat, ytilde
