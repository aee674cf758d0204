r"""Group (l1/l2) regularizer: value, prox, and subdifferential geometry.

For a partition of ``range(n)`` into blocks J the regularizer is

.. math:: \|x\|_{1,2} = \sum_J \|x_J\|_2 .

Its subdifferential at ``x`` is blockwise: the unit ball where ``x_J = 0``
and the single point ``x_J / \|x_J\|`` elsewhere.  The analysis routines
below classify the blocks of a subgradient ``y`` into boundary blocks
(``norm == 1``, these pin directions the solution may move along) and
interior blocks, and measure distances to the inverse image
``(\partial\|\cdot\|_{1,2})^{-1}(y)``, a product of rays and zero blocks.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InfeasibleApproximationError, NotASubgradientError
from .linalg import orthonormalize

# A dual block counts as boundary-active when its norm is within this of 1;
# a primal block counts as nonzero above this.
UNIT_TOL = 1e-7


@dataclass(frozen=True)
class GroupPartition:
    """Disjoint, nonempty index blocks covering ``range(n)`` (0-based)."""

    n: int
    groups: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        groups = tuple(tuple(int(i) for i in g) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        if self.n < 1:
            raise ValueError("partition dimension must be positive")
        seen: set[int] = set()
        for g in groups:
            if not g:
                raise ValueError("empty group")
            for i in g:
                if not 0 <= i < self.n:
                    raise ValueError(f"index {i} outside range(0, {self.n})")
                if i in seen:
                    raise ValueError(f"index {i} appears in two groups")
                seen.add(i)
        if len(seen) != self.n:
            missing = sorted(set(range(self.n)) - seen)
            raise ValueError(f"indices not covered by any group: {missing}")

    @cached_property
    def index_arrays(self) -> list[np.ndarray]:
        return [np.asarray(g, dtype=int) for g in self.groups]

    @staticmethod
    def singletons(n: int) -> "GroupPartition":
        return GroupPartition(n, tuple((i,) for i in range(n)))


@dataclass(frozen=True)
class GroupAnalysis:
    """Block classification of a point/subgradient pair.

    ``K`` holds the boundary blocks of ``y`` (dual norm 1), ``H`` its
    complement, ``I`` the support blocks of ``x`` (always inside ``K``).
    ``gamma`` is the subdominant dual norm, the largest block norm among
    ``H`` (0 when ``H`` is empty); ``v_basis`` spans the subspace of
    directions that keep the pair critical, one unit direction per
    boundary block.
    """

    K: tuple[int, ...]
    H: tuple[int, ...]
    I: tuple[int, ...]
    gamma: float
    v_basis: np.ndarray
    y_norms: np.ndarray

    @property
    def classification_margin(self) -> float:
        """Separation between boundary and interior block norms.

        Small values flag a borderline classification that a different
        tolerance could flip.
        """
        min_k = min((self.y_norms[j] for j in self.K), default=1.0)
        max_h = max((self.y_norms[j] for j in self.H), default=0.0)
        return float(min_k - max_h)


def block_norms(x: np.ndarray, partition: GroupPartition) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.array([float(np.linalg.norm(x[idx])) for idx in partition.index_arrays])


def group_norm(x: np.ndarray, partition: GroupPartition) -> float:
    """Sum of blockwise Euclidean norms."""
    return float(block_norms(x, partition).sum())


def prox_group(x: np.ndarray, t: float, partition: GroupPartition) -> np.ndarray:
    """Blockwise soft threshold: ``x_J * max(1 - t/||x_J||, 0)``."""
    if t < 0:
        raise ValueError("prox parameter must be nonnegative")
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for idx in partition.index_arrays:
        xj = x[idx]
        nx = float(np.linalg.norm(xj))
        if nx > t:
            out[idx] = xj * (1.0 - t / nx)
    return out


def subgrad_residual(x: np.ndarray, y: np.ndarray, partition: GroupPartition) -> float:
    """Distance of ``y`` from the subdifferential of the group norm at ``x``.

    Blockwise: ``||y_J - x_J/||x_J||||`` on the support of ``x`` and the
    excess ``max(||y_J|| - 1, 0)`` off it, combined in quadrature.  Zero
    exactly when ``y`` is a subgradient at ``x``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    total = 0.0
    for idx in partition.index_arrays:
        xj = x[idx]
        yj = y[idx]
        nx = float(np.linalg.norm(xj))
        if nx > 0.0:
            d = float(np.linalg.norm(yj - xj / nx))
        else:
            d = max(float(np.linalg.norm(yj)) - 1.0, 0.0)
        total += d * d
    return float(np.sqrt(total))


def classify_groups(
    x: np.ndarray, y: np.ndarray, partition: GroupPartition, tol: float = UNIT_TOL
) -> GroupAnalysis:
    """Classify the blocks of a subgradient pair and build the critical subspace.

    Raises :class:`NotASubgradientError` when ``y`` is not a subgradient of
    the group norm at ``x`` within ``tol``.
    """
    res = subgrad_residual(x, y, partition)
    if res > tol:
        raise NotASubgradientError(
            f"subgradient residual {res:.3e} exceeds tolerance {tol:.3e}"
        )
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    y_norms = block_norms(y, partition)
    x_norms = block_norms(x, partition)
    K = tuple(j for j, nj in enumerate(y_norms) if nj >= 1.0 - tol)
    H = tuple(j for j in range(len(partition.groups)) if j not in set(K))
    I = tuple(j for j, nj in enumerate(x_norms) if nj > tol)
    gamma = max((float(y_norms[j]) for j in H), default=0.0)
    cols = []
    for j in K:
        w = np.zeros(partition.n)
        idx = partition.index_arrays[j]
        w[idx] = y[idx]
        cols.append(w)
    v_basis = orthonormalize(cols, dim=partition.n)
    return GroupAnalysis(K, H, I, gamma, v_basis, y_norms)


def inverse_subdiff_distance(
    x: np.ndarray, ybar: np.ndarray, partition: GroupPartition, tol: float = UNIT_TOL
) -> float:
    """Distance from ``x`` to the inverse image of ``ybar`` under the subdifferential.

    The inverse image is the product, over blocks, of the ray spanned by
    ``ybar_J`` where that block has unit norm and ``{0}`` elsewhere, so the
    squared distance adds ``||x_J||^2 - max(<x_J, ybar_J>, 0)^2`` on unit
    blocks and ``||x_J||^2`` on the rest.
    """
    x = np.asarray(x, dtype=float)
    ybar = np.asarray(ybar, dtype=float)
    total = 0.0
    for idx in partition.index_arrays:
        xj = x[idx]
        yj = ybar[idx]
        ny = float(np.linalg.norm(yj))
        if ny >= 1.0 - tol:
            t = max(float(xj @ yj), 0.0)
            d2 = max(float(xj @ xj) - t * t, 0.0)
        else:
            d2 = float(xj @ xj)
        total += d2
    return float(np.sqrt(total))


def relative_approx_group(
    x: np.ndarray,
    y: np.ndarray,
    partition: GroupPartition,
    kref,
    tol: float = UNIT_TOL,
):
    """Split a subgradient into boundary and interior parts relative to ``kref``.

    ``kref`` lists reference boundary blocks.  Blocks of ``kref`` whose norm
    sits strictly below 1 are pushed to the unit sphere in ``yhat`` and
    shrunk in ``ytilde`` so that ``lam * yhat + (1 - lam) * ytilde == y``
    with ``lam`` the smallest such block norm.  Both outputs remain
    subgradients at ``x``; when nothing needs pushing the triple
    ``(1, y, y)`` is returned.

    Raises :class:`InfeasibleApproximationError` when some pushed block has
    ``x_J != 0`` (its subgradient block is pinned) or a zero dual block
    cannot be normalized.
    """
    res = subgrad_residual(x, y, partition)
    if res > tol:
        raise NotASubgradientError(
            f"subgradient residual {res:.3e} exceeds tolerance {tol:.3e}"
        )
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    norms = block_norms(y, partition)
    x_norms = block_norms(x, partition)
    kref = tuple(int(j) for j in kref)
    for j in kref:
        if not 0 <= j < len(partition.groups):
            raise ValueError(f"reference block {j} out of range")
    push = [j for j in kref if norms[j] < 1.0 - tol]
    if not push:
        return 1.0, y.copy(), y.copy()
    for j in push:
        if x_norms[j] > tol:
            raise InfeasibleApproximationError(
                f"block {j} has x_J != 0, its subgradient block cannot be moved"
            )
        if norms[j] <= 0.0:
            raise InfeasibleApproximationError(
                f"block {j} of y is zero and has no direction to push along"
            )
    lam = float(min(norms[j] for j in push))
    yhat = y.copy()
    ytilde = y.copy()
    for j in push:
        idx = partition.index_arrays[j]
        unit = y[idx] / norms[j]
        yhat[idx] = unit
        ytilde[idx] = ((norms[j] - lam) / (1.0 - lam)) * unit
    return lam, yhat, ytilde
