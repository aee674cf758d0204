"""Accelerated proximal-gradient solver for regularized least squares.

Problems have the form

    minimize over x:   (1 / (2 mu)) ||phi @ x - b||^2  +  g(x)  -  <v, x>

where ``g`` is either the group norm or the nuclear norm of the row-major
reshape of ``x``, and ``v`` is an optional linear tilt used by the
stability probes.  The solver is FISTA with a fixed step ``1/L``,
``L = sigma_max(phi)^2 / mu``, and a function-value restart that keeps the
reported objective nonincreasing.  Termination is on the fixed-point
residual of the proximal-gradient map; hitting the iteration cap sets a
flag on the result instead of raising.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import groupnorm, nuclear
from .groupnorm import GroupPartition
from .nuclear import NuclearShape

Regularizer = GroupPartition | NuclearShape

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 200_000


def reg_dim(reg: Regularizer) -> int:
    return reg.n


def reg_value(reg: Regularizer, x: np.ndarray) -> float:
    if isinstance(reg, GroupPartition):
        return groupnorm.group_norm(x, reg)
    return nuclear.nuclear_norm(reg.as_matrix(x))


def reg_prox(reg: Regularizer, x: np.ndarray, t: float) -> np.ndarray:
    if isinstance(reg, GroupPartition):
        return groupnorm.prox_group(x, t, reg)
    return reg.as_vector(nuclear.prox_nuclear(reg.as_matrix(x), t))


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """A regularized least-squares instance.

    ``phi`` is m x n with n matching the regularizer dimension (for nuclear
    problems, n = n1 * n2 and unknowns are row-major vectorizations).
    """

    phi: np.ndarray
    b: np.ndarray
    mu: float
    reg: Regularizer

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        b = np.asarray(self.b, dtype=float)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "mu", float(self.mu))
        if phi.ndim != 2:
            raise ValueError("phi must be a matrix")
        if b.shape != (phi.shape[0],):
            raise ValueError(
                f"b has shape {b.shape}, expected ({phi.shape[0]},)"
            )
        if not (np.isfinite(phi).all() and np.isfinite(b).all() and np.isfinite(self.mu)):
            raise ValueError("phi, b and mu must be finite")
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if reg_dim(self.reg) != phi.shape[1]:
            raise ValueError(
                f"regularizer dimension {reg_dim(self.reg)} does not match phi columns {phi.shape[1]}"
            )

    @property
    def m(self) -> int:
        return self.phi.shape[0]

    @property
    def n(self) -> int:
        return self.phi.shape[1]


@dataclass
class SolveResult:
    """Solver output.  ``y = -(1/mu) phi^T (phi x - b)`` excludes any tilt;
    ``objective`` is the value of the solved (possibly tilted) objective."""

    x: np.ndarray
    y: np.ndarray
    iterations: int
    fixed_point_residual: float
    objective: float
    converged: bool


def objective(problem: ProblemSpec, x: np.ndarray) -> float:
    """Untilted objective value at ``x``."""
    x = np.asarray(x, dtype=float)
    resid = problem.phi @ x - problem.b
    return float(resid @ resid) / (2.0 * problem.mu) + reg_value(problem.reg, x)


def lipschitz_constant(problem: ProblemSpec) -> float:
    """Gradient Lipschitz constant sigma_max(phi)^2 / mu of the smooth part."""
    smax = float(np.linalg.svd(problem.phi, compute_uv=False)[0])
    return smax * smax / problem.mu


def dual_from_solution(problem: ProblemSpec, x: np.ndarray) -> np.ndarray:
    """Negative gradient of the fit term; the candidate subgradient at ``x``."""
    x = np.asarray(x, dtype=float)
    return -(problem.phi.T @ (problem.phi @ x - problem.b)) / problem.mu


def prox_gradient_solve(
    problem: ProblemSpec,
    v: np.ndarray | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    x0: np.ndarray | None = None,
) -> SolveResult:
    """FISTA with function-value restart on the (optionally tilted) problem.

    Terminates when ``||x - prox_{g/L}(x - (grad f(x) - v)/L)|| <= tol``.
    Never raises on slow convergence; the result's ``converged`` flag and
    final residual tell the story.
    """
    n = problem.n
    v = np.zeros(n) if v is None else np.asarray(v, dtype=float)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if v.shape != (n,) or x.shape != (n,):
        raise ValueError("tilt and start must match the problem dimension")
    reg = problem.reg
    gram = problem.phi.T @ problem.phi / problem.mu
    # Combined linear term: grad of the smooth tilted part is gram @ x - lin.
    lin = problem.phi.T @ problem.b / problem.mu + v
    const = float(problem.b @ problem.b) / (2.0 * problem.mu)
    smax = float(np.linalg.svd(problem.phi, compute_uv=False)[0])
    lip = smax * smax / problem.mu
    if lip <= 0.0:
        lip = 1.0  # zero operator: any step is valid for the pure prox iteration
    step = 1.0 / lip

    def fval(z: np.ndarray) -> float:
        return 0.5 * float(z @ (gram @ z)) - float(lin @ z) + const + reg_value(reg, z)

    def pg_step(z: np.ndarray) -> np.ndarray:
        return reg_prox(reg, z - step * (gram @ z - lin), step)

    momentum = x.copy()
    tk = 1.0
    fx = fval(x)
    residual = float(np.linalg.norm(x - pg_step(x)))
    converged = residual <= tol
    iterations = 0
    while not converged and iterations < max_iter:
        x_new = pg_step(momentum)
        f_new = fval(x_new)
        if f_new > fx:
            # Momentum overshot: restart from the plain descent step, which
            # cannot increase the objective at step 1/L.
            x_new = pg_step(x)
            f_new = fval(x_new)
            tk = 1.0
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tk * tk))
        momentum = x_new + ((tk - 1.0) / t_next) * (x_new - x)
        x, fx, tk = x_new, f_new, t_next
        iterations += 1
        residual = float(np.linalg.norm(x - pg_step(x)))
        if residual <= tol:
            converged = True
    return SolveResult(
        x=x,
        y=dual_from_solution(problem, x),
        iterations=iterations,
        fixed_point_residual=residual,
        objective=fx,
        converged=converged,
    )


def multistart_solve(
    problem: ProblemSpec,
    starts,
    v: np.ndarray | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> list[SolveResult]:
    """Solve once per start point, results in start order."""
    return [
        prox_gradient_solve(problem, v=v, tol=tol, max_iter=max_iter, x0=x0)
        for x0 in starts
    ]


def solution_spread(results) -> float:
    """Largest pairwise distance among returned solutions."""
    xs = [np.asarray(r.x, dtype=float) for r in results]
    best = 0.0
    for i in range(len(xs)):
        for j in range(i + 1, len(xs)):
            best = max(best, float(np.linalg.norm(xs[i] - xs[j])))
    return best
