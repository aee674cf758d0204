"""Stability certificates, growth audits, and sampling probes.

The central object is the certificate produced by :func:`certify_group` and
:func:`certify_nuclear`: it restricts the design operator to the subspace of
directions that keep the solution critical (spanned by the boundary blocks
of the dual vector, or by the symmetric top block of the joint frames) and
measures the smallest singular value there.  A positive margin certifies
that the solution map is single valued and Lipschitz in the data ``(b, mu)``
near the instance; a zero margin comes with a witness direction along which
uniqueness fails.  The same kernel test covers perturbations of the design
operator itself, reported under a wider parameter scope.

Everything else here is empirical cross-examination of that verdict:
quadratic-growth audits of the regularizer, finite-difference curvature
probes, and sampled Lipschitz/tilt experiments on the solver.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from . import groupnorm, nuclear
from .errors import NotASolutionError, NotASubgradientError
from .groupnorm import GroupAnalysis, GroupPartition
from .linalg import restricted_min_singular
from .nuclear import NuclearShape, SimultaneousSVD
from .solver import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    ProblemSpec,
    dual_from_solution,
    multistart_solve,
    objective,
    prox_gradient_solve,
    reg_value,
    solution_spread,
)

# Certificate margin threshold, relative to the operator scale.
MARGIN_TOL_SCALE = 1e-8
# Growth audits must not dip below this slack.
AUDIT_SLACK_FLOOR = -1e-9
# Samples with norm at or below this are excluded from audits.
AUDIT_NORM_FLOOR = 1e-12

CERT_TOL = 1e-7


@dataclass(frozen=True)
class StabilityCertificate:
    """Algebraic verdict on solution-map stability at one solved instance.

    ``holds`` is equivalent to ``margin > margin_tol``.  ``margin`` is the
    smallest singular value of the design operator restricted to the
    critical subspace (``inf`` when that subspace is trivial), ``witness``
    a unit direction realizing the failure when the verdict is negative.
    """

    kind: str
    holds: bool
    margin: float
    subspace_dim: int
    gamma: float
    kkt_residual: float
    classification: GroupAnalysis | SimultaneousSVD
    witness: np.ndarray | None
    tolerances: dict
    parameter_scope: str = "(b, mu)"


@dataclass(frozen=True)
class PerturbationReport:
    """Outcome of a sampled perturbation experiment."""

    samples: int
    max_ratio: float
    multivaluedness_spread: float
    non_converged: int
    seed: int


@dataclass(frozen=True)
class QGAuditReport:
    """Sampled check of the quadratic-growth inequalities."""

    kind: str
    samples: int
    used: int
    radius: float
    seed: int
    slack_by_constant: dict
    min_slack: float
    worst_sample: np.ndarray | None
    passed: bool
    conjecture_min_slack: float | None = None
    conjecture_worst_sample: np.ndarray | None = None


def margin_tolerance(phi: np.ndarray) -> float:
    """Certificate threshold ``1e-8 * sigma_max(phi)``; scale covariant."""
    phi = np.asarray(phi, dtype=float)
    smax = float(np.linalg.svd(phi, compute_uv=False)[0]) if phi.size else 0.0
    return MARGIN_TOL_SCALE * smax


def _witness_from_basis(phi: np.ndarray, basis: np.ndarray) -> np.ndarray | None:
    if basis.shape[1] == 0:
        return None
    _, _, vt = np.linalg.svd(phi @ basis)
    w = basis @ vt[-1]
    nw = float(np.linalg.norm(w))
    return w / nw if nw > 0 else None


def certify_group(
    problem: ProblemSpec,
    x: np.ndarray,
    tol: float = CERT_TOL,
    margin_tol: float | None = None,
) -> StabilityCertificate:
    """Certificate for a group-regularized instance at solution ``x``.

    Raises :class:`NotASolutionError` when the optimality residual at ``x``
    exceeds ``tol``.
    """
    if not isinstance(problem.reg, GroupPartition):
        raise ValueError("problem does not carry a group regularizer")
    x = np.asarray(x, dtype=float)
    y = dual_from_solution(problem, x)
    kkt = groupnorm.subgrad_residual(x, y, problem.reg)
    if kkt > tol:
        raise NotASolutionError(
            f"optimality residual {kkt:.3e} exceeds tolerance {tol:.3e}"
        )
    analysis = groupnorm.classify_groups(x, y, problem.reg, tol)
    mt = margin_tolerance(problem.phi) if margin_tol is None else float(margin_tol)
    basis = analysis.v_basis
    margin = restricted_min_singular(problem.phi, basis)
    holds = margin > mt
    witness = None if holds else _witness_from_basis(problem.phi, basis)
    return StabilityCertificate(
        kind="group",
        holds=holds,
        margin=margin,
        subspace_dim=basis.shape[1],
        gamma=analysis.gamma,
        kkt_residual=kkt,
        classification=analysis,
        witness=witness,
        tolerances={"kkt_tol": tol, "class_tol": tol, "margin_tol": mt},
    )


def certify_nuclear(
    problem: ProblemSpec,
    x: np.ndarray,
    tol: float = CERT_TOL,
    margin_tol: float | None = None,
) -> StabilityCertificate:
    """Certificate for a nuclear-norm instance at solution ``x`` (matrix or vec)."""
    if not isinstance(problem.reg, NuclearShape):
        raise ValueError("problem does not carry a nuclear regularizer")
    shape = problem.reg
    xv = shape.as_vector(x)
    xm = shape.as_matrix(xv)
    ym = shape.as_matrix(dual_from_solution(problem, xv))
    check = nuclear.is_subgradient_nuclear(xm, ym, tol)
    kkt = max(check.spectral_gap, check.fenchel_gap / (1.0 + nuclear.nuclear_norm(xm)))
    if not check.ok:
        raise NotASolutionError(
            f"optimality residual {kkt:.3e} exceeds tolerance {tol:.3e}"
        )
    dec = nuclear.simultaneous_svd(xm, ym, tol)
    basis = nuclear.tangent_subspace_basis(dec)
    mt = margin_tolerance(problem.phi) if margin_tol is None else float(margin_tol)
    margin = restricted_min_singular(problem.phi, basis)
    gamma = float(dec.lambda_y.max()) if dec.lambda_y.size else 0.0
    holds = margin > mt
    witness = None if holds else _witness_from_basis(problem.phi, basis)
    return StabilityCertificate(
        kind="nuclear",
        holds=holds,
        margin=margin,
        subspace_dim=basis.shape[1],
        gamma=gamma,
        kkt_residual=kkt,
        classification=dec,
        witness=witness,
        tolerances={"kkt_tol": tol, "class_tol": tol, "margin_tol": mt},
    )


def certify(
    problem: ProblemSpec,
    x: np.ndarray,
    tol: float = CERT_TOL,
    margin_tol: float | None = None,
) -> StabilityCertificate:
    """Dispatch on the regularizer kind."""
    if isinstance(problem.reg, GroupPartition):
        return certify_group(problem, x, tol, margin_tol)
    return certify_nuclear(problem, x, tol, margin_tol)


def certify_phi_perturbed(
    problem: ProblemSpec,
    x: np.ndarray,
    tol: float = CERT_TOL,
    margin_tol: float | None = None,
) -> StabilityCertificate:
    """Same kernel test, reported as covering design-operator perturbations too.

    The margin computation is identical; a positive verdict extends to
    joint perturbations of ``(phi, b, mu)``.
    """
    cert = certify(problem, x, tol, margin_tol)
    return dataclasses.replace(cert, parameter_scope="(phi, b, mu)")


def restricted_hessian_min_eig(hessian: np.ndarray, basis: np.ndarray) -> float:
    """Smallest eigenvalue of ``basis^T H basis`` for an explicit Hessian.

    General smooth fit terms plug in here in place of ``phi^T phi / mu``;
    positivity over the critical subspace is the same certificate.
    """
    hessian = np.asarray(hessian, dtype=float)
    basis = np.asarray(basis, dtype=float)
    if basis.shape[1] == 0:
        return math.inf
    m = basis.T @ hessian @ basis
    m = (m + m.T) / 2.0
    return float(np.linalg.eigvalsh(m)[0])


def snap_to_graph(reg, x: np.ndarray, y: np.ndarray, tol: float = CERT_TOL):
    """Project a numerically optimal pair exactly onto the subdifferential graph.

    Solver output satisfies optimality only to its residual; audits need a
    pair that lies on the graph to working precision.  Group case: active
    blocks of ``y`` are replaced by the exact unit direction of ``x``,
    inactive dual blocks are clipped into the unit ball, sub-tolerance
    primal blocks are zeroed.  Nuclear case: both matrices are rebuilt from
    their joint frames.
    """
    if isinstance(reg, GroupPartition):
        x = np.asarray(x, dtype=float).copy()
        y = np.asarray(y, dtype=float).copy()
        for idx in reg.index_arrays:
            nx = float(np.linalg.norm(x[idx]))
            if nx > tol:
                y[idx] = x[idx] / nx
            else:
                x[idx] = 0.0
                ny = float(np.linalg.norm(y[idx]))
                if ny > 1.0:
                    y[idx] /= ny
        return x, y
    shape = reg
    dec = nuclear.simultaneous_svd(shape.as_matrix(x), shape.as_matrix(y), tol)
    return dec.reconstruct_x(), dec.reconstruct_y()


def _ball_samples(rng: np.random.Generator, n: int, count: int, radius: float) -> np.ndarray:
    """Uniform draws from the Euclidean ball of the given radius, one per row."""
    z = rng.standard_normal((count, n))
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    scale = rng.random((count, 1)) ** (1.0 / n)
    return radius * scale * z / norms


def qg_audit(
    reg,
    xbar: np.ndarray,
    ybar: np.ndarray,
    samples: int = 1000,
    radius: float = 1.0,
    seed: int = 0,
    include_conjecture: bool = False,
) -> QGAuditReport:
    """Sampled audit of the quadratic growth of the regularizer at a graph pair.

    Checks, at points ``x`` drawn uniformly from the ball of the given
    radius around ``xbar``, that the regularizer gap
    ``g(x) - g(xbar) - <ybar, x - xbar>`` dominates the squared distance to
    the inverse image of ``ybar`` times the growth modulus:
    ``(1 - gamma) / (2 ||x||)`` in the group case, both
    ``(1 - gamma^2) / (2 ||X||_* (1 + (1 + gamma)^2))`` and
    ``(1 - gamma) / (5 ||X||_*)`` in the nuclear case.  Near-zero samples
    are excluded.  ``include_conjecture`` additionally tracks the sharper
    untested nuclear modulus ``(1 - gamma) / (2 ||X||_*)``; a dip there is
    a counterexample candidate, not a failure.
    """
    rng = np.random.default_rng(seed)
    if isinstance(reg, GroupPartition):
        xbar = np.asarray(xbar, dtype=float)
        ybar = np.asarray(ybar, dtype=float)
        res = groupnorm.subgrad_residual(xbar, ybar, reg)
        if res > CERT_TOL:
            raise NotASubgradientError(
                f"reference pair is off the graph by {res:.3e}"
            )
        norms = groupnorm.block_norms(ybar, reg)
        below = norms[norms < 1.0 - groupnorm.UNIT_TOL]
        gamma = float(below.max()) if below.size else 0.0
        gbar = groupnorm.group_norm(xbar, reg)
        draws = xbar[None, :] + _ball_samples(rng, reg.n, samples, radius)
        min_slack = math.inf
        worst = None
        used = 0
        for row in draws:
            nx = float(np.linalg.norm(row))
            if nx <= AUDIT_NORM_FLOOR:
                continue
            used += 1
            lhs = (
                groupnorm.group_norm(row, reg)
                - gbar
                - float(ybar @ (row - xbar))
            )
            dist = groupnorm.inverse_subdiff_distance(row, ybar, reg)
            slack = lhs - (1.0 - gamma) / (2.0 * nx) * dist * dist
            if slack < min_slack:
                min_slack, worst = slack, row.copy()
        if used == 0:
            min_slack = 0.0
        return QGAuditReport(
            kind="group",
            samples=samples,
            used=used,
            radius=radius,
            seed=seed,
            slack_by_constant={"group_growth": min_slack},
            min_slack=min_slack,
            worst_sample=worst,
            passed=min_slack >= AUDIT_SLACK_FLOOR,
        )

    shape: NuclearShape = reg
    xm = shape.as_matrix(xbar)
    ym = shape.as_matrix(ybar)
    dec = nuclear.simultaneous_svd(xm, ym, CERT_TOL)
    gamma = float(dec.lambda_y.max()) if dec.lambda_y.size else 0.0
    gbar = nuclear.nuclear_norm(xm)
    draws = _ball_samples(rng, shape.n, samples, radius)
    mins = {"nuclear_growth_tight": math.inf, "nuclear_growth_coarse": math.inf}
    worst = None
    min_slack = math.inf
    conj_min = math.inf
    conj_worst = None
    used = 0
    c_tight_num = (1.0 - gamma * gamma) / (2.0 * (1.0 + (1.0 + gamma) ** 2))
    c_coarse_num = (1.0 - gamma) / 5.0
    c_conj_num = (1.0 - gamma) / 2.0
    for row in draws:
        xs = xm + row.reshape(shape.n1, shape.n2)
        nn = nuclear.nuclear_norm(xs)
        if nn <= AUDIT_NORM_FLOOR:
            continue
        used += 1
        lhs = nn - gbar - float(np.sum(ym * (xs - xm)))
        dist = nuclear.inverse_subdiff_distance(xs, dec)
        d2 = dist * dist
        s_tight = lhs - (c_tight_num / nn) * d2
        s_coarse = lhs - (c_coarse_num / nn) * d2
        mins["nuclear_growth_tight"] = min(mins["nuclear_growth_tight"], s_tight)
        mins["nuclear_growth_coarse"] = min(mins["nuclear_growth_coarse"], s_coarse)
        local = min(s_tight, s_coarse)
        if local < min_slack:
            min_slack, worst = local, xs.copy()
        if include_conjecture:
            s_conj = lhs - (c_conj_num / nn) * d2
            if s_conj < conj_min:
                conj_min, conj_worst = s_conj, xs.copy()
    if used == 0:
        min_slack = 0.0
        mins = {k: 0.0 for k in mins}
    return QGAuditReport(
        kind="nuclear",
        samples=samples,
        used=used,
        radius=radius,
        seed=seed,
        slack_by_constant=mins,
        min_slack=min_slack,
        worst_sample=worst,
        passed=min_slack >= AUDIT_SLACK_FLOOR,
        conjecture_min_slack=None if not include_conjecture else conj_min,
        conjecture_worst_sample=None if not include_conjecture else conj_worst,
    )


def second_quotient_probe(
    problem: ProblemSpec, x: np.ndarray, v: np.ndarray | None, w: np.ndarray, t: float
) -> float:
    """Finite second-order difference quotient of the objective.

    ``(phi(x + t w) - phi(x) - t <v, w>) / (t^2 / 2)`` where ``phi`` is the
    full objective; ``v`` should be a subgradient of it at ``x`` (the zero
    vector at an exact solution).  Stabilized curvature along ``w`` as
    ``t`` shrinks is the second-order signature of a stable solution;
    decay to zero along some direction witnesses failure.
    """
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    v = np.zeros_like(x) if v is None else np.asarray(v, dtype=float)
    if t <= 0:
        raise ValueError("step must be positive")
    num = objective(problem, x + t * w) - objective(problem, x) - t * float(v @ w)
    return num / (0.5 * t * t)


def _random_starts(
    rng: np.random.Generator, center: np.ndarray, count: int
) -> list[np.ndarray]:
    scale = 1.0 + float(np.linalg.norm(center))
    return [
        center + row
        for row in _ball_samples(rng, center.size, count, scale)
    ]


def empirical_lipschitz(
    problem: ProblemSpec,
    radius_b: float,
    radius_mu: float,
    samples: int = 20,
    seed: int = 0,
    starts: int = 1,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> PerturbationReport:
    """Sampled Lipschitz experiment on the solution map over ``(b, mu)``.

    Draws parameter points uniformly from the product ball around the
    instance (``mu`` clamped to stay at or above half its base value),
    solves each, and reports the largest solution-to-parameter distance
    ratio over all pairs including the baseline.  With ``starts > 1`` each
    sample is solved from several deterministic random starts and the
    largest spread among the returned minimizers is reported.
    """
    rng = np.random.default_rng(seed)
    base = prox_gradient_solve(problem, tol=tol, max_iter=max_iter)
    b_draws = problem.b[None, :] + _ball_samples(rng, problem.m, samples, radius_b)
    mu_draws = problem.mu + rng.uniform(-radius_mu, radius_mu, size=samples)
    mu_draws = np.maximum(mu_draws, problem.mu / 2.0)
    params = [(problem.b, problem.mu)]
    sols = [base]
    spread = 0.0
    non_converged = 0 if base.converged else 1
    for i in range(samples):
        spec = ProblemSpec(problem.phi, b_draws[i], float(mu_draws[i]), problem.reg)
        if starts > 1:
            start_points = [np.zeros(problem.n)] + _random_starts(rng, base.x, starts - 1)
            results = multistart_solve(spec, start_points, tol=tol, max_iter=max_iter)
            spread = max(spread, solution_spread(results))
            non_converged += sum(not r.converged for r in results)
            sols.append(results[0])
        else:
            r = prox_gradient_solve(spec, tol=tol, max_iter=max_iter)
            non_converged += 0 if r.converged else 1
            sols.append(r)
        params.append((b_draws[i], float(mu_draws[i])))
    max_ratio = 0.0
    for i in range(len(sols)):
        for j in range(i + 1, len(sols)):
            db = float(np.linalg.norm(params[i][0] - params[j][0]))
            dmu = params[i][1] - params[j][1]
            dp = math.hypot(db, dmu)
            if dp < 1e-15:
                continue
            max_ratio = max(
                max_ratio, float(np.linalg.norm(sols[i].x - sols[j].x)) / dp
            )
    return PerturbationReport(
        samples=samples,
        max_ratio=max_ratio,
        multivaluedness_spread=spread,
        non_converged=non_converged,
        seed=seed,
    )


def tilt_probe(
    problem: ProblemSpec,
    x: np.ndarray,
    radius_v: float = 1e-4,
    samples: int = 20,
    seed: int = 0,
    starts: int = 1,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> PerturbationReport:
    """Sampled tilt experiment at a solved instance.

    Solves the problem with random linear tilts of norm at most
    ``radius_v`` and reports the largest movement-to-tilt ratio
    ``||M(v) - x|| / ||v||``.  A stable solution keeps the ratio bounded as
    the radius shrinks; blow-up flags tilt instability.  Multistart spread
    is tracked as in :func:`empirical_lipschitz`.  Zero tilts contribute
    ratio 0.
    """
    rng = np.random.default_rng(seed)
    x = np.asarray(x, dtype=float)
    tilts = _ball_samples(rng, problem.n, samples, radius_v)
    max_ratio = 0.0
    spread = 0.0
    non_converged = 0
    for i in range(samples):
        v = tilts[i]
        nv = float(np.linalg.norm(v))
        if starts > 1:
            start_points = [x.copy()] + _random_starts(rng, x, starts - 1)
            results = multistart_solve(problem, start_points, v=v, tol=tol, max_iter=max_iter)
            spread = max(spread, solution_spread(results))
            non_converged += sum(not r.converged for r in results)
            sol = results[0]
        else:
            sol = prox_gradient_solve(problem, v=v, tol=tol, max_iter=max_iter, x0=x.copy())
            non_converged += 0 if sol.converged else 1
        if nv > 1e-15:
            max_ratio = max(max_ratio, float(np.linalg.norm(sol.x - x)) / nv)
    return PerturbationReport(
        samples=samples,
        max_ratio=max_ratio,
        multivaluedness_spread=spread,
        non_converged=non_converged,
        seed=seed,
    )
