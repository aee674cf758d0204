"""Command-line interface: problem I/O, certification, audits, probes.

Problem files are JSON::

    {
      "schema_version": "1",
      "phi": [[...], ...],
      "b": [...],
      "mu": 1.0,
      "reg": {"kind": "group", "groups": [[1, 2], [3]]}
    }

with ``reg`` either a group partition (variable indices 1-based) or
``{"kind": "nuclear", "shape": [n1, n2]}`` for a row-major vectorized
matrix unknown.  An optional ``"options"`` object may pin ``tol``,
``max_iter`` and ``margin_tol``; command-line flags take precedence.

Reports are JSON with all reals printed at 17 significant digits, so
identical inputs and flags produce byte-identical payloads apart from the
``timing`` entry.  Exit codes: 0 success, 2 certificate did not hold,
1 any error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ProblemFormatError, StabcertError
from .groupnorm import GroupAnalysis, GroupPartition
from .nuclear import NuclearShape, SimultaneousSVD
from .solver import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    ProblemSpec,
    SolveResult,
    prox_gradient_solve,
)
from .stability import (
    CERT_TOL,
    PerturbationReport,
    QGAuditReport,
    StabilityCertificate,
    certify,
    empirical_lipschitz,
    qg_audit,
    snap_to_graph,
    tilt_probe,
)

SCHEMA_VERSION = "1"

_TOP_KEYS = {"schema_version", "phi", "b", "mu", "reg", "options"}
_OPTION_KEYS = {"tol", "max_iter", "margin_tol"}


# ---------------------------------------------------------------------------
# canonical JSON


def _write_json(obj, out: list) -> None:
    if obj is None:
        out.append("null")
    elif isinstance(obj, bool) or isinstance(obj, np.bool_):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        f = float(obj)
        # JSON has no Infinity/NaN; certificates document null margins.
        out.append(format(f, ".17g") if math.isfinite(f) else "null")
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            if i:
                out.append(",")
            out.append(json.dumps(str(k)))
            out.append(":")
            _write_json(v, out)
        out.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else obj
        out.append("[")
        for i, v in enumerate(seq):
            if i:
                out.append(",")
            _write_json(v, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj)!r}")


def dumps_canonical(obj) -> str:
    """Deterministic JSON text with full-precision reals."""
    out: list = []
    _write_json(obj, out)
    return "".join(out)


# ---------------------------------------------------------------------------
# problem files


def _require(data: dict, key: str):
    if key not in data:
        raise ProblemFormatError("MISSING_FIELD", f"missing required field {key!r}")
    return data[key]


def _as_real(value, code: str, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ProblemFormatError(code, f"{what} must be a number")
    value = float(value)
    if not math.isfinite(value):
        raise ProblemFormatError("NOT_FINITE", f"{what} must be finite")
    return value


def load_problem_dict(data) -> tuple[ProblemSpec, dict]:
    """Build a :class:`ProblemSpec` from a decoded problem dictionary."""
    if not isinstance(data, dict):
        raise ProblemFormatError("BAD_TYPE", "problem file must hold a JSON object")
    unknown = sorted(set(data) - _TOP_KEYS)
    if unknown:
        raise ProblemFormatError("UNKNOWN_FIELD", f"unknown fields: {unknown}")
    version = _require(data, "schema_version")
    if version != SCHEMA_VERSION:
        raise ProblemFormatError(
            "SCHEMA_UNSUPPORTED", f"unsupported schema version {version!r}"
        )
    raw_phi = _require(data, "phi")
    if (
        not isinstance(raw_phi, list)
        or not raw_phi
        or not all(isinstance(row, list) for row in raw_phi)
    ):
        raise ProblemFormatError("BAD_TYPE", "phi must be a non-empty list of rows")
    width = len(raw_phi[0])
    if width == 0 or any(len(row) != width for row in raw_phi):
        raise ProblemFormatError(
            "DIMENSION_MISMATCH", "phi rows must be non-empty and equally long"
        )
    phi = np.array(
        [[_as_real(v, "BAD_TYPE", "phi entry") for v in row] for row in raw_phi]
    )
    raw_b = _require(data, "b")
    if not isinstance(raw_b, list):
        raise ProblemFormatError("BAD_TYPE", "b must be a list")
    if len(raw_b) != phi.shape[0]:
        raise ProblemFormatError(
            "DIMENSION_MISMATCH",
            f"b has {len(raw_b)} entries, phi has {phi.shape[0]} rows",
        )
    b = np.array([_as_real(v, "BAD_TYPE", "b entry") for v in raw_b])
    mu = _as_real(_require(data, "mu"), "BAD_TYPE", "mu")
    if mu <= 0:
        raise ProblemFormatError("MU_NONPOSITIVE", f"mu must be positive, got {mu}")
    reg_data = _require(data, "reg")
    if not isinstance(reg_data, dict):
        raise ProblemFormatError("BAD_TYPE", "reg must be an object")
    kind = reg_data.get("kind")
    n = phi.shape[1]
    if kind == "group":
        extra = sorted(set(reg_data) - {"kind", "groups"})
        if extra:
            raise ProblemFormatError("UNKNOWN_FIELD", f"unknown reg fields: {extra}")
        raw_groups = reg_data.get("groups")
        if not isinstance(raw_groups, list) or not all(
            isinstance(g, list) for g in raw_groups
        ):
            raise ProblemFormatError("BAD_TYPE", "groups must be a list of lists")
        seen: set[int] = set()
        groups = []
        for g in raw_groups:
            block = []
            for i in g:
                if isinstance(i, bool) or not isinstance(i, int):
                    raise ProblemFormatError("BAD_TYPE", "group indices must be integers")
                if not 1 <= i <= n:
                    raise ProblemFormatError(
                        "GROUP_INDEX_RANGE", f"group index {i} outside 1..{n}"
                    )
                if i - 1 in seen:
                    raise ProblemFormatError(
                        "GROUPS_OVERLAP", f"variable {i} appears in two groups"
                    )
                seen.add(i - 1)
                block.append(i - 1)
            if not block:
                raise ProblemFormatError("BAD_TYPE", "groups must be non-empty")
            groups.append(tuple(block))
        if len(seen) != n:
            missing = sorted(i + 1 for i in set(range(n)) - seen)
            raise ProblemFormatError(
                "GROUPS_COVERAGE", f"variables not covered by any group: {missing}"
            )
        reg = GroupPartition(n, tuple(groups))
    elif kind == "nuclear":
        extra = sorted(set(reg_data) - {"kind", "shape"})
        if extra:
            raise ProblemFormatError("UNKNOWN_FIELD", f"unknown reg fields: {extra}")
        shape = reg_data.get("shape")
        if (
            not isinstance(shape, list)
            or len(shape) != 2
            or not all(isinstance(s, int) and not isinstance(s, bool) for s in shape)
            or min(shape) < 1
        ):
            raise ProblemFormatError("BAD_TYPE", "shape must be two positive integers")
        if shape[0] * shape[1] != n:
            raise ProblemFormatError(
                "DIMENSION_MISMATCH",
                f"shape {shape} implies {shape[0] * shape[1]} unknowns, phi has {n} columns",
            )
        reg = NuclearShape(shape[0], shape[1])
    else:
        raise ProblemFormatError("BAD_TYPE", f"unknown regularizer kind {kind!r}")
    options = data.get("options", {})
    if not isinstance(options, dict):
        raise ProblemFormatError("BAD_TYPE", "options must be an object")
    bad = sorted(set(options) - _OPTION_KEYS)
    if bad:
        raise ProblemFormatError("UNKNOWN_FIELD", f"unknown options: {bad}")
    clean: dict = {}
    if "tol" in options:
        clean["tol"] = _as_real(options["tol"], "BAD_TYPE", "options.tol")
        if clean["tol"] <= 0:
            raise ProblemFormatError("BAD_TYPE", "options.tol must be positive")
    if "max_iter" in options:
        mi = options["max_iter"]
        if isinstance(mi, bool) or not isinstance(mi, int) or mi < 1:
            raise ProblemFormatError("BAD_TYPE", "options.max_iter must be a positive integer")
        clean["max_iter"] = mi
    if "margin_tol" in options:
        clean["margin_tol"] = _as_real(options["margin_tol"], "BAD_TYPE", "options.margin_tol")
    try:
        spec = ProblemSpec(phi, b, mu, reg)
    except ValueError as exc:
        raise ProblemFormatError("DIMENSION_MISMATCH", str(exc)) from exc
    return spec, clean


def parse_problem(path) -> tuple[ProblemSpec, dict]:
    """Read and validate a problem file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ProblemFormatError("FILE_NOT_FOUND", f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFormatError("MALFORMED_JSON", f"{path}: {exc}") from exc
    return load_problem_dict(data)


def serialize_problem(problem: ProblemSpec, options: dict | None = None) -> dict:
    """Canonical dictionary form of a problem; inverse of :func:`load_problem_dict`."""
    if isinstance(problem.reg, GroupPartition):
        reg = {
            "kind": "group",
            "groups": [[i + 1 for i in g] for g in problem.reg.groups],
        }
    else:
        reg = {"kind": "nuclear", "shape": [problem.reg.n1, problem.reg.n2]}
    doc = {
        "schema_version": SCHEMA_VERSION,
        "phi": problem.phi,
        "b": problem.b,
        "mu": problem.mu,
        "reg": reg,
    }
    if options:
        doc["options"] = dict(sorted(options.items()))
    return doc


# ---------------------------------------------------------------------------
# report assembly


def _solve_dict(result: SolveResult) -> dict:
    return {
        "x": result.x,
        "y": result.y,
        "iterations": result.iterations,
        "fixed_point_residual": result.fixed_point_residual,
        "objective": result.objective,
        "converged": result.converged,
    }


def _classification_dict(c) -> dict:
    if isinstance(c, GroupAnalysis):
        return {
            "kind": "group",
            "boundary_blocks": [j + 1 for j in c.K],
            "interior_blocks": [j + 1 for j in c.H],
            "support_blocks": [j + 1 for j in c.I],
            "block_norms": c.y_norms,
            "classification_margin": c.classification_margin,
        }
    assert isinstance(c, SimultaneousSVD)
    return {
        "kind": "nuclear",
        "rank": c.r,
        "unit_count": c.p,
        "sigma_x": c.sigma_x,
        "lambda_y": c.lambda_y,
    }


def _certificate_dict(cert: StabilityCertificate) -> dict:
    return {
        "holds": cert.holds,
        "margin": cert.margin,  # serialized as null when infinite
        "subspace_dim": cert.subspace_dim,
        "gamma": cert.gamma,
        "kkt_residual": cert.kkt_residual,
        "witness": cert.witness,
        "kind": cert.kind,
        "parameter_scope": cert.parameter_scope,
        "classification": _classification_dict(cert.classification),
        "tolerances": dict(sorted(cert.tolerances.items())),
    }


def _perturbation_dict(rep: PerturbationReport) -> dict:
    return {
        "samples": rep.samples,
        "max_ratio": rep.max_ratio,
        "multivaluedness_spread": rep.multivaluedness_spread,
        "non_converged": rep.non_converged,
        "seed": rep.seed,
    }


def _audit_dict(rep: QGAuditReport) -> dict:
    doc = {
        "kind": rep.kind,
        "samples": rep.samples,
        "used": rep.used,
        "radius": rep.radius,
        "seed": rep.seed,
        "min_slack": rep.min_slack,
        "slack_by_constant": dict(sorted(rep.slack_by_constant.items())),
        "passed": rep.passed,
    }
    if rep.conjecture_min_slack is not None:
        doc["conjecture_min_slack"] = rep.conjecture_min_slack
    return doc


def _report_skeleton(command: str, digest: str | None) -> dict:
    return {
        "command": command,
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "inputs_digest": digest,
        "solve": None,
        "certificate": None,
        "perturbation": None,
        "audit": None,
        "error": None,
    }


def _digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# commands


def _solver_opts(args, options: dict) -> dict:
    tol = args.tol if args.tol is not None else options.get("tol", DEFAULT_TOL)
    max_iter = options.get("max_iter", DEFAULT_MAX_ITER)
    return {"tol": tol, "max_iter": max_iter}


def _cmd_solve(args) -> tuple[dict, int]:
    spec, options = parse_problem(args.problem)
    report = _report_skeleton("solve", _digest(args.problem))
    result = prox_gradient_solve(spec, **_solver_opts(args, options))
    report["solve"] = _solve_dict(result)
    return report, 0


def _cmd_certify(args) -> tuple[dict, int]:
    spec, options = parse_problem(args.problem)
    report = _report_skeleton("certify", _digest(args.problem))
    result = prox_gradient_solve(spec, **_solver_opts(args, options))
    report["solve"] = _solve_dict(result)
    cert_tol = args.tol if args.tol is not None else options.get("tol", CERT_TOL)
    cert = certify(spec, result.x, tol=cert_tol, margin_tol=options.get("margin_tol"))
    report["certificate"] = _certificate_dict(cert)
    return report, 0 if cert.holds else 2


def _cmd_qg_audit(args) -> tuple[dict, int]:
    spec, options = parse_problem(args.problem)
    report = _report_skeleton("qg-audit", _digest(args.problem))
    result = prox_gradient_solve(spec, **_solver_opts(args, options))
    report["solve"] = _solve_dict(result)
    # Audits need a pair exactly on the subdifferential graph; solver output
    # is only optimal to its residual, so snap before sampling.
    xs, ys = snap_to_graph(spec.reg, result.x, result.y)
    rep = qg_audit(
        spec.reg,
        xs,
        ys,
        samples=args.samples,
        radius=args.radius,
        seed=args.seed,
        include_conjecture=args.conjecture,
    )
    doc = _audit_dict(rep)
    doc["snap_distance"] = float(
        np.linalg.norm(np.asarray(xs, dtype=float).ravel() - result.x)
    )
    report["audit"] = doc
    return report, 0


def _cmd_perturb(args) -> tuple[dict, int]:
    spec, options = parse_problem(args.problem)
    report = _report_skeleton("perturb", _digest(args.problem))
    rep = empirical_lipschitz(
        spec,
        radius_b=args.radius,
        radius_mu=args.radius_mu,
        samples=args.samples,
        seed=args.seed,
        starts=args.starts,
        **_solver_opts(args, options),
    )
    report["perturbation"] = _perturbation_dict(rep)
    return report, 0


def _cmd_tilt_probe(args) -> tuple[dict, int]:
    spec, options = parse_problem(args.problem)
    report = _report_skeleton("tilt-probe", _digest(args.problem))
    result = prox_gradient_solve(spec, **_solver_opts(args, options))
    report["solve"] = _solve_dict(result)
    rep = tilt_probe(
        spec,
        result.x,
        radius_v=args.radius,
        samples=args.samples,
        seed=args.seed,
        starts=args.starts,
        **_solver_opts(args, options),
    )
    report["perturbation"] = _perturbation_dict(rep)
    return report, 0


def bundled_example_non() -> tuple[ProblemSpec, dict]:
    """The packaged reference instance used by ``reproduce-example-non``."""
    data = json.loads(
        resources.files("stabcert").joinpath("data/example_non.json").read_text()
    )
    return load_problem_dict(data)


def _cmd_reproduce_example_non(args) -> tuple[dict, int]:
    spec, _ = bundled_example_non()
    b = spec.b.copy()
    b[1] = args.b2
    spec = ProblemSpec(spec.phi, b, spec.mu, spec.reg)
    raw = resources.files("stabcert").joinpath("data/example_non.json").read_bytes()
    report = _report_skeleton("reproduce-example-non", hashlib.sha256(raw).hexdigest())
    result = prox_gradient_solve(spec, tol=args.tol if args.tol is not None else DEFAULT_TOL)
    report["solve"] = _solve_dict(result)
    cert = certify(spec, result.x)
    report["certificate"] = _certificate_dict(cert)
    predicted = max(-args.b2 - 1.0, 0.0)
    observed = float(result.x[2])
    mismatch = abs(observed - predicted)
    report["reproduction"] = {
        "b2": args.b2,
        "predicted_x3": predicted,
        "observed_x3": observed,
        "mismatch": mismatch,
        "matches": bool(mismatch <= 1e-6),
    }
    return report, 0 if mismatch <= 1e-6 else 1


_COMMANDS = {
    "solve": _cmd_solve,
    "certify": _cmd_certify,
    "qg-audit": _cmd_qg_audit,
    "perturb": _cmd_perturb,
    "tilt-probe": _cmd_tilt_probe,
    "reproduce-example-non": _cmd_reproduce_example_non,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stabcert",
        description="Stability certificates for group-lasso and nuclear-norm regression",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, problem=True):
        if problem:
            p.add_argument("problem", help="problem JSON file")
        p.add_argument("--tol", type=float, default=None, help="solver/certificate tolerance")
        p.add_argument("--out", default=None, help="write the JSON report here as well")

    p = sub.add_parser("solve", help="solve the instance")
    common(p)

    p = sub.add_parser("certify", help="solve, then certify stability (exit 2 when it fails)")
    common(p)

    p = sub.add_parser("qg-audit", help="sampled quadratic-growth audit at the solution")
    common(p)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--conjecture",
        action="store_true",
        help="also track the sharper untested nuclear modulus",
    )

    p = sub.add_parser("perturb", help="sampled Lipschitz experiment over (b, mu)")
    common(p)
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--radius", type=float, default=0.1, help="data perturbation radius")
    p.add_argument("--radius-mu", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--starts", type=int, default=1)

    p = sub.add_parser("tilt-probe", help="sampled tilt experiment at the solution")
    common(p)
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--radius", type=float, default=1e-4, help="tilt radius")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--starts", type=int, default=1)

    p = sub.add_parser(
        "reproduce-example-non",
        help="solve the bundled reference instance and check the closed-form response",
    )
    common(p, problem=False)
    p.add_argument("--b2", type=float, default=-1.0)

    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        report, code = _COMMANDS[args.command](args)
    except ProblemFormatError as exc:
        report = _report_skeleton(args.command, None)
        report["error"] = {"code": exc.code, "message": str(exc)}
        code = 1
    except StabcertError as exc:
        report = _report_skeleton(args.command, None)
        report["error"] = {"code": type(exc).__name__, "message": str(exc)}
        code = 1
    report["timing"] = {"seconds": time.perf_counter() - start}
    text = dumps_canonical(report)
    if getattr(args, "out", None):
        Path(args.out).write_text(text + "\n")
    print(text)
    return code


def main() -> None:
    sys.exit(run())
