"""Shared generators and independent oracles for the test suite."""

import numpy as np

from stabcert.groupnorm import GroupPartition
from stabcert.nuclear import NuclearShape
from stabcert.solver import ProblemSpec


def random_orthogonal(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def random_partition(rng, n):
    sizes = []
    left = n
    while left:
        s = int(rng.integers(1, min(3, left) + 1))
        sizes.append(s)
        left -= s
    perm = rng.permutation(n)
    groups, pos = [], 0
    for s in sizes:
        groups.append(tuple(int(i) for i in perm[pos : pos + s]))
        pos += s
    return GroupPartition(n, tuple(groups))


def random_group_graph_pair(rng, partition, p_active=0.5, p_boundary=0.3):
    """Exact point of the group-norm subdifferential graph."""
    n = partition.n
    x = np.zeros(n)
    y = np.zeros(n)
    for idx in partition.index_arrays:
        u = rng.standard_normal(len(idx))
        nu = np.linalg.norm(u)
        if nu == 0:
            u[0], nu = 1.0, 1.0
        u = u / nu
        if rng.random() < p_active:
            x[idx] = rng.uniform(0.2, 2.0) * u
            y[idx] = u
        else:
            s = 1.0 if rng.random() < p_boundary else rng.uniform(0.0, 0.97)
            y[idx] = s * u
    return x, y


def random_nuclear_graph_pair(rng, n1, n2, r=None, extra_unit=None):
    """Exact point of the nuclear-norm subdifferential graph."""
    k = min(n1, n2)
    u = random_orthogonal(rng, n1)
    v = random_orthogonal(rng, n2)
    if r is None:
        r = int(rng.integers(0, k + 1))
    if extra_unit is None:
        extra_unit = int(rng.integers(0, k - r + 1))
    p = r + extra_unit
    sig = np.sort(rng.uniform(0.3, 3.0, r))[::-1]
    lam = np.sort(rng.uniform(0.0, 0.95, k - p))[::-1]
    x = (u[:, :r] * sig) @ v[:, :r].T if r else np.zeros((n1, n2))
    dy = np.concatenate([np.ones(p), lam])
    y = (u[:, :k] * dy) @ v[:, :k].T
    return x, y


# ---------------------------------------------------------------------------
# independent distance oracles


def group_ray_distance_oracle(x, ybar, partition, iters=600):
    """Projected-gradient projection onto the product of dual rays and origins.

    Deliberately iterative: minimizes ||x_J - t y_J||^2 over t >= 0 by
    projected gradient instead of using any closed form.
    """
    total = 0.0
    for idx in partition.index_arrays:
        xj = np.asarray(x, dtype=float)[idx]
        yj = np.asarray(ybar, dtype=float)[idx]
        ny = float(np.linalg.norm(yj))
        if ny >= 1.0 - 1e-7:
            lip = ny * ny
            t = 0.0
            for _ in range(iters):
                grad = t * lip - float(xj @ yj)
                t = max(t - 0.9 * grad / lip, 0.0)
            total += float(np.sum((xj - t * yj) ** 2))
        else:
            total += float(xj @ xj)
    return float(np.sqrt(total))


def nuclear_cone_distance_oracle(x, dec, iters=400):
    """Projected-gradient projection onto { U1 Z V1^T : Z psd }.

    Works in the full matrix space with its own local psd clamp, so it is
    independent of the block-splitting formula under test.
    """
    p = dec.p
    x = np.asarray(x, dtype=float)
    if p == 0:
        return float(np.linalg.norm(x))
    u1 = dec.ubar[:, :p]
    v1 = dec.vbar[:, :p]

    def clamp(a):
        a = (a + a.T) / 2.0
        w, q = np.linalg.eigh(a)
        return (q * np.maximum(w, 0.0)) @ q.T

    target = u1.T @ x @ v1
    sym_target = (target + target.T) / 2.0
    z = np.zeros((p, p))
    for _ in range(iters):
        z = clamp(z - 0.3 * 2.0 * (z - sym_target))
    return float(np.linalg.norm(x - u1 @ z @ v1.T))


# ---------------------------------------------------------------------------
# instance generators


def random_group_instance(rng, n_max=8, m_max=6):
    n = int(rng.integers(2, n_max + 1))
    m = int(rng.integers(1, m_max + 1))
    part = random_partition(rng, n)
    phi = rng.standard_normal((m, n)) / np.sqrt(m)
    b = rng.standard_normal(m) * float(rng.uniform(0.5, 2.0))
    mu = float(rng.uniform(0.3, 1.5))
    return ProblemSpec(phi, b, mu, part)


def random_nuclear_instance(rng, dim_max=3):
    n1 = int(rng.integers(2, dim_max + 1))
    n2 = int(rng.integers(2, dim_max + 1))
    m = int(rng.integers(2, n1 * n2 + 2))
    phi = rng.standard_normal((m, n1 * n2)) / np.sqrt(m)
    b = rng.standard_normal(m)
    mu = float(rng.uniform(0.3, 1.0))
    return ProblemSpec(phi, b, mu, NuclearShape(n1, n2))


def degenerate_group_instance(rng, n=None):
    """All-equal columns under separate absolute-value blocks.

    The fit only sees the coordinate sum, so the minimizers form a segment
    of the simplex: non-unique by construction, every block on the dual
    boundary.
    """
    n = int(rng.integers(2, 5)) if n is None else n
    m = int(rng.integers(1, 4))
    col = rng.standard_normal(m)
    col /= np.linalg.norm(col)
    phi = np.column_stack([col] * n)
    mu = float(rng.uniform(0.5, 1.5))
    scale = float(rng.uniform(1.5, 3.0))
    b = scale * mu * col
    spec = ProblemSpec(phi, b, mu, GroupPartition.singletons(n))
    # interior solution: total mass mu*(scale-1) split evenly
    xbar = np.full(n, mu * (scale - 1.0) / n)
    return spec, xbar


def degenerate_nuclear_instance(rng, n=2):
    """Design operator blind to a traceless direction of the dual unit block.

    The minimizers form a segment X + t M with M in the kernel, so the
    certificate margin is zero and multistart scatters along the segment.
    """
    u = random_orthogonal(rng, n)
    v = random_orthogonal(rng, n)
    s = np.zeros((n, n))
    s[0, 0], s[1, 1] = 1.0, -1.0
    m_dir = (u @ s @ v.T).ravel() / np.sqrt(2.0)
    basis = np.linalg.qr(
        np.column_stack([m_dir, rng.standard_normal((n * n, n * n - 1))])
    )[0]
    phi = basis[:, 1:].T  # orthonormal rows spanning the complement of m_dir
    mu = float(rng.uniform(0.5, 1.5))
    diag = rng.uniform(0.5, 2.0, n)
    xbar = u @ np.diag(diag) @ v.T
    ybar = u @ v.T
    b = phi @ xbar.ravel() + mu * (phi @ ybar.ravel())
    spec = ProblemSpec(phi, b, mu, NuclearShape(n, n))
    return spec, xbar
