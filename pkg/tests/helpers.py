"""Shared fuzz generators for the test suite.

All sampling is driven by explicit numpy generators so every test run is
reproducible.  The supply-rate samplers draw triples strictly inside one of
the four degree-bound variants, keeping at least ``margin`` of slack from
every bound, which is what the soundness fuzz suites require.
"""

import numpy as np

from dissinet.dissipativity import DualSupplyRate, SupplyRate
from dissinet.graph import WeightedGraph
from dissinet.matrix_core import symmetrize


def random_sym_with_eigs(rng, n, lo, hi):
    """Random symmetric matrix with eigenvalues uniform in [lo, hi]."""
    lam = rng.uniform(lo, hi, size=n)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return symmetrize((Q * lam) @ Q.T)


def random_psd(rng, n, hi=2.0):
    return random_sym_with_eigs(rng, n, 0.0, hi)


def random_connected_graph(rng, n_max=12, n_min=2, w_lo=0.1, w_hi=2.0):
    """Random spanning tree plus a few extra edges; always connected."""
    n = int(rng.integers(n_min, n_max + 1))
    edges = {}
    for v in range(1, n):
        u = int(rng.integers(0, v))
        edges[(u, v)] = float(rng.uniform(w_lo, w_hi))
    for i in range(n):
        for j in range(i + 1, n):
            if (i, j) not in edges and rng.random() < 0.6 / n:
                edges[(i, j)] = float(rng.uniform(w_lo, w_hi))
    return WeightedGraph(n, tuple((i, j, w) for (i, j), w in edges.items()))


def sample_primal_in_variant(rng, variant, degree, m, margin=1e-3,
                             alpha=None, s_shared=None):
    """Supply triple strictly inside one degree-bound variant.

    Every bound of the variant holds with at least ``margin`` of eigenvalue
    slack.  Returns (SupplyRate, alpha, s_shared); the shared parameters are
    drawn when not supplied (variant a: alpha, variant b: s_shared).
    """
    d = float(degree)
    cap_r = 1.0 / (2.0 * d)
    if cap_r <= 2 * margin:
        raise ValueError(f"degree {d} leaves no room inside the R bound")
    if variant == "a":
        if alpha is None:
            alpha = float(rng.uniform(0.0, 2.0))
        alpha_t = max(1.0 - alpha, 0.0)
        S = 0.5 * alpha * np.eye(m)
        R = random_sym_with_eigs(rng, m, margin, cap_r - margin)
        top = -2.0 * d * alpha_t - margin
        Q = random_sym_with_eigs(rng, m, top - 4.0, top)
    elif variant == "b":
        if s_shared is None:
            s_shared = random_sym_with_eigs(rng, m, margin, 1.5)
        S = s_shared.copy()
        R = random_sym_with_eigs(rng, m, margin, cap_r - margin)
        top = -2.0 * d - margin
        Q = random_sym_with_eigs(rng, m, top - 4.0, top)
    elif variant == "c":
        cap_s = 1.0 / (3.0 * d)
        S = random_sym_with_eigs(rng, m, margin, cap_s - margin)
        R = random_sym_with_eigs(rng, m, margin, cap_r - margin)
        Q = symmetrize(-4.0 * d * np.eye(m) - S
                       - random_sym_with_eigs(rng, m, margin, 3.0))
    elif variant == "d":
        S = random_sym_with_eigs(rng, m, margin, 0.8)
        W = random_sym_with_eigs(rng, m, -1.0, cap_r - margin)
        R = symmetrize(W - S)
        Q = symmetrize(-2.0 * S - 4.0 * d * np.eye(m)
                       - random_sym_with_eigs(rng, m, margin, 2.0))
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return SupplyRate(Q, S, R), alpha, s_shared


def sample_dual_in_variant(rng, variant, degree, m, margin=1e-3,
                           alpha=None, s_shared=None):
    """Dual triple strictly inside one dual degree-bound variant."""
    d = float(degree)
    cap = 1.0 / (2.0 * d)
    if cap <= 2 * margin:
        raise ValueError(f"degree {d} leaves no room inside the dual Q window")
    if variant == "a":
        if alpha is None:
            alpha = float(rng.uniform(0.0, 2.0))
        alpha_t = max(1.0 - alpha, 0.0)
        Sd = 0.5 * alpha * np.eye(m)
        Qd = random_sym_with_eigs(rng, m, -cap + margin, -margin)
        lo = 2.0 * d * alpha_t + margin
        Rd = random_sym_with_eigs(rng, m, lo, lo + 5.0)
    elif variant == "b":
        if s_shared is None:
            s_shared = random_sym_with_eigs(rng, m, margin, 1.5)
        Sd = s_shared.copy()
        Qd = random_sym_with_eigs(rng, m, -cap + margin, -margin)
        lo = 2.0 * d + margin
        Rd = random_sym_with_eigs(rng, m, lo, lo + 5.0)
    elif variant == "c":
        Sd = random_sym_with_eigs(rng, m, margin, 1.0 / (3.0 * d) - margin)
        Qd = random_sym_with_eigs(rng, m, -cap + margin, -margin)
        Rd = symmetrize(Sd + 4.0 * d * np.eye(m)
                        + random_sym_with_eigs(rng, m, margin, 5.0))
    elif variant == "d":
        Sd = random_sym_with_eigs(rng, m, margin, 1.0 / (4.0 * d))
        bump = random_sym_with_eigs(rng, m, margin, 1.0 / (8.0 * d))
        Qd = symmetrize(Sd - cap * np.eye(m) + bump)
        Rd = symmetrize(2.0 * Sd + 4.0 * d * np.eye(m)
                        + random_sym_with_eigs(rng, m, margin, 5.0))
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return DualSupplyRate(Qd, Sd, Rd), alpha, s_shared


def random_stable_node(rng, n, rho=0.75, g_scale=0.3):
    """Random DT node with spectral radius ``rho`` and a weak coupling channel."""
    from dissinet.dissipativity import LinearNode

    A = rng.standard_normal((n, n))
    radius = max(abs(np.linalg.eigvals(A)))
    A = A * (rho / radius) if radius > 0 else A
    B = rng.standard_normal((n, 1))
    G = g_scale * rng.standard_normal((n, 1))
    C = rng.standard_normal((1, n))
    return LinearNode(A, B, G, C, time_domain="dt")
