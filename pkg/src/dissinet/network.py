"""Interconnections of dissipative nodes: stability conditions and simulation.

The central object is the coupled update x+ = f(x, H y) where H stacks a
linear interconnection of the per-node outputs.  When every node is
(Q_i, S_i, R_i)-dissipative, negative definiteness of

    M = Q + S H + H' S' + H' R H       (block-diagonal Q, S, R)

makes the sum of the node storages a Lyapunov function for the network, and
the positive-definite dual form built from the blockwise-inverted triples
certifies exactly the same property.  For Laplacian couplings, per-node
degree bounds (four variants, labelled a-d) imply the global condition
without any coordination beyond scalar parameters.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .dissipativity import LinearNode, SupplyRate
from .graph import WeightedGraph, laplacian_bundle
from .matrix_core import (
    block_diag,
    definiteness,
    default_eig_tol,
    eig_general,
    eig_sym,
    kron,
    pinv_sym_psd,
    require_symmetric,
    symmetrize,
)

__all__ = [
    "Interconnection",
    "NonlinearNode",
    "NetworkModel",
    "build_H",
    "global_condition",
    "dual_global_condition",
    "decentralized_check",
    "dual_decentralized_check",
    "comparison_conditions",
    "qmi_nonempty_check",
    "assemble_closed_loop",
    "StabilityReport",
    "stability_report",
    "Trajectory",
    "simulate",
    "storage_decrease_check",
]


@dataclass(frozen=True)
class Interconnection:
    """Linear interconnection u = H y.

    Kinds:

    * ``general``: explicit H.
    * ``laplacian``: H = -(L (x) I_block) from an undirected weighted graph.
    * ``skew``: H = (A - A') (x) I_block from a directed adjacency matrix;
      degenerates to zero (with a warning) for symmetric input.
    * ``feedback2``: the two-node loop [[0, I], [I, 0]].
    """

    kind: str
    H: np.ndarray = None
    graph: WeightedGraph = None
    block: int = 1
    adjacency: np.ndarray = None

    @classmethod
    def general(cls, H):
        return cls(kind="general", H=np.atleast_2d(np.asarray(H, dtype=float)))

    @classmethod
    def laplacian(cls, graph, block=1):
        return cls(kind="laplacian", graph=graph, block=int(block))

    @classmethod
    def skew(cls, adjacency, block=1):
        return cls(
            kind="skew",
            adjacency=np.atleast_2d(np.asarray(adjacency, dtype=float)),
            block=int(block),
        )

    @classmethod
    def feedback2(cls, m=1):
        return cls(kind="feedback2", block=int(m))

    def to_json_dict(self):
        if self.kind == "general":
            return {"kind": "general", "H": self.H.tolist()}
        if self.kind == "laplacian":
            return {"kind": "laplacian", "graph": self.graph.to_json_dict(),
                    "block": self.block}
        if self.kind == "skew":
            return {"kind": "skew", "adjacency": self.adjacency.tolist(),
                    "block": self.block}
        return {"kind": "feedback2", "m": self.block}

    @classmethod
    def from_json_dict(cls, d):
        kind = d["kind"]
        if kind == "general":
            return cls.general(np.array(d["H"], dtype=float))
        if kind == "laplacian":
            return cls.laplacian(WeightedGraph.from_json_dict(d["graph"]),
                                 d.get("block", 1))
        if kind == "skew":
            return cls.skew(np.array(d["adjacency"], dtype=float), d.get("block", 1))
        if kind == "feedback2":
            return cls.feedback2(d.get("m", 1))
        raise ValueError(f"unknown interconnection kind {kind!r}")


def build_H(ic, n_nodes=None, m=None):
    """Materialize the interconnection matrix."""
    if ic.kind == "general":
        return ic.H.copy()
    if ic.kind == "laplacian":
        b = laplacian_bundle(ic.graph)
        return -kron(b.laplacian, np.eye(ic.block))
    if ic.kind == "skew":
        A = ic.adjacency
        skew_part = A - A.T
        if np.max(np.abs(skew_part)) <= 1e-14 * (1.0 + np.max(np.abs(A))):
            warnings.warn(
                "skew interconnection of a symmetric adjacency is identically zero",
                stacklevel=2,
            )
        return kron(skew_part, np.eye(ic.block))
    if ic.kind == "feedback2":
        if n_nodes is not None and n_nodes != 2:
            raise ValueError("feedback2 interconnection needs exactly two nodes")
        eye = np.eye(ic.block)
        zero = np.zeros((ic.block, ic.block))
        return np.block([[zero, eye], [eye, zero]])
    raise ValueError(f"unknown interconnection kind {ic.kind!r}")


@dataclass(frozen=True)
class NonlinearNode:
    """Caller-supplied node x+ = update(x, u), y = output(x), fixing the origin.

    The maps are spot-checked at construction (update(0, 0) = 0 and
    output(0) = 0); the caller asserts dissipativity properties separately.
    """

    state_dim: int
    input_dim: int
    output_dim: int
    update: callable = field(compare=False)
    output: callable = field(compare=False)

    def __post_init__(self):
        x0 = np.zeros(self.state_dim)
        u0 = np.zeros(self.input_dim)
        xn = np.asarray(self.update(x0, u0), dtype=float).reshape(-1)
        if xn.size != self.state_dim or np.max(np.abs(xn), initial=0.0) > 1e-12:
            raise ValueError("update map must fix the origin: update(0, 0) = 0")
        y0 = np.asarray(self.output(x0), dtype=float).reshape(-1)
        if y0.size != self.output_dim or np.max(np.abs(y0), initial=0.0) > 1e-12:
            raise ValueError("output map must fix the origin: output(0) = 0")

    @property
    def n(self):
        return self.state_dim

    @property
    def m(self):
        return self.input_dim

    @property
    def p(self):
        return self.output_dim


@dataclass
class NetworkModel:
    """Nodes plus interconnection, optionally with controllers and certificates."""

    nodes: list
    interconnection: Interconnection
    supplies: list = None
    controllers: list = None
    certificates: list = None

    def __post_init__(self):
        if not self.nodes:
            raise ValueError("network needs at least one node")
        m_total = sum(node.m for node in self.nodes)
        p_total = sum(node.p for node in self.nodes)
        H = build_H(self.interconnection, n_nodes=len(self.nodes),
                    m=self.nodes[0].m)
        if H.shape != (m_total, p_total):
            raise ValueError(
                f"interconnection is {H.shape}, nodes need {m_total}x{p_total}"
            )
        if self.supplies is not None and len(self.supplies) != len(self.nodes):
            raise ValueError("one supply rate per node required")
        if self.controllers is not None and len(self.controllers) != len(self.nodes):
            raise ValueError("one controller entry per node required")
        if self.certificates is not None and len(self.certificates) != len(self.nodes):
            raise ValueError("one certificate entry per node required")

    @property
    def n_nodes(self):
        return len(self.nodes)

    def H(self):
        return build_H(self.interconnection, n_nodes=len(self.nodes),
                       m=self.nodes[0].m)

    def to_json_dict(self):
        d = {
            "nodes": [
                node.to_json_dict() if isinstance(node, LinearNode)
                else {"nonlinear": True, "n": node.n, "m": node.m, "p": node.p}
                for node in self.nodes
            ],
            "interconnection": self.interconnection.to_json_dict(),
        }
        if self.supplies is not None:
            d["supplies"] = [s.to_json_dict() for s in self.supplies]
        if self.controllers is not None:
            d["controllers"] = [
                None if K is None else np.atleast_2d(np.asarray(K)).tolist()
                for K in self.controllers
            ]
        return d

    @classmethod
    def from_json_dict(cls, d):
        nodes = []
        for nd in d["nodes"]:
            if nd.get("nonlinear"):
                raise ValueError(
                    "nonlinear nodes cannot be reconstructed from JSON; "
                    "build them in code"
                )
            nodes.append(LinearNode.from_json_dict(nd))
        supplies = None
        if "supplies" in d:
            supplies = [SupplyRate.from_json_dict(s) for s in d["supplies"]]
        controllers = None
        if "controllers" in d:
            controllers = [
                None if K is None else np.atleast_2d(np.array(K, dtype=float))
                for K in d["controllers"]
            ]
        return cls(
            nodes=nodes,
            interconnection=Interconnection.from_json_dict(d["interconnection"]),
            supplies=supplies,
            controllers=controllers,
        )


def global_condition(supplies, H, tol=None):
    """Network stability test: M = Q + SH + H'S' + H'RH must be ND.

    Q, S, R are block-diagonal compositions of the per-node triples.
    Returns (M, verdict) so callers can inspect the margin.
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    Q = block_diag([s.Q for s in supplies])
    S = block_diag([s.S for s in supplies])
    R = block_diag([s.R for s in supplies])
    if H.shape != (R.shape[0], Q.shape[0]):
        raise ValueError(
            f"H must be {R.shape[0]}x{Q.shape[0]}, got {H.shape}"
        )
    M = symmetrize(Q + S @ H + H.T @ S.T + H.T @ R @ H)
    return M, definiteness(M, "ND", tol)


def dual_global_condition(dual_supplies, H, tol=None):
    """Dual form of the network test: H Qd H' - H Sd - Sd' H' + Rd must be PD.

    Requires blockwise dual Q < 0 and dual R > 0; under those signs the
    verdict coincides with :func:`global_condition` on the blockwise-inverted
    primal triples.
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    for i, ds in enumerate(dual_supplies):
        if not definiteness(ds.Q, "ND", tol).satisfied:
            raise ValueError(f"dual supply {i} violates Q < 0")
        if not definiteness(ds.R, "PD", tol).satisfied:
            raise ValueError(f"dual supply {i} violates R > 0")
    Qd = block_diag([s.Q for s in dual_supplies])
    Sd = block_diag([s.S for s in dual_supplies])
    Rd = block_diag([s.R for s in dual_supplies])
    M = symmetrize(H @ Qd @ H.T - H @ Sd - Sd.T @ H.T + Rd)
    return M, definiteness(M, "PD", tol)


def _equality(A, B, tol):
    return float(np.max(np.abs(A - B))) <= tol


def decentralized_check(degree, sr, variant, alpha=None, s_shared=None, tol=None):
    """Per-node degree bounds that imply the global condition under
    Laplacian coupling.

    Variants (d = weighted degree of the node, all blocks square):

    * a: S = (alpha/2) I,  0 < R < I/(2d),  Q < -2 d max(1-alpha, 0) I
    * b: S = s_shared >= 0 (same for all nodes),  0 < R < I/(2d),  Q < -2 d I
    * c: 0 <= S < I/(3d),  0 < R < I/(2d),  Q + S < -4 d I
    * d: S >= 0,  R + S < I/(2d),  Q < -2 S,  Q < -4 d I
    """
    if degree <= 0:
        raise ValueError(f"weighted degree must be positive, got {degree}")
    p, m = sr.p, sr.m
    if p != m:
        raise ValueError("degree bounds require square supply blocks (m = p)")
    eye = np.eye(m)
    eq_tol = tol if tol is not None else 1e-9 * (1.0 + float(np.max(np.abs(sr.S))))

    def pd(M):
        return definiteness(symmetrize(M), "PD", tol).satisfied

    def psd(M):
        return definiteness(symmetrize(M), "PSD", tol).satisfied

    if variant == "a":
        if alpha is None:
            raise ValueError("variant 'a' needs the shared scalar alpha")
        alpha_t = max(1.0 - alpha, 0.0)
        return (
            _equality(sr.S, 0.5 * alpha * eye, eq_tol)
            and pd(sr.R)
            and pd(eye / (2.0 * degree) - sr.R)
            and pd(-sr.Q - 2.0 * degree * alpha_t * eye)
        )
    if variant == "b":
        if s_shared is None:
            raise ValueError("variant 'b' needs the shared matrix s_shared")
        s_shared = require_symmetric(s_shared, "s_shared")
        return (
            _equality(sr.S, s_shared, eq_tol)
            and psd(s_shared)
            and pd(sr.R)
            and pd(eye / (2.0 * degree) - sr.R)
            and pd(-sr.Q - 2.0 * degree * eye)
        )
    if variant == "c":
        S = require_symmetric(sr.S, "S")
        return (
            psd(S)
            and pd(eye / (3.0 * degree) - S)
            and pd(sr.R)
            and pd(eye / (2.0 * degree) - sr.R)
            and pd(-sr.Q - S - 4.0 * degree * eye)
        )
    if variant == "d":
        S = require_symmetric(sr.S, "S")
        return (
            psd(S)
            and pd(eye / (2.0 * degree) - sr.R - S)
            and pd(-sr.Q - 2.0 * S)
            and pd(-sr.Q - 4.0 * degree * eye)
        )
    raise ValueError(f"unknown variant {variant!r}")


def dual_decentralized_check(degree, dsr, variant, alpha=None, s_shared=None,
                             tol=None):
    """Degree bounds in the dual triple; equivalent to
    :func:`decentralized_check` under (Q, S, R) = (-Rd, Sd', -Qd).

    Variants:

    * a: Sd = (alpha/2) I,  -I/(2d) < Qd < 0,  Rd > 2 d max(1-alpha, 0) I
    * b: Sd = s_shared >= 0,  -I/(2d) < Qd < 0,  Rd > 2 d I
    * c: 0 <= Sd < I/(3d),  -I/(2d) < Qd < 0,  Rd - Sd > 4 d I
    * d: Sd >= 0,  Qd - Sd > -I/(2d),  Rd > 2 Sd,  Rd > 4 d I
    """
    primal = SupplyRate(-dsr.R, dsr.S.T, -dsr.Q)
    return decentralized_check(degree, primal, variant, alpha=alpha,
                               s_shared=s_shared, tol=tol)


def comparison_conditions(bundle, which, Q_hat, R_hat, C=None, tol=None):
    """Virtual-output network conditions from the passivity literature.

    ``which`` selects the test:

    * ``"state_strict"``: C' L_ext C - C' L_ext' Rh L_ext C + Qh > 0, the
      condition from strict passivity with state-weighted rates (needs the
      stacked output map C).
    * ``"output_strict"``: L_ext - L_ext' Rh L_ext + Qh > 0, the C-free
      condition from output strict passivity.
    * ``"diagonal"``: per-node diagonal bounds
      0 < Rh_i < I/(2 d_i) and 0 < Qh_i < d_i I, which imply the
      output-strict condition.

    Q_hat and R_hat are per-node lists of symmetric blocks.
    """
    R_blocks = [require_symmetric(R, f"R_hat[{i}]") for i, R in enumerate(R_hat)]
    Q_blocks = [require_symmetric(Q, f"Q_hat[{i}]") for i, Q in enumerate(Q_hat)]
    if len(Q_blocks) != bundle.n_nodes or len(R_blocks) != bundle.n_nodes:
        raise ValueError("need one Q_hat and R_hat block per node")
    block = R_blocks[0].shape[0]
    L_ext = kron(bundle.laplacian, np.eye(block))
    Rh = block_diag(R_blocks)
    Qh = block_diag(Q_blocks)

    if which == "state_strict":
        if C is None:
            raise ValueError("state_strict comparison needs the stacked output map C")
        C = np.atleast_2d(np.asarray(C, dtype=float))
        if C.shape[0] != L_ext.shape[0]:
            raise ValueError(
                f"C must have {L_ext.shape[0]} rows, got {C.shape[0]}"
            )
        M = C.T @ L_ext @ C - C.T @ L_ext.T @ Rh @ L_ext @ C + Qh
        return definiteness(symmetrize(M), "PD", tol).satisfied
    if which == "output_strict":
        M = L_ext - L_ext.T @ Rh @ L_ext + Qh
        return definiteness(symmetrize(M), "PD", tol).satisfied
    if which == "diagonal":
        for i, (Qb, Rb) in enumerate(zip(Q_blocks, R_blocks)):
            if np.max(np.abs(Qb - np.diag(np.diag(Qb)))) > 1e-12:
                return False
            if np.max(np.abs(Rb - np.diag(np.diag(Rb)))) > 1e-12:
                return False
            d_i = bundle.degrees[i]
            eye = np.eye(Rb.shape[0])
            ok = (
                definiteness(Rb, "PD", tol).satisfied
                and definiteness(eye / (2.0 * d_i) - Rb, "PD", tol).satisfied
                and definiteness(Qb, "PD", tol).satisfied
                and definiteness(d_i * np.eye(Qb.shape[0]) - Qb, "PD", tol).satisfied
            )
            if not ok:
                return False
        return True
    raise ValueError(f"unknown comparison condition {which!r}")


def qmi_nonempty_check(supplies, tol=None):
    """Necessary condition for the global test to admit any interconnection:
    S' pinv(R) S - Q must be PD for the stacked block-diagonal triples."""
    Q = block_diag([s.Q for s in supplies])
    S = block_diag([s.S for s in supplies])
    R = block_diag([s.R for s in supplies])
    Rsym = symmetrize(R)
    w, _ = eig_sym(Rsym)
    if w[0] >= -default_eig_tol(w):
        R_pinv = pinv_sym_psd(Rsym)
    else:
        R_pinv = np.linalg.pinv(Rsym)
    M = symmetrize(S.T @ R_pinv @ S - Q)
    return definiteness(M, "PD", tol).satisfied


def assemble_closed_loop(nodes, controllers, H):
    """Global state matrix blockdiag(A_i + B_i K_i) + G H C of the coupled loop."""
    if len(controllers) != len(nodes):
        raise ValueError("one controller per node required")
    closed = []
    for i, (node, K) in enumerate(zip(nodes, controllers)):
        if not isinstance(node, LinearNode):
            raise ValueError(f"node {i} is not linear")
        if K is None:
            raise ValueError(f"node {i} is missing a controller")
        closed.append(node.closed_loop_a(K))
    A = block_diag(closed)
    G = block_diag([node.G for node in nodes])
    C = block_diag([node.C for node in nodes])
    H = np.atleast_2d(np.asarray(H, dtype=float))
    return A + G @ H @ C


@dataclass(frozen=True)
class StabilityReport:
    eigenvalues: np.ndarray
    margin: float
    stable: bool
    domain: str

    @property
    def spectral_radius(self):
        if self.domain != "dt":
            raise AttributeError("spectral radius is a DT quantity")
        return self.margin

    @property
    def spectral_abscissa(self):
        if self.domain != "ct":
            raise AttributeError("spectral abscissa is a CT quantity")
        return self.margin


def stability_report(M, domain, tol=1e-9):
    """Eigenvalues plus a stability verdict.

    DT: stable iff the spectral radius is below 1 - tol.
    CT: stable iff the spectral abscissa is below -tol.
    """
    eigs = eig_general(M)
    if domain == "dt":
        margin = float(np.max(np.abs(eigs)))
        stable = margin < 1.0 - tol
    elif domain == "ct":
        margin = float(np.max(eigs.real))
        stable = margin < -tol
    else:
        raise ValueError(f"domain must be 'ct' or 'dt', got {domain!r}")
    return StabilityReport(eigenvalues=eigs, margin=margin, stable=stable,
                           domain=domain)


@dataclass
class Trajectory:
    """Recorded network run.  Arrays are indexed [step, component]."""

    states: np.ndarray
    outputs: np.ndarray
    inputs: np.ndarray
    storage: np.ndarray = None
    node_slices: list = None
    truncated: bool = False
    message: str = ""

    @property
    def n_steps(self):
        return self.states.shape[0] - 1


def _node_update(node, K, x, u):
    if isinstance(node, LinearNode):
        if node.time_domain != "dt":
            raise ValueError("simulation requires DT nodes")
        x_next = node.A @ x + node.G @ u
        if K is not None:
            x_next = x_next + node.B @ (K @ x)
        return x_next
    return np.asarray(node.update(x, u), dtype=float).reshape(-1)


def _node_output(node, x):
    if isinstance(node, LinearNode):
        return node.C @ x
    return np.asarray(node.output(x), dtype=float).reshape(-1)


def simulate(net, x0, steps, overflow_limit=1e12):
    """Iterate u_k = H y_k followed by the per-node updates.

    Controllers stored on the model are applied to linear nodes.  When
    certificates are present the summed storage V(x_k) = sum x_i' P_i^{-1} x_i
    is recorded.  Non-finite or overflowing states truncate the run with a
    diagnostic message instead of raising.
    """
    H = net.H()
    dims = [node.n for node in net.nodes]
    splits = np.cumsum(dims)[:-1]
    total = int(np.sum(dims))
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.size != total:
        raise ValueError(f"x0 must have {total} entries, got {x0.size}")
    controllers = net.controllers or [None] * net.n_nodes
    storages = None
    if net.certificates is not None and all(c is not None for c in net.certificates):
        storages = [c.storage_matrix for c in net.certificates]

    m_total = sum(node.m for node in net.nodes)
    p_total = sum(node.p for node in net.nodes)
    states = np.zeros((steps + 1, total))
    outputs = np.zeros((steps + 1, p_total))
    inputs = np.zeros((steps + 1, m_total))
    storage = np.zeros(steps + 1) if storages is not None else None

    def storage_value(x_parts):
        return sum(float(x @ P @ x) for x, P in zip(x_parts, storages))

    x_parts = np.split(x0.copy(), splits)
    truncated = False
    message = ""
    last = steps
    for k in range(steps + 1):
        y_parts = [_node_output(node, x) for node, x in zip(net.nodes, x_parts)]
        y = np.concatenate(y_parts)
        u = H @ y
        states[k] = np.concatenate(x_parts)
        outputs[k] = y
        inputs[k] = u
        if storage is not None:
            storage[k] = storage_value(x_parts)
        if not np.all(np.isfinite(states[k])) or np.max(np.abs(states[k])) > overflow_limit:
            truncated = True
            message = f"state overflow at step {k}; trajectory truncated"
            last = k
            break
        if k == steps:
            break
        u_parts = np.split(u, np.cumsum([node.m for node in net.nodes])[:-1])
        x_parts = [
            _node_update(node, K, x, uu)
            for node, K, x, uu in zip(net.nodes, controllers, x_parts, u_parts)
        ]
    end = last + 1
    return Trajectory(
        states=states[:end],
        outputs=outputs[:end],
        inputs=inputs[:end],
        storage=None if storage is None else storage[:end],
        node_slices=[slice(0 if i == 0 else splits[i - 1], s)
                     for i, s in enumerate(np.cumsum(dims))],
        truncated=truncated,
        message=message,
    )


def storage_decrease_check(traj):
    """Largest single-step increase of the recorded storage (0.0 if none)."""
    if traj.storage is None:
        raise ValueError("trajectory has no storage column")
    if traj.storage.size < 2:
        return 0.0
    return float(np.max(np.diff(traj.storage)))
