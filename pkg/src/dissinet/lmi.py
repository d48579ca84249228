"""Affine matrix-inequality feasibility problems with independent verification.

A problem is a set of named matrix variables plus constraints of the form
``expr(vars) >= margin * I`` or ``expr(vars) <= -margin * I`` where every
expression is affine and symmetric-valued.  ``solve`` searches for a
feasible assignment; its contract is not the search path but the
verification step: a solution is only ever reported as ``Verified`` after
every constraint has been re-evaluated from scratch and passed an
eigenvalue check.  The solver never claims infeasibility; when the budget
runs out the status is ``Unknown``.

Search strategy, in order:

1. a deterministic scan of cheap candidate assignments (scaled identities
   for symmetric variables, zero for rectangular ones),
2. spectral subgradient ascent on the minimum constraint eigenvalue, using
   the eigenvector of the active constraint and diminishing steps,
3. alternating projections between the affine expression manifold and the
   product of shifted PSD cones (the workhorse in practice), and
4. seeded random restarts of 2 and 3.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .matrix_core import eig_sym, symmetrize

__all__ = [
    "MatrixVariable",
    "SandwichTerm",
    "AffineMatrixExpr",
    "BlockForm",
    "LmiConstraint",
    "LmiProblem",
    "LmiSolution",
    "SolveOptions",
    "ConstraintReport",
    "evaluate",
    "verify",
    "solve",
]

VERIFY_SLACK = 1e-9


@dataclass(frozen=True)
class MatrixVariable:
    """Named decision variable, either symmetric (square) or rectangular."""

    name: str
    shape: tuple
    kind: str = "symmetric"

    def __post_init__(self):
        r, c = self.shape
        if self.kind not in ("symmetric", "rectangular"):
            raise ValueError(f"unknown variable kind {self.kind!r}")
        if self.kind == "symmetric" and r != c:
            raise ValueError(f"symmetric variable {self.name!r} must be square")
        if r < 1 or c < 1:
            raise ValueError(f"variable {self.name!r} has empty shape {self.shape}")

    @property
    def dof(self):
        r, c = self.shape
        return r * (r + 1) // 2 if self.kind == "symmetric" else r * c

    def basis(self):
        """Basis matrices spanning the variable space."""
        r, c = self.shape
        out = []
        if self.kind == "symmetric":
            for i in range(r):
                for j in range(i, r):
                    B = np.zeros((r, r))
                    B[i, j] = 1.0
                    B[j, i] = 1.0
                    out.append(B)
        else:
            for i in range(r):
                for j in range(c):
                    B = np.zeros((r, c))
                    B[i, j] = 1.0
                    out.append(B)
        return out

    def pack(self, value):
        value = np.atleast_2d(np.asarray(value, dtype=float))
        if value.shape != self.shape:
            raise ValueError(
                f"value for {self.name!r} must be {self.shape}, got {value.shape}"
            )
        if self.kind == "symmetric":
            r = self.shape[0]
            return np.array([value[i, j] for i in range(r) for j in range(i, r)])
        return value.reshape(-1).copy()

    def unpack(self, coeffs):
        r, c = self.shape
        if self.kind == "symmetric":
            V = np.zeros((r, r))
            k = 0
            for i in range(r):
                for j in range(i, r):
                    V[i, j] = coeffs[k]
                    V[j, i] = coeffs[k]
                    k += 1
            return V
        return np.asarray(coeffs, dtype=float).reshape(r, c)


@dataclass(frozen=True)
class SandwichTerm:
    """One linear term ``scale * sym(L @ op(V) @ R)`` of an affine expression."""

    var: str
    left: np.ndarray
    right: np.ndarray
    transpose: bool = False
    scale: float = 1.0

    def apply(self, value):
        V = value.T if self.transpose else value
        X = self.left @ V @ self.right
        return self.scale * 0.5 * (X + X.T)


class AffineMatrixExpr:
    """Symmetric-matrix-valued affine expression over named variables."""

    def __init__(self, constant, terms=()):
        self.constant = symmetrize(constant)
        self.dim = self.constant.shape[0]
        self.terms = list(terms)
        for t in self.terms:
            if t.left.shape != (self.dim, t.left.shape[1]):
                raise ValueError("term left factor has wrong row count")
            if t.right.shape[1] != self.dim:
                raise ValueError("term right factor has wrong column count")

    def variables(self):
        return {t.var for t in self.terms}

    def evaluate(self, assignment):
        out = self.constant.copy()
        for t in self.terms:
            if t.var not in assignment:
                raise KeyError(f"assignment missing variable {t.var!r}")
            out += t.apply(np.atleast_2d(np.asarray(assignment[t.var], dtype=float)))
        return symmetrize(out)

    def negated(self):
        neg_terms = [
            SandwichTerm(t.var, t.left, t.right, t.transpose, -t.scale)
            for t in self.terms
        ]
        return AffineMatrixExpr(-self.constant, neg_terms)


class BlockForm:
    """Builder for block-partitioned affine symmetric expressions.

    Content placed at an off-diagonal block (i, j) is mirrored transposed
    into (j, i); diagonal content is symmetrized.
    """

    def __init__(self, block_sizes):
        self.sizes = [int(s) for s in block_sizes]
        if any(s < 1 for s in self.sizes):
            raise ValueError("block sizes must be positive")
        self.dim = sum(self.sizes)
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)])
        self._constant = np.zeros((self.dim, self.dim))
        self._terms = []

    def _selector(self, i):
        E = np.zeros((self.dim, self.sizes[i]))
        o = self.offsets[i]
        E[o : o + self.sizes[i], :] = np.eye(self.sizes[i])
        return E

    def put_const(self, i, j, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        oi, oj = self.offsets[i], self.offsets[j]
        si, sj = self.sizes[i], self.sizes[j]
        if X.shape != (si, sj):
            raise ValueError(f"block ({i},{j}) expects {si}x{sj}, got {X.shape}")
        if i == j:
            self._constant[oi : oi + si, oi : oi + si] += 0.5 * (X + X.T)
        else:
            self._constant[oi : oi + si, oj : oj + sj] += X
            self._constant[oj : oj + sj, oi : oi + si] += X.T
        return self

    def put_var(self, i, j, name, left=None, right=None, transpose=False, scale=1.0):
        """Place ``scale * (left @ op(V) @ right)`` at block (i, j)."""
        Ei, Ej = self._selector(i), self._selector(j)
        L = Ei if left is None else Ei @ np.atleast_2d(np.asarray(left, dtype=float))
        R = Ej.T if right is None else np.atleast_2d(np.asarray(right, dtype=float)) @ Ej.T
        eff_scale = float(scale) * (1.0 if i == j else 2.0)
        self._terms.append(SandwichTerm(name, L, R, transpose, eff_scale))
        return self

    def expr(self):
        return AffineMatrixExpr(self._constant, tuple(self._terms))


@dataclass(frozen=True)
class LmiConstraint:
    """One constraint ``expr >= margin*I`` (geq) or ``expr <= -margin*I`` (leq).

    ``margin=None`` defers to the problem-level margin.
    """

    expr: AffineMatrixExpr
    sense: str = "geq"
    margin: float = None
    name: str = ""

    def __post_init__(self):
        if self.sense not in ("geq", "leq"):
            raise ValueError(f"sense must be 'geq' or 'leq', got {self.sense!r}")

    def normalized_expr(self):
        return self.expr if self.sense == "geq" else self.expr.negated()


@dataclass
class LmiProblem:
    variables: list
    constraints: list
    margin: float = 0.0

    def __post_init__(self):
        if self.margin < 0:
            raise ValueError("problem margin must be nonnegative")
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise ValueError("duplicate variable names")
        declared = set(names)
        for c in self.constraints:
            extra = c.expr.variables() - declared
            if extra:
                raise ValueError(f"constraint references undeclared variables {extra}")
        if not self.constraints:
            raise ValueError("problem has no constraints")

    def required_margin(self, constraint):
        return self.margin if constraint.margin is None else constraint.margin


@dataclass(frozen=True)
class ConstraintReport:
    index: int
    name: str
    min_eig: float
    required: float
    tol: float = VERIFY_SLACK

    @property
    def ok(self):
        return self.min_eig >= self.required - self.tol


@dataclass
class LmiSolution:
    assignment: dict
    achieved_margin: float
    status: str
    reports: list = field(default_factory=list)

    @property
    def verified(self):
        return self.status == "Verified"


@dataclass(frozen=True)
class SolveOptions:
    # restarts counts extra descent attempts after the first; the first of
    # them is the deterministic long-subgradient escalation, the rest are
    # seeded random restarts.
    max_iters: int = 3000
    restarts: int = 3
    rng_seed: int = 0
    target_margin: float = None
    subgradient_iters: int = 120
    initial: dict = None  # warm-start assignment, tried first and used as seed point


def evaluate(expr, assignment):
    """Evaluate an affine expression at an assignment (exact, symmetrized)."""
    return expr.evaluate(assignment)


def verify(problem, assignment, tol=VERIFY_SLACK, target_margin=None):
    """Re-evaluate every constraint and report its normalized minimum eigenvalue.

    Independent of any solver state: uses only the expression definitions,
    the assignment, and the symmetric eigensolver.
    """
    required = _required_margins(problem, target_margin)
    reports = []
    for idx, c in enumerate(problem.constraints):
        M = c.normalized_expr().evaluate(assignment)
        w, _ = eig_sym(M)
        reports.append(
            ConstraintReport(
                index=idx,
                name=c.name or f"constraint[{idx}]",
                min_eig=float(w[0]),
                required=float(required[idx]),
                tol=tol,
            )
        )
    return reports


def _required_margins(problem, target_margin):
    """Per-constraint required floor; a solver-level target overrides the
    problem margin but never a per-constraint override."""
    out = []
    for c in problem.constraints:
        if c.margin is not None:
            out.append(c.margin)
        elif target_margin is not None:
            out.append(target_margin)
        else:
            out.append(problem.margin)
    return np.asarray(out, dtype=float)


class _Compiled:
    """Flattened view: x in R^d, constraint j evaluates to mat(A_j x + c_j)."""

    def __init__(self, problem, target_margin):
        self.variables = list(problem.variables)
        self.offsets = {}
        d = 0
        for v in self.variables:
            self.offsets[v.name] = d
            d += v.dof
        self.dim = d
        self.norm_exprs = [c.normalized_expr() for c in problem.constraints]
        self.required = _required_margins(problem, target_margin)
        self.sizes = [e.dim for e in self.norm_exprs]
        self.consts = [e.constant for e in self.norm_exprs]
        self.maps = []
        var_by_name = {v.name: v for v in self.variables}
        for e in self.norm_exprs:
            A = np.zeros((e.dim * e.dim, d))
            for t in e.terms:
                v = var_by_name[t.var]
                base = self.offsets[v.name]
                for k, Bk in enumerate(v.basis()):
                    A[:, base + k] += t.apply(Bk).reshape(-1)
            self.maps.append(A)
        self.stacked_map = np.vstack(self.maps)
        self.stacked_const = np.concatenate([c.reshape(-1) for c in self.consts])
        # Min-norm least-squares back-projection onto the expression manifold.
        self.pinv_map = np.linalg.pinv(self.stacked_map, rcond=1e-12)
        self.scales = np.array(
            [1.0 + float(np.max(np.abs(c))) if c.size else 1.0 for c in self.consts]
        )

    def pack(self, assignment):
        x = np.zeros(self.dim)
        for v in self.variables:
            x[self.offsets[v.name] : self.offsets[v.name] + v.dof] = v.pack(
                assignment[v.name]
            )
        return x

    def unpack(self, x):
        out = {}
        for v in self.variables:
            out[v.name] = v.unpack(x[self.offsets[v.name] : self.offsets[v.name] + v.dof])
        return out

    def eval_mats(self, x):
        mats = []
        for A, c, s in zip(self.maps, self.consts, self.sizes):
            mats.append(symmetrize((A @ x).reshape(s, s) + c))
        return mats

    def slacks(self, x):
        """Per-constraint min eigenvalue minus required margin."""
        out = np.empty(len(self.maps))
        for j, M in enumerate(self.eval_mats(x)):
            w = np.linalg.eigvalsh(M)
            out[j] = w[0] - self.required[j]
        return out

    def worst(self, x):
        s = self.slacks(x)
        j = int(np.argmin(s))
        return j, float(s[j])


def _candidate_assignments(compiled):
    """Deterministic cheap candidates: identities scaled by the mean
    constant-term norm and a coarse magnitude grid, rectangulars at zero."""
    base = float(np.mean(compiled.scales))
    for kappa in (base, 1.0, 0.0, 1e-2, 0.1, 10.0, 100.0, 1e3, 1e-3):
        assignment = {}
        for v in compiled.variables:
            if v.kind == "symmetric":
                assignment[v.name] = kappa * np.eye(v.shape[0])
            else:
                assignment[v.name] = np.zeros(v.shape)
        yield assignment


def _subgradient_ascent(compiled, x0, iters):
    """Maximize min_j (lambda_min_j(x) - b_j) by spectral subgradient steps."""
    x = x0.copy()
    best_x = x.copy()
    _, best_val = compiled.worst(x)
    step0 = 0.5 * (1.0 + float(np.linalg.norm(x0)))
    for k in range(iters):
        mats = compiled.eval_mats(x)
        slack = np.array(
            [np.linalg.eigvalsh(M)[0] for M in mats]
        ) - compiled.required
        j = int(np.argmin(slack))
        val = float(slack[j])
        if val > best_val:
            best_val = val
            best_x = x.copy()
        if val > 0:
            break
        w, V = np.linalg.eigh(mats[j])
        v = V[:, 0]
        g = compiled.maps[j].T @ np.outer(v, v).reshape(-1)
        gn = float(np.linalg.norm(g))
        if gn < 1e-14:
            break
        x = x + (step0 / np.sqrt(1.0 + k)) * (g / gn)
    return best_x, best_val


def _alternating_projections(compiled, x0, max_iters):
    """Project between the PSD slabs (eigenvalue clipping above a lifted
    floor) and the affine manifold of expression values (least squares).

    Runs rounds with shrinking lift so that strictly feasible problems
    converge fast and boundary-feasible problems are still reached.
    Returns the first iterate whose true slacks pass verification, else the
    best iterate seen.
    """
    lifts = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 0.0)
    iters_per_round = max(max_iters // len(lifts), 50)
    x = x0.copy()
    best_x = x.copy()
    _, best_val = compiled.worst(x)
    for lift_rel in lifts:
        floors = compiled.required + lift_rel * compiled.scales
        for _ in range(iters_per_round):
            mats = compiled.eval_mats(x)
            slack_min = np.inf
            clipped = []
            for j, M in enumerate(mats):
                w, V = np.linalg.eigh(M)
                slack_min = min(slack_min, float(w[0]) - compiled.required[j])
                w_clipped = np.maximum(w, floors[j])
                clipped.append(((V * w_clipped) @ V.T).reshape(-1))
            if slack_min > best_val:
                best_val = slack_min
                best_x = x.copy()
            if slack_min >= -VERIFY_SLACK:
                return best_x, best_val
            target = np.concatenate(clipped) - compiled.stacked_const
            x_new = compiled.pinv_map @ target
            if float(np.linalg.norm(x_new - x)) < 1e-14 * (1.0 + np.linalg.norm(x)):
                break
            x = x_new
    return best_x, best_val


def solve(problem, options=None):
    """Search for a verified feasible assignment.

    Deterministic for a fixed ``options.rng_seed``.  Returns Verified only
    when :func:`verify` passes on every constraint; otherwise Unknown
    (never an infeasibility claim).
    """
    if options is None:
        options = SolveOptions()
    compiled = _Compiled(problem, options.target_margin)

    def finish(x):
        assignment = compiled.unpack(x)
        reports = verify(problem, assignment, target_margin=options.target_margin)
        ok = all(r.ok for r in reports)
        achieved = min(r.min_eig - r.required for r in reports)
        return LmiSolution(
            assignment=assignment,
            achieved_margin=float(achieved),
            status="Verified" if ok else "Unknown",
            reports=reports,
        )

    candidates = list(_candidate_assignments(compiled))
    if options.initial is not None:
        candidates.insert(0, options.initial)
    for cand in candidates:
        x = compiled.pack(cand)
        _, val = compiled.worst(x)
        if val >= -VERIFY_SLACK:
            sol = finish(x)
            if sol.verified:
                return sol

    rng = np.random.default_rng(options.rng_seed)
    best_sol = None
    best_x = compiled.pack(candidates[0])
    x_start = best_x
    for attempt in range(max(2, options.restarts + 1)):
        if attempt == 1:
            # Escalation: a long subgradient run from the best point seen;
            # rescues thin feasible regions that projections walk slowly.
            x_start = best_x
            sg_iters = max(20 * options.subgradient_iters, 2400)
        else:
            sg_iters = options.subgradient_iters
            if attempt > 1:
                start = {}
                for v in compiled.variables:
                    if v.kind == "symmetric":
                        kappa = 10.0 ** rng.uniform(-2, 2)
                        sign = 1.0 if rng.random() < 0.5 else -1.0
                        noise = rng.standard_normal(v.shape) * 0.1 * kappa
                        start[v.name] = sign * kappa * np.eye(v.shape[0]) + symmetrize(noise)
                    else:
                        start[v.name] = rng.standard_normal(v.shape) * 0.1
                x_start = compiled.pack(start)
        x_sg, _ = _subgradient_ascent(compiled, x_start, sg_iters)
        x_ap, _ = _alternating_projections(compiled, x_sg, options.max_iters)
        sol = finish(x_ap)
        if sol.verified:
            return sol
        if best_sol is None or sol.achieved_margin > best_sol.achieved_margin:
            best_sol = sol
            best_x = x_ap
    return best_sol
