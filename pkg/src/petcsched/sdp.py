"""Transition oracle for the quotient traffic model.

Whether region ``Q_i`` can reach ``Q_j`` is a non-convex quadratic
feasibility problem in the held state. Lifting ``x x^T`` to a trace-one
PSD matrix ``X`` gives a small conic feasibility problem; an edge is kept
unless the relaxation is certified infeasible, so the resulting model
over-approximates the concrete traffic.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import InputError
from .lti import TimingTables
from .regions import RegionSpec, regions_of_states

GE, LE, EQ = ">=", "<=", "=="
FEASIBLE, INFEASIBLE, UNKNOWN = "Feasible", "Infeasible", "Unknown"

DEFAULT_TOL = 1e-4
DEFAULT_MAX_ITER = 20000


@dataclass(frozen=True, eq=False)
class Constraint:
    G: np.ndarray
    sense: str
    rhs: float = 0.0


@dataclass(eq=False)
class TraceLP:
    """Constraints ``Tr(X G) sense rhs`` on a symmetric PSD matrix ``X``."""

    n: int
    constraints: List[Constraint] = field(default_factory=list)

    def __post_init__(self):
        eqs = [c for c in self.constraints if c.sense == EQ]
        if len(eqs) != 1 or not np.allclose(eqs[0].G, np.eye(self.n)):
            raise InputError("a TraceLP needs exactly one equality, Tr(X) = c")
        for c in self.constraints:
            if c.sense not in (GE, LE, EQ):
                raise InputError(f"unknown sense {c.sense!r}")
            if c.G.shape != (self.n, self.n) or not np.allclose(c.G, c.G.T, atol=1e-9):
                raise InputError("constraint matrices must be symmetric n x n")

    @property
    def trace_value(self) -> float:
        return next(c.rhs for c in self.constraints if c.sense == EQ)

    @property
    def inequalities(self) -> List[Constraint]:
        return [c for c in self.constraints if c.sense != EQ]

    def count(self, sense: str) -> int:
        return sum(c.sense == sense for c in self.constraints)

    def __len__(self) -> int:
        return len(self.constraints)


@dataclass(eq=False)
class FeasibilityVerdict:
    """Outcome of ``sdp_feasibility``.

    ``residual`` is the best certified bound on the normalized margin:
    the lower bound for Feasible/Unknown verdicts, the upper bound for
    Infeasible ones. A Feasible certificate is a PSD, trace-normalized
    ``X``; an Infeasible one is a vector of non-negative multipliers (one
    per inequality, summing to one on the normalized rows).
    """

    status: str
    certificate: Optional[np.ndarray]
    residual: float
    lower: float = -math.inf
    upper: float = math.inf
    iterations: int = 0

    @property
    def included(self) -> bool:
        return self.status != INFEASIBLE


# ---------------------------------------------------------------------------
# assembly

def _check_region(idx: int, spec: RegionSpec, what: str):
    if not spec.k_min <= idx <= spec.k_max:
        raise InputError(f"{what}={idx} outside [{spec.k_min}, {spec.k_max}]")


def assemble_transition_sdp(i: int, j: int, tables: TimingTables, spec: RegionSpec,
                            k: Optional[int] = None) -> TraceLP:
    """Relaxed feasibility problem for "a state in Q_i, fired at check k, lands in Q_j".

    ``k`` defaults to ``i`` (the natural trigger).
    """
    _check_region(i, spec, "i")
    _check_region(j, spec, "j")
    k = i if k is None else k
    if not 1 <= k <= i:
        raise InputError(f"fire time k={k} must satisfy 1 <= k <= i={i}")
    n = tables.n
    cons = []
    if i < spec.k_max:
        cons.append(Constraint(tables.N(i), GE))
    for ip in range(spec.k_min, i):
        cons.append(Constraint(tables.N(ip), LE))
    M = tables.M(k)
    if j < spec.k_max:
        cons.append(Constraint(M.T @ tables.N(j) @ M, GE))
    for jp in range(spec.k_min, j):
        cons.append(Constraint(M.T @ tables.N(jp) @ M, LE))
    cons.append(Constraint(np.eye(n), EQ, 1.0))
    return TraceLP(n, cons)


# ---------------------------------------------------------------------------
# solver

@lru_cache(maxsize=None)
def _svec_index(n: int):
    iu = np.triu_indices(n)
    weights = np.where(iu[0] == iu[1], 1.0, math.sqrt(2.0))
    return iu, weights


def _svec(S: np.ndarray) -> np.ndarray:
    iu, w = _svec_index(S.shape[0])
    return S[iu] * w


def _smat(v: np.ndarray, n: int) -> np.ndarray:
    iu, w = _svec_index(n)
    S = np.zeros((n, n))
    S[iu] = v / w
    return S + np.triu(S, 1).T


def _psd_project(S: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(S)
    w = np.maximum(w, 0.0)
    return (V * w) @ V.T


def _normalized_rows(p: TraceLP):
    """Oriented unit-norm rows: feasibility means ``G_i . X - b_i >= 0`` for all i."""
    Gs, bs = [], []
    for c in p.inequalities:
        sign = 1.0 if c.sense == GE else -1.0
        G = sign * np.asarray(c.G, dtype=float)
        b = sign * float(c.rhs)
        scale = np.linalg.norm(G, 2)
        if scale == 0.0:
            scale = max(abs(b), 1.0)
        Gs.append(0.5 * (G + G.T) / scale)
        bs.append(b / scale)
    n = p.n
    Gs = np.array(Gs).reshape(-1, n, n)
    return Gs, np.array(bs)


def _margin_bounds(Gs, bs, X=None, lam=None):
    lo, hi = -math.inf, math.inf
    if X is not None:
        lo = float(np.min(np.einsum("kij,ij->k", Gs, X) - bs))
    if lam is not None:
        S = np.einsum("k,kij->ij", lam, Gs)
        hi = float(np.linalg.eigvalsh(0.5 * (S + S.T))[-1] - lam @ bs)
    return lo, hi


def sdp_feasibility(p: TraceLP, tol: float = DEFAULT_TOL,
                    max_iter: int = DEFAULT_MAX_ITER, rho: float = 1.0,
                    check_every: int = 10) -> FeasibilityVerdict:
    """Decide a TraceLP with ADMM on its max-margin form.

    The trace equality is scaled away, each inequality is oriented and
    normalized to unit spectral norm, and ADMM solves
    ``max t  s.t.  G_i . X - b_i >= t,  Tr X = 1,  X PSD``. Every few
    iterations two exact bounds on the optimal margin ``t*`` are formed:
    the primal PSD iterate gives a lower bound, the multipliers of the
    margin rows give an upper bound (weak duality). The verdict is
    Feasible once the lower bound reaches ``-tol``, Infeasible once the
    upper bound falls below ``-tol``, and Unknown if neither happens in
    ``max_iter`` iterations.
    """
    n = p.n
    c_tr = p.trace_value
    if c_tr < 0:
        return FeasibilityVerdict(INFEASIBLE, None, -math.inf, upper=-math.inf)
    if c_tr == 0:
        # X = 0 is the only PSD matrix of zero trace
        bad = [c for c in p.inequalities if not (c.sense == GE and c.rhs <= 0 or c.sense == LE and c.rhs >= 0)]
        status = INFEASIBLE if bad else FEASIBLE
        return FeasibilityVerdict(status, np.zeros((n, n)), 0.0)
    # Tr X = c: substitute X = c Y with Tr Y = 1.
    Gs, bs = _normalized_rows(p)
    if c_tr != 1.0:
        bs = bs / c_tr
        norms = np.maximum(np.abs(bs), 1.0)
        Gs, bs = Gs / norms[:, None, None], bs / norms
    m = len(bs)
    if m == 0:
        X = np.eye(n) / n * c_tr
        return FeasibilityVerdict(FEASIBLE, X, math.inf, lower=math.inf)

    d = n * (n + 1) // 2
    nv = d + 1
    A = np.zeros((1 + m + d, nv))
    b = np.zeros(1 + m + d)
    A[0, :d] = _svec(np.eye(n))
    b[0] = 1.0
    for r in range(m):
        A[1 + r, :d] = -_svec(Gs[r])
        A[1 + r, d] = 1.0
        b[1 + r] = -bs[r]
    A[1 + m:, :d] = -np.eye(d)
    c = np.zeros(nv)
    c[d] = -1.0

    sigma = 1e-6
    alpha = 1.6
    x = np.zeros(nv)
    s = np.zeros(1 + m + d)
    y = np.zeros(1 + m + d)
    Kinv = np.linalg.inv(sigma * np.eye(nv) + rho * A.T @ A)

    best_lo, best_hi = -math.inf, math.inf
    best_X, best_lam = None, None
    it = 0
    for it in range(1, max_iter + 1):
        x = Kinv @ (sigma * x - c + A.T @ (rho * (b - s) - y))
        Ax = alpha * (A @ x) + (1 - alpha) * (b - s)
        v = b - Ax - y / rho
        s_new = np.empty_like(s)
        s_new[0] = 0.0
        s_new[1:1 + m] = np.maximum(v[1:1 + m], 0.0)
        S = _psd_project(_smat(v[1 + m:], n))
        s_new[1 + m:] = _svec(S)
        s = s_new
        y = y + rho * (Ax + s - b)

        if it % check_every and it != max_iter:
            continue
        X = S
        tr = np.trace(X)
        lo = hi = None
        if tr > 1e-12:
            Xn = X / tr
            lo, _ = _margin_bounds(Gs, bs, X=Xn)
            if lo > best_lo:
                best_lo, best_X = lo, Xn
        lam = np.maximum(y[1:1 + m], 0.0)
        tot = lam.sum()
        if tot > 1e-12:
            lam = lam / tot
            _, hi = _margin_bounds(Gs, bs, lam=lam)
            if hi < best_hi:
                best_hi, best_lam = hi, lam
        if best_lo >= -tol:
            return FeasibilityVerdict(FEASIBLE, best_X * c_tr, best_lo, best_lo, best_hi, it)
        if best_hi < -tol:
            return FeasibilityVerdict(INFEASIBLE, best_lam, best_hi, best_lo, best_hi, it)
    return FeasibilityVerdict(UNKNOWN, best_X, best_lo, best_lo, best_hi, it)


# ---------------------------------------------------------------------------
# relations

@dataclass(frozen=True)
class RelationEntry:
    source: int
    k: int
    target: int
    status: str
    residual: float

    @property
    def included(self) -> bool:
        return self.status != INFEASIBLE


def _solve_entry(args) -> RelationEntry:
    i, k, j, tables, spec, tol, max_iter = args
    v = sdp_feasibility(assemble_transition_sdp(i, j, tables, spec, k), tol, max_iter)
    return RelationEntry(i, k, j, v.status, v.residual)


def _run(jobs: list, threads: int) -> List[RelationEntry]:
    if threads and threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_solve_entry, jobs, chunksize=max(1, len(jobs) // (4 * threads))))
    return [_solve_entry(job) for job in jobs]


def early_times(i: int, spec: RegionSpec, allow_sub_miet_early: bool = True) -> range:
    """Clock values at which an early fire from ``Q_i`` is offered."""
    lo = 1 if allow_sub_miet_early else spec.k_min
    return range(lo, i)


def transition_entries(tables: TimingTables, spec: RegionSpec, tol: float = DEFAULT_TOL,
                       max_iter: int = DEFAULT_MAX_ITER, threads: int = 1) -> List[RelationEntry]:
    jobs = [(i, i, j, tables, spec, tol, max_iter) for i in spec.regions for j in spec.regions]
    return _run(jobs, threads)


def early_entries(tables: TimingTables, spec: RegionSpec, tol: float = DEFAULT_TOL,
                  max_iter: int = DEFAULT_MAX_ITER, threads: int = 1,
                  allow_sub_miet_early: bool = True,
                  times: Optional[Iterable[int]] = None) -> List[RelationEntry]:
    jobs = []
    for i in spec.regions:
        ks = early_times(i, spec, allow_sub_miet_early)
        if times is not None:
            ks = [k for k in ks if k in set(times)]
        for k in ks:
            for j in spec.regions:
                jobs.append((i, k, j, tables, spec, tol, max_iter))
    return _run(jobs, threads)


def transition_relation(tables: TimingTables, spec: RegionSpec, tol: float = DEFAULT_TOL,
                        max_iter: int = DEFAULT_MAX_ITER, threads: int = 1) -> set:
    """Trigger edges ``(i, j)``; Unknown verdicts are kept."""
    return {(e.source, e.target) for e in transition_entries(tables, spec, tol, max_iter, threads)
            if e.included}


def early_transition_relation(tables: TimingTables, spec: RegionSpec, tol: float = DEFAULT_TOL,
                              max_iter: int = DEFAULT_MAX_ITER, threads: int = 1,
                              allow_sub_miet_early: bool = True) -> set:
    """Early edges ``(i, k, j)`` for every offered fire time ``k < i``."""
    return {(e.source, e.k, e.target)
            for e in early_entries(tables, spec, tol, max_iter, threads, allow_sub_miet_early)
            if e.included}


def early_problem_count(spec: RegionSpec, allow_sub_miet_early: bool = True) -> int:
    return sum(len(early_times(i, spec, allow_sub_miet_early)) for i in spec.regions) * len(spec)


# ---------------------------------------------------------------------------
# sampling oracle

def random_unit_vectors(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    X = rng.standard_normal((count, n))
    norms = np.linalg.norm(X, axis=1)
    while np.any(norms == 0.0):
        bad = norms == 0.0
        X[bad] = rng.standard_normal((int(bad.sum()), n))
        norms = np.linalg.norm(X, axis=1)
    return X / norms[:, None]


def sampling_oracle(loop, tables: TimingTables, spec: RegionSpec, i: int, k: int,
                    samples: int, seed: int = 0, states: Optional[np.ndarray] = None) -> set:
    """Successor regions observed from random members of ``Q_i`` fired at check ``k``.

    ``loop`` is accepted for interface symmetry; propagation uses the
    tables. Passing precomputed unit ``states`` skips the draw.
    """
    _check_region(i, spec, "i")
    if not 1 <= k <= i:
        raise InputError("k must satisfy 1 <= k <= i")
    if samples < 1:
        raise InputError("samples must be >= 1")
    if states is None:
        states = random_unit_vectors(np.random.default_rng(seed), samples, tables.n)
    src = regions_of_states(states, tables, spec)
    members = states[src == i]
    if len(members) == 0:
        return set()
    succ = regions_of_states(members @ tables.M(k).T, tables, spec)
    return {int(r) for r in np.unique(succ)}


# ---------------------------------------------------------------------------
# CSV export

RELATION_COLUMNS = ("loop_id", "source_region", "action_time_k", "target_region",
                    "verdict", "residual")


def write_relation_csv(path, loop_id, entries: Sequence[RelationEntry]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RELATION_COLUMNS)
        for e in sorted(entries, key=lambda e: (e.source, e.k, e.target)):
            w.writerow([loop_id, e.source, e.k, e.target, e.status, f"{e.residual:.6e}"])


def read_relation_csv(path) -> List[Tuple[str, RelationEntry]]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append((row["loop_id"], RelationEntry(
                int(row["source_region"]), int(row["action_time_k"]), int(row["target_region"]),
                row["verdict"], float(row["residual"]))))
    return out
