"""Independent reference implementations used only by the tests."""
from __future__ import annotations

import numpy as np


def rk4_flow(loop, t: float, x0: np.ndarray, dt: float) -> np.ndarray:
    """Integrate the held-input dynamics from ``x0`` with classical RK4, returning x(t)."""
    A, BK = loop.A, loop.B @ loop.K
    xhat = np.array(x0, dtype=float)
    u = BK @ xhat
    x = xhat.copy()
    steps = int(round(t / dt))
    h = t / steps
    f = lambda z: A @ z + u  # noqa: E731
    for _ in range(steps):
        k1 = f(x)
        k2 = f(x + 0.5 * h * k1)
        k3 = f(x + 0.5 * h * k2)
        k4 = f(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


def triggering_value(loop, k: int, x: np.ndarray, dt: float) -> float:
    """Triggering quadratic form at check ``k`` computed through RK4 rather than N(k)."""
    xi = rk4_flow(loop, k * float(loop.h), x, dt)
    z = np.concatenate([xi, x])
    return float(z @ loop.Q_trig @ z)


def max_margin_cvxpy(p):
    """Optimal normalized margin of a TraceLP via an interior-point solver (None if unavailable)."""
    try:
        import cvxpy as cp
    except ImportError:  # pragma: no cover
        return None
    from petcsched.sdp import _normalized_rows

    Gs, bs = _normalized_rows(p)
    X = cp.Variable((p.n, p.n), symmetric=True)
    t = cp.Variable()
    cons = [X >> 0, cp.trace(X) == 1]
    cons += [cp.trace(G @ X) - b >= t for G, b in zip(Gs, bs)]
    prob = cp.Problem(cp.Maximize(t), cons)
    prob.solve(solver=cp.CVXOPT)
    return float(t.value)


def naive_safety(g):
    """Winning set by plain Kleene iteration of the controllable predecessor."""
    n = len(g.states)
    win = [not u for u in g.unsafe]
    changed = True
    while changed:
        changed = False
        for sid in range(n):
            if not win[sid]:
                continue
            ok = any(all(win[t] for t in outs) for outs in g.moves[sid].values())
            if not ok:
                win[sid] = False
                changed = True
    return {g.states[s] for s in range(n) if win[s]}
