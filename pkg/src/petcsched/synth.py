"""Safety synthesis on the explicit game graph."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Set, Tuple

from .errors import QueryError
from .game import WAIT, GameGraph, GameState


@dataclass(eq=False)
class Strategy:
    """Maximally permissive safety strategy as an explicit table.

    ``allowed`` maps every winning state to the moves that keep all of
    their outcomes inside the winning set. ``losing_initial`` lists the
    fresh initial states the controller cannot save; synthesis succeeded
    iff it is empty.
    """

    winning: Set[GameState]
    allowed: Dict[GameState, Tuple[str, ...]]
    losing_initial: List[GameState] = field(default_factory=list)
    iterations: int = 0

    @property
    def success(self) -> bool:
        return not self.losing_initial

    def __contains__(self, s: GameState) -> bool:
        return s in self.allowed

    def save(self, path):
        """Write ``regions|clocks|net,c_N|e -> move move ...`` lines, sorted."""
        with open(path, "w") as fh:
            fh.write("# petcsched strategy v1: regions|clocks|network,clock|e -> allowed moves\n")
            for s in sorted(self.allowed):
                fh.write(f"{s.describe()} -> {' '.join(self.allowed[s])}\n")

    @classmethod
    def load(cls, path) -> "Strategy":
        allowed = {}
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                lhs, rhs = line.split("->")
                allowed[GameState.parse(lhs)] = tuple(rhs.split())
        return cls(set(allowed), allowed)


def solve_safety(g: GameGraph) -> Strategy:
    """Greatest fixed point of the controllable predecessor of the safe set.

    Implemented as a backward worklist: a move dies when one of its
    outcomes leaves the winning set, a state dies when all of its moves
    are dead. Each (state, move) pair is revisited at most once per dead
    successor, so the cost is linear in the number of game edges.
    """
    n = len(g.states)
    alive = [not u for u in g.unsafe]
    live_moves = [set(m) for m in g.moves]
    preds: List[List[Tuple[int, str]]] = [[] for _ in range(n)]
    for sid, table in enumerate(g.moves):
        for m, outs in table.items():
            for t in outs:
                preds[t].append((sid, m))
    queue = deque(sid for sid in range(n) if not alive[sid])
    for sid in range(n):
        if alive[sid] and not live_moves[sid]:  # deadlock: treat as losing
            alive[sid] = False
            queue.append(sid)
    rounds = 0
    while queue:
        rounds += 1
        t = queue.popleft()
        for sid, m in preds[t]:
            if not alive[sid] or m not in live_moves[sid]:
                continue
            live_moves[sid].discard(m)
            if not live_moves[sid]:
                alive[sid] = False
                queue.append(sid)

    allowed = {}
    for sid in range(n):
        if alive[sid]:
            ordered = [m for m in g.moves[sid] if m in live_moves[sid]]
            allowed[g.states[sid]] = tuple(ordered)
    losing = [g.states[sid] for sid in g.initial if not alive[sid]]
    return Strategy(set(allowed), allowed, losing, rounds)


def strategy_query(st: Strategy, s: GameState) -> Tuple[str, ...]:
    try:
        return st.allowed[s]
    except KeyError:
        raise QueryError(f"state {s.describe()} is outside the winning set") from None


@dataclass
class VerificationReport:
    visited: int = 0
    violations: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_strategy(g: GameGraph, st: Strategy) -> VerificationReport:
    """Re-explore the game under the strategy, independently of how it was built.

    Successors are recomputed from the game semantics rather than read
    from the stored graph.
    """
    report = VerificationReport()
    seen = set()
    queue = deque()
    for sid in g.initial:
        s = g.states[sid]
        if s in st.winning and s not in seen:
            seen.add(s)
            queue.append(s)
    while queue:
        s = queue.popleft()
        report.visited += 1
        if g.is_unsafe(s):
            report.violations.append(f"unsafe state reached: {s.describe()}")
            continue
        moves = st.allowed.get(s)
        if not moves:
            report.violations.append(f"no allowed move at {s.describe()}")
            continue
        enabled = set(g.enabled_moves(s))
        for m in moves:
            if m not in enabled:
                report.violations.append(f"move {m} not enabled at {s.describe()}")
                continue
            for t in g.successors(s, m):
                if t not in seen:
                    seen.add(t)
                    queue.append(t)
    return report


__all__ = ["Strategy", "solve_safety", "strategy_query", "verify_strategy",
           "VerificationReport", "WAIT"]
