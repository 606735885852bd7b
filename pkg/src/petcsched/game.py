"""Network of traffic games sharing one channel, in discrete-tick semantics.

Every guard and invariant of the traffic and network automata is an
integer (in base ticks), so evaluating the composed game only at tick
boundaries loses no behaviour. A game state is observed at a tick
boundary, after any channel release due at that tick and before fires.

Per tick:

1. loops whose clock hit their region bound must fire (``trigger``);
2. otherwise the controller may fire one enabled ``early`` edge, or wait;
3. each fire sends ``comm`` to the network (a busy or broken channel goes
   to ``Bad``), updates the earliness counter and resets the loop clock;
   the environment picks the successor region;
4. time advances one tick; a channel whose clock reaches ``Delta`` is
   released.

States that are unsafe (``Bad`` or ``e >= E``) are absorbing.
"""
from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

from .errors import ContractError, InputError
from .traffic import TrafficModel, TrafficTGA

IDLE, IN_USE, BAD = 0, 1, 2
NETWORK_LOCATIONS = ("Idle", "InUse", "Bad")
WAIT = "wait"


def early_move(loop: int) -> str:
    return f"early:{loop}"


def move_loop(move: str) -> Optional[int]:
    if move == WAIT:
        return None
    if not move.startswith("early:"):
        raise InputError(f"unknown move {move!r}")
    return int(move.split(":", 1)[1])


@dataclass(frozen=True)
class NetworkEdge:
    source: str
    guard: Optional[str]
    action: str
    reset: bool
    target: str


@dataclass(frozen=True)
class NetworkTGA:
    """Shared channel: ``Idle --comm--> InUse --done (c_N = Delta)--> Idle``; ``comm`` while busy goes to ``Bad``."""

    delta: int
    locations: Tuple[str, ...] = NETWORK_LOCATIONS
    initial: str = "Idle"
    clock: str = "c_N"
    edges: Tuple[NetworkEdge, ...] = ()

    def __post_init__(self):
        if int(self.delta) != self.delta or self.delta < 1:
            raise InputError("channel occupancy Delta must be a positive integer")

    def invariant(self, location: str) -> Optional[str]:
        return f"{self.clock} <= {self.delta}" if location == "InUse" else None

    def comm(self, loc: int, clock: int) -> Tuple[int, int]:
        if loc == IDLE:
            return IN_USE, 0
        return BAD, clock

    def advance(self, loc: int, clock: int) -> Tuple[int, int]:
        if loc != IN_USE:
            return loc, 0
        clock += 1
        if clock >= self.delta:  # done at c_N == Delta, before any comm in that tick
            return IDLE, 0
        return IN_USE, clock


def build_network_tga(delta: int) -> NetworkTGA:
    edges = (
        NetworkEdge("Idle", None, "comm", True, "InUse"),
        NetworkEdge("InUse", f"c_N == {delta}", "done", False, "Idle"),
        NetworkEdge("InUse", None, "comm", False, "Bad"),
        NetworkEdge("Bad", None, "comm", False, "Bad"),
    )
    return NetworkTGA(int(delta), edges=edges)


@dataclass(frozen=True)
class EarlinessParams:
    """Bounded earliness integrator: cost ``r`` per check of earliness, discount ``e_ref``, bound ``E``."""

    r: int = 2
    e_ref: int = 1
    E: int = 2

    def __post_init__(self):
        if self.r < 1 or self.e_ref < 1:
            raise InputError("r and e_ref must be >= 1")
        if self.E < 0:
            raise InputError("E must be >= 0")


def earliness_update(e: int, i: int, k: int, params: EarlinessParams) -> int:
    """``max(0, min(E, e + r (i - k) - e_ref))`` for a fire at check ``k`` from ``Q_i``."""
    if k > i:
        raise InputError(f"fire time k={k} exceeds region bound i={i}")
    if k < 1:
        raise InputError("fire time must be >= 1")
    return max(0, min(params.E, e + params.r * (i - k) - params.e_ref))


class GameState(NamedTuple):
    regions: Tuple[int, ...]
    clocks: Tuple[int, ...]  # base ticks since the loop's last fire
    net: int = IDLE
    net_clock: int = 0
    e: int = 0

    def describe(self) -> str:
        return (f"{','.join(map(str, self.regions))}|{','.join(map(str, self.clocks))}"
                f"|{NETWORK_LOCATIONS[self.net]},{self.net_clock}|{self.e}")

    @classmethod
    def parse(cls, text: str) -> "GameState":
        regs, clocks, net, e = text.strip().split("|")
        loc, nclock = net.split(",")
        return cls(tuple(int(r) for r in regs.split(",")),
                   tuple(int(c) for c in clocks.split(",")),
                   NETWORK_LOCATIONS.index(loc), int(nclock), int(e))


def _rational_gcd(values: Sequence[Fraction]) -> Fraction:
    nums = [v.numerator for v in values]
    dens = [v.denominator for v in values]
    lcm_den = reduce(lambda a, b: a * b // math.gcd(a, b), dens, 1)
    return Fraction(reduce(math.gcd, [n * (lcm_den // d) for n, d in zip(nums, dens)]), lcm_den)


def default_base_tick(periods: Sequence[Fraction]) -> Fraction:
    return _rational_gcd([Fraction(p) for p in periods])


@dataclass(eq=False)
class _Loop:
    model: TrafficModel
    ticks: int  # base ticks per checking period
    trig: Dict[int, Tuple[int, ...]]
    early: Dict[Tuple[int, int], Tuple[int, ...]]

    def bound(self, region: int) -> int:
        return region * self.ticks

    def early_check(self, region: int, clock: int) -> Optional[int]:
        """Check index ``k`` if an early fire is enabled at this clock value."""
        if clock % self.ticks:
            return None
        k = clock // self.ticks
        if (region, k) in self.early:
            return k
        return None


@dataclass(eq=False)
class GameGraph:
    """Explicit composed game reachable from all fresh initial states."""

    loops: List[_Loop]
    network: NetworkTGA
    params: EarlinessParams
    base_tick: Fraction
    states: List[GameState] = field(default_factory=list)
    index: Dict[GameState, int] = field(default_factory=dict)
    moves: List[Dict[str, Tuple[int, ...]]] = field(default_factory=list)
    unsafe: List[bool] = field(default_factory=list)
    initial: List[int] = field(default_factory=list)

    def is_unsafe(self, s: GameState) -> bool:
        return s.net == BAD or s.e >= self.params.E

    def forced(self, s: GameState) -> List[int]:
        return [n for n, lp in enumerate(self.loops) if s.clocks[n] >= lp.bound(s.regions[n])]

    def enabled_moves(self, s: GameState) -> List[str]:
        if self.is_unsafe(s) or self.forced(s):
            return [WAIT]
        out = [WAIT]
        for n, lp in enumerate(self.loops):
            if lp.early_check(s.regions[n], s.clocks[n]) is not None:
                out.append(early_move(n))
        return out

    def successors(self, s: GameState, move: str) -> set:
        """Every environment resolution of ``move`` taken in ``s``."""
        if move not in self.enabled_moves(s):
            raise ContractError(f"move {move!r} not enabled in {s.describe()}")
        if self.is_unsafe(s):
            return {s}
        fires = []  # (loop, fire check k, successor choices)
        for n in self.forced(s):
            lp = self.loops[n]
            i = s.regions[n]
            fires.append((n, i, lp.trig[i]))
        early_loop = move_loop(move)
        if early_loop is not None:
            lp = self.loops[early_loop]
            i = s.regions[early_loop]
            k = lp.early_check(i, s.clocks[early_loop])
            fires.append((early_loop, k, lp.early[(i, k)]))

        net, nclock, e = s.net, s.net_clock, s.e
        for n, k, _ in fires:
            net, nclock = self.network.comm(net, nclock)
            e = earliness_update(e, s.regions[n], k, self.params)
        fired = {n for n, _, _ in fires}
        clocks = tuple(0 if n in fired else c for n, c in enumerate(s.clocks))
        clocks = tuple(c + 1 for c in clocks)
        net, nclock = self.network.advance(net, nclock)

        choices = [(n, succ) for n, _, succ in fires]
        out = set()
        for combo in itertools.product(*(succ for _, succ in choices)):
            regions = list(s.regions)
            for (n, _), r in zip(choices, combo):
                regions[n] = r
            out.add(GameState(tuple(regions), clocks, net, nclock, e))
        return out

    def initial_states(self) -> List[GameState]:
        return [GameState(tuple(regs), tuple(0 for _ in self.loops), IDLE, 0, 0)
                for regs in itertools.product(*(lp.model.regions for lp in self.loops))]

    def explore(self):
        queue = deque()
        for s in self.initial_states():
            if s not in self.index:
                self._add(s)
                queue.append(s)
            self.initial.append(self.index[s])
        while queue:
            s = queue.popleft()
            sid = self.index[s]
            table = {}
            for m in self.enabled_moves(s):
                ids = []
                for t in sorted(self.successors(s, m)):
                    if t not in self.index:
                        self._add(t)
                        queue.append(t)
                    ids.append(self.index[t])
                table[m] = tuple(ids)
            self.moves[sid] = table

    def _add(self, s: GameState):
        self.index[s] = len(self.states)
        self.states.append(s)
        self.moves.append({})
        self.unsafe.append(self.is_unsafe(s))

    def size_bound(self) -> int:
        prod = 1
        for lp in self.loops:
            prod *= len(lp.model.regions) * (lp.bound(lp.model.k_max) + 1)
        return prod * 3 * (self.network.delta + 1) * (self.params.E + 1)

    def statistics(self) -> dict:
        n_moves = sum(len(m) for m in self.moves)
        n_ctrl = sum(1 for m in self.moves for k in m if k != WAIT)
        return {
            "states": len(self.states),
            "initial": len(self.initial),
            "moves": n_moves,
            "early_moves": n_ctrl,
            "unsafe": sum(self.unsafe),
            "bound": self.size_bound(),
        }

    def dump(self, fh):
        """One line per state: ``id<TAB>state<TAB>U|S<TAB>move=id,id;...``."""
        for sid, s in enumerate(self.states):
            mv = ";".join(f"{m}={','.join(map(str, ids))}" for m, ids in self.moves[sid].items())
            fh.write(f"{sid}\t{s.describe()}\t{'U' if self.unsafe[sid] else 'S'}\t{mv}\n")


def _as_model(tga_or_model) -> TrafficModel:
    if isinstance(tga_or_model, TrafficModel):
        return tga_or_model
    if isinstance(tga_or_model, TrafficTGA):
        trig = {(e.source, e.target) for e in tga_or_model.uncontrolled}
        early = {(e.source, e.guard, e.target) for e in tga_or_model.controlled}
        locs = tga_or_model.locations
        return TrafficModel(tga_or_model.loop_id, min(locs), max(locs), trig, early, tga_or_model.h)
    raise InputError(f"cannot compose {type(tga_or_model).__name__}")


def make_loops(models, base_tick) -> List[_Loop]:
    loops = []
    for m in models:
        ratio = Fraction(m.h) / Fraction(base_tick)
        if ratio.denominator != 1:
            raise InputError(f"{m.loop_id}: h={m.h} is not a multiple of base tick {base_tick}")
        trig = {i: tuple(m.trigger_successors(i)) for i in m.regions}
        early = {}
        for i, k, j in sorted(m.early_edges):
            early.setdefault((i, k), []).append(j)
        loops.append(_Loop(m, int(ratio), trig, {key: tuple(v) for key, v in early.items()}))
    return loops


def compose(traffic, net: NetworkTGA, params: EarlinessParams,
            base_tick=None, explore: bool = True) -> GameGraph:
    """Product of the traffic games, the channel and the earliness counter."""
    models = [_as_model(t) for t in traffic]
    if not models:
        raise InputError("need at least one traffic model")
    if base_tick is None:
        base_tick = default_base_tick([m.h for m in models])
    base_tick = Fraction(base_tick)
    g = GameGraph(make_loops(models, base_tick), net, params, base_tick)
    if explore:
        g.explore()
    return g


def successors(g: GameGraph, s: GameState, move: str) -> set:
    return g.successors(s, move)
