"""Tick-level simulation of several PETC loops sharing a scheduled channel."""
from __future__ import annotations

import csv
import random
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import InputError, SimulationError
from .game import BAD, NETWORK_LOCATIONS, WAIT, EarlinessParams, GameGraph, GameState, \
    NetworkTGA, compose, move_loop
from .lti import PlantLoop, TimingTables, flow
from .regions import RegionSpec, region_of_state
from .synth import Strategy
from .traffic import TrafficModel

ARBITERS = ("round_robin", "lowest_loop_id", "seeded_random")
NATURAL, EARLY = "natural", "early"


def exact_inter_event_time(xhat, tables: TimingTables, spec: RegionSpec) -> int:
    return region_of_state(xhat, tables, spec)


@dataclass(eq=False)
class LoopBundle:
    """A loop together with its abstraction artifacts."""

    loop: PlantLoop
    tables: TimingTables
    spec: RegionSpec
    model: TrafficModel


@dataclass(eq=False)
class SimConfig:
    loops: List[LoopBundle]
    strategy: Strategy
    initial_states: List[np.ndarray]
    network: NetworkTGA
    params: EarlinessParams
    duration: Fraction = Fraction(1)
    arbiter: str = "round_robin"
    seed: int = 0
    prefer_wait: bool = True
    base_tick: Optional[Fraction] = None

    def __post_init__(self):
        if self.arbiter not in ARBITERS:
            raise InputError(f"unknown arbiter {self.arbiter!r}; choose from {ARBITERS}")
        if len(self.initial_states) != len(self.loops):
            raise InputError("need exactly one initial state per loop")
        self.duration = Fraction(self.duration) if not isinstance(self.duration, float) \
            else Fraction(repr(self.duration))
        if self.duration <= 0:
            raise InputError("duration must be positive")


@dataclass
class Event:
    tick: int
    time: float
    loop: int
    kind: str
    k: int  # fire time in checks since the previous event
    region: int
    next_region: int


@dataclass
class TickRecord:
    tick: int
    time: float
    xi: List[np.ndarray]
    xhat: List[np.ndarray]
    regions: Tuple[int, ...]
    clocks: Tuple[int, ...]
    e: int
    channel: str


@dataclass(eq=False)
class SimTrace:
    base_tick: Fraction
    delta: int
    loop_ids: List[str]
    ticks: List[TickRecord] = field(default_factory=list)
    events: List[Event] = field(default_factory=list)
    conflicts: List[Tuple[int, int]] = field(default_factory=list)  # (tick, loop)

    def write_ticks_csv(self, path):
        n_loops = len(self.loop_ids)
        dims = [len(x) for x in self.ticks[0].xi] if self.ticks else []
        header = ["tick", "time"]
        for n in range(n_loops):
            header += [f"xi{n}_{d}" for d in range(dims[n])]
            header += [f"xhat{n}_{d}" for d in range(dims[n])]
            header += [f"region{n}", f"clock{n}"]
        header += ["e", "channel"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in self.ticks:
                row = [r.tick, f"{r.time:.10g}"]
                for n in range(n_loops):
                    row += [f"{v:.12e}" for v in r.xi[n]]
                    row += [f"{v:.12e}" for v in r.xhat[n]]
                    row += [r.regions[n], r.clocks[n]]
                row += [r.e, r.channel]
                w.writerow(row)

    def write_events_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time", "loop", "kind", "k", "region", "next_region"])
            for ev in self.events:
                w.writerow([f"{ev.time:.10g}", self.loop_ids[ev.loop], ev.kind, ev.k,
                            ev.region, ev.next_region])


class _Arbiter:
    def __init__(self, name: str, seed: int, n_loops: int):
        self.name = name
        self.rng = random.Random(seed)
        self.n_loops = n_loops
        self.last = n_loops - 1

    def choose(self, allowed: Sequence[str], prefer_wait: bool) -> str:
        if prefer_wait and WAIT in allowed:
            return WAIT
        early = [m for m in allowed if m != WAIT]
        if not early:
            return WAIT
        if self.name == "lowest_loop_id":
            pick = min(early, key=move_loop)
        elif self.name == "seeded_random":
            pick = self.rng.choice(sorted(early))
        else:
            order = [(self.last + 1 + d) % self.n_loops for d in range(self.n_loops)]
            by_loop = {move_loop(m): m for m in early}
            pick = next(by_loop[n] for n in order if n in by_loop)
        self.last = move_loop(pick)
        return pick


def simulate(cfg: SimConfig) -> SimTrace:
    """Run the networked loops under the strategy for ``cfg.duration`` time units."""
    g: GameGraph = compose([b.model for b in cfg.loops], cfg.network, cfg.params,
                           cfg.base_tick, explore=False)
    tick = g.base_tick
    n_ticks = int(cfg.duration / tick)
    n_loops = len(cfg.loops)
    arbiter = _Arbiter(cfg.arbiter, cfg.seed, n_loops)
    trace = SimTrace(tick, cfg.network.delta, [b.model.loop_id for b in cfg.loops])

    flows: List[Dict[int, np.ndarray]] = [{} for _ in range(n_loops)]

    def propagate(n: int, elapsed: int) -> np.ndarray:
        cache = flows[n]
        if elapsed not in cache:
            cache[elapsed] = flow(cfg.loops[n].loop, float(elapsed * tick))
        return cache[elapsed]

    xhat = [np.asarray(x, dtype=float).ravel().copy() for x in cfg.initial_states]
    for n, b in enumerate(cfg.loops):
        if xhat[n].shape != (b.loop.n,):
            raise InputError(f"initial state of loop {n} has wrong dimension")
    regions = [exact_inter_event_time(x, b.tables, b.spec) for x, b in zip(xhat, cfg.loops)]
    state = GameState(tuple(regions), tuple(0 for _ in cfg.loops))

    for tau in range(n_ticks + 1):
        xi = [propagate(n, state.clocks[n]) @ xhat[n] for n in range(n_loops)]
        if tau == n_ticks:
            trace.ticks.append(TickRecord(tau, float(tau * tick), xi, [x.copy() for x in xhat],
                                          state.regions, state.clocks, state.e,
                                          NETWORK_LOCATIONS[state.net]))
            break
        if g.is_unsafe(state):
            raise SimulationError(f"unsafe state at tick {tau}: {state.describe()}")
        allowed = cfg.strategy.allowed.get(state)
        if not allowed:
            raise SimulationError(f"tick {tau}: state {state.describe()} outside the winning set")
        forced = g.forced(state)
        move = WAIT if forced else arbiter.choose(allowed, cfg.prefer_wait)
        if move not in allowed:
            raise SimulationError(f"tick {tau}: forced step not allowed at {state.describe()}")
        fires = [(n, NATURAL) for n in forced]
        early_loop = move_loop(move)
        if early_loop is not None:
            fires.append((early_loop, EARLY))

        new_regions = list(state.regions)
        for n, kind in fires:
            b = cfg.loops[n]
            i = state.regions[n]
            k = state.clocks[n] // g.loops[n].ticks
            xhat[n] = xi[n].copy()
            j = exact_inter_event_time(xhat[n], b.tables, b.spec)
            edge_ok = (i, j) in b.model.trigger_edges if kind == NATURAL \
                else (i, k, j) in b.model.early_edges
            if not edge_ok:
                raise SimulationError(
                    f"tick {tau}: loop {n} step {(i, k, j)} ({kind}) is not an edge of the model")
            new_regions[n] = j
            trace.events.append(Event(tau, float(tau * tick), n, kind, k, i, j))
        net = state.net
        for n, _ in fires:
            if net != 0:
                trace.conflicts.append((tau, n))
            net, _ = g.network.comm(net, state.net_clock)
            if net == BAD:
                break

        outcomes = g.successors(state, move)
        nxt = [s for s in outcomes if s.regions == tuple(new_regions)]
        if len(nxt) != 1:
            raise SimulationError(f"tick {tau}: simulated step is not a game outcome")
        state = nxt[0]
        trace.ticks.append(TickRecord(tau, float(tau * tick), xi, [x.copy() for x in xhat],
                                      tuple(new_regions),
                                      tuple(0 if n in {f for f, _ in fires} else state.clocks[n] - 1
                                            for n in range(n_loops)),
                                      state.e, NETWORK_LOCATIONS[state.net]))
    return trace


def conflict_scan(trace: SimTrace) -> List[Tuple[Event, Event]]:
    """Overlapping channel occupancy intervals recomputed from the event log alone."""
    events = sorted(trace.events, key=lambda ev: (ev.tick, ev.loop))
    out = []
    busy_until = None
    holder = None
    for ev in events:
        if busy_until is not None and ev.tick < busy_until:
            out.append((holder, ev))
            continue
        holder = ev
        busy_until = ev.tick + trace.delta
    return out


@dataclass
class TraceStatistics:
    events: int
    natural: Dict[int, int]
    early: Dict[int, int]
    early_fraction: float
    mean_inter_event: Dict[int, float]
    earliness_histogram: Dict[int, int]

    def as_rows(self, loop_ids) -> List[Tuple[str, str]]:
        rows = [("events", str(self.events)), ("early_fraction", f"{self.early_fraction:.4f}")]
        for n, lid in enumerate(loop_ids):
            rows.append((f"{lid}.natural", str(self.natural.get(n, 0))))
            rows.append((f"{lid}.early", str(self.early.get(n, 0))))
            rows.append((f"{lid}.mean_inter_event", f"{self.mean_inter_event.get(n, float('nan')):.6g}"))
        for e, c in sorted(self.earliness_histogram.items()):
            rows.append((f"earliness.{e}", str(c)))
        return rows


def trace_statistics(trace: SimTrace) -> TraceStatistics:
    natural = Counter(ev.loop for ev in trace.events if ev.kind == NATURAL)
    early = Counter(ev.loop for ev in trace.events if ev.kind == EARLY)
    total = len(trace.events)
    mean_iet = {}
    for n in range(len(trace.loop_ids)):
        times = [ev.time for ev in trace.events if ev.loop == n]
        if times:
            mean_iet[n] = float(np.mean(np.diff([0.0] + times)))
    hist = Counter(r.e for r in trace.ticks)
    return TraceStatistics(total, dict(natural), dict(early),
                           (sum(early.values()) / total) if total else 0.0, mean_iet, dict(hist))


def lyapunov_values(trace: SimTrace, loop: int, P: np.ndarray) -> List[float]:
    """``x^T P x`` at the initial time and after every event of ``loop``."""
    vals = []
    x0 = trace.ticks[0].xi[loop]
    vals.append(float(x0 @ P @ x0))
    for ev in trace.events:
        if ev.loop == loop:
            x = trace.ticks[ev.tick].xhat[loop]
            vals.append(float(x @ P @ x))
    return vals
