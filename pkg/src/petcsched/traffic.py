"""Quotient traffic model of one PETC loop and its timed-game form."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import FrozenSet, List, Tuple

import numpy as np

from .errors import AbstractionError, InputError
from .lti import TimingTables
from .regions import RegionSpec, region_of_state
from .sdp import random_unit_vectors

TRIGGER, EARLY = "trigger", "early"


@dataclass(frozen=True, eq=False)
class TrafficModel:
    """Finite quotient of the PETC traffic: regions, trigger and early edges.

    ``trigger_edges`` holds ``(i, j)``; ``early_edges`` holds ``(i, k, j)``
    where ``k < i`` is the clock value (in checks) of the early fire.
    """

    loop_id: str
    k_min: int
    k_max: int
    trigger_edges: FrozenSet[Tuple[int, int]]
    early_edges: FrozenSet[Tuple[int, int, int]] = frozenset()
    h: Fraction = Fraction(1)

    def __post_init__(self):
        object.__setattr__(self, "trigger_edges", frozenset(map(tuple, self.trigger_edges)))
        object.__setattr__(self, "early_edges", frozenset(map(tuple, self.early_edges)))
        object.__setattr__(self, "h", Fraction(self.h))
        for i, j in self.trigger_edges:
            if i not in self.regions or j not in self.regions:
                raise AbstractionError(f"{self.loop_id}: trigger edge {(i, j)} leaves the region set")
        for i, k, j in self.early_edges:
            if i not in self.regions or j not in self.regions or not 1 <= k < i:
                raise AbstractionError(f"{self.loop_id}: bad early edge {(i, k, j)}")
        dead = [i for i in self.regions if not self.trigger_successors(i)]
        if dead:
            raise AbstractionError(f"{self.loop_id}: regions without trigger successors: {dead}")

    @property
    def regions(self) -> range:
        return range(self.k_min, self.k_max + 1)

    def output(self, region: int) -> int:
        return region

    def trigger_successors(self, i: int) -> List[int]:
        return sorted(j for (a, j) in self.trigger_edges if a == i)

    def early_successors(self, i: int, k: int) -> List[int]:
        return sorted(j for (a, kk, j) in self.early_edges if a == i and kk == k)

    def early_times(self, i: int) -> List[int]:
        return sorted({kk for (a, kk, _) in self.early_edges if a == i})

    def to_dict(self) -> dict:
        return {
            "loop_id": self.loop_id,
            "h": str(self.h),
            "k_min": self.k_min,
            "k_max": self.k_max,
            "trigger_edges": sorted([list(e) for e in self.trigger_edges]),
            "early_edges": sorted([list(e) for e in self.early_edges]),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrafficModel":
        return cls(d["loop_id"], int(d["k_min"]), int(d["k_max"]),
                   frozenset(tuple(e) for e in d["trigger_edges"]),
                   frozenset(tuple(e) for e in d.get("early_edges", [])),
                   Fraction(d.get("h", "1")))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "TrafficModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def build_quotient(tables: TimingTables, spec: RegionSpec, relations, loop_id: str = "loop",
                   h=Fraction(1)) -> TrafficModel:
    """Assemble the quotient system from ``(trigger_relation, early_relation)``."""
    trigger, early = relations
    if spec.k_max > tables.k_bar:
        raise InputError("region spec exceeds the timing tables")
    return TrafficModel(loop_id, spec.k_min, spec.k_max, frozenset(trigger), frozenset(early), h)


@dataclass(frozen=True)
class TGAEdge:
    source: int
    guard: int  # edge enabled at c == guard
    action: str
    target: int
    controllable: bool


@dataclass(frozen=True, eq=False)
class TrafficTGA:
    """One-clock timed game: invariant ``c <= i`` in ``Q_i``, clock reset on every edge."""

    loop_id: str
    locations: Tuple[int, ...]
    edges: Tuple[TGAEdge, ...]
    h: Fraction = Fraction(1)
    clock: str = "c"

    @property
    def initial(self) -> Tuple[int, ...]:
        return self.locations

    def invariant(self, location: int) -> int:
        return location

    @property
    def controlled(self) -> List[TGAEdge]:
        return [e for e in self.edges if e.controllable]

    @property
    def uncontrolled(self) -> List[TGAEdge]:
        return [e for e in self.edges if not e.controllable]

    def to_dict(self) -> dict:
        return {
            "loop_id": self.loop_id,
            "clock": self.clock,
            "h": str(self.h),
            "locations": [{"name": f"Q{i}", "invariant": f"{self.clock} <= {i}", "initial": True}
                          for i in self.locations],
            "edges": [{"from": f"Q{e.source}", "to": f"Q{e.target}",
                       "guard": f"{self.clock} == {e.guard}", "action": e.action,
                       "controllable": e.controllable, "reset": [self.clock]}
                      for e in self.edges],
        }


def build_tga(model: TrafficModel) -> TrafficTGA:
    edges = []
    for i, k, j in sorted(model.early_edges):
        edges.append(TGAEdge(i, k, EARLY, j, True))
    for i, j in sorted(model.trigger_edges):
        edges.append(TGAEdge(i, i, TRIGGER, j, False))
    return TrafficTGA(model.loop_id, tuple(model.regions), tuple(edges), model.h)


# ---------------------------------------------------------------------------
# conformance of the concrete PETC against the model

@dataclass
class ConformanceReport:
    trials: int
    events: int
    steps_checked: int = 0
    violations: List[tuple] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def conformance_trials(model: TrafficModel, tables: TimingTables, spec: RegionSpec,
                       trials: int = 1000, events: int = 50, seed: int = 0,
                       early_probability: float = 0.0) -> ConformanceReport:
    """Run the exact PETC from random states and check each step is a model edge.

    With ``early_probability > 0`` some events are replaced by early fires
    at a random offered clock value, which exercises the early edges too.
    Steps are recorded as ``(region, k, next_region)``.
    """
    rng = np.random.default_rng(seed)
    X = random_unit_vectors(rng, trials, tables.n)
    report = ConformanceReport(trials, events)
    trig = model.trigger_edges
    early = model.early_edges
    for t in range(trials):
        x = X[t]
        for _ in range(events):
            i = region_of_state(x, tables, spec)
            k = i
            if early_probability > 0 and i > 1 and rng.random() < early_probability:
                ks = model.early_times(i)
                if ks:
                    k = int(rng.choice(ks))
            x = tables.M(k) @ x
            nrm = np.linalg.norm(x)
            if nrm == 0.0:
                break
            x = x / nrm  # regions are homogeneous; keep magnitudes bounded
            j = region_of_state(x, tables, spec)
            report.steps_checked += 1
            ok = (i, j) in trig if k == i else (i, k, j) in early
            if not ok:
                report.violations.append((t, i, k, j))
    return report

