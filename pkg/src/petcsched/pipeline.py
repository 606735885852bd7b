"""Stage orchestration shared by the command line and the tests."""
from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .config import LoopConfig, ProjectConfig
from .errors import InputError, PetcError
from .game import GameGraph, compose
from .lti import PlantLoop, TimingTables, timing_tables
from .regions import RegionSpec, effective_bounds
from .sdp import RelationEntry, early_entries, sampling_oracle, transition_entries, \
    write_relation_csv
from .sim import LoopBundle, SimConfig, SimTrace, simulate
from .synth import Strategy, solve_safety
from .traffic import ConformanceReport, TrafficModel, build_quotient, conformance_trials

log = logging.getLogger(__name__)


@dataclass(eq=False)
class DesignedLoop:
    config: LoopConfig
    loop: PlantLoop
    P: np.ndarray
    tables: TimingTables


@dataclass(eq=False)
class Abstraction:
    designed: DesignedLoop
    spec: RegionSpec
    model: TrafficModel
    entries: List[RelationEntry]
    seconds: float


def model_path(out: str, loop_id: str) -> str:
    return os.path.join(out, f"{loop_id}.model.json")


def relation_path(out: str, loop_id: str) -> str:
    return os.path.join(out, f"{loop_id}.relation.csv")


def strategy_path(out: str) -> str:
    return os.path.join(out, "strategy.txt")


def design_loop(lc: LoopConfig) -> DesignedLoop:
    try:
        loop, P = lc.design()
    except PetcError as exc:
        raise type(exc)(f"{lc.id}: {exc}") from exc
    return DesignedLoop(lc, loop, P, timing_tables(loop))


def abstract_loop(lc: LoopConfig, cfg: ProjectConfig) -> Abstraction:
    st = cfg.abstraction
    t0 = time.perf_counter()
    d = design_loop(lc)
    spec = effective_bounds(d.tables, st.eig_threshold)
    trig = transition_entries(d.tables, spec, st.tol, st.max_iter, st.threads)
    early = early_entries(d.tables, spec, st.tol, st.max_iter, st.threads,
                          st.allow_sub_miet_early)
    entries = trig + early
    relations = ({(e.source, e.target) for e in trig if e.included},
                 {(e.source, e.k, e.target) for e in early if e.included})
    try:
        model = build_quotient(d.tables, spec, relations, lc.id, lc.h)
    except PetcError as exc:
        raise type(exc)(f"{lc.id}: {exc}") from exc
    return Abstraction(d, spec, model, entries, time.perf_counter() - t0)


def timing_report(abstractions: List[Abstraction]) -> str:
    """Deterministic summary (no wall-clock times, so reruns are byte-identical)."""
    lines = ["loop_id,k_min,k_max,trigger_edges,early_edges,problems,feasible,infeasible,unknown"]
    for a in abstractions:
        statuses = [e.status for e in a.entries]
        lines.append(",".join(map(str, [
            a.model.loop_id, a.spec.k_min, a.spec.k_max, len(a.model.trigger_edges),
            len(a.model.early_edges), len(statuses), statuses.count("Feasible"),
            statuses.count("Infeasible"), statuses.count("Unknown")])))
    return "\n".join(lines) + "\n"


def run_abstract(cfg: ProjectConfig, out: str) -> List[Abstraction]:
    os.makedirs(out, exist_ok=True)
    results = []
    for lc in cfg.loops:
        a = abstract_loop(lc, cfg)
        log.info("%s: regions %d..%d, %d problems in %.1f s", lc.id, a.spec.k_min,
                 a.spec.k_max, len(a.entries), a.seconds)
        a.model.save(model_path(out, lc.id))
        write_relation_csv(relation_path(out, lc.id), lc.id, a.entries)
        results.append(a)
    with open(os.path.join(out, "timing_report.csv"), "w") as fh:
        fh.write(timing_report(results))
    return results


def load_models(cfg: ProjectConfig, out: str) -> List[TrafficModel]:
    models = []
    for lc in cfg.loops:
        path = model_path(out, lc.id)
        if not os.path.exists(path):
            raise InputError(f"{lc.id}: model file {path} not found; run 'abstract' first")
        models.append(TrafficModel.load(path))
    return models


def build_game(cfg: ProjectConfig, models: List[TrafficModel]) -> GameGraph:
    return compose(models, cfg.network(), cfg.earliness, cfg.base_tick)


def run_synthesize(cfg: ProjectConfig, out: str) -> Tuple[GameGraph, Strategy]:
    g = build_game(cfg, load_models(cfg, out))
    st = solve_safety(g)
    st.save(strategy_path(out))
    stats = g.statistics()
    lines = [f"{k}: {v}" for k, v in stats.items()]
    lines += [f"winning: {len(st.winning)}", f"losing_initial: {len(st.losing_initial)}",
              f"success: {st.success}"]
    lines += [f"losing: {s.describe()}" for s in st.losing_initial]
    with open(os.path.join(out, "synthesis_report.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return g, st


def simulation_config(cfg: ProjectConfig, models: List[TrafficModel], strategy: Strategy,
                      initial_states: Optional[List[np.ndarray]] = None) -> SimConfig:
    bundles = []
    for lc, m in zip(cfg.loops, models):
        d = design_loop(lc)
        spec = RegionSpec(m.k_min, m.k_max, cfg.abstraction.eig_threshold)
        bundles.append(LoopBundle(d.loop, d.tables, spec, m))
    if initial_states is None:
        missing = [lc.id for lc in cfg.loops if lc.initial_state is None]
        if missing:
            raise InputError(f"no initial_state for {missing}")
        initial_states = [lc.initial_state for lc in cfg.loops]
    s = cfg.simulation
    return SimConfig(bundles, strategy, initial_states, cfg.network(), cfg.earliness,
                     s.duration, s.arbiter, s.seed, s.prefer_wait, cfg.base_tick)


def run_simulate(cfg: ProjectConfig, out: str) -> SimTrace:
    models = load_models(cfg, out)
    path = strategy_path(out)
    if not os.path.exists(path):
        raise InputError(f"strategy file {path} not found; run 'synthesize' first")
    trace = simulate(simulation_config(cfg, models, Strategy.load(path)))
    trace.write_ticks_csv(os.path.join(out, "trace_ticks.csv"))
    trace.write_events_csv(os.path.join(out, "trace_events.csv"))
    return trace


@dataclass
class OracleRow:
    loop_id: str
    i: int
    k: int
    oracle: int
    sdr: int
    missing: Tuple[int, ...]


@dataclass
class ValidationResult:
    rows: List[OracleRow]
    conformance: Dict[str, ConformanceReport]

    @property
    def ok(self) -> bool:
        return all(not r.missing for r in self.rows) and \
            all(c.ok for c in self.conformance.values())

    def report(self) -> str:
        lines = ["loop_id,i,k,oracle_size,sdr_size,missing"]
        for r in self.rows:
            lines.append(f"{r.loop_id},{r.i},{r.k},{r.oracle},{r.sdr},"
                         f"{' '.join(map(str, r.missing))}")
        for lid, c in self.conformance.items():
            lines.append(f"# conformance {lid}: trials={c.trials} events={c.events} "
                         f"steps={c.steps_checked} violations={len(c.violations)}")
        lines.append(f"# result: {'PASS' if self.ok else 'FAIL'}")
        return "\n".join(lines) + "\n"


def validate_models(cfg: ProjectConfig, models: List[TrafficModel]) -> ValidationResult:
    v = cfg.validation
    rows = []
    conf = {}
    for lc, m in zip(cfg.loops, models):
        d = design_loop(lc)
        spec = RegionSpec(m.k_min, m.k_max, cfg.abstraction.eig_threshold)
        for i in m.regions:
            for k in range(1, i + 1):
                sdr = set(m.trigger_successors(i)) if k == i else set(m.early_successors(i, k))
                seen = sampling_oracle(d.loop, d.tables, spec, i, k, v.samples,
                                       seed=v.seed + 1000 * i + k)
                rows.append(OracleRow(lc.id, i, k, len(seen), len(sdr),
                                      tuple(sorted(seen - sdr))))
        conf[lc.id] = conformance_trials(m, d.tables, spec, v.trials, v.events, v.seed,
                                         early_probability=0.3)
    return ValidationResult(rows, conf)


def run_validate(cfg: ProjectConfig, out: str) -> ValidationResult:
    res = validate_models(cfg, load_models(cfg, out))
    with open(os.path.join(out, "validation_report.csv"), "w") as fh:
        fh.write(res.report())
    return res
