"""Project configuration: a single YAML file describing loops, network and tool settings."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional

import numpy as np
import yaml

from .errors import InputError
from .game import EarlinessParams, build_network_tga
from .lti import PlantLoop, as_fraction, design_lqr_lyapunov, lqr_gain, lyapunov_triggering_matrix, \
    solve_lyapunov
from .regions import DEFAULT_EIG_THRESHOLD
from .sdp import DEFAULT_MAX_ITER, DEFAULT_TOL


def _matrix(value, what: str, rows: Optional[int] = None) -> np.ndarray:
    try:
        M = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{what}: not a numeric matrix") from exc
    if M.ndim == 1 and rows is not None:
        M = M.reshape(rows, -1)
    if M.ndim != 2:
        raise InputError(f"{what}: expected a 2-D matrix")
    return M


def _plain(M) -> list:
    return [[float(v) for v in row] for row in np.asarray(M)]


@dataclass
class LoopConfig:
    """One control loop. Exactly one of ``K``/LQR weights and one of ``Q_trig``/``rho``."""

    id: str
    A: np.ndarray
    B: np.ndarray
    h: Fraction
    k_bar: int
    K: Optional[np.ndarray] = None
    Q_lqr: Optional[np.ndarray] = None
    R: Optional[np.ndarray] = None
    Q_trig: Optional[np.ndarray] = None
    rho: Optional[float] = None
    initial_state: Optional[np.ndarray] = None

    def __post_init__(self):
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise InputError(f"{self.id}: A must be square")
        if self.B.shape[0] != n:
            raise InputError(f"{self.id}: B must have {n} rows")
        if (self.K is None) == (self.Q_lqr is None and self.R is None):
            raise InputError(f"{self.id}: give exactly one of K or LQR weights (Q_lqr, R)")
        if self.K is None and (self.Q_lqr is None or self.R is None):
            raise InputError(f"{self.id}: LQR design needs both Q_lqr and R")
        if (self.Q_trig is None) == (self.rho is None):
            raise InputError(f"{self.id}: give exactly one of Q_trig or rho")
        if self.initial_state is not None and self.initial_state.shape != (n,):
            raise InputError(f"{self.id}: initial_state must have {n} entries")

    def design(self):
        """Return ``(PlantLoop, P)`` with ``P`` the closed-loop Lyapunov matrix."""
        n = self.A.shape[0]
        if self.K is None and self.rho is not None:
            d = design_lqr_lyapunov(self.A, self.B, self.Q_lqr, self.R, self.rho)
            K, P, Q_trig = d.K, d.P, d.Q_trig
        else:
            K = -lqr_gain(self.A, self.B, self.Q_lqr, self.R)[0] if self.K is None else self.K
            P = solve_lyapunov(self.A + self.B @ K, np.eye(n))
            Q_trig = self.Q_trig
            if Q_trig is None:
                Q_trig = lyapunov_triggering_matrix(self.A, self.B, K, P, self.rho, np.eye(n))
        return PlantLoop(self.A, self.B, K, self.h, self.k_bar, Q_trig, self.id), P

    def to_dict(self) -> dict:
        d = {"id": self.id, "A": _plain(self.A), "B": _plain(self.B), "h": str(self.h),
             "k_bar": self.k_bar}
        if self.K is not None:
            d["K"] = _plain(self.K)
        else:
            d["lqr"] = {"Q": _plain(self.Q_lqr), "R": _plain(self.R)}
        if self.Q_trig is not None:
            d["Q_trig"] = _plain(self.Q_trig)
        else:
            d["rho"] = float(self.rho)
        if self.initial_state is not None:
            d["initial_state"] = [float(v) for v in self.initial_state]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LoopConfig":
        try:
            lid = str(d["id"])
            A = _matrix(d["A"], f"{lid}.A")
            n = A.shape[0]
            lqr = d.get("lqr") or {}
            return cls(
                id=lid, A=A, B=_matrix(d["B"], f"{lid}.B", n),
                h=as_fraction(d["h"]), k_bar=int(d["k_bar"]),
                K=_matrix(d["K"], f"{lid}.K") if "K" in d else None,
                Q_lqr=_matrix(lqr["Q"], f"{lid}.lqr.Q") if "Q" in lqr else None,
                R=_matrix(lqr["R"], f"{lid}.lqr.R") if "R" in lqr else None,
                Q_trig=_matrix(d["Q_trig"], f"{lid}.Q_trig") if "Q_trig" in d else None,
                rho=float(d["rho"]) if "rho" in d else None,
                initial_state=np.array(d["initial_state"], dtype=float)
                if "initial_state" in d else None,
            )
        except KeyError as exc:
            raise InputError(f"loop entry missing key {exc}") from None


@dataclass
class AbstractionSettings:
    eig_threshold: float = DEFAULT_EIG_THRESHOLD
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    allow_sub_miet_early: bool = True
    threads: int = 1


@dataclass
class SimulationSettings:
    duration: Fraction = Fraction(1)
    arbiter: str = "round_robin"
    prefer_wait: bool = True
    seed: int = 0


@dataclass
class ValidationSettings:
    samples: int = 100_000
    trials: int = 1000
    events: int = 50
    seed: int = 0


@dataclass
class ProjectConfig:
    name: str
    loops: List[LoopConfig]
    delta: int = 1
    earliness: EarlinessParams = field(default_factory=EarlinessParams)
    base_tick: Optional[Fraction] = None
    abstraction: AbstractionSettings = field(default_factory=AbstractionSettings)
    simulation: SimulationSettings = field(default_factory=SimulationSettings)
    validation: ValidationSettings = field(default_factory=ValidationSettings)
    output: str = "out"

    def __post_init__(self):
        if not self.loops:
            raise InputError("config needs at least one loop")
        ids = [lp.id for lp in self.loops]
        if len(set(ids)) != len(ids):
            raise InputError(f"duplicate loop ids: {ids}")

    def network(self):
        return build_network_tga(self.delta)

    def to_dict(self) -> dict:
        sim = dataclasses.asdict(self.simulation)
        sim["duration"] = str(self.simulation.duration)
        d = {
            "name": self.name,
            "loops": [lp.to_dict() for lp in self.loops],
            "network": {"delta": self.delta},
            "earliness": {"r": self.earliness.r, "e_ref": self.earliness.e_ref,
                          "E": self.earliness.E},
            "abstraction": dataclasses.asdict(self.abstraction),
            "simulation": sim,
            "validation": dataclasses.asdict(self.validation),
            "output": self.output,
        }
        if self.base_tick is not None:
            d["base_tick"] = str(self.base_tick)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ProjectConfig":
        if not isinstance(d, dict):
            raise InputError("config must be a mapping")
        try:
            sim = dict(d.get("simulation") or {})
            if "duration" in sim:
                sim["duration"] = as_fraction(sim["duration"])
            ear = d.get("earliness") or {}
            return cls(
                name=str(d.get("name", "project")),
                loops=[LoopConfig.from_dict(x) for x in d["loops"]],
                delta=int((d.get("network") or {}).get("delta", 1)),
                earliness=EarlinessParams(int(ear.get("r", 2)), int(ear.get("e_ref", 1)),
                                          int(ear.get("E", 2))),
                base_tick=as_fraction(d["base_tick"]) if d.get("base_tick") is not None else None,
                abstraction=AbstractionSettings(**(d.get("abstraction") or {})),
                simulation=SimulationSettings(**sim),
                validation=ValidationSettings(**(d.get("validation") or {})),
                output=str(d.get("output", "out")),
            )
        except KeyError as exc:
            raise InputError(f"config missing key {exc}") from None
        except TypeError as exc:
            raise InputError(f"config has unknown keys: {exc}") from None


def loads(text: str) -> ProjectConfig:
    try:
        return ProjectConfig.from_dict(yaml.safe_load(text))
    except yaml.YAMLError as exc:
        raise InputError(f"invalid YAML: {exc}") from None


def dumps(cfg: ProjectConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False, default_flow_style=None, width=120)


def load(path) -> ProjectConfig:
    with open(path) as fh:
        return loads(fh.read())


def dump(cfg: ProjectConfig, path):
    with open(path, "w") as fh:
        fh.write(dumps(cfg))
