"""Quotient states of the PETC traffic: which check index fires for a held state.

Region ``Q_k`` holds the states whose first positive form among
N(k_min), N(k_min+1), ... is N(k); ``Q_{k_max}`` also absorbs every state
that never fires before ``k_max``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .lti import TimingTables

log = logging.getLogger(__name__)

DEFAULT_EIG_THRESHOLD = 1e-3


@dataclass(frozen=True)
class RegionSpec:
    k_min: int
    k_max: int
    eig_threshold: float = DEFAULT_EIG_THRESHOLD

    def __post_init__(self):
        if not 1 <= self.k_min <= self.k_max:
            raise InputError(f"invalid region range [{self.k_min}, {self.k_max}]")
        if self.eig_threshold <= 0:
            raise InputError("eig_threshold must be positive")

    @property
    def regions(self) -> range:
        return range(self.k_min, self.k_max + 1)

    def __len__(self) -> int:
        return self.k_max - self.k_min + 1


def normalized_extreme_eigs(N: np.ndarray):
    """(lambda_min, lambda_max) of N scaled to unit spectral norm."""
    w = np.linalg.eigvalsh(N)
    scale = np.max(np.abs(w))
    if scale == 0.0:
        return 0.0, 0.0
    return w[0] / scale, w[-1] / scale


def effective_bounds(tables: TimingTables,
                     eig_threshold: float = DEFAULT_EIG_THRESHOLD) -> RegionSpec:
    """Effective minimum and maximum inter-event multiples.

    Definiteness is judged on N(k) / ||N(k)||_2 so the threshold is
    independent of the scaling of the triggering matrix:

    * k_min is the first k whose form has a normalized eigenvalue above
      ``eig_threshold`` (before it, no state can trigger);
    * k_max is the first k whose normalized form is positive semidefinite
      up to ``eig_threshold``, i.e. every state has triggered by then;
      ``k_bar`` when no such k exists.
    """
    k_bar = tables.k_bar
    eigs = [normalized_extreme_eigs(tables.N(k)) for k in range(1, k_bar + 1)]
    k_min = next((k for k in range(1, k_bar + 1) if eigs[k - 1][1] > eig_threshold), None)
    if k_min is None:
        log.warning("no triggering form is indefinite up to k_bar=%d; single region", k_bar)
        return RegionSpec(k_bar, k_bar, eig_threshold)
    k_max = next((k for k in range(k_min, k_bar + 1) if eigs[k - 1][0] > -eig_threshold),
                 k_bar)
    return RegionSpec(k_min, k_max, eig_threshold)


def region_of_state(x, tables: TimingTables, spec: RegionSpec) -> int:
    """Inter-event multiple of held state ``x`` restricted to the effective range."""
    x = np.asarray(x, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise InputError("state has non-finite entries")
    for k in range(spec.k_min, spec.k_max):
        if x @ tables.N(k) @ x > 0.0:
            return k
    return spec.k_max


def regions_of_states(X: np.ndarray, tables: TimingTables, spec: RegionSpec) -> np.ndarray:
    """Vectorized ``region_of_state`` over the rows of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    out = np.full(X.shape[0], spec.k_max, dtype=int)
    undecided = np.ones(X.shape[0], dtype=bool)
    for k in range(spec.k_min, spec.k_max):
        vals = np.einsum("ni,ij,nj->n", X, tables.N(k), X)
        fired = undecided & (vals > 0.0)
        out[fired] = k
        undecided &= ~fired
        if not undecided.any():
            break
    return out
