"""Conservative inference: estimates from random completions.

Every completion of the data yields a legitimate complete-data estimate;
sampling completions and fitting each one gives an ensemble whose
component-wise envelope is an inner approximation of the full set
estimate.  Exact bounds are available for single-variable marginals,
where the extreme completions are obvious.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, bind_pattern
from .errors import DataError
from .network import Network, ml_estimate, smooth
from .util import stable_child_seed


def random_completion(
    net: Network, data: Dataset, rng: np.random.Generator, policy: str = "uniform"
) -> np.ndarray:
    """Fill every missing coordinate uniformly; returns one row per case."""
    if policy != "uniform":
        raise DataError(f"unknown completion policy {policy!r}")
    k = len(net.nodes)
    rows = np.zeros((len(data.cases), k), dtype=np.int64)
    missing_mask = np.zeros((len(data.cases), k), dtype=bool)
    for r, (pattern, _) in enumerate(data.cases):
        bound = bind_pattern(net, data.variables, pattern)
        for i, v in enumerate(bound):
            if v is None:
                missing_mask[r, i] = True
            else:
                rows[r, i] = v
    for i in range(k):
        hole = missing_mask[:, i]
        n_hole = int(hole.sum())
        if n_hole:
            rows[hole, i] = rng.integers(0, net.cards[i], size=n_hole)
    return rows


@dataclass
class ConservativeResult:
    estimates: list[Network]          # smoothed, one per completion
    lower: list[np.ndarray]           # per node, cpt-shaped envelope
    upper: list[np.ndarray]
    midpoint: list[np.ndarray]


def conservative_ensemble(
    structure: Network, data: Dataset, n_completions: int, seed: int
) -> ConservativeResult:
    """Fit one smoothed estimate per random completion and envelope them.

    Per-index child seeds make the ensemble independent of execution order,
    and growing n_completions only appends new members.  The reported
    intervals are component-wise minima and maxima over the sampled
    estimates: an inner approximation of the true set estimate.
    """
    if n_completions < 1:
        raise DataError("need at least one completion")
    weights = np.array([w for _, w in data.cases])
    estimates = []
    for r in range(n_completions):
        rng = np.random.default_rng(stable_child_seed(seed, r))
        rows = random_completion(structure, data, rng)
        raw, row_counts = ml_estimate(structure, (rows, weights))
        estimates.append(smooth(raw, row_counts))
    lower = []
    upper = []
    midpoint = []
    for i in range(len(structure.nodes)):
        stack = np.stack([est.cpts[i] for est in estimates])
        lo = stack.min(axis=0)
        hi = stack.max(axis=0)
        lower.append(lo)
        upper.append(hi)
        midpoint.append((lo + hi) / 2.0)
    return ConservativeResult(estimates, lower, upper, midpoint)


def marginal_bounds(
    data: Dataset, variable: str, state: str, net: Network | None = None
) -> tuple[float, float, float]:
    """Exact bounds on P(variable = state) over all data completions.

    Low counts only cases observed at the state; high adds every case where
    the variable is missing.  Returns (low, high, midpoint).
    """
    if variable not in data.variables:
        raise DataError(f"unknown variable {variable!r}")
    if net is not None:
        net.state_index(variable, state)  # validates the label
    col = data.variables.index(variable)
    known = 0.0
    missing = 0.0
    for pattern, w in data.cases:
        v = pattern[col]
        if v is None:
            missing += w
        elif v == state:
            known += w
    total = data.total_weight
    low = known / total
    high = (known + missing) / total
    return low, high, (low + high) / 2.0
