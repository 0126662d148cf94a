"""Randomized rounding primitives feeding the online policies.

Three seeded operations: independent per-edge sampling, uniform one-edge
selection inside each offline star, and star-wise dependent rounding (paired
mass shifts that preserve marginals, pin per-star degrees to the floor or
ceiling of the fractional degree, and induce negative correlation within a
star).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instances import Instance

SNAP_TOL = 1e-12


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True, eq=False)
class SampledSupport:
    """Sampled edge support X and its per-star thinned selection Y <= X."""

    X: np.ndarray  # bool per edge
    Y: np.ndarray  # bool per edge; at most one true edge per offline star

    def x_edges_at(self, edge_list: np.ndarray) -> np.ndarray:
        return edge_list[self.X[edge_list]]


def independent_sample(x, seed) -> np.ndarray:
    """Include each edge independently with probability x_e."""
    x = np.asarray(x, dtype=float)
    rng = _as_rng(seed)
    return rng.random(len(x)) < x


def select_per_star(X, inst: Instance, seed) -> np.ndarray:
    """For every offline vertex with sampled incident edges, keep exactly one,
    chosen uniformly; selections are independent across stars.
    """
    X = np.asarray(X, dtype=bool)
    rng = _as_rng(seed)
    Y = np.zeros_like(X)
    for ui in range(inst.n_offline):
        star = inst.edges_at_u[ui]
        present = star[X[star]]
        if len(present):
            Y[present[rng.integers(len(present))]] = True
    return Y


def sample_support(x, inst: Instance, seed) -> SampledSupport:
    rng = _as_rng(seed)
    X = independent_sample(x, rng)
    Y = select_per_star(X, inst, rng)
    return SampledSupport(X=X, Y=Y)


def _round_star(values: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """GKPS-style pairing on one star: repeatedly shift mass between the two
    lowest-indexed fractional coordinates until at most one remains, then
    resolve the leftover by an ordinary coin.  Marginals are preserved at
    every step and the total moves monotonically toward floor/ceil.
    """
    p = values.astype(float).copy()

    def fractional():
        return [i for i, v in enumerate(p) if SNAP_TOL < v < 1.0 - SNAP_TOL]

    frac = fractional()
    while len(frac) >= 2:
        i, j = frac[0], frac[1]
        alpha = min(1.0 - p[i], p[j])
        beta = min(p[i], 1.0 - p[j])
        # +alpha with prob beta/(alpha+beta): expected shift is zero
        if rng.random() < beta / (alpha + beta):
            # raise i by alpha, lower j by alpha; pin the binding side exactly
            if 1.0 - p[i] <= p[j]:
                p[j] -= alpha
                p[i] = 1.0
            else:
                p[i] += alpha
                p[j] = 0.0
        else:
            if p[i] <= 1.0 - p[j]:
                p[j] += beta
                p[i] = 0.0
            else:
                p[i] -= beta
                p[j] = 1.0
        frac = fractional()
    if frac:
        i = frac[0]
        p[i] = 1.0 if rng.random() < p[i] else 0.0
    return p > 0.5


def dependent_round_stars(x, inst: Instance, seed) -> np.ndarray:
    """Round x star-by-star at each offline vertex into an integral edge set.

    Requires the fractional degree of every star to fit its capacity.  Every
    run lands each star's degree in {floor(sum), ceil(sum)}; per-edge
    inclusion probability equals x_e exactly.
    """
    x = np.asarray(x, dtype=float)
    rng = _as_rng(seed)
    chosen = np.zeros(inst.n_edges, dtype=bool)
    for ui in range(inst.n_offline):
        star = inst.edges_at_u[ui]
        if len(star) == 0:
            continue
        vals = x[star]
        if vals.sum() > inst.capacities[ui] + 1e-9:
            raise ValueError(
                f"fractional degree exceeds capacity at {inst.offline_ids[ui]!r}"
            )
        chosen[star] = _round_star(vals, rng)
    return chosen
