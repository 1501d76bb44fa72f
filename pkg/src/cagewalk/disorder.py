"""Seeded disorder samplers and the closed-form cage-statistics laws.

All samplers derive an independent, reproducible random stream per
realization from (master_seed, realization_index) through numpy's
SeedSequence spawning, so ensembles parallelize deterministically.

Cage-size conventions.  Sizes count cells (equivalently hub sites).  A
disorder realization at a critical flux confines the walker between the
nearest coins of the *caging* family (Grover at f = 1/2, Hadamard at
f = 0); coins of the other family are transparent.  Calibrated against the
wavefunction support (probability > 1e-12, accumulated over time, initial
hub spin with weight on both left- and right-moving components):

* static, walker starting at cell 0: the support reaches d_R + 1 cells to
  the right, where d_R >= 1 is the distance to the first caging coin on the
  right, and d_L cells to the left, where d_L >= 2 is the distance to the
  first caging coin at distance >= 2 (the immediate left neighbour never
  blocks).  Total size n = d_L + d_R + 2 >= 5, reproducing
  p(n) = q^2 (1-q)^(n-5) (n-4) with q the caging-coin probability.

* dynamic (one label per step, uniform over the chain): with hub-time
  labels c_1..c_T, every non-caging label in [1, T-1] adds one cell on the
  right, every one in [2, T] adds one on the left, and c_1/c_T alone add
  only their own side; the label at step 0 never matters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, inf
from typing import Optional, Union

import numpy as np

from .coins import GROVER, HADAMARD

__all__ = [
    "DisorderSpec",
    "realization_rng",
    "sample_hub_static",
    "sample_hub_dynamic",
    "sample_rim_box",
    "sample_theta_as",
    "caging_label",
    "static_cage_extent",
    "dynamic_cage_extent",
    "predicted_cage_prob_static",
    "predicted_avg_extension",
    "predicted_cage_prob_dynamic",
]

_KINDS = ("hub-static", "hub-dynamic", "rim-static-box", "rim-dynamic-box", "combined-subdiffusion")


@dataclass(frozen=True)
class DisorderSpec:
    """Disorder kind plus its parameters and the master seed.

    kind / parameters:
      hub-static(p_s) | hub-dynamic(p_t) | rim-static-box(theta0, dtheta) |
      rim-dynamic-box(theta0, dtheta) | combined-subdiffusion(alpha)
    """

    kind: str
    p: Optional[float] = None
    theta0: float = np.pi / 4
    dtheta: float = 0.0
    alpha: Optional[float] = None
    master_seed: int = 0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown disorder kind {self.kind!r}")
        if self.kind in ("hub-static", "hub-dynamic"):
            if self.p is None or not 0.0 <= self.p <= 1.0:
                raise ValueError("hub disorder needs p in [0, 1]")
        if self.kind in ("rim-static-box", "rim-dynamic-box"):
            if not 0.0 <= self.dtheta <= 2 * np.pi:
                raise ValueError("dtheta must lie in [0, 2*pi]")
        if self.kind == "combined-subdiffusion":
            if self.alpha is None or self.alpha >= 1.0:
                raise ValueError("combined disorder needs alpha < 1")


def realization_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent generator for realization ``index`` of an ensemble."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(index,))
    return np.random.Generator(np.random.PCG64(ss))


def _as_rng(seed: Union[int, np.random.Generator]) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return realization_rng(int(seed), 0)


def sample_hub_static(p_s: float, L: int, seed) -> np.ndarray:
    """Per-cell hub labels: Grover with probability p_s, else Hadamard."""
    rng = _as_rng(seed)
    return np.where(rng.random(L) < p_s, GROVER, HADAMARD).astype(np.int64)


def sample_hub_dynamic(p_t: float, T: int, seed) -> np.ndarray:
    """Per-step hub labels (applied uniformly over the chain at each step)."""
    rng = _as_rng(seed)
    return np.where(rng.random(T) < p_t, GROVER, HADAMARD).astype(np.int64)


def sample_rim_box(theta0: float, dtheta: float, count: int, seed) -> np.ndarray:
    """I.i.d. box-distributed angles on [theta0 - dtheta/2, theta0 + dtheta/2]."""
    if dtheta < 0:
        raise ValueError("dtheta must be nonnegative")
    rng = _as_rng(seed)
    return theta0 + dtheta * (rng.random(count) - 0.5)


def sample_theta_as(alpha: float, count: int, seed) -> np.ndarray:
    """Antisymmetric rim angles with density ~ |theta|^(-alpha) on [-pi/2, pi/2].

    Inverse-transform sampling: |theta| = (pi/2) * u^(1/(1-alpha)) with u
    uniform on (0, 1], plus a random sign.
    """
    if alpha >= 1.0:
        raise ValueError("the power-law distribution is not normalizable for alpha >= 1")
    rng = _as_rng(seed)
    u = 1.0 - rng.random(count)  # uniform on (0, 1]
    mag = (np.pi / 2) * u ** (1.0 / (1.0 - alpha))
    sign = np.where(rng.random(count) < 0.5, -1.0, 1.0)
    return sign * mag


def caging_label(f: float) -> int:
    """Hub coin family that cages at flux f (only f = 0 and f = 1/2 cage)."""
    if abs(f - 0.5) < 1e-12:
        return GROVER
    if abs(f) < 1e-12 or abs(f - 1.0) < 1e-12:
        return HADAMARD
    raise ValueError(f"no caging family at flux {f}")


def static_cage_extent(labels: np.ndarray, start: int, f: float) -> int:
    """Cage size in cells for a static hub-label chain, walker starting at ``start``.

    Periodic distances; returns the chain length if no wall exists on a side.
    """
    labels = np.asarray(labels)
    L = labels.size
    cage = caging_label(f)
    d_R = next((d for d in range(1, L) if labels[(start + d) % L] == cage), None)
    d_L = next((d for d in range(2, L) if labels[(start - d) % L] == cage), None)
    if d_R is None or d_L is None:
        return L
    return min(d_L + d_R + 2, L)


def dynamic_cage_extent(labels: np.ndarray, f: float) -> int:
    """Cage size in cells after T hub steps with temporal labels c_1..c_T.

    ``labels[i]`` is the hub coin drawn at hub step i+1 (the step-0 draw is
    irrelevant and not part of the chain).  Follows the temporal wall rules:
    the right side grows by one cell per non-caging label among c_1..c_{T-1},
    the left side per non-caging label among c_2..c_T.
    """
    labels = np.asarray(labels)
    T = labels.size
    if T < 2:
        return 5
    cage = caging_label(f)
    free = labels != cage
    right = 2 + int(free[: T - 1].sum())
    left = 2 + int(free[1:].sum())
    return left + right + 1


def predicted_cage_prob_static(n: int, p_s: float, f: float) -> float:
    """Probability of a static-disorder cage of exactly n cells.

    q^2 (1-q)^(n-5) (n-4) for n >= 5, with q the caging-coin probability
    (q = 1 - p_s at f = 0, q = p_s at f = 1/2); zero below the minimal cage.
    """
    if n < 5:
        return 0.0
    q = p_s if caging_label(f) == GROVER else 1.0 - p_s
    return q * q * (1.0 - q) ** (n - 5) * (n - 4)


def predicted_avg_extension(p_s: float, f: float) -> float:
    """Mean cage size 3 + 2/q; infinite when the caging coin never appears."""
    q = p_s if caging_label(f) == GROVER else 1.0 - p_s
    if q <= 0.0:
        return inf
    return 3.0 + 2.0 / q


def predicted_cage_prob_dynamic(n: int, T: int, p_t: float, f: float) -> float:
    """Probability of a dynamic-disorder cage of n cells after T hub steps.

    Closed form of the temporal wall rules (see ``dynamic_cage_extent``)
    with s the per-step probability of a non-caging draw: the T-2 interior
    labels extend both sides, the two boundary labels one side each, so

      n odd:  C(T-2, g) s^g r^(T-g) + C(T-2, g-1) s^(g+1) r^(T-g-1),
              g = (n-5)/2
      n even: 2 C(T-2, g) s^(g+1) r^(T-g-1),  g = (n-6)/2

    with r = 1 - s.  Normalized over n >= 5 for every T >= 2.
    """
    if T < 2:
        raise ValueError("the temporal rules need T >= 2")
    if n < 5 or n > 2 * T + 3:
        return 0.0
    s = 1.0 - p_t if caging_label(f) == GROVER else p_t
    r = 1.0 - s
    if (n - 5) % 2 == 0:
        g = (n - 5) // 2
        p = comb(T - 2, g) * s**g * r ** (T - g) if g <= T - 2 else 0.0
        if 0 <= g - 1 <= T - 2:
            p += comb(T - 2, g - 1) * s ** (g + 1) * r ** (T - g - 1)
        return float(p)
    g = (n - 6) // 2
    if not 0 <= g <= T - 2:
        return 0.0
    return float(2 * comb(T - 2, g) * s ** (g + 1) * r ** (T - g - 1))
