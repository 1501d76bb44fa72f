"""Time evolution W = S*C, observables, and projective position measurement.

Also provides the closed-form two-step hub-to-hub transfer blocks used to
lock the internal-state conventions, and the hub spin basis |R+->, |L+->.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coins import CoinField, build_coin_operator, GROVER
from .lattice import BasisIndex, ChainGeometry, FluxGauge, ShiftOperator, build_shift, flat_index

__all__ = [
    "WalkState",
    "WalkOperator",
    "step",
    "evolve",
    "position_distribution",
    "std_dev",
    "support_extent",
    "measure_position",
    "hub_spin_state",
    "SPIN_BASIS",
    "two_step_operator",
]

# hub spin basis over internal states (0..3): columns R+, L+, R-, L-
SPIN_BASIS = np.array(
    [
        [1, 0, 1, 0],
        [0, 1, 0, 1],
        [0, 1, 0, -1],
        [1, 0, -1, 0],
    ],
    dtype=complex,
) / np.sqrt(2)


@dataclass
class WalkState:
    """Complex amplitudes over the 8L basis states of a chain."""

    amplitudes: np.ndarray
    geom: ChainGeometry

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (self.geom.dim,):
            raise ValueError(
                f"amplitudes shape {self.amplitudes.shape} does not match dim {self.geom.dim}"
            )

    @classmethod
    def basis_state(cls, geom: ChainGeometry, idx: BasisIndex) -> "WalkState":
        amps = np.zeros(geom.dim, dtype=complex)
        amps[flat_index(idx, geom)] = 1.0
        return cls(amps, geom)

    @classmethod
    def hub_state(cls, geom: ChainGeometry, cell: int, internal: np.ndarray) -> "WalkState":
        """State on one hub site with the given 4-component internal vector."""
        v = np.asarray(internal, dtype=complex)
        if v.shape != (4,):
            raise ValueError("internal vector must have 4 components")
        amps = np.zeros(geom.dim, dtype=complex)
        amps[8 * cell : 8 * cell + 4] = v / np.linalg.norm(v)
        return cls(amps, geom)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> "WalkState":
        return WalkState(self.amplitudes.copy(), self.geom)


def hub_spin_state(geom: ChainGeometry, cell: int, spin: np.ndarray) -> WalkState:
    """Hub state from coefficients (a0, b0, c0, d0) in the (R+, L+, R-, L-) basis."""
    spin = np.asarray(spin, dtype=complex)
    if spin.shape != (4,):
        raise ValueError("spin must have 4 components")
    return WalkState.hub_state(geom, cell, SPIN_BASIS @ spin)


class WalkOperator:
    """One-step walk W = S*C(t) bound to a geometry, gauge and coin field."""

    def __init__(self, geom: ChainGeometry, gauge: FluxGauge, field: CoinField):
        if field.L != geom.L:
            raise ValueError("coin field and geometry disagree on L")
        self.geom = geom
        self.gauge = gauge
        self.field = field
        self.shift: ShiftOperator = build_shift(geom, gauge)
        self._static_coin = build_coin_operator(field, 0, geom) if field.static else None

    def coin_at(self, t: int):
        if self._static_coin is not None:
            return self._static_coin
        return build_coin_operator(self.field, t, self.geom)

    def apply(self, amps: np.ndarray, t: int = 0) -> np.ndarray:
        return self.shift.apply(self.coin_at(t).apply(amps))

    def step(self, state: WalkState, t: int = 0) -> WalkState:
        return WalkState(self.apply(state.amplitudes, t), state.geom)

    def to_dense(self, t: int = 0) -> np.ndarray:
        C = self.coin_at(t).to_dense()
        return self.shift.apply(C.T).T  # S @ C, applying the shift to each column


def step(state: WalkState, field: CoinField, t: int, gauge: FluxGauge) -> WalkState:
    """Single step S*C(t) applied to ``state``.

    Builds the shift on every call; loops should use :class:`WalkOperator`.
    """
    return WalkOperator(state.geom, gauge, field).step(state, t)


def position_distribution(state: WalkState) -> np.ndarray:
    """Per-cell probabilities (summed over sites and internal states)."""
    p = np.abs(state.amplitudes.reshape(state.geom.L, 8)) ** 2
    return p.sum(axis=1)


def std_dev(dist: np.ndarray) -> float:
    """Standard deviation of a per-cell distribution, in cell units."""
    dist = np.asarray(dist, dtype=float)
    x = np.arange(dist.size)
    w = dist / dist.sum()
    mean = (x * w).sum()
    var = ((x - mean) ** 2 * w).sum()
    return float(np.sqrt(max(var, 0.0)))


def support_extent(state: WalkState, eps: float = 1e-12) -> int:
    """Cells in the minimal contiguous window holding all probability > eps."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    cells = np.nonzero(position_distribution(state) > eps)[0]
    if cells.size == 0:
        return 0
    return int(cells.max() - cells.min() + 1)


def evolve(
    initial: WalkState,
    T: int,
    field: CoinField,
    gauge: FluxGauge,
    record=("sigma",),
    t0: int = 0,
):
    """Apply ``T`` steps, recording observables after every step.

    ``record`` may contain "sigma", "distribution", "support", "state".
    Returns a dict with "t" (0..T, including the initial point) and one array
    (or list) per requested observable.
    """
    if T < 0:
        raise ValueError("T must be nonnegative")
    walk = WalkOperator(initial.geom, gauge, field)
    out = {"t": np.arange(T + 1)}
    series = {name: [] for name in record}

    def snapshot(state):
        for name in record:
            if name == "sigma":
                series[name].append(std_dev(position_distribution(state)))
            elif name == "distribution":
                series[name].append(position_distribution(state))
            elif name == "support":
                series[name].append(support_extent(state))
            elif name == "state":
                series[name].append(state.copy())
            else:
                raise ValueError(f"unknown observable {name!r}")

    state = initial.copy()
    snapshot(state)
    for t in range(T):
        state = walk.step(state, t0 + t)
        snapshot(state)
    for name in record:
        if name in ("sigma",):
            out[name] = np.asarray(series[name])
        elif name in ("distribution",):
            out[name] = np.asarray(series[name])
        elif name == "support":
            out[name] = np.asarray(series[name], dtype=int)
        else:
            out[name] = series[name]
    out["final"] = state
    return out


def measure_position(state: WalkState, rng: np.random.Generator):
    """Projective measurement in the full (site, internal) basis.

    Samples one basis state with Born probabilities and collapses onto it.
    Returns (collapsed WalkState, outcome BasisIndex).
    """
    p = np.abs(state.amplitudes) ** 2
    total = p.sum()
    if total < 1e-300:
        raise ValueError("cannot measure a zero state")
    k = rng.choice(p.size, p=p / total)
    amps = np.zeros_like(state.amplitudes)
    amps[k] = 1.0
    from .lattice import basis_index

    return WalkState(amps, state.geom), basis_index(int(k), state.geom)


def two_step_operator(theta_b: float, theta_c: float, f: float = 0.5, hub: int = GROVER):
    """Hub-to-hub transfer blocks of two aggregated walk steps.

    Valid for a Grover hub coin at the critical flux f = 1/2 with rim phases
    phi = omega = beta = 0.  Returns (stay, hop_right, hop_left) as 4x4
    arrays in the (R+, L+, R-, L-) hub spin basis, built from
    c+- = (cos tb +- cos tc)/2 and s+- = (sin tb +- sin tc)/2.
    """
    if hub != GROVER or abs(f - 0.5) > 1e-15:
        raise NotImplementedError("closed form only for the Grover coin at f = 1/2")
    cp = (np.cos(theta_b) + np.cos(theta_c)) / 2
    cm = (np.cos(theta_b) - np.cos(theta_c)) / 2
    sp = (np.sin(theta_b) + np.sin(theta_c)) / 2
    sm = (np.sin(theta_b) - np.sin(theta_c)) / 2
    stay = np.array(
        [
            [0, cp, -cm, 0],
            [cp, 0, 0, -cm],
            [0, cm, -cp, 0],
            [cm, 0, 0, -cp],
        ],
        dtype=complex,
    )
    hop_right = np.array(
        [
            [0, 0, 0, 0],
            [0, -sm, sp, 0],
            [0, 0, 0, 0],
            [0, -sp, sm, 0],
        ],
        dtype=complex,
    )
    hop_left = np.array(
        [
            [sm, 0, 0, -sp],
            [0, 0, 0, 0],
            [sp, 0, 0, -sm],
            [0, 0, 0, 0],
        ],
        dtype=complex,
    )
    return stay, hop_right, hop_left
