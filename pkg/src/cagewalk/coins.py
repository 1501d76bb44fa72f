"""Coin matrices and the block-diagonal coin operator.

Rim sites carry a generic U(2) coin; hub sites carry either the 4x4 Grover
coin, the 4x4 Hadamard coin H2 x H2, or its one-parameter deformation
H2(theta) x H2(theta).  A :class:`CoinField` assigns coin parameters to each
cell, optionally redrawn every time step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .lattice import ChainGeometry

__all__ = [
    "GROVER",
    "HADAMARD",
    "HADAMARD_THETA",
    "rim_coin",
    "grover4",
    "hadamard4",
    "hadamard4_theta",
    "RimCoinParams",
    "CoinField",
    "CoinOperator",
    "build_coin_operator",
]

# hub coin labels
GROVER = 0
HADAMARD = 1
HADAMARD_THETA = 2

_HUB_NAMES = {"grover": GROVER, "hadamard": HADAMARD, "hadamard_theta": HADAMARD_THETA}


def rim_coin(theta: float, phi: float = 0.0, omega: float = 0.0, beta: float = 0.0) -> np.ndarray:
    """Generic 2x2 unitary rim coin.

    Acts on (toward-right, toward-left) rim states as
    ``[[cos(t) e^{i b}, -sin(t) e^{i(p+w)}], [sin(t) e^{-i w}, cos(t) e^{i(p-b)}]]``.
    """
    ct, st = np.cos(theta), np.sin(theta)
    return np.array(
        [
            [ct * np.exp(1j * beta), -st * np.exp(1j * (phi + omega))],
            [st * np.exp(-1j * omega), ct * np.exp(1j * (phi - beta))],
        ]
    )


def grover4() -> np.ndarray:
    """4x4 Grover coin: half the all-ones matrix minus the identity."""
    return 0.5 * np.ones((4, 4)) - np.eye(4)


def hadamard4_theta(theta: float) -> np.ndarray:
    """H2(theta) x H2(theta) with H2(theta) = [[cos, sin], [sin, -cos]]."""
    h2 = np.array([[np.cos(theta), np.sin(theta)], [np.sin(theta), -np.cos(theta)]])
    return np.kron(h2, h2)


def hadamard4() -> np.ndarray:
    """4x4 Hadamard coin H2 x H2 (equals ``hadamard4_theta(pi/4)``)."""
    return hadamard4_theta(np.pi / 4)


def hub_coin(label: int, theta: float = np.pi / 4) -> np.ndarray:
    if label == GROVER:
        return grover4()
    if label == HADAMARD:
        return hadamard4()
    if label == HADAMARD_THETA:
        return hadamard4_theta(theta)
    raise ValueError(f"unknown hub coin label {label!r}")


@dataclass(frozen=True)
class RimCoinParams:
    theta: float
    phi: float = 0.0
    omega: float = 0.0
    beta: float = 0.0

    def matrix(self) -> np.ndarray:
        return rim_coin(self.theta, self.phi, self.omega, self.beta)


ArrayOrFn = Union[np.ndarray, Callable[[int], np.ndarray]]


def _at(value: ArrayOrFn, t: int, L: int, dtype) -> np.ndarray:
    if callable(value):
        value = value(t)
    arr = np.asarray(value, dtype=dtype)
    if arr.ndim == 0:
        arr = np.full(L, arr[()], dtype=dtype)
    if arr.shape != (L,):
        raise ValueError(f"coin field entry has shape {arr.shape}, expected ({L},)")
    return arr


@dataclass
class CoinField:
    """Per-cell (optionally per-step) coin assignment.

    ``hub``, ``hub_theta``, ``theta_b`` and ``theta_c`` are scalars, length-L
    arrays, or callables ``t -> array`` for time-dependent fields.  The three
    phase angles of the rim coin are global scalars; every experiment in this
    package keeps them at zero.
    """

    L: int
    hub: ArrayOrFn = GROVER
    theta_b: ArrayOrFn = np.pi / 4
    theta_c: ArrayOrFn = np.pi / 4
    hub_theta: ArrayOrFn = np.pi / 4
    phi: float = 0.0
    omega: float = 0.0
    beta: float = 0.0

    @classmethod
    def uniform(cls, L, hub="grover", theta=np.pi / 4, phi=0.0, omega=0.0, beta=0.0):
        label = _HUB_NAMES[hub] if isinstance(hub, str) else int(hub)
        return cls(L=L, hub=label, theta_b=theta, theta_c=theta, phi=phi, omega=omega, beta=beta)

    @property
    def static(self) -> bool:
        return not any(callable(v) for v in (self.hub, self.theta_b, self.theta_c, self.hub_theta))

    def hub_at(self, t: int) -> np.ndarray:
        return _at(self.hub, t, self.L, np.int64)

    def hub_theta_at(self, t: int) -> np.ndarray:
        return _at(self.hub_theta, t, self.L, float)

    def theta_b_at(self, t: int) -> np.ndarray:
        return _at(self.theta_b, t, self.L, float)

    def theta_c_at(self, t: int) -> np.ndarray:
        return _at(self.theta_c, t, self.L, float)


class CoinOperator:
    """Block-diagonal coin operator for one time step.

    Stores the per-cell 4x4 hub blocks and the rim coin entries in a form
    that applies to state arrays of shape (..., L, 8) without building the
    full matrix.
    """

    def __init__(self, hub_blocks: np.ndarray, rim_b: np.ndarray, rim_c: np.ndarray):
        self.hub_blocks = hub_blocks  # (L, 4, 4)
        self.rim_b = rim_b            # (L, 2, 2)
        self.rim_c = rim_c            # (L, 2, 2)

    def apply(self, psi: np.ndarray) -> np.ndarray:
        L = self.hub_blocks.shape[0]
        out = psi.reshape(psi.shape[:-1] + (L, 8)).copy()
        out[..., 0:4] = np.einsum("nij,...nj->...ni", self.hub_blocks, out[..., 0:4])
        out[..., 4:6] = np.einsum("nij,...nj->...ni", self.rim_b, out[..., 4:6])
        out[..., 6:8] = np.einsum("nij,...nj->...ni", self.rim_c, out[..., 6:8])
        return out.reshape(psi.shape)

    def to_dense(self) -> np.ndarray:
        L = self.hub_blocks.shape[0]
        C = np.zeros((8 * L, 8 * L), dtype=complex)
        for n in range(L):
            C[8 * n : 8 * n + 4, 8 * n : 8 * n + 4] = self.hub_blocks[n]
            C[8 * n + 4 : 8 * n + 6, 8 * n + 4 : 8 * n + 6] = self.rim_b[n]
            C[8 * n + 6 : 8 * n + 8, 8 * n + 6 : 8 * n + 8] = self.rim_c[n]
        return C


def _rim_blocks(theta: np.ndarray, phi: float, omega: float, beta: float) -> np.ndarray:
    ct, st = np.cos(theta), np.sin(theta)
    blocks = np.empty(theta.shape + (2, 2), dtype=complex)
    blocks[..., 0, 0] = ct * np.exp(1j * beta)
    blocks[..., 0, 1] = -st * np.exp(1j * (phi + omega))
    blocks[..., 1, 0] = st * np.exp(-1j * omega)
    blocks[..., 1, 1] = ct * np.exp(1j * (phi - beta))
    return blocks


def build_coin_operator(field: CoinField, t: int, geom: ChainGeometry) -> CoinOperator:
    """Assemble the block-diagonal coin operator of ``field`` at step ``t``."""
    if geom.L != field.L:
        raise ValueError(f"coin field covers {field.L} cells, geometry has {geom.L}")
    labels = field.hub_at(t)
    hub_blocks = np.empty((geom.L, 4, 4), dtype=complex)
    grover_mask = labels == GROVER
    had_mask = labels == HADAMARD
    theta_mask = labels == HADAMARD_THETA
    if grover_mask.any():
        hub_blocks[grover_mask] = grover4()
    if had_mask.any():
        hub_blocks[had_mask] = hadamard4()
    if theta_mask.any():
        th = field.hub_theta_at(t)[theta_mask]
        h2 = np.empty(th.shape + (2, 2))
        h2[..., 0, 0] = np.cos(th)
        h2[..., 0, 1] = np.sin(th)
        h2[..., 1, 0] = np.sin(th)
        h2[..., 1, 1] = -np.cos(th)
        hub_blocks[theta_mask] = np.einsum("nij,nkl->nikjl", h2, h2).reshape(-1, 4, 4)
    unknown = ~(grover_mask | had_mask | theta_mask)
    if unknown.any():
        raise ValueError(f"unknown hub labels {np.unique(labels[unknown])}")
    rim_b = _rim_blocks(field.theta_b_at(t), field.phi, field.omega, field.beta)
    rim_c = _rim_blocks(field.theta_c_at(t), field.phi, field.omega, field.beta)
    return CoinOperator(hub_blocks, rim_b, rim_c)
