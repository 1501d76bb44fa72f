"""Diamond-chain Hilbert space and the flux-dressed shift operator.

Every unit cell holds one four-fold hub site ``a`` and the two rim sites
``b``, ``c`` to its right, for 8 internal states per cell.  Internal states
point along edges:

* hub: 0 right-to-b, 1 left-to-b, 2 left-to-c, 3 right-to-c
* rim: 0 toward the right hub (cell n+1), 1 toward the left hub (cell n)

The shift swaps the two internal states of every edge, which makes it both
unitary and hermitian.  The magnetic flux enters as a single Peierls phase
``exp(2i*pi*f)`` on the hop from ``c_n`` to ``a_n`` (the edge joining hub
sites to the right c sites), so each rhombic plaquette encloses a reduced
flux ``f``.

This ordering is locked by tests: composing two walk steps reproduces the
closed-form hub-to-hub transfer blocks (see ``engine.two_step_operator``),
and the confined flat-band eigenvectors come out with the published
coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SITES",
    "ChainGeometry",
    "BasisIndex",
    "FluxGauge",
    "flat_index",
    "basis_index",
    "ShiftOperator",
    "build_shift",
    "plaquette_phases",
]

SITES = ("a", "b", "c")
_SITE_OFFSET = {"a": 0, "b": 4, "c": 6}
_SITE_DIM = {"a": 4, "b": 2, "c": 2}


@dataclass(frozen=True)
class ChainGeometry:
    """Length and boundary condition of the chain."""

    L: int
    boundary: str = "periodic"

    def __post_init__(self):
        if not isinstance(self.L, (int, np.integer)) or self.L < 1:
            raise ValueError(f"L must be a positive integer, got {self.L!r}")
        if self.boundary not in ("periodic", "open"):
            raise ValueError(f"boundary must be 'periodic' or 'open', got {self.boundary!r}")

    @property
    def dim(self) -> int:
        """Total Hilbert-space dimension, 8 states per cell."""
        return 8 * self.L


@dataclass(frozen=True)
class BasisIndex:
    """One basis state: (cell, site, internal)."""

    cell: int
    site: str
    internal: int

    def validate(self, geom: ChainGeometry) -> None:
        if self.site not in SITES:
            raise IndexError(f"unknown site {self.site!r}")
        if not 0 <= self.cell < geom.L:
            raise IndexError(f"cell {self.cell} outside [0, {geom.L})")
        if not 0 <= self.internal < _SITE_DIM[self.site]:
            raise IndexError(
                f"internal {self.internal} outside [0, {_SITE_DIM[self.site]}) for site {self.site}"
            )


@dataclass(frozen=True)
class FluxGauge:
    """Reduced flux per plaquette, in units of the flux quantum."""

    f: float = 0.0

    @property
    def phase(self) -> complex:
        return np.exp(2j * np.pi * self.f)


def flat_index(idx: BasisIndex, geom: ChainGeometry) -> int:
    """Flatten (cell, site, internal) to an integer in [0, 8L)."""
    idx.validate(geom)
    return 8 * idx.cell + _SITE_OFFSET[idx.site] + idx.internal


def basis_index(flat: int, geom: ChainGeometry) -> BasisIndex:
    """Inverse of :func:`flat_index`."""
    if not 0 <= flat < geom.dim:
        raise IndexError(f"flat index {flat} outside [0, {geom.dim})")
    cell, off = divmod(flat, 8)
    if off < 4:
        return BasisIndex(cell, "a", off)
    if off < 6:
        return BasisIndex(cell, "b", off - 4)
    return BasisIndex(cell, "c", off - 6)


class ShiftOperator:
    """Edge-swap shift as a phased permutation: (S psi)[i] = phase[i] * psi[perm[i]].

    Unitary and hermitian (an involution), so ``apply`` is its own inverse.
    """

    def __init__(self, perm: np.ndarray, phase: np.ndarray, geom: ChainGeometry, gauge: FluxGauge):
        self.perm = perm
        self.phase = phase
        self.geom = geom
        self.gauge = gauge
        self.perm.setflags(write=False)
        self.phase.setflags(write=False)

    def apply(self, psi: np.ndarray) -> np.ndarray:
        return self.phase * psi[..., self.perm]

    def to_dense(self) -> np.ndarray:
        dim = self.geom.dim
        S = np.zeros((dim, dim), dtype=complex)
        S[np.arange(dim), self.perm] = self.phase
        return S


def build_shift(geom: ChainGeometry, gauge: FluxGauge) -> ShiftOperator:
    """Build the shift for the given geometry and flux.

    With open boundaries the dangling edge states at the chain ends are
    mapped to themselves (hard-wall reflection), which keeps S an involution.
    """
    L = geom.L
    dim = geom.dim
    perm = np.arange(dim)
    phase = np.ones(dim, dtype=complex)
    periodic = geom.boundary == "periodic"

    def fi(cell, site, internal):
        return 8 * (cell % L) + _SITE_OFFSET[site] + internal

    for n in range(L):
        # intra-cell edges: a_n <-> b_n and the flux-carrying a_n <-> c_n
        i, j = fi(n, "a", 0), fi(n, "b", 1)
        perm[i], perm[j] = j, i
        i, j = fi(n, "a", 3), fi(n, "c", 1)
        perm[i], perm[j] = j, i
        phase[i] = gauge.phase          # <a_n,3|S|c_n,1> = e^{2i pi f}
        phase[j] = np.conj(gauge.phase)
        # inter-cell edges: a_n <-> b_{n-1} and a_n <-> c_{n-1}
        if periodic or n > 0:
            i, j = fi(n, "a", 1), fi(n - 1, "b", 0)
            perm[i], perm[j] = j, i
            i, j = fi(n, "a", 2), fi(n - 1, "c", 0)
            perm[i], perm[j] = j, i
    return ShiftOperator(perm, phase, geom, gauge)


def plaquette_phases(shift: ShiftOperator) -> np.ndarray:
    """Oriented product of hop amplitudes around each rhombus.

    The loop runs a_n -> b_n -> a_{n+1} -> c_n -> a_n; for the chosen gauge
    every plaquette returns exp(2i*pi*f).  Only defined between consecutive
    cells, so the result has L entries for periodic chains and L-1 for open.
    """
    geom = shift.geom
    S = shift.to_dense()
    g = ChainGeometry(geom.L, "periodic")  # reuse index helper only

    def amp(dst, src):
        return S[flat_index(BasisIndex(*dst), g), flat_index(BasisIndex(*src), g)]

    L = geom.L
    cells = range(L) if geom.boundary == "periodic" else range(L - 1)
    out = []
    for n in cells:
        m = (n + 1) % L
        loop = (
            amp((n, "b", 1), (n, "a", 0))
            * amp((m, "a", 1), (n, "b", 0))
            * amp((n, "c", 0), (m, "a", 2))
            * amp((n, "a", 3), (n, "c", 1))
        )
        out.append(loop)
    return np.asarray(out)
