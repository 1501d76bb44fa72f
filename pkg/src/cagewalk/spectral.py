"""Quasi-energy spectra, localization measures, and confined eigenstates.

Eigenphase convention: W|psi> = exp(-i*eps)|psi> with eps in (-pi, pi].
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .coins import CoinField, GROVER, HADAMARD, grover4, hadamard4, rim_coin
from .engine import WalkOperator, WalkState
from .lattice import ChainGeometry, FluxGauge

__all__ = [
    "quasienergies",
    "bloch_operator",
    "spectrum_vs_flux",
    "unitary_eig",
    "full_spectrum",
    "ipr",
    "level_spacing_stats",
    "SpectrumResult",
    "SpacingStats",
    "CONFINED_TABLE",
    "ConfinedEigenstate",
    "confined_energies",
    "confined_eigenstate",
    "critical_flux",
    "walk_matrix",
]

_HUB_MATS = {GROVER: grover4, HADAMARD: hadamard4}
_CRITICAL_FLUX = {GROVER: 0.5, HADAMARD: 0.0, "grover": 0.5, "hadamard": 0.0}


def critical_flux(family) -> float:
    """Caging flux of a hub coin family: 1/2 for Grover, 0 for Hadamard."""
    return _CRITICAL_FLUX[family]


def quasienergies(evals: np.ndarray) -> np.ndarray:
    """Map unitary eigenvalues exp(-i*eps) to eps in (-pi, pi]."""
    eps = -np.angle(evals)
    return np.where(eps <= -np.pi + 1e-12, eps + 2 * np.pi, eps)


def bloch_operator(
    k: float,
    f: float,
    hub=GROVER,
    theta: float = np.pi / 4,
    phi: float = 0.0,
    omega: float = 0.0,
    beta: float = 0.0,
) -> np.ndarray:
    """8x8 walk operator of the translation-invariant chain at momentum k.

    Cell basis ordering matches the real-space layout: hub internals 0..3,
    then rim b (toward-right, toward-left), then rim c.
    """
    hub_mat = _HUB_MATS[hub]() if hub in _HUB_MATS else np.asarray(hub, dtype=complex)
    C = np.zeros((8, 8), dtype=complex)
    C[0:4, 0:4] = hub_mat
    C[4:6, 4:6] = rim_coin(theta, phi, omega, beta)
    C[6:8, 6:8] = rim_coin(theta, phi, omega, beta)
    S = np.zeros((8, 8), dtype=complex)
    pf = np.exp(2j * np.pi * f)
    # intra-cell edges
    S[0, 5] = S[5, 0] = 1.0
    S[3, 7] = pf
    S[7, 3] = np.conj(pf)
    # inter-cell edges pick up the Bloch phase
    S[1, 4] = np.exp(-1j * k)
    S[4, 1] = np.exp(1j * k)
    S[2, 6] = np.exp(-1j * k)
    S[6, 2] = np.exp(1j * k)
    return S @ C


@dataclass
class SpectrumResult:
    """Eigenphases on a (flux, k) or (flux, state) grid."""

    flux: np.ndarray
    energies: np.ndarray          # (n_flux, n_k, n_band) or (n_flux, dim)
    k: Optional[np.ndarray] = None
    eigenvectors: Optional[list] = None

    def band_spread(self, i_flux: int) -> np.ndarray:
        """Max-min over k of each sorted band at one flux point."""
        if self.k is None:
            raise ValueError("band spread needs a k-resolved spectrum")
        bands = np.sort(self.energies[i_flux], axis=-1)
        return bands.max(axis=0) - bands.min(axis=0)

    def degeneracies(self, i_flux: int, tol: float = 1e-8):
        """Distinct eigenphases and their multiplicities at one flux point."""
        eps = np.sort(np.ravel(self.energies[i_flux]))
        values, counts = [], []
        for e in eps:
            if values and min(abs(e - values[-1]), abs(abs(e - values[-1]) - 2 * np.pi)) < tol:
                counts[-1] += 1
            else:
                values.append(e)
                counts.append(1)
        # merge the wrap-around pair at +-pi
        if len(values) > 1 and abs(abs(values[-1] - values[0]) - 2 * np.pi) < tol:
            counts[0] += counts.pop()
            values.pop()
        return np.asarray(values), np.asarray(counts)


def spectrum_vs_flux(
    flux_grid,
    k_grid,
    hub=GROVER,
    theta: float = np.pi / 4,
    phi: float = 0.0,
    omega: float = 0.0,
    beta: float = 0.0,
) -> SpectrumResult:
    """Quasi-energy bands of the clean chain over a flux and momentum grid."""
    flux_grid = np.atleast_1d(np.asarray(flux_grid, dtype=float))
    k_grid = np.atleast_1d(np.asarray(k_grid, dtype=float))
    energies = np.empty((flux_grid.size, k_grid.size, 8))
    for i, f in enumerate(flux_grid):
        for j, k in enumerate(k_grid):
            W = bloch_operator(k, f, hub, theta, phi, omega, beta)
            energies[i, j] = np.sort(quasienergies(np.linalg.eigvals(W)))
    return SpectrumResult(flux=flux_grid, energies=energies, k=k_grid)


def unitary_eig(W: np.ndarray, cluster_tol: float = 1e-9):
    """Eigendecomposition of a unitary matrix via its hermitian parts.

    Diagonalizes (W + W†)/2, then splits every near-degenerate cluster with
    the projected (W - W†)/2i.  Returns (quasi-energies, eigenvector columns)
    with the eigenvectors orthonormal even inside degenerate subspaces.
    """
    A = (W + W.conj().T) / 2
    w, V = np.linalg.eigh(A)
    B = (W - W.conj().T) / 2j
    n = W.shape[0]
    evals = np.empty(n, dtype=complex)
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and w[stop] - w[stop - 1] < cluster_tol:
            stop += 1
        sl = slice(start, stop)
        Vc = V[:, sl]
        if stop - start > 1:
            Bc = Vc.conj().T @ (B @ Vc)
            Bc = (Bc + Bc.conj().T) / 2
            _, U = np.linalg.eigh(Bc)
            Vc = Vc @ U
            V[:, sl] = Vc
        lam = np.einsum("ij,ij->j", Vc.conj(), W @ Vc)
        evals[sl] = lam / np.abs(lam)
        start = stop
    return quasienergies(evals), V


def full_spectrum(W: np.ndarray, want_vectors: bool = True, max_dim: int = 8192):
    """All eigenphases (and eigenvectors) of a dense walk operator.

    Accepts the dense matrix or a :class:`WalkOperator`.
    """
    if isinstance(W, WalkOperator):
        W = W.to_dense()
    if W.shape[0] > max_dim:
        raise MemoryError(f"dense diagonalization refused for dim {W.shape[0]} > {max_dim}")
    eps, V = unitary_eig(W)
    order = np.argsort(eps)
    return (eps[order], V[:, order]) if want_vectors else (eps[order], None)


def ipr(vec: np.ndarray, geom: Optional[ChainGeometry] = None) -> float:
    """Inverse participation ratio over sites.

    Sums |amplitude|^2 within each site (a, b, c per cell), then returns the
    sum of squared site probabilities.  A state on a single site gives 1; a
    state spread evenly over N sites gives 1/N.
    """
    amps = vec.amplitudes if isinstance(vec, WalkState) else np.asarray(vec)
    p = np.abs(amps.reshape(-1, 8)) ** 2
    site_p = np.stack([p[:, 0:4].sum(1), p[:, 4:6].sum(1), p[:, 6:8].sum(1)], axis=1)
    total = site_p.sum()
    return float((site_p**2).sum() / total**2)


@dataclass
class SpacingStats:
    spacings: np.ndarray
    hist: np.ndarray
    bin_edges: np.ndarray
    ks_distance: float


def level_spacing_stats(quasi_energies, bins: int = 40, s_max: float = 5.0) -> SpacingStats:
    """Unfolded nearest-neighbour spacing statistics on the circle.

    Accepts one spectrum or a list of spectra; each is unfolded to unit mean
    spacing before pooling.  The KS distance is taken against the Poisson
    law P(s) = exp(-s).
    """
    if isinstance(quasi_energies, np.ndarray) and quasi_energies.ndim == 1:
        spectra = [quasi_energies]
    else:
        spectra = list(quasi_energies)
    pooled = []
    for eps in spectra:
        eps = np.sort(np.asarray(eps, dtype=float))
        if eps.size < 100:
            raise ValueError("need at least 100 levels per spectrum")
        gaps = np.diff(eps)
        wrap = 2 * np.pi - (eps[-1] - eps[0])
        s = np.concatenate([gaps, [wrap]])
        pooled.append(s / s.mean())
    s = np.concatenate(pooled)
    s_sorted = np.sort(s)
    cdf = 1.0 - np.exp(-s_sorted)
    ecdf_hi = np.arange(1, s.size + 1) / s.size
    ecdf_lo = np.arange(0, s.size) / s.size
    ks = float(np.max(np.maximum(np.abs(ecdf_hi - cdf), np.abs(ecdf_lo - cdf))))
    hist, edges = np.histogram(s, bins=bins, range=(0.0, s_max), density=True)
    return SpacingStats(spacings=s, hist=hist, bin_edges=edges, ks_distance=ks)


# --------------------------------------------------------------------------
# confined flat-band eigenstates
# --------------------------------------------------------------------------

_SQ2 = np.sqrt(2.0)
_SQ3 = np.sqrt(3.0)
_W6 = np.exp(1j * np.pi / 6)      # (-1)^{1/6}
_W56 = np.exp(5j * np.pi / 6)     # (-1)^{5/6}

#: Published coefficient table of the maximally confined eigenvectors at the
#: critical flux with rim coin angle theta = pi/4 and zero rim phases.  Each
#: row lists the two quasi-energies sharing the coefficients (alpha, beta,
#: gamma, delta).
CONFINED_TABLE = {
    "grover": [
        ((0.0, np.pi), (1, 1 + _SQ2, 1 + _SQ2, 1)),
        ((np.pi / 2, -np.pi / 2), (1, 1 - _SQ2, 1 - _SQ2, 1)),
        ((-3 * np.pi / 8, 5 * np.pi / 8), (-1, 1j, -1j, 1)),
        ((3 * np.pi / 8, -5 * np.pi / 8), (-1, -1j, 1j, 1)),
    ],
    "hadamard": [
        ((5 * np.pi / 12, -7 * np.pi / 12),
         (-1j * np.sqrt(5 - 2 * np.sqrt(6)), 1 - _W6 * _SQ2, 1 + _W56 * _SQ2, 1)),
        ((-np.pi / 12, 11 * np.pi / 12),
         (-1j * (_SQ2 + _SQ3), 1 + _W6 * _SQ2, 1 - _W56 * _SQ2, 1)),
        ((-5 * np.pi / 12, 7 * np.pi / 12),
         (1j * np.sqrt(5 - 2 * np.sqrt(6)), 1 + _W56 * _SQ2, 1 - _W6 * _SQ2, 1)),
        ((np.pi / 12, -11 * np.pi / 12),
         (1j * (_SQ2 + _SQ3), 1 - _W56 * _SQ2, 1 + _W6 * _SQ2, 1)),
    ],
}


@dataclass
class ConfinedEigenstate:
    family: str
    epsilon: float
    center: int
    coefficients: tuple
    state: WalkState


def confined_energies(family: str) -> np.ndarray:
    """The 8 confined quasi-energies of a coin family, sorted."""
    eps = [e for row in CONFINED_TABLE[family] for e in row[0]]
    return np.sort(np.asarray(eps))


def _table_row(family: str, epsilon: float):
    for eps_pair, coeffs in CONFINED_TABLE[family]:
        for e in eps_pair:
            if abs(e - epsilon) < 1e-9:
                return e, coeffs
    raise KeyError(f"no confined eigenstate of the {family} family at eps={epsilon}")


def confined_eigenstate(family: str, epsilon: float, center: int, geom: ChainGeometry) -> ConfinedEigenstate:
    """Three-cell eigenstate of the caging walk, centered on hub ``center``.

    Valid at the family's critical flux with theta = pi/4 and zero rim
    phases.  The amplitude pattern is fixed by requiring the coin output at
    the two boundary hubs to point inward, which also reproduces the
    published (alpha, beta, gamma, delta) coefficients: the left boundary
    hub carries alpha times the reflecting spin state, the right boundary
    carries delta, and the central hub carries the combinations
    1 + sqrt(2)*lambda**(+-2) with lambda = exp(-i*eps).
    """
    if geom.boundary != "periodic" or geom.L < 3:
        raise ValueError("confined eigenstates need a periodic chain with L >= 3")
    epsilon, (a_t, b_t, g_t, d_t) = _table_row(family, epsilon)
    lam = np.exp(-1j * epsilon)
    ap, dp = -a_t, d_t
    L = geom.L
    amps = np.zeros(geom.dim, dtype=complex)

    def put(cell, offset, value):
        amps[8 * (cell % L) + offset] = value

    n = center
    F = 1 + _SQ2 / lam**2
    if family == "grover":
        put(n - 1, 0, ap)
        put(n - 1, 3, -ap)
        rb = (_SQ2 * lam + 1 / lam) * ap
        rim_in = -ap / lam
        hub_mid = (-dp * F, ap * F, ap * F, -dp * F)
    elif family == "hadamard":
        put(n - 1, 0, ap)
        put(n - 1, 3, ap)
        rb = (_SQ2 * lam - 1 / lam) * ap
        rim_in = ap / lam
        G = 1 - _SQ2 / lam**2
        hub_mid = (-dp * F, ap * G, ap * G, dp * F)
    else:
        raise KeyError(f"unknown family {family!r}")
    put(n - 1, 4, rb)
    put(n - 1, 5, rim_in)
    put(n - 1, 6, rb)
    put(n - 1, 7, rim_in)
    for j, v in enumerate(hub_mid):
        put(n, j, v)
    put(n, 4, -dp / lam)
    put(n, 5, -dp / lam - _SQ2 * lam * dp)
    put(n, 6, dp / lam)
    put(n, 7, dp / lam + _SQ2 * lam * dp)
    put(n + 1, 1, dp)
    put(n + 1, 2, -dp)

    amps /= np.linalg.norm(amps)
    return ConfinedEigenstate(
        family=family,
        epsilon=epsilon,
        center=center % L,
        coefficients=(a_t, b_t, g_t, d_t),
        state=WalkState(amps, geom),
    )


def walk_matrix(geom: ChainGeometry, gauge: FluxGauge, field: CoinField, t: int = 0) -> np.ndarray:
    """Dense one-step walk matrix S*C(t)."""
    return WalkOperator(geom, gauge, field).to_dense(t)
