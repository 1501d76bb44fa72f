"""Two distinguishable interacting walkers on the diamond chain.

The pair lattice splits into two disconnected sublattices; an on-site
interaction phase acts only on sublattice 1 (both walkers on the same cell's
(a,a), (b,b) or (c,c) site).  Operators are kept sparse; spectra use the
conserved diagonal momentum k+ to block-diagonalize.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .coins import CoinField
from .engine import WalkOperator
from .lattice import ChainGeometry, FluxGauge
from .spectral import confined_eigenstate, confined_energies, critical_flux, quasienergies, unitary_eig

__all__ = [
    "EPS_INDEPENDENT",
    "TwoBodyLattice",
    "two_body_walk",
    "two_body_spectrum",
    "band_spread_over_kplus",
    "pair_family_basis",
    "stable_subspace_basis",
    "subspace_spectrum",
    "stable_subspace_leakage",
    "grow_invariant_subspace",
    "stable_subspace_dimension",
    "STABLE_DIMENSIONS",
    "initial_pair_state",
    "max_pair_distance",
]

# quasi-energies whose confined states stay independent after restriction to
# one sublattice
EPS_INDEPENDENT = (0.0, np.pi / 2, 3 * np.pi / 8, -3 * np.pi / 8)

_SITE_OF_OFFSET = np.array([0, 0, 0, 0, 1, 1, 2, 2])  # 0=a, 1=b, 2=c

#: stable-subspace dimensions for the nine (condition, spin) start states
STABLE_DIMENSIONS = {
    (1, "i"): lambda L: 32 * L,
    (1, "ii"): lambda L: 32 * L,
    (1, "iii"): lambda L: 32 * L,
    (2, "i"): lambda L: 64,
    (2, "ii"): lambda L: 128,
    (2, "iii"): lambda L: 192,
    (3, "i"): lambda L: 32,
    (3, "ii"): lambda L: 64,
    (3, "iii"): lambda L: 96,
}


class TwoBodyLattice:
    """Index bookkeeping for one disconnected sublattice of the pair problem.

    Sublattice 1 holds the site pairs (a,a), (b,b), (b,c), (c,b), (c,c);
    sublattice 2 the hub-rim pairs.  Each keeps 32 internal states per cell
    pair, so the dimension is 32 L^2.
    """

    def __init__(self, L: int, which: int = 1):
        if L < 5:
            raise ValueError("two-body lattices need L >= 5")
        if which not in (1, 2):
            raise ValueError("sublattice index must be 1 or 2")
        self.L = L
        self.which = which
        dim1 = 8 * L
        p1, p2 = np.divmod(np.arange(dim1 * dim1), dim1)
        site1 = _SITE_OF_OFFSET[p1 % 8]
        site2 = _SITE_OF_OFFSET[p2 % 8]
        both_hub = (site1 == 0) & (site2 == 0)
        both_rim = (site1 > 0) & (site2 > 0)
        mask = (both_hub | both_rim) if which == 1 else ~(both_hub | both_rim)
        self.indices = np.nonzero(mask)[0]
        self.p1 = p1[mask]
        self.p2 = p2[mask]
        self.n = self.p1 // 8
        self.m = self.p2 // 8
        self.o1 = self.p1 % 8
        self.o2 = self.p2 % 8
        self.site1 = site1[mask]
        self.site2 = site2[mask]
        # position of each kron index inside this sublattice (or -1)
        self._pos = np.full(dim1 * dim1, -1, dtype=np.int64)
        self._pos[self.indices] = np.arange(self.indices.size)
        # diagonal-momentum classes: (relative cell, internal pair)
        d = (self.n - self.m) % L
        self.class_id = d * 64 + self.o1 * 8 + self.o2
        uniq, inv = np.unique(self.class_id, return_inverse=True)
        self.class_id = inv
        self.n_classes = uniq.size

    @property
    def dim(self) -> int:
        return self.indices.size

    def position(self, p1: int, p2: int) -> int:
        """Sublattice position of the kron index (p1, p2)."""
        pos = self._pos[p1 * 8 * self.L + p2]
        if pos < 0:
            raise IndexError("state does not belong to this sublattice")
        return int(pos)

    def restrict(self, kron_vec_or_pair) -> np.ndarray:
        """Restrict a product state psi1 (x) psi2 to this sublattice."""
        if isinstance(kron_vec_or_pair, tuple):
            psi1, psi2 = kron_vec_or_pair
            return np.asarray(psi1)[self.p1] * np.asarray(psi2)[self.p2]
        return np.asarray(kron_vec_or_pair)[self.indices]

    def interaction_mask(self) -> np.ndarray:
        """States picking up the interaction phase: same-cell (a,a), (b,b), (c,c)."""
        same_cell = self.n == self.m
        same_type = (self.site1 == self.site2)
        return same_cell & same_type

    def cell_probabilities(self, amps: np.ndarray) -> np.ndarray:
        """(L, L) array of probabilities by cell pair (n, m)."""
        p = np.abs(amps) ** 2
        flat = self.n * self.L + self.m
        out = np.bincount(flat, weights=p, minlength=self.L * self.L)
        return out.reshape(self.L, self.L)

    def bloch_basis(self, k: float) -> sp.csr_matrix:
        """Columns are the diagonal-momentum-k combinations of each class."""
        data = np.exp(1j * k * self.n) / np.sqrt(self.L)
        return sp.csr_matrix(
            (data, (np.arange(self.dim), self.class_id)), shape=(self.dim, self.n_classes)
        )


def two_body_walk(
    lattice: TwoBodyLattice,
    f: float,
    phi_int: float = 0.0,
    hub: str = "grover",
    theta: float = np.pi / 4,
) -> sp.csr_matrix:
    """Sparse two-body walk operator on one sublattice.

    The non-interacting operator is the tensor square of the one-body walk
    restricted to the sublattice; the interaction multiplies the coins of
    the same-cell diagonal sites by exp(i*phi_int).
    """
    L = lattice.L
    geom = ChainGeometry(L)
    W1 = WalkOperator(geom, FluxGauge(f), CoinField.uniform(L, hub, theta=theta)).to_dense()
    W1s = sp.csr_matrix(W1)
    W2 = sp.kron(W1s, W1s, format="csr")
    Wsub = W2[np.ix_(lattice.indices, lattice.indices)].tocsr()
    if phi_int != 0.0:
        if lattice.which == 2:
            return Wsub  # no interacting site lives on sublattice 2
        phase = np.ones(lattice.dim, dtype=complex)
        phase[lattice.interaction_mask()] = np.exp(1j * phi_int)
        Wsub = (Wsub @ sp.diags(phase)).tocsr()
    return Wsub


def _kplus_values(L: int) -> np.ndarray:
    return 2 * np.pi * np.arange(L) / L


def two_body_spectrum(
    lattice: TwoBodyLattice,
    f: float,
    phi_int: float = 0.0,
    hub: str = "grover",
    theta: float = np.pi / 4,
    W: Optional[sp.csr_matrix] = None,
):
    """All 32 L^2 eigenphases, resolved by diagonal momentum k+.

    Returns (k_values, eigenphases of shape (L, 32 L)); pooling the rows
    gives the full sublattice spectrum.
    """
    if W is None:
        W = two_body_walk(lattice, f, phi_int, hub, theta)
    ks = _kplus_values(lattice.L)
    eps = np.empty((ks.size, lattice.n_classes))
    for i, k in enumerate(ks):
        V = lattice.bloch_basis(k)
        B = (V.getH() @ (W @ V)).toarray()
        eps[i] = np.sort(quasienergies(np.linalg.eigvals(B)))
    return ks, eps


def band_spread_over_kplus(eps_by_k: np.ndarray) -> np.ndarray:
    """Spread over k+ of each sorted eigenphase position (flatness measure)."""
    return eps_by_k.max(axis=0) - eps_by_k.min(axis=0)


# --------------------------------------------------------------------------
# confined pair states and stable subspaces
# --------------------------------------------------------------------------


def _confined_cache(L: int, hub: str):
    geom = ChainGeometry(L)
    cache = {}
    for eps in confined_energies(hub):
        cache[round(eps, 12)] = {
            n: confined_eigenstate(hub, eps, n, geom).state.amplitudes for n in range(L)
        }
    return cache


def pair_family_basis(
    lattice: TwoBodyLattice,
    n: int,
    j: int,
    hub: str = "grover",
    eps1_list=EPS_INDEPENDENT,
    _cache=None,
) -> np.ndarray:
    """Orthonormal basis of span{ |n, eps1, n+j, eps2> } on the sublattice.

    eps1 runs over the independent quartet, eps2 over all eight confined
    quasi-energies; the 32 projected product states are orthonormalized.
    """
    cache = _confined_cache(lattice.L, hub) if _cache is None else _cache
    vecs = []
    for e1 in eps1_list:
        for e2 in confined_energies(hub):
            v = lattice.restrict((cache[round(float(e1), 12)][n % lattice.L],
                                  cache[round(float(e2), 12)][(n + j) % lattice.L]))
            vecs.append(v)
    M = np.array(vecs).T
    q, r = np.linalg.qr(M)
    keep = np.abs(np.diag(r)) > 1e-10 * np.abs(np.diag(r)).max()
    return q[:, keep]


def _stable_family_centers(condition: int, spin: str, n: int):
    """(first-center, second-center) pairs of the stable subspace families."""
    if condition == 1:
        return None  # all diagonal families, handled by the caller
    if condition == 2:
        if spin == "i":
            pairs = [(n, n - 1), (n - 1, n)]
        elif spin == "ii":
            pairs = [(n, n + 1), (n + 1, n), (n - 1, n), (n, n - 1)]
        elif spin == "iii":
            pairs = []
            for i in (-1, 0, 1):
                pairs += [(n + i, n + i - 1), (n + i - 1, n + i)]
        else:
            raise ValueError("spin must be 'i', 'ii' or 'iii'")
        return pairs
    if condition == 3:
        if spin == "i":
            return [(n, n - 2)]
        if spin == "ii":
            return [(n, n - 2), (n + 1, n - 1)]
        if spin == "iii":
            return [(n + i, n + i - 2) for i in (-1, 0, 1)]
        raise ValueError("spin must be 'i', 'ii' or 'iii'")
    raise ValueError("condition must be 1, 2 or 3")


def stable_subspace_basis(
    lattice: TwoBodyLattice, condition: int, spin: str = "i", n: Optional[int] = None, hub: str = "grover"
) -> np.ndarray:
    """Orthonormal basis of the stable subspace hosting a start configuration.

    Built from confined pair-state families: all diagonal families for
    condition 1 (walkers on the same hub), and the published spin-dependent
    unions of off-diagonal families for conditions 2 and 3.
    """
    n = lattice.L // 2 if n is None else n
    cache = _confined_cache(lattice.L, hub)
    centers = _stable_family_centers(condition, spin, n)
    if centers is None:
        blocks = [pair_family_basis(lattice, nn, 0, hub, _cache=cache) for nn in range(lattice.L)]
    else:
        blocks = [pair_family_basis(lattice, c1, c2 - c1, hub, _cache=cache) for c1, c2 in centers]
    M = np.concatenate(blocks, axis=1)
    q, r = np.linalg.qr(M)
    keep = np.abs(np.diag(r)) > 1e-10 * np.abs(np.diag(r)).max()
    return q[:, keep]


def subspace_spectrum(
    lattice: TwoBodyLattice,
    j: int,
    symmetry: str,
    k_plus: float,
    phi_int: float,
    hub: str = "grover",
    W: Optional[sp.csr_matrix] = None,
    leak_tol: float = 1e-8,
):
    """Eigenphases of the interacting walk on one |psi_j(k+)> invariant block.

    The basis vectors are Fourier sums over n of the symmetrized (S) or
    antisymmetrized (AS) confined pair states at relative offset j.  Raises
    if the constructed block is not invariant (projection leakage).
    """
    if symmetry not in ("S", "AS"):
        raise ValueError("symmetry must be 'S' or 'AS'")
    sign = 1.0 if symmetry == "S" else -1.0
    L = lattice.L
    cache = _confined_cache(lattice.L, hub)
    eps_all = confined_energies(hub)
    vecs = []
    for e1 in eps_all:
        for e2 in eps_all:
            if j == 0 and abs(e1 - e2) < 1e-12 and symmetry == "AS":
                continue
            acc = np.zeros(lattice.dim, dtype=complex)
            for n in range(L):
                direct = lattice.restrict((cache[round(float(e1), 12)][n],
                                           cache[round(float(e2), 12)][(n + j) % L]))
                swapped = lattice.restrict((cache[round(float(e2), 12)][(n + j) % L],
                                            cache[round(float(e1), 12)][n]))
                acc += np.exp(-1j * k_plus * n) * (direct + sign * swapped)
            vecs.append(acc)
    M = np.array(vecs).T
    norms = np.linalg.norm(M, axis=0)
    M = M[:, norms > 1e-9]
    q, r = np.linalg.qr(M)
    keep = np.abs(np.diag(r)) > 1e-8 * np.abs(np.diag(r)).max()
    Q = q[:, keep]
    if W is None:
        W = two_body_walk(lattice, critical_flux(hub), phi_int, hub)
    WQ = W @ Q
    B = Q.conj().T @ WQ
    leak = np.linalg.norm(WQ - Q @ B)
    if leak > leak_tol:
        raise ValueError(f"subspace is not invariant (leakage {leak:.2e})")
    return np.sort(quasienergies(np.linalg.eigvals(B)))


def stable_subspace_leakage(
    lattice: TwoBodyLattice,
    basis: np.ndarray,
    phi_int: float,
    T: int,
    hub: str = "grover",
    W: Optional[sp.csr_matrix] = None,
) -> float:
    """Worst-case escaped norm after T interacting steps, over basis seeds."""
    if W is None:
        W = two_body_walk(lattice, critical_flux(hub), phi_int, hub)
    P = basis @ basis.conj().T
    worst = 0.0
    for i in range(basis.shape[1]):
        v = basis[:, i].copy()
        for _ in range(T):
            v = W @ v
        out = v - P @ v
        worst = max(worst, float(np.linalg.norm(out) ** 2))
    return worst


def grow_invariant_subspace(
    W: sp.csr_matrix, v0: np.ndarray, tol: float = 1e-9, max_dim: Optional[int] = None
) -> np.ndarray:
    """Orthonormal basis of the smallest W-invariant subspace containing v0.

    Repeatedly applies W to every new basis vector and orthogonalizes until
    no component survives above ``tol``.
    """
    max_dim = W.shape[0] if max_dim is None else max_dim
    basis = [v0 / np.linalg.norm(v0)]
    frontier = [basis[0]]
    while frontier and len(basis) < max_dim:
        new_frontier = []
        for v in frontier:
            w = W @ v
            for b in basis:
                w -= (b.conj() @ w) * b
            nrm = np.linalg.norm(w)
            if nrm > tol:
                w /= nrm
                # second orthogonalization pass for numerical hygiene
                for b in basis:
                    w -= (b.conj() @ w) * b
                w /= np.linalg.norm(w)
                basis.append(w)
                new_frontier.append(w)
        frontier = new_frontier
    return np.array(basis).T


def initial_pair_state(lattice: TwoBodyLattice, condition: int, spin: str, n: Optional[int] = None):
    """One of the nine bound-state start configurations on the (a,a) sites.

    Conditions place the walkers on the same (1), adjacent (2) or
    next-nearest (3) hub sites; spins are 'i' (uniform x uniform),
    'ii' (|00> + |33>) or 'iii' (sum of |jj>).
    """
    L = lattice.L
    n = L // 2 if n is None else n
    m = n - (condition - 1)
    if spin == "i":
        coeff = np.ones((4, 4), dtype=complex)
    elif spin == "ii":
        coeff = np.zeros((4, 4), dtype=complex)
        coeff[0, 0] = coeff[3, 3] = 1.0
    elif spin == "iii":
        coeff = np.diag(np.ones(4)).astype(complex)
    else:
        raise ValueError("spin must be 'i', 'ii' or 'iii'")
    amps = np.zeros(lattice.dim, dtype=complex)
    for j1 in range(4):
        for j2 in range(4):
            if coeff[j1, j2] != 0:
                amps[lattice.position(8 * n + j1, 8 * (m % L) + j2)] = coeff[j1, j2]
    amps /= np.linalg.norm(amps)
    return amps, (n, m % L)


def stable_subspace_dimension(
    lattice: TwoBodyLattice,
    condition: int,
    spin: str,
    phi_int: float = 2.0,
    hub: str = "grover",
    W: Optional[sp.csr_matrix] = None,
    verify: bool = True,
) -> int:
    """Numerically verified dimension of a start configuration's stable subspace.

    Builds the subspace from confined pair states, then (with ``verify``)
    checks that it is invariant under the interacting walk and that it
    contains the start state.  Growing the Krylov space of the start state
    alone undershoots these dimensions whenever eigenvalues inside the
    subspace are degenerate, so the dimension is taken from the constructed
    invariant basis rather than from a single-vector closure.
    """
    if W is None:
        W = two_body_walk(lattice, critical_flux(hub), phi_int, hub)
    n = lattice.L // 2
    Q = stable_subspace_basis(lattice, condition, spin, n, hub)
    if verify:
        WQ = W @ Q
        leak = np.linalg.norm(WQ - Q @ (Q.conj().T @ WQ))
        if leak > 1e-8:
            raise ValueError(f"constructed subspace is not invariant (leakage {leak:.2e})")
        v0, _ = initial_pair_state(lattice, condition, spin, n)
        outside = np.linalg.norm(v0 - Q @ (Q.conj().T @ v0))
        if outside > 1e-8:
            raise ValueError(f"start state leaves the constructed subspace ({outside:.2e})")
    return Q.shape[1]


def max_pair_distance(
    lattice: TwoBodyLattice,
    initial: np.ndarray,
    origin: tuple,
    T: int,
    phi_int: float = 2.0,
    hub: str = "grover",
    W: Optional[sp.csr_matrix] = None,
    eps: float = 1e-12,
) -> np.ndarray:
    """Euclidean reach in the (n, m) cell plane at each step, minimal image.

    Entry t is the largest distance from ``origin`` among cell pairs holding
    probability > eps after t steps (t = 0..T).
    """
    if W is None:
        W = two_body_walk(lattice, critical_flux(hub), phi_int, hub)
    L = lattice.L
    n0, m0 = origin
    dn = (np.arange(L) - n0 + L // 2) % L - L // 2
    dm = (np.arange(L) - m0 + L // 2) % L - L // 2
    dist = np.sqrt(dn[:, None] ** 2 + dm[None, :] ** 2)
    out = np.empty(T + 1)
    v = initial.astype(complex)
    for t in range(T + 1):
        if t:
            v = W @ v
        p = lattice.cell_probabilities(v)
        out[t] = dist[p > eps].max() if (p > eps).any() else 0.0
    return out
