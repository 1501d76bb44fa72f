"""Disorder-averaged ensembles, fits, and the preset experiments.

The ensemble runner propagates all realizations of a disorder kind in one
vectorized batch (state array of shape (R, L, 8)); rim phases are fixed at
zero on these fast paths, which covers every experiment in scope.
Realization ``i`` always draws from ``realization_rng(master_seed, i)``, so
results are independent of batching and worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.optimize import curve_fit

from .coins import GROVER, HADAMARD, grover4, hadamard4
from .disorder import (
    DisorderSpec,
    realization_rng,
    sample_hub_dynamic,
    sample_hub_static,
    sample_rim_box,
    sample_theta_as,
)
from .engine import SPIN_BASIS
from .lattice import ChainGeometry, FluxGauge, build_shift

__all__ = [
    "ExperimentSpec",
    "EnsembleResult",
    "run_ensemble",
    "fit_exponent",
    "fit_gaussian",
    "exponential_tail_fit",
    "MeasurementResult",
    "measurement_experiment",
    "subdiffusion_experiment",
    "predicted_variance_dynamic_rim",
    "default_fit_window",
    "log_spaced_times",
    "ipr_scan",
]

_HUB_G = grover4()
_HUB_H = hadamard4()


@dataclass(frozen=True)
class ExperimentSpec:
    """A disorder-averaged walk experiment.

    ``initial_spin`` holds hub-internal amplitudes (4 components); the
    default populates both left- and right-moving components so the clean
    cage attains its maximal 5-cell extension.
    """

    L: int
    T: int
    realizations: int = 100
    flux: float = 0.5
    hub: str = "grover"
    theta0: float = np.pi / 4
    disorder: Optional[DisorderSpec] = None
    initial_cell: Optional[int] = None
    initial_spin: tuple = (1.0, 1.0, 0.0, 0.0)
    record_times: Optional[np.ndarray] = None
    track_extent: bool = False
    eps: float = 1e-12
    master_seed: int = 0

    def __post_init__(self):
        if self.L < 5:
            raise ValueError("caging experiments need L >= 5")
        if self.T < 0 or self.realizations < 1:
            raise ValueError("need T >= 0 and realizations >= 1")
        budget = 8.0 * self.L * self.T * self.realizations
        if budget > 4e12:
            raise MemoryError("experiment budget exceeds the resource guard")

    @property
    def start(self) -> int:
        return self.L // 2 if self.initial_cell is None else self.initial_cell


@dataclass
class EnsembleResult:
    """Time series and distributions averaged over disorder realizations."""

    t: np.ndarray                 # recorded times
    sigma: np.ndarray             # (R, n_rec) per-realization standard deviation
    mean_distribution: np.ndarray  # final-time cell distribution, ensemble mean
    extent: Optional[np.ndarray]  # (R,) accumulated support extent, if tracked
    realizations: int
    master_seed: int

    @property
    def sigma_mean(self) -> np.ndarray:
        return self.sigma.mean(axis=0)

    @property
    def sigma_stderr(self) -> np.ndarray:
        n = self.sigma.shape[0]
        return self.sigma.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(self.sigma.shape[1])

    @property
    def variance_mean(self) -> np.ndarray:
        """Disorder-averaged variance (mean of sigma^2)."""
        return (self.sigma**2).mean(axis=0)

    @property
    def variance_stderr(self) -> np.ndarray:
        n = self.sigma.shape[0]
        v = self.sigma**2
        return v.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(v.shape[1])


def log_spaced_times(T: int, n: int = 200) -> np.ndarray:
    """About n distinct integer times from 1 to T, log spaced."""
    if T < 1:
        return np.array([0])
    ts = np.unique(np.round(np.logspace(0, np.log10(T), n)).astype(int))
    return ts[ts >= 1]


def default_fit_window(T: int) -> tuple:
    """Last half-decade of a series ending at T."""
    return (T / 10**0.5, T)


# --------------------------------------------------------------------------
# batched propagation kernel
# --------------------------------------------------------------------------


def _shift_arrays(L: int, f: float):
    s = build_shift(ChainGeometry(L), FluxGauge(f))
    return s.perm, s.phase


def _apply_rims(psi, cb, sb, cc, sc):
    """In-place rim coin application; angles broadcast against (R, L)."""
    b0 = psi[:, :, 4].copy()
    psi[:, :, 4] = cb * b0 - sb * psi[:, :, 5]
    psi[:, :, 5] = sb * b0 + cb * psi[:, :, 5]
    c0 = psi[:, :, 6].copy()
    psi[:, :, 6] = cc * c0 - sc * psi[:, :, 7]
    psi[:, :, 7] = sc * c0 + cc * psi[:, :, 7]


def _apply_hubs(psi, grover_mask):
    """Apply Grover where mask is true, Hadamard elsewhere; mask broadcasts."""
    hub = psi[:, :, 0:4]
    if grover_mask is True:
        psi[:, :, 0:4] = hub @ _HUB_G.T
    elif grover_mask is False:
        psi[:, :, 0:4] = hub @ _HUB_H.T
    else:
        g = hub @ _HUB_G.T
        h = hub @ _HUB_H.T
        psi[:, :, 0:4] = np.where(grover_mask[..., None], g, h)


def _sigma_batch(psi, x, x2):
    p = np.abs(psi.reshape(psi.shape[0], -1, 8)) ** 2
    pc = p.sum(axis=2)
    m1 = pc @ x
    m2 = pc @ x2
    return np.sqrt(np.maximum(m2 - m1**2, 0.0))


def _extent_update(psi, eps, lo, hi):
    p = (np.abs(psi) ** 2).sum(axis=2)
    occ = p > eps
    first = np.argmax(occ, axis=1)
    last = occ.shape[1] - 1 - np.argmax(occ[:, ::-1], axis=1)
    np.minimum(lo, first, out=lo)
    np.maximum(hi, last, out=hi)


def _draw_realization(spec: ExperimentSpec, idx: int):
    """Per-realization disorder draws, independent of batching."""
    d = spec.disorder
    rng = realization_rng(spec.master_seed, idx)
    if d is None:
        return {}
    if d.kind == "hub-static":
        return {"hub_static": sample_hub_static(d.p, spec.L, rng)}
    if d.kind == "hub-dynamic":
        return {"hub_dynamic": sample_hub_dynamic(d.p, spec.T, rng)}
    if d.kind == "rim-static-box":
        return {
            "theta_b": sample_rim_box(d.theta0, d.dtheta, spec.L, rng),
            "theta_c": sample_rim_box(d.theta0, d.dtheta, spec.L, rng),
        }
    if d.kind == "rim-dynamic-box":
        return {
            "theta_bt": sample_rim_box(d.theta0, d.dtheta, spec.T, rng),
            "theta_ct": sample_rim_box(d.theta0, d.dtheta, spec.T, rng),
        }
    if d.kind == "combined-subdiffusion":
        return {
            "theta_as": sample_theta_as(d.alpha, spec.L, rng),
            "theta_st": rng.uniform(-np.pi / 2, np.pi / 2, spec.T),
        }
    raise ValueError(f"unhandled disorder kind {d.kind}")


def _run_chunk(spec: ExperimentSpec, indices) -> dict:
    L, T = spec.L, spec.T
    R = len(indices)
    kind = spec.disorder.kind if spec.disorder is not None else "clean"
    draws = [_draw_realization(spec, i) for i in indices]

    perm, phase = _shift_arrays(L, spec.flux)
    psi = np.zeros((R, L, 8), dtype=complex)
    spin = np.asarray(spec.initial_spin, dtype=complex)
    psi[:, spec.start, 0:4] = spin / np.linalg.norm(spin)

    record = spec.record_times if spec.record_times is not None else np.arange(T + 1)
    record = np.unique(np.clip(np.asarray(record, dtype=int), 0, T))
    rec_set = set(record.tolist())
    x = np.arange(L, dtype=float)
    x2 = x**2
    sigma = np.empty((R, record.size))
    lo = np.full(R, spec.start)
    hi = np.full(R, spec.start)

    # static per-realization structures
    hub_static_mask = None
    if kind == "hub-static":
        hub_static_mask = np.stack([d["hub_static"] == GROVER for d in draws])
    elif kind == "hub-dynamic":
        hub_dyn = np.stack([d["hub_dynamic"] for d in draws])  # (R, T)
    clean_grover = spec.hub == "grover"
    if kind == "rim-static-box":
        tb = np.stack([d["theta_b"] for d in draws])
        tc = np.stack([d["theta_c"] for d in draws])
        cb, sb = np.cos(tb), np.sin(tb)
        cc, sc = np.cos(tc), np.sin(tc)
    elif kind == "combined-subdiffusion":
        th_as = np.stack([d["theta_as"] for d in draws])        # (R, L)
        th_st = np.stack([d["theta_st"] for d in draws])        # (R, T)

    i_rec = 0
    if 0 in rec_set:
        sigma[:, i_rec] = _sigma_batch(psi, x, x2)
        i_rec += 1
    if spec.track_extent:
        _extent_update(psi, spec.eps, lo, hi)

    ct0, st0 = np.cos(spec.theta0), np.sin(spec.theta0)
    for t in range(T):
        if kind == "hub-static":
            _apply_hubs(psi, hub_static_mask)
        elif kind == "hub-dynamic":
            _apply_hubs(psi, hub_dyn[:, t : t + 1])
        else:
            _apply_hubs(psi, clean_grover)
        if kind == "rim-static-box":
            _apply_rims(psi, cb, sb, cc, sc)
        elif kind == "rim-dynamic-box":
            tb = np.array([d["theta_bt"][t] for d in draws])[:, None]
            tc = np.array([d["theta_ct"][t] for d in draws])[:, None]
            _apply_rims(psi, np.cos(tb), np.sin(tb), np.cos(tc), np.sin(tc))
        elif kind == "combined-subdiffusion":
            tb = th_st[:, t : t + 1] + th_as
            tc = th_st[:, t : t + 1] - th_as
            _apply_rims(psi, np.cos(tb), np.sin(tb), np.cos(tc), np.sin(tc))
        else:
            _apply_rims(psi, ct0, st0, ct0, st0)
        psi = phase * psi.reshape(R, -1)[:, perm]
        psi = psi.reshape(R, L, 8)
        if spec.track_extent:
            _extent_update(psi, spec.eps, lo, hi)
        if (t + 1) in rec_set:
            sigma[:, i_rec] = _sigma_batch(psi, x, x2)
            i_rec += 1

    out = {
        "t": record,
        "sigma": sigma,
        "dist": (np.abs(psi) ** 2).sum(axis=2),
        "extent": (hi - lo + 1) if spec.track_extent else None,
    }
    return out


def run_ensemble(spec: ExperimentSpec, workers: int = 1, chunk_size: int = 500) -> EnsembleResult:
    """Propagate all realizations of ``spec`` and aggregate observables."""
    indices = list(range(spec.realizations))
    chunks = [indices[i : i + chunk_size] for i in range(0, len(indices), chunk_size)]
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, [spec] * len(chunks), chunks))
    else:
        parts = [_run_chunk(spec, c) for c in chunks]
    sigma = np.concatenate([p["sigma"] for p in parts], axis=0)
    dist = np.concatenate([p["dist"] for p in parts], axis=0)
    extent = (
        np.concatenate([p["extent"] for p in parts]) if spec.track_extent else None
    )
    return EnsembleResult(
        t=parts[0]["t"],
        sigma=sigma,
        mean_distribution=dist.mean(axis=0),
        extent=extent,
        realizations=spec.realizations,
        master_seed=spec.master_seed,
    )


# --------------------------------------------------------------------------
# fits
# --------------------------------------------------------------------------


def fit_exponent(t, sigma, window: Optional[tuple] = None):
    """Least-squares power-law fit sigma ~ A * t^gamma on a time window.

    Returns (gamma, amplitude, stderr).  Requires strictly positive values
    inside the window.
    """
    t = np.asarray(t, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if window is None:
        window = default_fit_window(t.max())
    lo, hi = window
    m = (t >= lo) & (t <= hi)
    if m.sum() < 3:
        raise ValueError("fit window holds fewer than 3 points")
    if np.any(sigma[m] <= 0) or np.any(t[m] <= 0):
        raise ValueError("power-law fit needs positive times and values")
    X = np.log(t[m])
    Y = np.log(sigma[m])
    A = np.vstack([X, np.ones_like(X)]).T
    coef, res, *_ = np.linalg.lstsq(A, Y, rcond=None)
    gamma, logA = coef
    dof = max(m.sum() - 2, 1)
    resid = Y - A @ coef
    s2 = (resid**2).sum() / dof
    cov = s2 * np.linalg.inv(A.T @ A)
    return float(gamma), float(np.exp(logA)), float(np.sqrt(cov[0, 0]))


def fit_gaussian(dist, x=None):
    """Gaussian least-squares fit of a distribution.

    Returns (mean, sigma, r_squared).  A distribution concentrated on a
    single point returns sigma = 0 with perfect goodness.
    """
    dist = np.asarray(dist, dtype=float)
    if x is None:
        x = np.arange(dist.size, dtype=float)
    if np.count_nonzero(dist) == 0:
        raise ValueError("empty distribution")
    w = dist / dist.sum()
    mu = float((x * w).sum())
    var = float(((x - mu) ** 2 * w).sum())
    if var == 0.0:
        return mu, 0.0, 1.0

    def gauss(x, a, m, s):
        return a * np.exp(-((x - m) ** 2) / (2 * s**2))

    p0 = (dist.max(), mu, np.sqrt(var))
    popt, _ = curve_fit(gauss, x, dist, p0=p0, maxfev=20000)
    fit = gauss(x, *popt)
    ss_res = ((dist - fit) ** 2).sum()
    ss_tot = ((dist - dist.mean()) ** 2).sum()
    return float(popt[1]), float(abs(popt[2])), float(1.0 - ss_res / ss_tot)


def exponential_tail_fit(dist, peak: Optional[int] = None, skip: int = 3, floor: float = 1e-14):
    """Log-linear fit of the two tails of a localized distribution.

    Returns (decay_rate, r_squared) where the rate is per cell, averaged
    over both sides weighted by tail length.
    """
    dist = np.asarray(dist, dtype=float)
    if peak is None:
        peak = int(np.argmax(dist))
    rates, r2s, weights = [], [], []
    for side in (1, -1):
        xs, ys = [], []
        d = skip
        while True:
            i = peak + side * d
            if i < 0 or i >= dist.size or dist[i] <= floor:
                break
            xs.append(d)
            ys.append(np.log(dist[i]))
            d += 1
        if len(xs) >= 5:
            A = np.vstack([np.asarray(xs, float), np.ones(len(xs))]).T
            coef, *_ = np.linalg.lstsq(A, np.asarray(ys), rcond=None)
            fit = A @ coef
            ss_res = ((ys - fit) ** 2).sum()
            ss_tot = ((ys - np.mean(ys)) ** 2).sum()
            rates.append(-coef[0])
            r2s.append(1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0)
            weights.append(len(xs))
    if not rates:
        raise ValueError("no usable exponential tail")
    w = np.asarray(weights, float)
    return float(np.average(rates, weights=w)), float(np.average(r2s, weights=w))


# --------------------------------------------------------------------------
# repeated position measurements
# --------------------------------------------------------------------------


@dataclass
class MeasurementResult:
    counts: np.ndarray            # measurement counts 1..n
    sigma: np.ndarray             # std of walker positions after each count
    sqrt_D: float                 # fit sigma = sqrt(D) * sqrt(n)
    final_positions: np.ndarray   # (trajectories,) cell displacement
    gauss_mean: float
    gauss_sigma: float
    gauss_r2: float


def measurement_experiment(
    period: int,
    n_measurements: int,
    trajectories: int = 10_000,
    theta: float = np.pi / 3,
    flux: float = 0.5,
    hub: str = "grover",
    spin=(1 / np.sqrt(2), 0, 1 / np.sqrt(2), 0),
    master_seed: int = 0,
) -> MeasurementResult:
    """Walk interrupted by projective position measurements every ``period`` steps.

    Between measurements the chain is clean, so each inter-measurement
    evolution happens inside a fixed window re-centered on the last outcome;
    the trajectory ensemble then reduces to a Markov chain over (window
    state, displacement), sampled in a vectorized batch.

    ``spin`` is the initial hub configuration in the (R+, L+, R-, L-) basis.
    """
    if period < 1:
        raise ValueError("measurement period must be >= 1")
    from .coins import CoinField
    from .spectral import walk_matrix

    half = period // 2 + 4
    w = 2 * half + 1
    geom = ChainGeometry(w)
    W = walk_matrix(geom, FluxGauge(flux), CoinField.uniform(w, hub, theta=theta))
    U = np.linalg.matrix_power(W, period)

    center = half
    # any outcome is re-centered, so only columns of the central cell seed cycles
    central = slice(8 * center, 8 * center + 8)
    edge_weight = (np.abs(U[0:8, central]) ** 2).sum() + (np.abs(U[-8:, central]) ** 2).sum()
    if edge_weight > 1e-12:
        raise ValueError("window too small for this period (support reaches the edge)")

    prob = np.abs(U) ** 2  # prob[j, i]: outcome j from start i
    cum_central = np.cumsum(prob[:, central], axis=0).T.copy()  # (8, dim)
    cum_central /= cum_central[:, -1:]

    rng = realization_rng(master_seed, 0)
    psi0 = np.zeros(8 * w, dtype=complex)
    psi0[8 * center : 8 * center + 4] = SPIN_BASIS @ np.asarray(spin, complex)
    psi0 /= np.linalg.norm(psi0)
    p_first = np.abs(U @ psi0) ** 2
    cum_first = np.cumsum(p_first)
    cum_first /= cum_first[-1]

    positions = np.zeros(trajectories, dtype=np.int64)
    counts = np.arange(1, n_measurements + 1)
    sigma = np.empty(n_measurements)

    u = rng.random(trajectories)
    idx = np.searchsorted(cum_first, u, side="right")
    cells, offs = np.divmod(idx, 8)
    positions += cells - center
    sigma[0] = positions.std()
    state = offs  # internal offset within the re-centered cell

    for m in range(1, n_measurements):
        u = rng.random(trajectories)
        rows = cum_central[state]
        idx = (u[:, None] < rows).argmax(axis=1)
        cells, offs = np.divmod(idx, 8)
        positions += cells - center
        state = offs
        sigma[m] = positions.std()

    a = float((sigma * np.sqrt(counts)).sum() / counts.sum())
    lo = positions.min()
    hist = np.bincount(positions - lo)
    mu, gs, r2 = fit_gaussian(hist, x=np.arange(hist.size, dtype=float) + lo)
    return MeasurementResult(
        counts=counts,
        sigma=sigma,
        sqrt_D=a,
        final_positions=positions,
        gauss_mean=mu,
        gauss_sigma=gs,
        gauss_r2=r2,
    )


# --------------------------------------------------------------------------
# combined disorder: subdiffusion
# --------------------------------------------------------------------------


def predicted_variance_dynamic_rim(t, spin) -> float:
    """Closed-form disorder-averaged variance under maximal dynamical rim disorder.

    For Grover hubs at f = 1/2 with both rim angles redrawn uniformly each
    step and an initial hub spin (a0, b0, c0, d0) in the (R+, L+, R-, L-)
    basis: sigma^2(t) = (t - (|a0|^2 - |b0|^2 - |c0|^2 + |d0|^2)^2) / 4 for
    t > 1.
    """
    spin = np.asarray(spin, dtype=complex)
    spin = spin / np.linalg.norm(spin)
    k = abs(spin[0]) ** 2 - abs(spin[1]) ** 2 - abs(spin[2]) ** 2 + abs(spin[3]) ** 2
    return (np.asarray(t, dtype=float) - k**2) / 4.0


@dataclass
class SubdiffusionResult:
    alpha: float
    gamma_fit: float
    gamma_stderr: float
    gamma_theory: float
    fit_window: tuple
    t: np.ndarray
    sigma_mean: np.ndarray


def subdiffusion_theory(alpha: float) -> float:
    """Anomalous exponent (1-alpha)/(3-alpha), saturating at 1/2 below alpha=-1."""
    if alpha >= 1:
        raise ValueError("alpha must be < 1")
    if alpha <= -1:
        return 0.5
    return (1 - alpha) / (3 - alpha)


def subdiffusion_experiment(
    alpha: float,
    realizations: int = 100,
    T: int = 10_000,
    L: int = 400,
    master_seed: int = 0,
    workers: int = 1,
    fit_window: Optional[tuple] = None,
) -> SubdiffusionResult:
    """Combined quenched/dynamical rim disorder and its fitted exponent.

    theta_b(t, i) = theta_s(t) + theta_as(i) and theta_c(t, i) = theta_s(t)
    - theta_as(i), with theta_s redrawn uniformly on [-pi/2, pi/2] each step
    and theta_as quenched with density ~ |theta|^(-alpha).
    """
    spec = ExperimentSpec(
        L=L,
        T=T,
        realizations=realizations,
        flux=0.5,
        hub="grover",
        disorder=DisorderSpec(kind="combined-subdiffusion", alpha=alpha, master_seed=master_seed),
        record_times=log_spaced_times(T),
        master_seed=master_seed,
    )
    res = run_ensemble(spec, workers=workers)
    window = fit_window if fit_window is not None else default_fit_window(T)
    gamma, _, err = fit_exponent(res.t, res.sigma_mean, window)
    return SubdiffusionResult(
        alpha=alpha,
        gamma_fit=gamma,
        gamma_stderr=err,
        gamma_theory=subdiffusion_theory(alpha),
        fit_window=window,
        t=res.t,
        sigma_mean=res.sigma_mean,
    )


# --------------------------------------------------------------------------
# IPR scan over disorder strength
# --------------------------------------------------------------------------


def ipr_scan(
    dtheta_grid,
    flux_list,
    L: int = 200,
    realizations: int = 4,
    theta0: float = np.pi / 4,
    hub: str = "grover",
    hub_theta_disorder: bool = False,
    master_seed: int = 0,
) -> np.ndarray:
    """Mean log(IPR) over eigenvectors and realizations, per (flux, dtheta).

    With ``hub_theta_disorder`` the hub coins become H2(theta) x H2(theta)
    with theta drawn from the same box as the rim angles (the doubly
    disordered variant); otherwise hubs stay clean.
    """
    from .coins import CoinField, HADAMARD_THETA
    from .spectral import ipr, unitary_eig, walk_matrix

    dtheta_grid = np.atleast_1d(np.asarray(dtheta_grid, dtype=float))
    flux_list = np.atleast_1d(np.asarray(flux_list, dtype=float))
    geom = ChainGeometry(L)
    out = np.zeros((flux_list.size, dtheta_grid.size))
    for j, dth in enumerate(dtheta_grid):
        vals = [[] for _ in flux_list]
        for r in range(realizations):
            rng = realization_rng(master_seed, j * realizations + r)
            tb = sample_rim_box(theta0, dth, L, rng)
            tc = sample_rim_box(theta0, dth, L, rng)
            if hub_theta_disorder:
                hub_th = sample_rim_box(theta0, dth, L, rng)
                fld = CoinField(L=L, hub=HADAMARD_THETA, hub_theta=hub_th, theta_b=tb, theta_c=tc)
            else:
                fld = CoinField(L=L, hub={"grover": GROVER, "hadamard": HADAMARD}[hub], theta_b=tb, theta_c=tc)
            for i, f in enumerate(flux_list):
                W = walk_matrix(geom, FluxGauge(f), fld)
                _, V = unitary_eig(W)
                iprs = np.abs(V.reshape(L, 8, -1)) ** 2
                site_p = np.stack(
                    [iprs[:, 0:4].sum(1), iprs[:, 4:6].sum(1), iprs[:, 6:8].sum(1)], axis=1
                )
                vals[i].append(np.log((site_p**2).sum(axis=(0, 1))).mean())
        for i in range(flux_list.size):
            out[i, j] = np.mean(vals[i])
    return out
