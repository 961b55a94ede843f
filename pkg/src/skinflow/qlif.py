"""Cumulative quantum Liang information flow on the chain.

The causal influence of a source site B on a target site A is the entropy
of A under full evolution minus its entropy when every coupling of B is
frozen (row and column of B zeroed).  Entropies are binary site entropies
in nats of the renormalized single-particle probability.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .lattice import ModelParams, build_hamiltonian, sublattice_of
from .spectral import TimeEvolver, WaveState, delta_state

REGIME_ONSET_END = 4.0
REGIME_STATIONARY_END = 10.0

DEFAULT_DT = 0.05
DEFAULT_T_MAX = 20.0


def default_time_grid(t_max: float = DEFAULT_T_MAX, dt: float = DEFAULT_DT) -> np.ndarray:
    """Uniform grid 0, dt, ..., t_max (inclusive up to rounding)."""
    n = int(round(t_max / dt))
    return dt * np.arange(n + 1)


def freeze(h: np.ndarray, site_b: int) -> np.ndarray:
    """Copy of ``h`` with row and column ``site_b`` zeroed (idempotent)."""
    h = np.asarray(h)
    if not 0 <= site_b < h.shape[0]:
        raise ValueError(f"site {site_b} outside [0, {h.shape[0]})")
    out = h.copy()
    out[site_b, :] = 0.0
    out[:, site_b] = 0.0
    return out


def binary_entropy(p) -> np.ndarray | float:
    """-p ln p - (1-p) ln(1-p) in nats, exact 0 at p in {0, 1}.

    Input is clamped to [0, 1] to absorb roundoff at the 1e-15 level.
    """
    arr = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
    out = np.zeros_like(arr)
    inner = (arr > 0.0) & (arr < 1.0)
    q = arr[inner]
    out[inner] = -q * np.log(q) - (1.0 - q) * np.log1p(-q)
    return float(out) if np.ndim(p) == 0 else out


def site_entropy(psi: WaveState, site: int) -> float:
    """Binary entropy of the occupation probability of one site."""
    if not 0 <= site < psi.n_sites:
        raise ValueError(f"site {site} outside [0, {psi.n_sites})")
    return float(binary_entropy(abs(psi.amplitudes[site]) ** 2))


@dataclass
class QlifConfig:
    """One (initial site, frozen source, observed target) flow measurement."""

    params: ModelParams
    j0: int
    source: int
    target: int
    time_grid: np.ndarray = field(default_factory=default_time_grid)
    renormalize: bool = True
    allow_mixed: bool = False

    def __post_init__(self):
        L = self.params.n_sites
        sites = (self.j0, self.source, self.target)
        for s in sites:
            if not 0 <= s < L:
                raise ValueError(f"site {s} outside [0, {L})")
        if len(set(sites)) != 3:
            raise ValueError(f"j0, source, target must be distinct, got {sites}")
        if not self.allow_mixed:
            subl = {sublattice_of(s, L) for s in sites}
            if len(subl) != 1:
                raise ValueError(
                    f"sites {sites} mix sublattices; pass allow_mixed=True "
                    "to request a mixed-sublattice measurement"
                )
        grid = np.asarray(self.time_grid, dtype=float)
        if grid.ndim != 1 or grid.size < 2:
            raise ValueError("time_grid must be a 1-D grid with at least 2 points")
        if grid[0] != 0.0 or np.any(np.diff(grid) <= 0):
            raise ValueError("time_grid must start at 0 and increase strictly")
        self.time_grid = grid


@dataclass
class QlifSeries:
    """Cumulative flow values T_{B->A}(t) on a time grid."""

    times: np.ndarray
    values: np.ndarray
    config: QlifConfig | None = None
    kind: str = "qlif"
    meta: dict = field(default_factory=dict)


@lru_cache(maxsize=256)
def _evolver(params: ModelParams, frozen_site: int | None) -> TimeEvolver:
    # read-only after construction; lru_cache keeps scans from re-diagonalizing
    h = build_hamiltonian(params)
    if frozen_site is not None:
        h = freeze(h, frozen_site)
    return TimeEvolver(h)


def clear_evolver_cache() -> None:
    _evolver.cache_clear()


def _residual_meta(*evolvers: TimeEvolver) -> dict:
    return {
        "residuals": [ev.biorth_residual for ev in evolvers],
        "fallbacks": sum(ev.used_fallback for ev in evolvers),
    }


def qlif_series(config: QlifConfig) -> QlifSeries:
    """Cumulative QLIF from ``source`` to ``target`` for a delta start at j0."""
    psi0 = delta_state(config.params.n_sites, config.j0).amplitudes
    full = _evolver(config.params, None)
    frozen = _evolver(config.params, config.source)
    p_full = np.abs(full.states_at(psi0, config.time_grid,
                                   renormalize=config.renormalize)[:, config.target]) ** 2
    p_frozen = np.abs(frozen.states_at(psi0, config.time_grid,
                                       renormalize=config.renormalize)[:, config.target]) ** 2
    values = binary_entropy(p_full) - binary_entropy(p_frozen)
    return QlifSeries(
        times=config.time_grid,
        values=values,
        config=config,
        meta=_residual_meta(full, frozen),
    )


def delta_T(params: ModelParams, j0: int, d: int,
            time_grid: np.ndarray | None = None,
            renormalize: bool = True) -> QlifSeries:
    """Directional asymmetry T_{R->L} - T_{L->R} at symmetric sites j0 +- d.

    ``d`` must be a positive even integer so that both observation sites
    share the sublattice of j0.
    """
    if d <= 0 or d % 2 != 0:
        raise ValueError(f"pair distance d must be a positive even integer, got {d}")
    if time_grid is None:
        time_grid = default_time_grid()
    left, right = j0 - d, j0 + d
    r_to_l = qlif_series(QlifConfig(params=params, j0=j0, source=right,
                                    target=left, time_grid=time_grid,
                                    renormalize=renormalize))
    l_to_r = qlif_series(QlifConfig(params=params, j0=j0, source=left,
                                    target=right, time_grid=time_grid,
                                    renormalize=renormalize))
    meta = {
        "residuals": r_to_l.meta["residuals"] + l_to_r.meta["residuals"],
        "fallbacks": r_to_l.meta["fallbacks"] + l_to_r.meta["fallbacks"],
    }
    return QlifSeries(
        times=r_to_l.times,
        values=r_to_l.values - l_to_r.values,
        config=r_to_l.config,
        kind="delta_T",
        meta=meta,
    )


def qlif_pair(params: ModelParams, j0: int, left: int, right: int,
              time_grid: np.ndarray | None = None,
              renormalize: bool = True,
              allow_mixed: bool = False) -> tuple[QlifSeries, QlifSeries]:
    """The two directed series (T_{R->L}, T_{L->R}) for arbitrary site pairs."""
    if time_grid is None:
        time_grid = default_time_grid()
    r_to_l = qlif_series(QlifConfig(params=params, j0=j0, source=right,
                                    target=left, time_grid=time_grid,
                                    renormalize=renormalize, allow_mixed=allow_mixed))
    l_to_r = qlif_series(QlifConfig(params=params, j0=j0, source=left,
                                    target=right, time_grid=time_grid,
                                    renormalize=renormalize, allow_mixed=allow_mixed))
    return r_to_l, l_to_r


def integrated_qlif(series: QlifSeries, t_start: float = REGIME_ONSET_END,
                    t_end: float = REGIME_STATIONARY_END) -> float:
    """Trapezoidal integral of the series over [t_start, t_end]."""
    t, v = series.times, series.values
    if t_start >= t_end:
        raise ValueError(f"empty window [{t_start}, {t_end}]")
    if t_start < t[0] or t_end > t[-1]:
        raise ValueError(f"window [{t_start}, {t_end}] outside grid [{t[0]}, {t[-1]}]")
    inner = (t > t_start) & (t < t_end)
    ts = np.concatenate(([t_start], t[inner], [t_end]))
    vs = np.concatenate(([np.interp(t_start, t, v)], v[inner], [np.interp(t_end, t, v)]))
    return float(np.trapezoid(vs, ts))


def series_rate(series: QlifSeries) -> QlifSeries:
    """Finite-difference time derivative (the instantaneous-rate form)."""
    return QlifSeries(
        times=series.times,
        values=np.gradient(series.values, series.times),
        config=series.config,
        kind="rate",
        meta=dict(series.meta),
    )
