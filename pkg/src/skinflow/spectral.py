"""Dense non-Hermitian eigensolver layer, propagators, and localization measures.

Everything here works on plain complex matrices and amplitude vectors; the
lattice producing them is irrelevant.  Right/left eigenvector pairs are kept
biorthonormal (``<<n|m>> = delta_nm``) so that ``sum_n E_n |n><<n|`` rebuilds
the input matrix and spectral propagation is a diagonal map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eig as _dense_eig
from scipy.linalg import expm as _dense_expm

#: biorthogonality residual at or above which a spectrum is flagged defective
RESIDUAL_TOL = 1e-8


class DefectiveSpectrumError(Exception):
    """Eigenvector basis too ill-conditioned for biorthogonal propagation."""

    def __init__(self, residual: float):
        self.residual = residual
        super().__init__(
            f"biorthogonality residual {residual:.3e} >= {RESIDUAL_TOL:.0e}; "
            "fall back to direct exponential propagation"
        )


@dataclass
class WaveState:
    """Complex amplitudes over sites at one time stamp."""

    amplitudes: np.ndarray
    time: float = 0.0
    normalized: bool = False

    @property
    def n_sites(self) -> int:
        return self.amplitudes.shape[0]

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def delta_state(n_sites: int, site: int) -> WaveState:
    """Unit excitation on one site at t = 0."""
    if not 0 <= site < n_sites:
        raise ValueError(f"site {site} outside [0, {n_sites})")
    amps = np.zeros(n_sites, dtype=complex)
    amps[site] = 1.0
    return WaveState(amplitudes=amps, time=0.0, normalized=True)


@dataclass
class Spectrum:
    """Eigenvalues with biorthonormal right/left eigenvector pairs.

    Columns of ``right_vecs`` are the kets |n> (unit 2-norm, phase fixed by
    making the largest-magnitude component real positive).  Columns of
    ``left_vecs`` are the bras' conjugates, i.e. ``left_vecs[:, n].conj() @
    right_vecs[:, m] == delta_nm`` up to ``biorth_residual``.
    """

    eigenvalues: np.ndarray
    right_vecs: np.ndarray
    left_vecs: np.ndarray
    biorth_residual: float

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def dual(self) -> np.ndarray:
        """Matrix whose rows are <<n| (acts on kets from the left)."""
        return self.left_vecs.conj().T

    def reconstruct(self) -> np.ndarray:
        """Rebuild the original matrix from the spectral data."""
        return (self.right_vecs * self.eigenvalues) @ self.dual()


def diagonalize(h: np.ndarray, residual_tol: float = RESIDUAL_TOL) -> Spectrum:
    """Full eigendecomposition of a general complex matrix.

    Eigenvalues are sorted by (real, imaginary); left eigenvectors are the
    dual basis of the right ones, so biorthonormality holds by construction
    and the recorded residual measures the conditioning of the eigenbasis.

    Raises
    ------
    DefectiveSpectrumError
        If the residual ``max |<<n|m>> - delta_nm|`` reaches `residual_tol`.
    """
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    if not np.all(np.isfinite(h)):
        raise ValueError("matrix has non-finite entries")

    w, vr = _dense_eig(h)
    order = np.lexsort((w.imag, w.real))
    w = w[order]
    vr = np.ascontiguousarray(vr[:, order])

    vr /= np.linalg.norm(vr, axis=0)
    anchor = np.argmax(np.abs(vr), axis=0)
    phases = vr[anchor, np.arange(vr.shape[1])]
    vr *= np.conj(phases) / np.abs(phases)

    try:
        dual = np.linalg.inv(vr)
    except np.linalg.LinAlgError as exc:
        raise DefectiveSpectrumError(residual=math.inf) from exc
    residual = float(np.max(np.abs(dual @ vr - np.eye(w.shape[0]))))
    if not math.isfinite(residual) or residual >= residual_tol:
        raise DefectiveSpectrumError(residual=residual)

    return Spectrum(
        eigenvalues=w,
        right_vecs=vr,
        left_vecs=dual.conj().T,
        biorth_residual=residual,
    )


def _renormalized(amps: np.ndarray) -> np.ndarray:
    total = float(np.sum(np.abs(amps) ** 2))
    if total < 1e-300:
        raise ValueError("total probability below 1e-300, cannot renormalize")
    return amps / math.sqrt(total)


def propagate(spectrum: Spectrum, psi0: WaveState, t: float,
              renormalize: bool = True) -> WaveState:
    """Evolve ``psi0`` for a duration ``t``: sum_n e^{-i E_n t} |n><<n|psi0>."""
    coeffs = spectrum.dual() @ psi0.amplitudes
    amps = spectrum.right_vecs @ (np.exp(-1j * spectrum.eigenvalues * t) * coeffs)
    if renormalize:
        amps = _renormalized(amps)
    return WaveState(amplitudes=amps, time=psi0.time + t, normalized=renormalize)


class TimeEvolver:
    """Propagator for one fixed matrix with automatic defective fallback.

    Uses the biorthogonal spectral route when the eigenbasis is well
    conditioned; otherwise steps with dense matrix exponentials.  Instances
    are immutable after construction and safe to share between workers.
    """

    def __init__(self, h: np.ndarray):
        self.h = np.asarray(h, dtype=complex)
        try:
            self.spectrum: Spectrum | None = diagonalize(self.h)
            self.biorth_residual = self.spectrum.biorth_residual
            self.used_fallback = False
        except DefectiveSpectrumError as exc:
            self.spectrum = None
            self.biorth_residual = exc.residual
            self.used_fallback = True

    def states_at(self, psi0: np.ndarray, times: np.ndarray,
                  renormalize: bool = True) -> np.ndarray:
        """Amplitudes at each requested time, shape (n_times, n_sites)."""
        times = np.asarray(times, dtype=float)
        if self.spectrum is not None:
            coeffs = self.spectrum.dual() @ psi0
            phases = np.exp(-1j * np.outer(times, self.spectrum.eigenvalues))
            out = (phases * coeffs) @ self.spectrum.right_vecs.T
        else:
            out = self._states_by_stepping(psi0, times)
        if renormalize:
            norms = np.linalg.norm(out, axis=1)
            if np.any(norms < 1e-150):
                raise ValueError("state norm collapsed during evolution")
            out = out / norms[:, None]
        return out

    def _states_by_stepping(self, psi0: np.ndarray, times: np.ndarray) -> np.ndarray:
        if times.size and (times[0] < 0 or np.any(np.diff(times) <= 0)):
            raise ValueError("fallback stepping needs strictly increasing times >= 0")
        out = np.empty((times.size, psi0.size), dtype=complex)
        step_cache: dict[float, np.ndarray] = {}
        psi = psi0.astype(complex)
        t_prev = 0.0
        for i, t in enumerate(times):
            dt = t - t_prev
            if dt > 0:
                key = round(dt, 12)
                if key not in step_cache:
                    step_cache[key] = _dense_expm(-1j * self.h * dt)
                psi = step_cache[key] @ psi
            t_prev = t
            scale = float(np.linalg.norm(psi))
            if scale > 1e100:  # positive rescale, invisible after renormalization
                psi = psi / scale
            out[i] = psi
        return out


def taylor_expm_oracle(h: np.ndarray, psi0: WaveState, t: float,
                       dt_sub: float | None = None, order: int = 10,
                       renormalize: bool = True) -> WaveState:
    """Brute-force propagation by repeated short-step truncated series.

    Independent of the eigensolver route: only matrix-vector products are
    used.  ``dt_sub`` must satisfy ``dt_sub <= 0.01 / ||h||_inf``; each step
    is rejected if the truncation estimate (norm of the last series term)
    exceeds 1e-12.
    """
    h = np.asarray(h, dtype=complex)
    if order < 8:
        raise ValueError("series order must be at least 8")
    hnorm = float(np.linalg.norm(h, np.inf))
    limit = 0.01 / max(hnorm, 1e-30)
    if dt_sub is None:
        dt_sub = limit
    elif dt_sub > limit:
        raise ValueError(f"dt_sub {dt_sub:.3e} exceeds scale guard {limit:.3e}")

    amps = psi0.amplitudes.astype(complex)
    if t > 0:
        n_steps = max(1, math.ceil(t / dt_sub))
        a = (-1j * (t / n_steps)) * h
        for _ in range(n_steps):
            term = amps
            acc = amps.copy()
            for k in range(1, order + 1):
                term = (a @ term) / k
                acc += term
            tail = float(np.linalg.norm(term))
            if tail > 1e-12 * max(1.0, float(np.linalg.norm(acc))):
                raise ValueError(
                    f"per-step truncation estimate {tail:.3e} above 1e-12; "
                    "reduce dt_sub or raise the order"
                )
            amps = acc
    if renormalize:
        amps = _renormalized(amps)
    return WaveState(amplitudes=amps, time=psi0.time + t, normalized=renormalize)


def ipr_numeric(psi: np.ndarray) -> float:
    """Inverse participation ratio sum |psi|^4 / (sum |psi|^2)^2."""
    p = np.abs(np.asarray(psi)) ** 2
    total = float(p.sum())
    if total == 0.0:
        raise ValueError("IPR of the zero vector is undefined")
    return float(np.sum(p * p)) / total**2


def ipr_theory(r: float, n_cells: int) -> float:
    """Closed-form IPR of an exponential envelope r^n over n_cells cells.

    Decay from either boundary gives the same value, so r > 1 is folded to
    1/r.  The r = 1 limit returns 1/n_cells exactly.
    """
    if r <= 0:
        raise ValueError("skin parameter r must be positive")
    if n_cells < 1:
        raise ValueError("n_cells must be >= 1")
    if r == 1.0:
        return 1.0 / n_cells
    u = -abs(math.log(r))  # log-decay per cell, folded to the r < 1 branch
    num = math.expm1(2 * u) * (1.0 + math.exp(2 * n_cells * u))
    den = (1.0 + math.exp(2 * u)) * math.expm1(2 * n_cells * u)
    return num / den


def mean_ipr(spectrum: Spectrum) -> float:
    """Arithmetic mean of ipr_numeric over all right eigenvectors."""
    p = np.abs(spectrum.right_vecs) ** 2
    iprs = np.sum(p * p, axis=0) / np.sum(p, axis=0) ** 2
    return float(np.mean(iprs))
