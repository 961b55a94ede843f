"""Non-reciprocal SSH chain: Hamiltonian and closed-form model quantities.

Site convention: 0-based, cell ``j`` owns sites ``(2j, 2j+1) = (alpha, beta)``.
Intracell hopping is non-reciprocal (``t1 + gamma`` for beta -> alpha,
``t1 - gamma`` for alpha -> beta); intercell hopping ``beta_j <-> alpha_{j+1}``
is reciprocal with amplitude ``t2``.  Only open boundaries are supported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectral import ipr_theory

BOUNDARY_OPEN = "open"

DIRECTION_LEFT = "left"
DIRECTION_RIGHT = "right"
DIRECTION_NONE = "none"

PHASE_TOPOLOGICAL = "topological"
PHASE_TRIVIAL = "trivial"
PHASE_CRITICAL = "critical"

SUBLATTICE_ALPHA = "alpha"
SUBLATTICE_BETA = "beta"

#: scans cap |gamma| below this fraction of t1 (unidirectional limit)
GAMMA_CAP = 0.999


@dataclass(frozen=True)
class ModelParams:
    """Chain parameters; the single source of truth for a run.

    Parameters
    ----------
    t1, t2 : float
        Intracell and intercell hopping amplitudes (energy units), both > 0.
    gamma : float
        Non-reciprocity; intracell amplitudes become ``t1 +- gamma``.
        Must satisfy ``|gamma| < t1`` (one hopping direction vanishes at
        equality and the skin parameter degenerates).
    n_cells : int
        Number of unit cells N >= 2; the chain has ``L = 2 N`` sites.
    """

    t1: float = 1.0
    t2: float = 0.5
    gamma: float = 0.0
    n_cells: int = 21
    boundary: str = BOUNDARY_OPEN

    def __post_init__(self):
        if self.boundary != BOUNDARY_OPEN:
            raise ValueError(f"only open boundary is supported, got {self.boundary!r}")
        if not (self.t1 > 0 and self.t2 > 0):
            raise ValueError(f"hoppings must be positive, got t1={self.t1}, t2={self.t2}")
        if abs(self.gamma) >= self.t1:
            raise ValueError(
                f"|gamma| = {abs(self.gamma)} must be strictly below t1 = {self.t1}"
            )
        if int(self.n_cells) != self.n_cells or self.n_cells < 2:
            raise ValueError(f"n_cells must be an integer >= 2, got {self.n_cells}")

    @property
    def n_sites(self) -> int:
        return 2 * self.n_cells


@dataclass(frozen=True)
class SkinProfile:
    """Skin parameter, skin length, localization side, closed-form IPR."""

    r: float
    xi: float
    direction: str
    ipr_th: float


@dataclass(frozen=True)
class PhaseInfo:
    """Band gap, phase label, and the two velocity scales."""

    gap: float
    phase_label: str
    v_max: float
    v_lr: float


def build_hamiltonian(params: ModelParams) -> np.ndarray:
    """Real-space single-particle Hamiltonian, shape (L, L), complex.

    Element (a <- b) is the hopping amplitude from site b to site a:
    ``h[2j, 2j+1] = t1 + gamma``, ``h[2j+1, 2j] = t1 - gamma``, and
    reciprocal ``t2`` on every ``(2j+1, 2j+2)`` bond.  At gamma = 0 the
    matrix is real symmetric.
    """
    L = params.n_sites
    h = np.zeros((L, L), dtype=complex)
    for j in range(params.n_cells):
        a, b = 2 * j, 2 * j + 1
        h[a, b] = params.t1 + params.gamma
        h[b, a] = params.t1 - params.gamma
        if j + 1 < params.n_cells:
            h[b, a + 2] = params.t2
            h[a + 2, b] = params.t2
    return h


def skin_profile(params: ModelParams) -> SkinProfile:
    """Skin parameter r, skin length xi, and localization direction."""
    r = math.sqrt(abs((params.t1 - params.gamma) / (params.t1 + params.gamma)))
    if r == 1.0:
        xi = math.inf
        direction = DIRECTION_NONE
    else:
        xi = 1.0 / abs(math.log(r))
        direction = DIRECTION_LEFT if r < 1.0 else DIRECTION_RIGHT
    return SkinProfile(r=r, xi=xi, direction=direction,
                       ipr_th=ipr_theory(r, params.n_cells))


def gamma_for_skin_length(xi: float, sign: int = +1, t1: float = 1.0) -> float:
    """Invert xi = 1/|ln r|: the gamma whose skin length equals ``xi``.

    ``sign=+1`` returns the left-localizing branch (gamma > 0), ``sign=-1``
    the right-localizing one.
    """
    if xi <= 0:
        raise ValueError("skin length must be positive")
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    u = -2.0 * sign / xi  # = ln(r^2)
    return t1 * (-math.expm1(u)) / (1.0 + math.exp(u))


def dispersion_hermitian(k, params: ModelParams):
    """Reciprocal-limit band energy E(k) = sqrt(t1^2 + t2^2 + 2 t1 t2 cos k).

    The gamma field is ignored; the formula is the gamma = 0 dispersion.
    """
    t1, t2 = params.t1, params.t2
    val = t1 * t1 + t2 * t2 + 2.0 * t1 * t2 * np.cos(k)
    e = np.sqrt(np.maximum(val, 0.0))
    return float(e) if np.ndim(k) == 0 else e


def bloch_energies(k: float, params: ModelParams) -> tuple[complex, complex]:
    """Both Bloch band energies +-sqrt(d_x^2 + d_y^2), principal branch.

    d_x = t1 + t2 cos k and d_y = t2 sin k + i gamma; reduces to
    +-dispersion_hermitian at gamma = 0.
    """
    dx = params.t1 + params.t2 * math.cos(k)
    dy = complex(params.t2 * math.sin(k), params.gamma)
    e = np.sqrt(complex(dx * dx + dy * dy))
    return complex(e), complex(-e)


def group_velocity(k, params: ModelParams):
    """Quasiparticle velocity dE/dk = -t1 t2 sin k / E(k) (gamma = 0 bands).

    At a band touching (t1 = t2, k = +-pi) the velocity jumps sign; this
    returns 0 exactly on the touching point.
    """
    e = dispersion_hermitian(k, params)
    num = -params.t1 * params.t2 * np.sin(k)
    safe = np.where(np.asarray(e) > 0, e, 1.0)
    v = np.where(np.asarray(e) > 0, num / safe, 0.0)
    return float(v) if np.ndim(k) == 0 else v


def max_group_velocity(params: ModelParams) -> float:
    """Closed-form maximum of |group_velocity|: min(t1, t2), per unit cell."""
    return min(params.t1, params.t2)


def max_group_velocity_numeric(params: ModelParams, n_k: int = 100_001) -> float:
    """Grid maximum of |group_velocity| over k in [-pi, pi]."""
    k = np.linspace(-math.pi, math.pi, n_k)
    return float(np.max(np.abs(group_velocity(k, params))))


def lieb_robinson_velocity(params: ModelParams) -> float:
    """Information-propagation upper bound 2 max(t1, t2)."""
    return 2.0 * max(params.t1, params.t2)


def classify_phase(params: ModelParams) -> PhaseInfo:
    """Gap, phase label, and velocity scales.

    Labels follow the convention: topological for t2 < t1, trivial for
    t2 > t1, critical at equality.
    """
    if params.t2 < params.t1:
        label = PHASE_TOPOLOGICAL
    elif params.t2 > params.t1:
        label = PHASE_TRIVIAL
    else:
        label = PHASE_CRITICAL
    return PhaseInfo(
        gap=2.0 * abs(params.t1 - params.t2),
        phase_label=label,
        v_max=max_group_velocity(params),
        v_lr=lieb_robinson_velocity(params),
    )


def sublattice_of(site: int, n_sites: int | None = None) -> str:
    """Sublattice of a site: alpha on even sites, beta on odd (0-based)."""
    if site < 0 or (n_sites is not None and site >= n_sites):
        raise ValueError(f"site {site} outside [0, {n_sites})")
    return SUBLATTICE_ALPHA if site % 2 == 0 else SUBLATTICE_BETA
