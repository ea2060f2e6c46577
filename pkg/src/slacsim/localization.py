"""Fisher information analysis of the RIS-aided SISO observation model.

The narrowband observation in pilot slot t is

    y_t = s_t * (g_d + g_r * c_t(p)) + n_t,
    c_t(p) = sum_m omega_{t,m} b_m(bs) b_m(p),

with b the near-field RIS response, so position information enters only
through wavefront curvature across the RIS aperture and profile diversity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .errors import DegenerateGeometry
from .geometry import ArraySpec, Wavelength, element_positions, near_field_response
from .ris import RisProfile


@dataclass(frozen=True)
class SisoLocModel:
    """Single-antenna BS and MS, one RIS as the location reference."""

    bs_position: np.ndarray
    ris: ArraySpec
    user_position: np.ndarray
    wl: Wavelength
    g_r: complex
    g_d: Optional[complex]  # None when the LoS is blocked
    power: float
    noise_variance: float
    profiles: List[RisProfile]
    pilots: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "bs_position", np.asarray(self.bs_position, float))
        object.__setattr__(self, "user_position", np.asarray(self.user_position, float))
        if self.power <= 0 or self.noise_variance <= 0:
            raise ValueError("power and noise variance must be positive")
        if self.pilots is None:
            object.__setattr__(self, "pilots", np.ones(len(self.profiles), complex))

    @property
    def t_p(self) -> int:
        return len(self.profiles)


@dataclass(frozen=True)
class FisherSummary:
    """FIM over eta = [p (3), Re/Im g_r, (Re/Im g_d)] and the induced PEB."""

    fim: np.ndarray
    peb: float
    has_direct: bool


def _ris_factors(model: SisoLocModel):
    """Per-element responses b_m(bs), b_m(p) and the derivative of b_m(p)."""
    b_bs = near_field_response(model.ris, model.bs_position, model.wl)
    b_p = near_field_response(model.ris, model.user_position, model.wl)
    pos = element_positions(model.ris)
    p = model.user_position
    ref = model.ris.reference_point
    u_m = (p - pos) / np.linalg.norm(p - pos, axis=1, keepdims=True)
    u_ref = (p - ref) / np.linalg.norm(p - ref)
    # d b_m / d p = -j k (u_m - u_ref) b_m
    db = -1j * model.wl.wavenumber * (u_m - u_ref) * b_p[:, None]
    return b_bs, b_p, db


def model_mean(model: SisoLocModel, slot: int) -> complex:
    """Noise-free observation mean of one pilot slot."""
    b_bs, b_p, _ = _ris_factors(model)
    c = np.sum(model.profiles[slot].coefficients * b_bs * b_p)
    g_d = model.g_d if model.g_d is not None else 0.0
    return complex(np.sqrt(model.power) * model.pilots[slot] * (g_d + model.g_r * c))


def compound_gain(model: SisoLocModel, profile: RisProfile,
                  user_position=None) -> complex:
    """Cascade array factor c(p) for a given profile (defaults to the model user)."""
    b_bs = near_field_response(model.ris, model.bs_position, model.wl)
    p = model.user_position if user_position is None else np.asarray(user_position, float)
    b_p = near_field_response(model.ris, p, model.wl)
    return complex(np.sum(profile.coefficients * b_bs * b_p))


def fim(model: SisoLocModel) -> FisherSummary:
    """Analytic Fisher information matrix and PEB.

    J = (2 / sigma^2) * sum_t Re{ (d mu_t / d eta)^H (d mu_t / d eta) }.
    A singular position block yields peb = inf rather than an error.
    """
    has_direct = model.g_d is not None
    dim = 7 if has_direct else 5
    b_bs, b_p, db = _ris_factors(model)
    j = np.zeros((dim, dim))
    amp = np.sqrt(model.power)
    for t in range(model.t_p):
        omega = model.profiles[t].coefficients
        c = np.sum(omega * b_bs * b_p)
        dc = (omega * b_bs) @ db  # (3,)
        d = np.empty(dim, dtype=complex)
        d[0:3] = amp * model.pilots[t] * model.g_r * dc
        d[3] = amp * model.pilots[t] * c
        d[4] = 1j * amp * model.pilots[t] * c
        if has_direct:
            d[5] = amp * model.pilots[t]
            d[6] = 1j * amp * model.pilots[t]
        j += np.real(np.outer(np.conj(d), d))
    j *= 2.0 / model.noise_variance
    return FisherSummary(fim=j, peb=peb_from_fim(j), has_direct=has_direct)


def peb_from_fim(j: np.ndarray) -> float:
    """sqrt(trace of the position block of J^-1); inf when singular."""
    try:
        cond = np.linalg.cond(j)
    except np.linalg.LinAlgError:
        return float("inf")
    if not np.isfinite(cond) or cond > 1e12:
        return float("inf")
    inv = np.linalg.inv(j)
    trace = float(np.trace(inv[:3, :3]))
    if trace < 0:
        return float("inf")
    return float(np.sqrt(trace))


def peb(summary: FisherSummary) -> float:
    return summary.peb


def with_position_prior(summary: FisherSummary, sigma: float) -> FisherSummary:
    """Fuse a Gaussian position prior of per-axis std ``sigma`` into the FIM.

    Bayesian Cramer-Rao fusion: the prior contributes 1/sigma^2 to each
    position diagonal, which both tightens the PEB and keeps it finite when
    the pilot-only FIM is singular.
    """
    if sigma <= 0:
        raise ValueError("prior sigma must be > 0")
    j = summary.fim.copy()
    j[:3, :3] += np.eye(3) / sigma ** 2
    return FisherSummary(fim=j, peb=peb_from_fim(j), has_direct=summary.has_direct)


def position_covariance(summary: FisherSummary) -> np.ndarray:
    """CRB covariance of the position estimate (3x3); inf-filled when singular."""
    if not np.isfinite(summary.peb):
        return np.full((3, 3), np.inf)
    inv = np.linalg.inv(summary.fim)
    return inv[:3, :3]


def coarse_location(anchor_a, dir_a, anchor_b, dir_b,
                    fallback_range: Optional[float] = None,
                    parallel_tol: float = 1e-3) -> np.ndarray:
    """Least-squares closest point between two rays (e.g. RIS-departure and
    reversed MS-arrival rays from beam alignment).

    Near-parallel rays fall back to a point on ray A at ``fallback_range``.

    Raises:
        DegenerateGeometry: rays parallel within ``parallel_tol`` radians and
            no fallback range configured.
    """
    a0 = np.asarray(anchor_a, float)
    b0 = np.asarray(anchor_b, float)
    da = np.asarray(dir_a, float)
    db_ = np.asarray(dir_b, float)
    da = da / np.linalg.norm(da)
    db_ = db_ / np.linalg.norm(db_)
    cross = np.linalg.norm(np.cross(da, db_))
    if cross < parallel_tol:
        if fallback_range is None:
            raise DegenerateGeometry("rays are near-parallel")
        return a0 + fallback_range * da
    # minimize ||a0 + s*da - (b0 + t*db)||^2 over (s, t)
    m = np.array([[1.0, -da @ db_], [-da @ db_, 1.0]])
    rhs = np.array([(b0 - a0) @ da, -(b0 - a0) @ db_])
    s, t = np.linalg.solve(m, rhs)
    pa = a0 + s * da
    pb = b0 + t * db_
    return (pa + pb) / 2.0
