"""RIS reflection-coefficient profiles and training-profile policies."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional
import warnings

import numpy as np

from .errors import MissingPrior
from .geometry import ArraySpec, Direction, Wavelength, near_field_response, steering_vector

DEFAULT_DITHER_RAD = 0.3


@dataclass(frozen=True)
class RisProfile:
    """Unit-modulus reflection coefficients, one per RIS element.

    Coefficients may be exactly zero in the absorption test mode.
    ``quantization_bits`` is None for continuous phases.
    """

    coefficients: np.ndarray
    quantization_bits: Optional[int] = None

    def __post_init__(self):
        coeff = np.asarray(self.coefficients, dtype=complex)
        mags = np.abs(coeff)
        if not np.all((np.abs(mags - 1.0) < 1e-9) | (mags == 0.0)):
            raise ValueError("profile coefficients must have magnitude 1 (or 0 for absorption)")
        object.__setattr__(self, "coefficients", coeff)

    def __len__(self):
        return len(self.coefficients)

    def quantize(self, bits: int) -> "RisProfile":
        """Snap each phase to the nearest of 2**bits uniform levels."""
        if bits < 1:
            raise ValueError("bits must be >= 1")
        levels = 2 ** bits
        phases = np.angle(self.coefficients)
        snapped = np.round(phases * levels / (2 * np.pi)) * (2 * np.pi / levels)
        mags = np.abs(self.coefficients)
        return RisProfile(mags * np.exp(1j * snapped), quantization_bits=bits)


class PolicyKind(Enum):
    RANDOM = "random"
    DIRECTIONAL = "directional"
    POSITIONAL = "positional"


@dataclass(frozen=True)
class ProfilePolicy:
    """How per-slot training profiles are generated.

    For prior-aided kinds, ``prior_position`` anchors the base profile and
    ``dither`` (radians) sets the per-slot elementwise phase perturbation.
    """

    kind: PolicyKind
    prior_position: Optional[np.ndarray] = None
    uncertainty_radius: float = 0.0
    dither: float = DEFAULT_DITHER_RAD

    def __post_init__(self):
        if self.dither < 0 or self.uncertainty_radius < 0:
            raise ValueError("dither and uncertainty radius must be >= 0")
        if self.prior_position is not None:
            object.__setattr__(self, "prior_position", np.asarray(self.prior_position, float))


def random_profile(n: int, rng: np.random.Generator, bits: Optional[int] = None) -> RisProfile:
    """i.i.d. uniform-phase profile; quantized when ``bits`` is given."""
    if n < 1:
        raise ValueError("n must be >= 1")
    phases = rng.uniform(0.0, 2.0 * np.pi, size=n)
    prof = RisProfile(np.exp(1j * phases))
    return prof.quantize(bits) if bits else prof


def directional_profile(incidence: Direction, departure: Direction,
                        ris: ArraySpec, wl: Wavelength) -> RisProfile:
    """Profile that coherently reflects a plane wave from ``incidence`` toward ``departure``.

    omega_m = conj(a_m(incidence) * a_m(departure)) makes the compound array
    factor toward the pair exactly N.
    """
    a_in = steering_vector(ris, incidence, wl)
    a_out = steering_vector(ris, departure, wl)
    return RisProfile(np.conj(a_in * a_out))


def positional_profile(source, focus, ris: ArraySpec, wl: Wavelength) -> RisProfile:
    """Near-field focusing profile from a source point to a focal point."""
    b_src = near_field_response(ris, source, wl)
    b_foc = near_field_response(ris, focus, wl)
    return RisProfile(np.conj(b_src * b_foc))


def compound_response(profile: RisProfile, incoming: np.ndarray, outgoing: np.ndarray) -> complex:
    """Array factor sum_m omega_m * incoming_m * outgoing_m of the cascade."""
    return complex(np.sum(profile.coefficients * incoming * outgoing))


def training_profiles(policy: ProfilePolicy, t_p: int, ris: ArraySpec, wl: Wavelength,
                      rng: np.random.Generator, source=None,
                      bits: Optional[int] = None) -> list:
    """Per-slot RIS profiles for a pilot block of ``t_p`` slots.

    Random policy draws i.i.d. profiles.  Prior-aided policies scan the
    prior uncertainty region: each slot aims the base profile at the prior
    position displaced by a uniform random offset within a ball of radius
    ``policy.uncertainty_radius``, then dithers the phases elementwise with
    uniform perturbations of scale ``policy.dither``.  The pointing offsets
    are what make the localization FIM well conditioned: beams aimed exactly
    at the prior have near-zero first-order sensitivity to the position, so
    slots must straddle the beam peak to pick up the slope.  ``source`` (the
    illuminating terminal, e.g. the BS position) is required for the
    prior-aided kinds.

    Raises:
        MissingPrior: prior-aided policy without a prior position.
    """
    if t_p < 1:
        raise ValueError("t_p must be >= 1")
    if policy.kind is PolicyKind.RANDOM:
        return [random_profile(ris.num_elements, rng, bits) for _ in range(t_p)]

    if policy.prior_position is None:
        raise MissingPrior(f"{policy.kind.value} policy needs a prior position")
    if source is None:
        raise MissingPrior("prior-aided training needs the illuminating source position")

    if policy.dither == 0 and policy.uncertainty_radius == 0 and t_p > 1:
        warnings.warn("dither = 0 and uncertainty_radius = 0 yield identical "
                      "training profiles; the localization FIM will be "
                      "singular", stacklevel=2)

    from .geometry import direction_between
    out = []
    for _ in range(t_p):
        aim = np.asarray(policy.prior_position, float)
        if policy.uncertainty_radius > 0:
            u = rng.standard_normal(3)
            u /= max(np.linalg.norm(u), 1e-300)
            r = policy.uncertainty_radius * rng.uniform() ** (1.0 / 3.0)
            aim = aim + r * u
        if policy.kind is PolicyKind.DIRECTIONAL:
            inc = direction_between(ris.reference_point, source)
            dep = direction_between(ris.reference_point, aim)
            base = directional_profile(inc, dep, ris, wl)
        else:
            base = positional_profile(source, aim, ris, wl)
        delta = rng.uniform(-policy.dither, policy.dither, size=ris.num_elements)
        prof = RisProfile(base.coefficients * np.exp(1j * delta))
        out.append(prof.quantize(bits) if bits else prof)
    return out
