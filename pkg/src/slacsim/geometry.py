"""Antenna array layouts, steering vectors, and near-field array responses.

Conventions used throughout:

* right-handed Cartesian frame, coordinates in meters;
* phases use the delay (negative-exponent) convention and are referenced
  to the array center, so broadside illumination gives an all-ones vector;
* a ``Direction`` is (azimuth, elevation) of the propagation *source* as
  seen from the array.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import SourceOnArray

SPEED_OF_LIGHT = 299792458.0


class ArrayKind(Enum):
    ULA = "ula"
    UPA = "upa"


@dataclass(frozen=True)
class Wavelength:
    """Carrier frequency and the derived free-space wavelength."""

    carrier_frequency: float

    def __post_init__(self):
        if self.carrier_frequency <= 0:
            raise ValueError("carrier_frequency must be positive")

    @property
    def lam(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency

    @property
    def wavenumber(self) -> float:
        return 2.0 * np.pi / self.lam


@dataclass(frozen=True)
class Direction:
    """Azimuth/elevation pair in radians.

    Azimuth is wrapped to (-pi, pi]; elevation must lie in [-pi/2, pi/2].
    """

    azimuth: float
    elevation: float = 0.0

    def __post_init__(self):
        az = float(self.azimuth)
        az = np.mod(az + np.pi, 2.0 * np.pi) - np.pi
        if az == -np.pi:
            az = np.pi
        object.__setattr__(self, "azimuth", az)
        if not -np.pi / 2 <= self.elevation <= np.pi / 2:
            raise ValueError("elevation outside [-pi/2, pi/2]")

    def unit_vector(self) -> np.ndarray:
        """Unit vector pointing from the array toward the source."""
        ca, sa = np.cos(self.azimuth), np.sin(self.azimuth)
        ce, se = np.cos(self.elevation), np.sin(self.elevation)
        return np.array([ce * ca, ce * sa, se])


def _normalized(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("zero-length axis")
    return v / n


@dataclass(frozen=True)
class ArraySpec:
    """Uniform linear or planar array of isotropic elements.

    ``axis_a`` spans the first (or only) dimension, ``axis_b`` the second
    one for a UPA.  The two axes define the array plane; elements are
    centered on ``reference_point``.
    """

    kind: ArrayKind
    counts: tuple
    spacing: float
    reference_point: np.ndarray = field(default_factory=lambda: np.zeros(3))
    axis_a: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    axis_b: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def __post_init__(self):
        counts = tuple(int(c) for c in (self.counts if np.iterable(self.counts) else (self.counts,)))
        if self.kind is ArrayKind.ULA and len(counts) != 1:
            raise ValueError("ULA needs a single element count")
        if self.kind is ArrayKind.UPA and len(counts) != 2:
            raise ValueError("UPA needs two element counts")
        if any(c < 1 for c in counts):
            raise ValueError("element counts must be >= 1")
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "reference_point", np.asarray(self.reference_point, dtype=float))
        object.__setattr__(self, "axis_a", _normalized(self.axis_a))
        object.__setattr__(self, "axis_b", _normalized(self.axis_b))

    @property
    def num_elements(self) -> int:
        return int(np.prod(self.counts))

    @property
    def normal(self) -> np.ndarray:
        return np.cross(self.axis_a, self.axis_b)

    @property
    def aperture(self) -> float:
        """Largest aperture dimension D in meters (diagonal for a UPA)."""
        if self.kind is ArrayKind.ULA:
            return (self.counts[0] - 1) * self.spacing
        da = (self.counts[0] - 1) * self.spacing
        db = (self.counts[1] - 1) * self.spacing
        return float(np.hypot(da, db))


def ula(n: int, spacing: float, reference_point=(0.0, 0.0, 0.0), axis=(1.0, 0.0, 0.0)) -> ArraySpec:
    """Convenience constructor for a uniform linear array."""
    return ArraySpec(ArrayKind.ULA, (n,), spacing, np.asarray(reference_point, float), np.asarray(axis, float))


def upa(nx: int, nz: int, spacing: float, reference_point=(0.0, 0.0, 0.0),
        axis_a=(1.0, 0.0, 0.0), axis_b=(0.0, 0.0, 1.0)) -> ArraySpec:
    """Convenience constructor for a uniform planar array (default: x-z plane)."""
    return ArraySpec(ArrayKind.UPA, (nx, nz), spacing,
                     np.asarray(reference_point, float), np.asarray(axis_a, float), np.asarray(axis_b, float))


def element_positions(array: ArraySpec) -> np.ndarray:
    """Element coordinates, shape (N, 3), centered on the reference point.

    Along each axis the offsets are (n - (N-1)/2) * spacing for n = 0..N-1.
    For a UPA the first axis varies fastest.
    """
    if array.kind is ArrayKind.ULA:
        n = array.counts[0]
        offsets = (np.arange(n) - (n - 1) / 2.0) * array.spacing
        return array.reference_point + offsets[:, None] * array.axis_a
    na, nb = array.counts
    oa = (np.arange(na) - (na - 1) / 2.0) * array.spacing
    ob = (np.arange(nb) - (nb - 1) / 2.0) * array.spacing
    grid_a, grid_b = np.meshgrid(oa, ob, indexing="ij")
    pts = (grid_a.reshape(-1, 1) * array.axis_a + grid_b.reshape(-1, 1) * array.axis_b)
    return array.reference_point + pts


def steering_vector(array: ArraySpec, direction: Direction, wl: Wavelength) -> np.ndarray:
    """Far-field array response toward ``direction``; unit-modulus entries.

    Entry m is exp(-j k <u_prop, r_m - reference>) with u_prop the propagation
    direction (away from the source), i.e. exp(+j k <u, r_m - reference>) for
    u toward the source: the delay convention, broadside = all-ones, and the
    exact far-field limit of ``near_field_response``.
    """
    u = direction.unit_vector()
    rel = element_positions(array) - array.reference_point
    return np.exp(1j * wl.wavenumber * (rel @ u))


def near_field_response(array: ArraySpec, source, wl: Wavelength) -> np.ndarray:
    """Spherical-wavefront array response for a point source.

    Entry m is exp(-j k (||source - r_m|| - ||source - reference||)); the
    center reference makes this converge to ``steering_vector`` in the far
    field.

    Raises:
        SourceOnArray: if the source is closer than spacing/10 to any element.
    """
    source = np.asarray(source, dtype=float)
    pos = element_positions(array)
    dists = np.linalg.norm(source - pos, axis=1)
    if np.min(dists) < array.spacing / 10.0:
        raise SourceOnArray(f"source {source} within spacing/10 of an element")
    ref_dist = np.linalg.norm(source - array.reference_point)
    return np.exp(-1j * wl.wavenumber * (dists - ref_dist))


def fraunhofer_distance(array: ArraySpec, wl: Wavelength) -> float:
    """Far-field boundary 2 D^2 / lambda, with D the largest aperture dimension."""
    d = array.aperture
    return 2.0 * d * d / wl.lam


def direction_between(from_point, to_point) -> Direction:
    """Direction of ``to_point`` as seen from ``from_point``."""
    delta = np.asarray(to_point, float) - np.asarray(from_point, float)
    r = np.linalg.norm(delta)
    if r == 0:
        raise ValueError("coincident points have no direction")
    return Direction(azimuth=float(np.arctan2(delta[1], delta[0])),
                     elevation=float(np.arcsin(np.clip(delta[2] / r, -1.0, 1.0))))
