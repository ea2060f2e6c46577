"""Geometric multipath channel synthesis and noisy pilot reception.

Channels are narrowband and frequency flat: path delays are carried in
``PathParams`` but not applied.  Path gains default to unit magnitude with
uniform phase; large-scale path loss is factored out of the channel and
absorbed into the SNR definition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .errors import DimensionMismatch
from .geometry import ArraySpec, Direction, Wavelength, steering_vector
from .ris import RisProfile


@dataclass(frozen=True)
class PathParams:
    """One propagation path: complex gain, AoA at rx, AoD at tx, delay."""

    gain: complex
    aoa: Direction
    aod: Direction
    delay: float = 0.0

    def __post_init__(self):
        if self.delay < 0:
            raise ValueError("delay must be >= 0")


@dataclass(frozen=True)
class GeometricChannel:
    """Sparse L-path MIMO channel between two arrays."""

    tx: ArraySpec
    rx: ArraySpec
    paths: List[PathParams]
    wl: Wavelength

    def matrix(self) -> np.ndarray:
        """N_rx x N_tx channel matrix sum_l g_l a_rx(aoa_l) a_tx(aod_l)^H."""
        h = np.zeros((self.rx.num_elements, self.tx.num_elements), dtype=complex)
        for p in self.paths:
            a_rx = steering_vector(self.rx, p.aoa, self.wl)
            a_tx = steering_vector(self.tx, p.aod, self.wl)
            h += p.gain * np.outer(a_rx, a_tx.conj())
        return h


@dataclass(frozen=True)
class EffectiveChannel:
    """Direct + BS-RIS (F) + RIS-MS (G) links forming the end-to-end channel."""

    bs_ris: GeometricChannel
    ris_ms: GeometricChannel
    direct: Optional[GeometricChannel] = None

    def __post_init__(self):
        if self.bs_ris.rx.num_elements != self.ris_ms.tx.num_elements:
            raise DimensionMismatch("RIS element count differs between F and G")
        if self.direct is not None:
            if (self.direct.rx.num_elements != self.ris_ms.rx.num_elements
                    or self.direct.tx.num_elements != self.bs_ris.tx.num_elements):
                raise DimensionMismatch("direct link dimensions disagree with F/G")

    @property
    def n_ris(self) -> int:
        return self.bs_ris.rx.num_elements

    @property
    def n_bs(self) -> int:
        return self.bs_ris.tx.num_elements

    @property
    def n_ms(self) -> int:
        return self.ris_ms.rx.num_elements


@dataclass(frozen=True)
class NoiseModel:
    """Complex AWGN with per-sample variance sigma^2 (watts)."""

    variance: float
    snr_db: Optional[float] = None

    def __post_init__(self):
        # variance 0 is tolerated for noiseless test harnesses
        if self.variance < 0:
            raise ValueError("noise variance must be non-negative")


def effective_matrix(ch: EffectiveChannel, profile: RisProfile) -> np.ndarray:
    """End-to-end N_MS x N_BS matrix H_direct + G diag(omega) F."""
    if len(profile) != ch.n_ris:
        raise DimensionMismatch(f"profile length {len(profile)} != N_RIS {ch.n_ris}")
    h = ch.ris_ms.matrix() @ (profile.coefficients[:, None] * ch.bs_ris.matrix())
    if ch.direct is not None:
        h = h + ch.direct.matrix()
    return h


def random_channel(rng: np.random.Generator, tx: ArraySpec, rx: ArraySpec, wl: Wavelength,
                   num_paths: int, include_los: bool = True,
                   los_aoa: Optional[Direction] = None,
                   los_aod: Optional[Direction] = None) -> GeometricChannel:
    """Draw a channel with uniform angles and unit-magnitude uniform-phase gains.

    ``num_paths`` counts NLoS paths; a LoS path (optionally with fixed
    angles) is prepended when ``include_los``.
    """
    if num_paths < 0:
        raise ValueError("num_paths must be >= 0")
    paths = []

    def rand_dir():
        return Direction(azimuth=rng.uniform(-np.pi, np.pi),
                         elevation=np.arcsin(rng.uniform(-1.0, 1.0)))

    if include_los:
        aoa = los_aoa if los_aoa is not None else rand_dir()
        aod = los_aod if los_aod is not None else rand_dir()
        paths.append(PathParams(np.exp(1j * rng.uniform(0, 2 * np.pi)), aoa, aod))
    for _ in range(num_paths):
        paths.append(PathParams(np.exp(1j * rng.uniform(0, 2 * np.pi)), rand_dir(), rand_dir()))
    return GeometricChannel(tx=tx, rx=rx, paths=paths, wl=wl)


def receive_pilots(ch: EffectiveChannel, profiles: Sequence[RisProfile],
                   precoders: Sequence[np.ndarray], combiners: Sequence[np.ndarray],
                   pilots: Sequence[complex], noise: NoiseModel,
                   rng: np.random.Generator) -> list:
    """Noisy combined observations, one array of shape (n_streams_t,) per slot.

    Slot t output is W_t^H H(omega_t) q_t s_t + W_t^H n_t with n_t
    circularly-symmetric complex Gaussian of per-entry variance sigma^2.
    """
    t_p = len(profiles)
    if not (len(precoders) == len(combiners) == len(pilots) == t_p):
        raise DimensionMismatch("profiles/precoders/combiners/pilots lengths differ")
    out = []
    for t in range(t_p):
        w = np.asarray(combiners[t], dtype=complex)
        if w.ndim == 1:
            w = w[:, None]
        if w.shape[0] != ch.n_ms:
            raise DimensionMismatch("combiner must have N_MS rows")
        q = np.asarray(precoders[t], dtype=complex).reshape(-1)
        if q.shape[0] != ch.n_bs:
            raise DimensionMismatch("precoder length != N_BS")
        h = effective_matrix(ch, profiles[t])
        n = (rng.standard_normal(ch.n_ms) + 1j * rng.standard_normal(ch.n_ms))
        n *= np.sqrt(noise.variance / 2.0)
        out.append(w.conj().T @ (h @ q * pilots[t] + n))
    return out
