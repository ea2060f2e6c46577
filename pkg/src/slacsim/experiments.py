"""Experiment orchestration: CE benchmarks and the PEB-SE tradeoff sweep."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .errors import ConfigError, RankDeficient, NoPathDetected
from .geometry import Wavelength, ula, upa
from .channel import (EffectiveChannel, NoiseModel, effective_matrix,
                      random_channel, receive_pilots)
from .ris import (PolicyKind, ProfilePolicy, RisProfile, positional_profile,
                  training_profiles)
from .estimation import (BeamCodebooks, CascadedChannel, TrainingDesign,
                         beam_align, beamformed_gain, beamformers_from_cascade,
                         build_linear_map, build_sweep_design, cascade_atoms,
                         cascade_from_links, dft_atoms, ls_estimate, nmse,
                         sparse_estimate, stack_observations)
from .localization import (SisoLocModel, compound_gain, fim,
                           position_covariance, with_position_prior)
from .unfolding import (default_estimator, unfolded_apply_batch,
                        unfolded_train)

KNOWN_ESTIMATORS = ("full_csi", "ls", "sparse", "beam_align", "unfolded")


def derive_seed(root_seed: int, *labels) -> int:
    """Stable per-cell seed from the root seed and cell coordinates."""
    text = repr((int(root_seed),) + tuple(str(l) for l in labels))
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass(frozen=True)
class FrameConfig:
    """Coherence frame and Monte Carlo bookkeeping."""

    t_c: int
    t_p_list: Sequence[int]
    trials: int
    seed: int

    def __post_init__(self):
        if any(not (0 <= t <= self.t_c) for t in self.t_p_list):
            raise ValueError("every t_p must satisfy 0 <= t_p <= t_c")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


@dataclass(frozen=True)
class TradeoffPoint:
    t_p: int
    peb: float
    eff_se: float
    policy: str
    ris_elements: int


def effective_se(snr_linear: float, t_p: int, t_c: int) -> float:
    """Pilot-discounted spectral efficiency (1 - T_p/T_c) log2(1 + snr)."""
    if not 0 <= t_p <= t_c:
        raise ValueError("need 0 <= t_p <= t_c")
    if snr_linear < 0:
        raise ValueError("snr must be >= 0")
    return (1.0 - t_p / t_c) * float(np.log2(1.0 + snr_linear))


# ---------------------------------------------------------------------------
# Channel-estimation benchmark (case studies 1 and 2)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CeSetup:
    """System geometry and conventions for a CE benchmark run."""

    n_bs: int
    n_ms: int
    n_ris: int
    carrier_hz: float = 30e9
    direct_nlos_paths: int = 2
    blocked_los: bool = True
    noise_convention: str = "unit"  # or "per_antenna"
    t_c: int = 500
    codebook_oversampling: int = 1
    beam_bs_atoms: int = 4
    beam_ris_atoms: int = 10
    unfold_depth: int = 10
    unfold_train_samples: int = 200
    unfold_train_epochs: int = 12
    unfold_train_lr: float = 0.5
    sparse_max_paths: int = 1
    # benchmark sparse configuration: stage-1 grid only with a psi grid of
    # 1.5 atoms per RIS element; stage-2 Newton refinement drives the angle
    # error to numerical precision and the downstream SE to the genie bound,
    # so the benchmark pins the coarse operating point instead
    sparse_refine: bool = False
    sparse_grid_oversampling: int = 1
    sparse_psi_per_elem: float = 1.5
    training_dither: float = 0.9

    def noise_variance(self, snr_db: float) -> float:
        base = 10.0 ** (-snr_db / 10.0)
        if self.noise_convention == "per_antenna":
            return self.n_ris * base
        if self.noise_convention == "unit":
            return base
        raise ConfigError("system.noise_convention", f"unknown value {self.noise_convention!r}")


def _draw_channel(setup: CeSetup, wl: Wavelength, rng: np.random.Generator) -> EffectiveChannel:
    lam = wl.lam
    bs = ula(setup.n_bs, lam / 2)
    ms = ula(setup.n_ms, lam / 2)
    ris = ula(setup.n_ris, lam / 2)
    f = random_channel(rng, tx=bs, rx=ris, wl=wl, num_paths=0, include_los=True)
    g = random_channel(rng, tx=ris, rx=ms, wl=wl, num_paths=0, include_los=True)
    direct = None
    if not setup.blocked_los:
        direct = random_channel(rng, tx=bs, rx=ms, wl=wl,
                                num_paths=setup.direct_nlos_paths, include_los=True)
    return EffectiveChannel(bs_ris=f, ris_ms=g, direct=direct)


def _training_design(setup: CeSetup, t_p: int, rng: np.random.Generator) -> TrainingDesign:
    """Pilot training design: dithered-DFT profiles, random precoders, identity combiner.

    The RIS profiles are rows of an ``n_ris``-point DFT matrix (cycled when
    ``t_p > n_ris``) with i.i.d. uniform phase dither on every element.  The
    DFT backbone keeps the stacked training matrix well conditioned -- a plain
    i.i.d. random profile matrix has a heavy-tailed smallest singular value
    that makes least-squares inversion blow up on unlucky draws -- while the
    dither decorrelates repeated rows and avoids grid-aligned blind spots.
    """
    n = setup.n_ris
    grid = np.exp(-2j * np.pi * np.outer(np.arange(t_p) % n, np.arange(n)) / n)
    a = setup.training_dither
    dither = np.exp(1j * rng.uniform(-a, a, size=(t_p, n)))
    profiles = [RisProfile(grid[t] * dither[t]) for t in range(t_p)]
    precoders = []
    for _ in range(t_p):
        q = rng.standard_normal(setup.n_bs) + 1j * rng.standard_normal(setup.n_bs)
        precoders.append(q / np.linalg.norm(q))
    combiners = [np.eye(setup.n_ms, dtype=complex)] * t_p
    pilots = np.ones(t_p, dtype=complex)
    return TrainingDesign(profiles, precoders, combiners, pilots)


def _data_phase_se(ch: EffectiveChannel, precoder, combiner, profile: RisProfile,
                   sigma2: float, t_p: int, t_c: int) -> float:
    h = effective_matrix(ch, profile)
    gain = np.conj(combiner) @ h @ precoder
    return effective_se(abs(gain) ** 2 / sigma2, t_p, t_c)


def _beam_codebooks(setup: CeSetup) -> BeamCodebooks:
    os_f = setup.codebook_oversampling
    bs = dft_atoms(setup.n_bs, setup.beam_bs_atoms * os_f)
    ms = dft_atoms(setup.n_ms, setup.n_ms * os_f)
    ris = cascade_atoms(setup.n_ris, setup.beam_ris_atoms * os_f)
    return BeamCodebooks(bs=bs, ms=ms, ris=ris)


def run_ce_benchmark(setup: CeSetup, frame: FrameConfig, estimators: Sequence[str],
                     snr_db_list: Sequence[float]) -> List[dict]:
    """Monte Carlo NMSE / effective-SE table over (estimator, t_p, snr).

    Infeasible cells (e.g. LS with too few pilots) are skipped.  Row order is
    deterministic: estimators in the given order, then t_p, then SNR.
    """
    for name in estimators:
        if name not in KNOWN_ESTIMATORS:
            raise ConfigError("estimators.enabled", f"unknown estimator {name!r}")
    wl = Wavelength(setup.carrier_hz)
    rows: List[dict] = []
    for name in estimators:
        t_p_values = [0] if name == "full_csi" else list(frame.t_p_list)
        for t_p in t_p_values:
            for snr_db in snr_db_list:
                row = _run_cell(setup, frame, wl, name, t_p, snr_db)
                if row is not None:
                    rows.append(row)
    return rows


def _run_cell(setup: CeSetup, frame: FrameConfig, wl: Wavelength,
              name: str, t_p: int, snr_db: float) -> Optional[dict]:
    sigma2 = setup.noise_variance(snr_db)
    # t_p is deliberately left out: cells along the T_p sweep share channel
    # and noise draws (common random numbers), so budget comparisons -- e.g.
    # the beam-alignment plateau -- are not clouded by Monte Carlo noise
    cell_seed = derive_seed(frame.seed, "cebench", name, snr_db)

    unfold_est = unfold_design = unfold_map = None
    if name == "unfolded":
        unfold_est, unfold_design = _train_unfolded(setup, frame, wl, t_p, snr_db, cell_seed)
        if unfold_est is None:
            return None
        unfold_map = build_linear_map(unfold_design)

    nmses, ses = [], []
    for trial in range(frame.trials):
        rng = np.random.default_rng(derive_seed(cell_seed, "trial", trial))
        ch = _draw_channel(setup, wl, rng)
        truth = cascade_from_links(ch)
        noise = NoiseModel(sigma2, snr_db)
        try:
            if name == "full_csi":
                q, w, prof = beamformers_from_cascade(truth)
                nm = 0.0
                se = _data_phase_se(ch, q, w, prof, sigma2, 0, frame.t_c)
            elif name == "ls":
                design = _training_design(setup, t_p, rng)
                obs = receive_pilots(ch, design.ris_profiles, design.precoders,
                                     design.combiners, design.pilots, noise, rng)
                res = ls_estimate(obs, design)
                nm = nmse(res.estimate.matrix, truth.matrix)
                se = _data_phase_se(ch, res.precoder, res.combiner, res.ris_profile,
                                    sigma2, t_p, frame.t_c)
            elif name == "sparse":
                design = _training_design(setup, t_p, rng)
                obs = receive_pilots(ch, design.ris_profiles, design.precoders,
                                     design.combiners, design.pilots, noise, rng)
                res = sparse_estimate(obs, design, max_paths=setup.sparse_max_paths,
                                      grid_oversampling=setup.sparse_grid_oversampling,
                                      refine=setup.sparse_refine,
                                      psi_atoms=int(round(setup.sparse_psi_per_elem
                                                          * setup.n_ris)))
                nm = nmse(res.estimate.matrix, truth.matrix)
                se = _data_phase_se(ch, res.precoder, res.combiner, res.ris_profile,
                                    sigma2, t_p, frame.t_c)
            elif name == "beam_align":
                books = _beam_codebooks(setup)
                design = build_sweep_design(books, t_p)
                obs = receive_pilots(ch, design.ris_profiles, design.precoders,
                                     design.combiners, design.pilots, noise, rng)
                _, _, res = beam_align(obs, books, design)
                nm = nmse(res.estimate.matrix, truth.matrix)
                se = _data_phase_se(ch, res.precoder, res.combiner, res.ris_profile,
                                    sigma2, t_p, frame.t_c)
            else:  # unfolded
                obs = receive_pilots(ch, unfold_design.ris_profiles, unfold_design.precoders,
                                     unfold_design.combiners, unfold_design.pilots, noise, rng)
                y = stack_observations(obs)
                h = unfolded_apply_batch(unfold_est, unfold_map, y,
                                         setup.n_ms, setup.n_bs, setup.n_ris)
                c = h.reshape((setup.n_ms * setup.n_bs, setup.n_ris), order="F")
                nm = nmse(c, truth.matrix)
                q, w, prof = beamformers_from_cascade(
                    CascadedChannel(c, setup.n_ms, setup.n_bs))
                se = _data_phase_se(ch, q, w, prof, sigma2, t_p, frame.t_c)
        except (RankDeficient, NoPathDetected) as exc:
            if trial == 0 and isinstance(exc, RankDeficient):
                return None  # cell infeasible for this pilot budget
            nm, se = 1.0, 0.0  # detection outage: no usable estimate
        nmses.append(nm)
        ses.append(se)
    return {"estimator": name, "t_p": t_p, "snr_db": float(snr_db),
            "nmse": float(np.mean(nmses)), "eff_se_bits": float(np.mean(ses))}


def _train_unfolded(setup: CeSetup, frame: FrameConfig, wl: Wavelength,
                    t_p: int, snr_db: float, cell_seed: int):
    """Fixed-design dataset generation plus finite-difference training."""
    rng = np.random.default_rng(derive_seed(cell_seed, "design"))
    design = _training_design(setup, t_p, rng)
    a = build_linear_map(design)
    sigma2 = setup.noise_variance(snr_db)
    noise = NoiseModel(sigma2, snr_db)
    dataset = []
    for i in range(setup.unfold_train_samples):
        srng = np.random.default_rng(derive_seed(cell_seed, "sample", i))
        ch = _draw_channel(setup, wl, srng)
        truth = cascade_from_links(ch)
        obs = receive_pilots(ch, design.ris_profiles, design.precoders,
                             design.combiners, design.pilots, noise, srng)
        dataset.append((stack_observations(obs), truth.matrix.reshape(-1, order="F")))
    a_norm = np.linalg.norm(a, 2)
    init = default_estimator(setup.unfold_depth, a_norm)
    # seed thresholds at a noise-scaled level so training has a useful start
    lam0 = float(np.sqrt(sigma2) / a_norm)
    init = type(init)(init.step_sizes, (lam0,) * setup.unfold_depth)
    est, _ = unfolded_train(init, dataset, design, epochs=setup.unfold_train_epochs,
                            learning_rate=setup.unfold_train_lr)
    return est, design


# ---------------------------------------------------------------------------
# PEB-SE tradeoff sweep (case study 3)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TradeoffSetup:
    """SISO localization scenario with one RIS in the x-z plane."""

    carrier_hz: float = 30e9
    bs_position: Sequence[float] = (1.0, 1.0, 0.0)
    user_position: Sequence[float] = (5.0, 5.0, -5.0)
    ris_sizes: Sequence[int] = (16, 32)  # per-side counts of the square RIS
    policies: Sequence[str] = ("random", "directional")
    prior_sigma_m: float = 0.5
    scan_radius_m: float = 1.0  # per-slot beam-pointing jitter around the prior
    dither_rad: float = 0.3
    element_snr_db: float = -40.0  # rho = P |g_r|^2 / sigma^2 per element
    fallback_error_m: float = 20.0  # positioning spread when the FIM is singular


def run_tradeoff_sweep(setup: TradeoffSetup, frame: FrameConfig) -> List[TradeoffPoint]:
    """PEB and mean effective SE per (RIS size, policy, T_p).

    Pilot profiles follow the policy (random, or prior-aided directional
    dithering); the data-phase profile is always positional toward a
    CRB-distributed position estimate, and SE counts the via-RIS link only.
    """
    wl = Wavelength(setup.carrier_hz)
    rho = 10.0 ** (setup.element_snr_db / 10.0)
    points: List[TradeoffPoint] = []
    for n_side in setup.ris_sizes:
        ris = upa(n_side, n_side, wl.lam / 2)
        for policy_name in setup.policies:
            if policy_name not in ("random", "directional", "positional"):
                raise ConfigError("tradeoff.policies", f"unknown policy {policy_name!r}")
            points.extend(_tradeoff_curve(setup, frame, wl, ris, n_side,
                                          policy_name, rho))
    return points


def _tradeoff_curve(setup: TradeoffSetup, frame: FrameConfig, wl: Wavelength,
                    ris, n_side: int, policy_name: str, rho: float) -> List[TradeoffPoint]:
    """All T_p points of one (RIS size, policy) curve.

    The profile sequence is drawn once for the largest T_p and every point
    uses its prefix, so FIM additivity makes PEB exactly non-increasing in
    T_p.  The SE trials reuse one set of common random draws across T_p so
    the curve shape reflects the overhead/accuracy tradeoff rather than
    Monte Carlo noise.
    """
    curve_seed = derive_seed(frame.seed, "tradeoff", n_side, policy_name)
    rng = np.random.default_rng(curve_seed)
    user = np.asarray(setup.user_position, float)
    bs = np.asarray(setup.bs_position, float)

    if policy_name == "random":
        policy = ProfilePolicy(PolicyKind.RANDOM)
        prior_sigma = None
    else:
        kind = PolicyKind.DIRECTIONAL if policy_name == "directional" else PolicyKind.POSITIONAL
        prior = user + setup.prior_sigma_m * rng.standard_normal(3)
        policy = ProfilePolicy(kind, prior_position=prior,
                               uncertainty_radius=setup.scan_radius_m,
                               dither=setup.dither_rad)
        prior_sigma = setup.prior_sigma_m
    t_max = max(frame.t_p_list)
    profiles = training_profiles(policy, t_max, ris, wl, rng, source=bs)
    trial_draws = rng.standard_normal((frame.trials, 3))

    points = []
    for t_p in frame.t_p_list:
        # P = 1, sigma^2 = 1, |g_r| = sqrt(rho): per-element cascade SNR rho
        model = SisoLocModel(bs_position=bs, ris=ris, user_position=user, wl=wl,
                             g_r=np.sqrt(rho), g_d=None, power=1.0,
                             noise_variance=1.0, profiles=profiles[:t_p])
        summary = fim(model)
        if prior_sigma is not None:
            # prior-aided estimation fuses the location prior (Bayesian CRB)
            summary = with_position_prior(summary, prior_sigma)
        cov = position_covariance(summary)

        se_vals = []
        for draw in trial_draws:
            if np.all(np.isfinite(cov)):
                evals, evecs = np.linalg.eigh((cov + cov.T) / 2.0)
                root = evecs * np.sqrt(np.clip(evals, 0.0, None))
                p_hat = user + root @ draw
            else:
                p_hat = user + setup.fallback_error_m * draw
            data_profile = positional_profile(bs, p_hat, ris, wl)
            c = compound_gain(model, data_profile)
            snr_post = rho * abs(c) ** 2
            se_vals.append(effective_se(snr_post, t_p, frame.t_c))
        points.append(TradeoffPoint(t_p=t_p, peb=summary.peb,
                                    eff_se=float(np.mean(se_vals)),
                                    policy=policy_name,
                                    ris_elements=n_side * n_side))
    return points
