"""Tests for cascade representation, LS, beam sweeping, and sparse estimation."""

import numpy as np
import pytest

from slacsim.channel import EffectiveChannel, NoiseModel, effective_matrix, random_channel, receive_pilots
from slacsim.errors import BudgetExceeded, DimensionMismatch, NoPathDetected, RankDeficient, ZeroTruth
from slacsim.estimation import (BeamCodebooks, CascadedChannel, TrainingDesign,
                                beam_align, beamformed_gain, beamformers_from_cascade,
                                build_linear_map, build_sweep_design, cascade_atoms,
                                cascade_from_links, dft_atoms, ls_estimate, nmse,
                                sparse_estimate, stack_observations)
from slacsim.geometry import Wavelength, ula
from slacsim.ris import RisProfile, random_profile

WL = Wavelength(30e9)


def _channel(n_bs, n_ris, n_ms, seed=0, nlos=1):
    rng = np.random.default_rng(seed)
    bs = ula(n_bs, WL.lam / 2)
    ris = ula(n_ris, WL.lam / 2)
    ms = ula(n_ms, WL.lam / 2)
    f = random_channel(rng, tx=bs, rx=ris, wl=WL, num_paths=nlos)
    g = random_channel(rng, tx=ris, rx=ms, wl=WL, num_paths=nlos)
    return EffectiveChannel(bs_ris=f, ris_ms=g)


def _design(ch, t_p, seed=1):
    """Random full-combining training design (identity combiner)."""
    rng = np.random.default_rng(seed)
    profiles = [random_profile(ch.n_ris, rng) for _ in range(t_p)]
    precoders = [rng.standard_normal(ch.n_bs) + 1j * rng.standard_normal(ch.n_bs)
                 for _ in range(t_p)]
    combiners = [np.eye(ch.n_ms)] * t_p
    pilots = np.ones(t_p, dtype=complex)
    return TrainingDesign(profiles, precoders, combiners, pilots)


def test_cascade_matches_effective_matrix():
    ch = _channel(3, 5, 4)
    cascade = cascade_from_links(ch)
    rng = np.random.default_rng(2)
    for prof in (RisProfile(np.ones(5)), random_profile(5, rng)):
        assert np.allclose(cascade.channel_for(prof), effective_matrix(ch, prof))


def test_cascade_with_direct_part():
    rng = np.random.default_rng(3)
    bs, ris, ms = ula(2, WL.lam / 2), ula(3, WL.lam / 2), ula(2, WL.lam / 2)
    ch = EffectiveChannel(
        bs_ris=random_channel(rng, tx=bs, rx=ris, wl=WL, num_paths=0),
        ris_ms=random_channel(rng, tx=ris, rx=ms, wl=WL, num_paths=0),
        direct=random_channel(rng, tx=bs, rx=ms, wl=WL, num_paths=1))
    cascade = cascade_from_links(ch)
    prof = random_profile(3, rng)
    assert np.allclose(cascade.channel_for(prof), effective_matrix(ch, prof))


def test_linear_map_reproduces_noiseless_observations():
    ch = _channel(2, 4, 3)
    design = _design(ch, 5)
    obs = receive_pilots(ch, design.ris_profiles, design.precoders,
                         design.combiners, design.pilots, NoiseModel(0.0),
                         np.random.default_rng(0))
    a = build_linear_map(design)
    h = cascade_from_links(ch).matrix.reshape(-1, order="F")
    assert np.allclose(a @ h, stack_observations(obs))


def test_nmse_zero_truth_raises():
    with pytest.raises(ZeroTruth):
        nmse(np.ones(3), np.zeros(3))


def test_ls_noiseless_exact_recovery():
    ch = _channel(2, 4, 4)
    truth = cascade_from_links(ch)
    design = _design(ch, 10)
    obs = receive_pilots(ch, design.ris_profiles, design.precoders,
                         design.combiners, design.pilots, NoiseModel(0.0),
                         np.random.default_rng(0))
    res = ls_estimate(obs, design)
    assert nmse(res.estimate.matrix, truth.matrix) < 1e-18


def test_ls_rejects_insufficient_pilots():
    ch = _channel(2, 4, 4)
    design = _design(ch, 4)  # 16 rows < 32 unknowns
    obs = receive_pilots(ch, design.ris_profiles, design.precoders,
                         design.combiners, design.pilots, NoiseModel(0.0),
                         np.random.default_rng(0))
    with pytest.raises(RankDeficient):
        ls_estimate(obs, design)


def test_ls_invariant_to_pilot_phases():
    ch = _channel(2, 4, 4)
    design = _design(ch, 10)
    rng = np.random.default_rng(4)
    phased = TrainingDesign(design.ris_profiles, design.precoders, design.combiners,
                            np.exp(1j * rng.uniform(0, 2 * np.pi, design.t_p)))
    obs_a = receive_pilots(ch, design.ris_profiles, design.precoders,
                           design.combiners, design.pilots, NoiseModel(0.0),
                           np.random.default_rng(0))
    obs_b = receive_pilots(ch, phased.ris_profiles, phased.precoders,
                           phased.combiners, phased.pilots, NoiseModel(0.0),
                           np.random.default_rng(0))
    a = ls_estimate(obs_a, design).estimate.matrix
    b = ls_estimate(obs_b, phased).estimate.matrix
    assert np.allclose(a, b)


def test_optimized_beamformers_beat_random_ones():
    ch = _channel(4, 8, 4, seed=11)
    cascade = cascade_from_links(ch)
    q, w, prof = beamformers_from_cascade(cascade)
    assert np.linalg.norm(q) == pytest.approx(1.0)
    assert np.linalg.norm(w) == pytest.approx(1.0)
    assert np.allclose(np.abs(prof.coefficients), 1.0)
    best = abs(beamformed_gain(cascade, q, w, prof))
    rng = np.random.default_rng(12)
    for _ in range(10):
        q_r = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        w_r = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        gain = abs(beamformed_gain(cascade, q_r / np.linalg.norm(q_r),
                                   w_r / np.linalg.norm(w_r),
                                   random_profile(8, rng)))
        assert best >= gain


def test_single_path_beamforming_gain_is_analytic():
    """For a pure LoS cascade, alternating maximization attains the full
    array gain N_BS * N_MS * N_RIS^2 in |w^H H q|^2."""
    ch = _channel(4, 8, 4, seed=5, nlos=0)
    cascade = cascade_from_links(ch)
    q, w, prof = beamformers_from_cascade(cascade)
    gain = abs(beamformed_gain(cascade, q, w, prof)) ** 2
    assert gain == pytest.approx(4 * 4 * 8 ** 2, rel=1e-6)


def test_dft_atoms_unit_norm():
    atoms = dft_atoms(8, 12)
    assert atoms.shape == (8, 12)
    assert np.allclose(np.linalg.norm(atoms, axis=0), 1.0)


def test_cascade_atoms_unit_modulus():
    atoms = cascade_atoms(8, 10)
    assert np.allclose(np.abs(atoms), 1.0)


def test_build_sweep_design_structure():
    books = BeamCodebooks(bs=dft_atoms(4, 3), ms=dft_atoms(4, 4), ris=cascade_atoms(8, 5))
    design = build_sweep_design(books, t_p=15)
    assert design.t_p == 15
    # RIS index changes every k_bs slots, BS index cycles within
    assert np.allclose(design.ris_profiles[0].coefficients, books.ris[:, 0])
    assert np.allclose(design.ris_profiles[3].coefficients, books.ris[:, 1])
    assert np.allclose(design.precoders[1], books.bs[:, 1])


def test_build_sweep_design_budget():
    books = BeamCodebooks(bs=dft_atoms(4, 4), ms=dft_atoms(4, 4), ris=cascade_atoms(8, 5))
    with pytest.raises(BudgetExceeded):
        build_sweep_design(books, t_p=19)


def test_beam_align_selects_strongest_slot():
    books = BeamCodebooks(bs=dft_atoms(2, 2), ms=dft_atoms(2, 3), ris=cascade_atoms(4, 2))
    design = build_sweep_design(books, t_p=4)
    obs = [np.zeros(3, complex) for _ in range(4)]
    obs[2][1] = 5.0  # ris atom 1, bs atom 0, ms atom 1
    (r, b, i), power, res = beam_align(obs, books, design)
    assert (r, b, i) == (1, 0, 1)
    assert power == pytest.approx(25.0)
    assert np.allclose(res.ris_profile.coefficients, books.ris[:, 1])


def test_beam_align_tie_breaks_to_lowest_index():
    books = BeamCodebooks(bs=dft_atoms(2, 2), ms=dft_atoms(2, 2), ris=cascade_atoms(4, 2))
    design = build_sweep_design(books, t_p=4)
    obs = [np.ones(2, complex) for _ in range(4)]
    (r, b, i), _, _ = beam_align(obs, books, design)
    assert (r, b, i) == (0, 0, 0)


def test_beam_align_observation_count_check():
    books = BeamCodebooks(bs=dft_atoms(2, 2), ms=dft_atoms(2, 2), ris=cascade_atoms(4, 2))
    design = build_sweep_design(books, t_p=4)
    with pytest.raises(DimensionMismatch):
        beam_align([np.zeros(2)] * 3, books, design)


def test_sparse_noiseless_single_path_recovery():
    ch = _channel(4, 16, 8, seed=21, nlos=0)
    truth = cascade_from_links(ch)
    design = _design(ch, 12, seed=22)
    obs = receive_pilots(ch, design.ris_profiles, design.precoders,
                         design.combiners, design.pilots, NoiseModel(0.0),
                         np.random.default_rng(0))
    res = sparse_estimate(obs, design, refine=True)
    assert nmse(res.estimate.matrix, truth.matrix) < 1e-3
    assert len(res.path_estimates) == 1


def test_refinement_improves_on_grid_estimate():
    """Newton refinement shrinks the off-grid NMSE by at least 10x."""
    errs = {}
    for refine in (False, True):
        total = 0.0
        for seed in (31, 32, 33):
            ch = _channel(4, 16, 8, seed=seed, nlos=0)
            truth = cascade_from_links(ch)
            design = _design(ch, 12, seed=seed + 100)
            obs = receive_pilots(ch, design.ris_profiles, design.precoders,
                                 design.combiners, design.pilots, NoiseModel(0.0),
                                 np.random.default_rng(0))
            res = sparse_estimate(obs, design, refine=refine)
            total += nmse(res.estimate.matrix, truth.matrix)
        errs[refine] = total / 3
    assert errs[True] < errs[False] / 10


def test_sparse_no_path_detected():
    """A detection threshold no atom can reach raises instead of returning
    a bogus path."""
    ch = _channel(2, 8, 4, seed=41, nlos=0)
    design = _design(ch, 6, seed=42)
    rng = np.random.default_rng(43)
    noise_obs = [rng.standard_normal(4) + 1j * rng.standard_normal(4) for _ in range(6)]
    with pytest.raises(NoPathDetected):
        sparse_estimate(noise_obs, design, detect_threshold=1.01)


def test_cascaded_channel_shapes():
    c = CascadedChannel(np.zeros((6, 4), complex), n_ms=3, n_bs=2)
    assert c.n_ris == 4
    h = c.channel_for(RisProfile(np.ones(4)))
    assert h.shape == (3, 2)
