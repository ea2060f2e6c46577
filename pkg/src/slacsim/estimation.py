"""Pilot-based acquisition of the RIS cascaded channel.

Estimators operate on the stacked linear observation model

    y_t = s_t * W_t^H (q_t^T kron I) C omega_t + noise,

where C is the (N_MS*N_BS) x N_RIS cascaded-channel matrix whose column m
vectorizes (column-major) the rank-1 outer product G[:, m] F[m, :].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import (BudgetExceeded, DimensionMismatch, NoPathDetected,
                     RankDeficient, ZeroTruth)
from .channel import EffectiveChannel
from .ris import RisProfile


@dataclass(frozen=True)
class TrainingDesign:
    """Per-slot RIS profiles, precoders, combiners, and pilot symbols."""

    ris_profiles: List[RisProfile]
    precoders: List[np.ndarray]
    combiners: List[np.ndarray]
    pilots: np.ndarray

    def __post_init__(self):
        t_p = len(self.ris_profiles)
        if t_p < 1:
            raise ValueError("a training design needs at least one slot")
        if not (len(self.precoders) == len(self.combiners) == len(self.pilots) == t_p):
            raise DimensionMismatch("design component lengths differ")

    @property
    def t_p(self) -> int:
        return len(self.ris_profiles)

    @property
    def n_ris(self) -> int:
        return len(self.ris_profiles[0])

    @property
    def n_bs(self) -> int:
        return int(np.asarray(self.precoders[0]).reshape(-1).shape[0])

    @property
    def n_ms(self) -> int:
        w = np.asarray(self.combiners[0])
        return w.shape[0] if w.ndim == 2 else w.shape[0]


@dataclass(frozen=True)
class CascadedChannel:
    """Per-element cascade matrix plus the optional direct-channel vector."""

    matrix: np.ndarray  # (N_MS*N_BS) x N_RIS
    n_ms: int
    n_bs: int
    direct: Optional[np.ndarray] = None  # vec(H_direct), column-major

    @property
    def n_ris(self) -> int:
        return self.matrix.shape[1]

    def channel_for(self, profile: RisProfile) -> np.ndarray:
        """Effective N_MS x N_BS channel for one RIS profile."""
        h = (self.matrix @ profile.coefficients).reshape((self.n_ms, self.n_bs), order="F")
        if self.direct is not None:
            h = h + self.direct.reshape((self.n_ms, self.n_bs), order="F")
        return h


def cascade_from_links(ch: EffectiveChannel) -> CascadedChannel:
    """Ground-truth cascade matrix of an effective channel."""
    g = ch.ris_ms.matrix()
    f = ch.bs_ris.matrix()
    cols = [np.outer(g[:, m], f[m, :]).reshape(-1, order="F") for m in range(ch.n_ris)]
    direct = None
    if ch.direct is not None:
        direct = ch.direct.matrix().reshape(-1, order="F")
    return CascadedChannel(np.stack(cols, axis=1), ch.n_ms, ch.n_bs, direct)


@dataclass
class EstimationResult:
    """Cascade estimate, optional path parameters, and derived beamformers."""

    estimate: CascadedChannel
    path_estimates: Optional[List[Tuple[complex, float, float, float]]] = None
    nmse: Optional[float] = None
    precoder: Optional[np.ndarray] = None
    combiner: Optional[np.ndarray] = None
    ris_profile: Optional[RisProfile] = None


def nmse(estimate: np.ndarray, truth: np.ndarray) -> float:
    """Normalized squared error ||est - truth||_F^2 / ||truth||_F^2."""
    truth = np.asarray(truth)
    denom = np.linalg.norm(truth) ** 2
    if denom == 0:
        raise ZeroTruth("truth channel is identically zero")
    return float(np.linalg.norm(np.asarray(estimate) - truth) ** 2 / denom)


def build_linear_map(design: TrainingDesign) -> np.ndarray:
    """Stacked sensing matrix mapping vec(C) to the observation vector."""
    n_ms, n_bs = design.n_ms, design.n_bs
    blocks = []
    eye = np.eye(n_ms)
    for t in range(design.t_p):
        w = np.asarray(design.combiners[t], dtype=complex)
        if w.ndim == 1:
            w = w[:, None]
        q = np.asarray(design.precoders[t], dtype=complex).reshape(-1)
        inner = w.conj().T @ np.kron(q[None, :], eye)  # streams x (N_MS*N_BS)
        omega = design.ris_profiles[t].coefficients
        blocks.append(design.pilots[t] * np.kron(omega[None, :], inner))
    return np.concatenate(blocks, axis=0)


def stack_observations(observations: Sequence[np.ndarray]) -> np.ndarray:
    return np.concatenate([np.asarray(o).reshape(-1) for o in observations])


def ls_estimate(observations: Sequence[np.ndarray], design: TrainingDesign) -> EstimationResult:
    """Least-squares cascade estimate (ignores channel sparsity).

    Raises:
        RankDeficient: the stacked system has fewer independent rows than
            unknowns, i.e. the pilot budget cannot support LS.
    """
    a = build_linear_map(design)
    y = stack_observations(observations)
    n_unknowns = a.shape[1]
    if a.shape[0] < n_unknowns:
        raise RankDeficient(f"{a.shape[0]} observations < {n_unknowns} unknowns")
    rank = np.linalg.matrix_rank(a)
    if rank < n_unknowns:
        raise RankDeficient(f"column rank {rank} < {n_unknowns}")
    h, *_ = np.linalg.lstsq(a, y, rcond=None)
    c = h.reshape((design.n_ms * design.n_bs, design.n_ris), order="F")
    est = CascadedChannel(c, design.n_ms, design.n_bs)
    res = EstimationResult(estimate=est)
    res.precoder, res.combiner, res.ris_profile = beamformers_from_cascade(est)
    return res


def beamformers_from_cascade(cascade: CascadedChannel, iterations: int = 20,
                             init_profile: Optional[np.ndarray] = None):
    """Alternating RIS-profile / dominant-singular-vector maximization.

    Returns (precoder, combiner, RisProfile) maximizing the beamformed gain
    |w^H H(omega) q| of the given cascade (plus direct part when present).
    """
    n_ris = cascade.n_ris
    omega = np.ones(n_ris, dtype=complex) if init_profile is None else init_profile.copy()
    w = q = None
    for _ in range(iterations):
        h = cascade.channel_for(RisProfile(omega))
        u, s, vh = np.linalg.svd(h)
        w = u[:, 0]
        q = vh[0, :].conj()
        # given (w, q), the unit-modulus profile aligning all per-element terms
        # of w^H H(omega) q = sum_m omega_m (C^T kron(q, conj(w)))_m
        per_elem = cascade.matrix.T @ np.kron(q, w.conj())
        omega = np.exp(-1j * np.angle(per_elem))
    return q, w, RisProfile(omega)


def beamformed_gain(cascade: CascadedChannel, precoder, combiner, profile: RisProfile) -> complex:
    """w^H H(omega) q for the given cascade."""
    h = cascade.channel_for(profile)
    return complex(np.conj(combiner) @ h @ precoder)


# ---------------------------------------------------------------------------
# Beam alignment
# ---------------------------------------------------------------------------

def dft_atoms(n: int, num_atoms: int) -> np.ndarray:
    """Unit-norm DFT-style atoms over direction cosines, shape (n, num_atoms).

    Atom k points at direction cosine f_k on a uniform grid of [-1, 1)
    (half-wavelength spacing assumed).
    """
    f = -1.0 + 2.0 * (np.arange(num_atoms) + 0.5) / num_atoms
    m = np.arange(n) - (n - 1) / 2.0
    return np.exp(-1j * np.pi * np.outer(m, f)) / np.sqrt(n)


def cascade_atoms(n_ris: int, num_atoms: int) -> np.ndarray:
    """Unit-modulus RIS cascade-signature atoms over psi in [-2, 2)."""
    psi = -2.0 + 4.0 * (np.arange(num_atoms) + 0.5) / num_atoms
    m = np.arange(n_ris) - (n_ris - 1) / 2.0
    return np.exp(-1j * np.pi * np.outer(m, psi))


@dataclass(frozen=True)
class BeamCodebooks:
    """Single-layer codebooks at the BS, MS, and RIS."""

    bs: np.ndarray   # N_BS x K_BS unit-norm columns
    ms: np.ndarray   # N_MS x K_MS unit-norm columns
    ris: np.ndarray  # N_RIS x K_RIS unit-modulus columns (profiles)


def build_sweep_design(codebooks: BeamCodebooks, t_p: int, pilots=None) -> TrainingDesign:
    """Nested sweep (RIS outer, BS inner) with the full MS codebook combined per slot.

    Raises:
        BudgetExceeded: the RIS x BS sweep needs more than ``t_p`` slots.
    """
    k_ris = codebooks.ris.shape[1]
    k_bs = codebooks.bs.shape[1]
    total = k_ris * k_bs
    if total > t_p:
        raise BudgetExceeded(f"sweep of {total} slots exceeds budget {t_p}")
    profiles, precoders, combiners = [], [], []
    for r in range(k_ris):
        for b in range(k_bs):
            profiles.append(RisProfile(codebooks.ris[:, r]))
            precoders.append(codebooks.bs[:, b])
            combiners.append(codebooks.ms)
    if pilots is None:
        pilots = np.ones(total, dtype=complex)
    return TrainingDesign(profiles, precoders, combiners, np.asarray(pilots, complex))


def beam_align(observations: Sequence[np.ndarray], codebooks: BeamCodebooks,
               design: TrainingDesign) -> Tuple[Tuple[int, int, int], float, EstimationResult]:
    """Select the (RIS, BS, MS) triple maximizing received power.

    ``observations`` must come from a ``build_sweep_design`` sweep. Ties are
    broken toward the lowest flat index.  The implied channel is the rank-1
    cascade consistent with the selected atoms and the measured gain.
    """
    k_ris = codebooks.ris.shape[1]
    k_bs = codebooks.bs.shape[1]
    k_ms = codebooks.ms.shape[1]
    if len(observations) != k_ris * k_bs:
        raise DimensionMismatch("observation count differs from sweep size")
    power = np.empty((k_ris, k_bs, k_ms))
    slot = 0
    for r in range(k_ris):
        for b in range(k_bs):
            power[r, b, :] = np.abs(np.asarray(observations[slot]).reshape(-1)) ** 2
            slot += 1
    flat = int(np.argmax(power))  # argmax returns the first (lowest) index on ties
    r, b, i = np.unravel_index(flat, power.shape)
    best_power = float(power[r, b, i])

    slot = r * k_bs + b
    y_best = np.asarray(observations[slot]).reshape(-1)[i] / design.pilots[slot]
    n_ms, n_bs, n_ris = design.n_ms, design.n_bs, design.n_ris
    w = codebooks.ms[:, i]
    q = codebooks.bs[:, b]
    omega = codebooks.ris[:, r]
    alpha = y_best / (n_ris * np.sqrt(n_ms * n_bs))
    u = np.sqrt(n_ms) * w
    v = np.sqrt(n_bs) * q
    c = alpha * np.outer(np.outer(u, v.conj()).reshape(-1, order="F"), omega.conj())
    est = CascadedChannel(c, n_ms, n_bs)
    result = EstimationResult(estimate=est, precoder=q, combiner=w,
                              ris_profile=RisProfile(omega))
    return (int(r), int(b), int(i)), best_power, result


# ---------------------------------------------------------------------------
# Off-grid sparse (grid + Newton refinement) estimation
# ---------------------------------------------------------------------------

def _centered_index(n: int) -> np.ndarray:
    return np.arange(n) - (n - 1) / 2.0


def _steer_cos(n: int, f) -> np.ndarray:
    """Unit-modulus ULA responses at direction cosines f, shape (n, len(f))."""
    m = _centered_index(n)
    return np.exp(-1j * np.pi * np.outer(m, np.atleast_1d(f)))


def _steer_cos_vec(n: int, f: float) -> np.ndarray:
    m = _centered_index(n)
    return np.exp(-1j * np.pi * m * f)


@dataclass
class _SparseWork:
    """Precomputed per-slot projections for atom correlation."""

    w_list: list         # per-slot combiner matrices (N_MS x S)
    q: np.ndarray        # (T, N_BS) precoders
    omega: np.ndarray    # (T, N_RIS) profiles
    n_ms: int
    n_bs: int
    n_ris: int

    def model(self, theta: float, phi: float, psi: float) -> np.ndarray:
        """Unit-gain model response, flattened over (slot, stream)."""
        a_ms = _steer_cos_vec(self.n_ms, theta)
        a_bs = _steer_cos_vec(self.n_bs, phi)
        v = _steer_cos_vec(self.n_ris, psi)
        bps = (self.q @ a_bs.conj()) * (self.omega @ v)  # (T,) of (a_bs^H q_t)(omega_t^T v)
        rows = [ (w.conj().T @ a_ms) * bps[t] for t, w in enumerate(self.w_list) ]
        return np.concatenate([r.reshape(-1) for r in rows])


def _prepare_work(observations, design: TrainingDesign) -> Tuple[_SparseWork, np.ndarray]:
    w_list = []
    for w in design.combiners:
        w = np.asarray(w, complex)
        w_list.append(w[:, None] if w.ndim == 1 else w)
    q = np.stack([np.asarray(p, complex).reshape(-1) for p in design.precoders])
    omega = np.stack([p.coefficients for p in design.ris_profiles])
    z_rows = [np.asarray(o, complex).reshape(-1) / design.pilots[t]
              for t, o in enumerate(observations)]
    y = np.concatenate(z_rows)
    work = _SparseWork(w_list=w_list, q=q, omega=omega,
                       n_ms=design.n_ms, n_bs=design.n_bs, n_ris=design.n_ris)
    return work, y


def _grid_correlate(work: _SparseWork, resid_rows: List[np.ndarray],
                    grids: Tuple[np.ndarray, np.ndarray, np.ndarray]):
    """Best grid atom by matched-filter gain |<y, mu>|^2 / ||mu||^2."""
    g_theta, g_phi, g_psi = grids
    t_p = len(work.w_list)
    a_ms = _steer_cos(work.n_ms, g_theta)      # N_MS x Gt
    a_bs = _steer_cos(work.n_bs, g_phi)        # N_BS x Gp
    v = _steer_cos(work.n_ris, g_psi)          # N_RIS x Gs

    b = work.q @ a_bs.conj()                   # (T, Gp) of a_bs(phi_g)^H q_t
    c = work.omega @ v                         # (T, Gs)
    # D[g, t] = sum_i resid[t, i] * conj(A[t, i, g]); E2[g, t] = sum_i |A|^2
    d = np.empty((len(g_theta), t_p), complex)
    e2 = np.empty((len(g_theta), t_p))
    for t, w in enumerate(work.w_list):
        at = w.conj().T @ a_ms                 # (S, Gt)
        d[:, t] = at.conj().T @ resid_rows[t]
        e2[:, t] = np.sum(np.abs(at) ** 2, axis=0)
    # correlate over (theta, phi) then psi via matmuls
    num = np.einsum("at,tb->abt", d, np.conj(b), optimize=True)
    num = num.reshape(-1, t_p) @ np.conj(c)    # (Gt*Gp, Gs)
    den = np.einsum("at,tb->abt", e2, np.abs(b) ** 2, optimize=True)
    den = den.reshape(-1, t_p) @ (np.abs(c) ** 2)
    gain = np.abs(num) ** 2 / np.maximum(den, 1e-300)
    flat = int(np.argmax(gain))
    ij, k = np.unravel_index(flat, (len(g_theta) * len(g_phi), len(g_psi)))
    i, j = np.unravel_index(ij, (len(g_theta), len(g_phi)))
    return float(g_theta[i]), float(g_phi[j]), float(g_psi[k]), float(gain[ij, k])


def _refine_newton(work: _SparseWork, y_resid: np.ndarray, x0: np.ndarray,
                   steps: int = 12) -> np.ndarray:
    """Line-searched Newton (finite-difference derivatives) on the residual
    after closed-form gain fitting.  Never returns a worse point than x0."""

    def neg_gain(x):
        mu = work.model(*x)
        e = np.linalg.norm(mu) ** 2
        if e == 0:
            return 0.0
        return -abs(np.vdot(mu, y_resid)) ** 2 / e

    x = x0.copy()
    fx = neg_gain(x)
    h = 1e-5
    for _ in range(steps):
        grad = np.zeros(3)
        hess = np.zeros((3, 3))
        f_p = np.zeros(3)
        f_m = np.zeros(3)
        for a in range(3):
            xp, xm = x.copy(), x.copy()
            xp[a] += h
            xm[a] -= h
            f_p[a], f_m[a] = neg_gain(xp), neg_gain(xm)
            grad[a] = (f_p[a] - f_m[a]) / (2 * h)
            hess[a, a] = (f_p[a] - 2 * fx + f_m[a]) / h ** 2
        for a in range(3):
            for bb in range(a + 1, 3):
                xpp = x.copy(); xpp[a] += h; xpp[bb] += h
                xpm = x.copy(); xpm[a] += h; xpm[bb] -= h
                xmp = x.copy(); xmp[a] -= h; xmp[bb] += h
                xmm = x.copy(); xmm[a] -= h; xmm[bb] -= h
                hess[a, bb] = hess[bb, a] = (
                    neg_gain(xpp) - neg_gain(xpm) - neg_gain(xmp) + neg_gain(xmm)
                ) / (4 * h ** 2)
        try:
            evals = np.linalg.eigvalsh(hess)
            # damp relative to the largest curvature so a near-singular
            # direction cannot blow the Newton step up by orders of magnitude
            floor = 1e-3 * max(np.abs(evals).max(), 1e-12)
            if evals.min() < floor:
                hess = hess + (floor - evals.min()) * np.eye(3)
            step = -np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = -grad
        # backtracking line search on the Newton step, then on the raw
        # gradient as a fallback; keep the incumbent on failure
        improved = False
        for direction in (step, -grad / max(np.linalg.norm(grad), 1e-30)):
            alpha = 1.0
            for _ in range(30):
                xn = x + alpha * direction
                fn = neg_gain(xn)
                if fn < fx:
                    x, fx = xn, fn
                    improved = True
                    break
                alpha *= 0.5
            if improved:
                break
        if not improved:
            break
    return x


def sparse_estimate(observations: Sequence[np.ndarray], design: TrainingDesign,
                    grid_oversampling: int = 2, max_paths: int = 1,
                    detect_threshold: float = 0.05,
                    newton_steps: int = 12,
                    refine: bool = True,
                    psi_atoms: Optional[int] = None) -> EstimationResult:
    """Two-stage off-grid cascade estimation.

    Stage 1 runs matching pursuit over a DFT grid of cascaded-response atoms
    (direction cosines at MS/BS, combined spatial frequency at the RIS);
    stage 2 refines each detected triple with line-searched Newton steps.

    Args:
        psi_atoms: grid size for the RIS spatial frequency over [-2, 2);
            defaults to ``grid_oversampling * 2 * n_ris`` (one atom per
            orthogonality distance).

    Raises:
        NoPathDetected: the best atom explains less than ``detect_threshold``
            of the residual energy at the first stage-1 iteration.
    """
    work, y = _prepare_work(observations, design)
    n_ms, n_bs, n_ris = work.n_ms, work.n_bs, work.n_ris
    g_theta = -1.0 + 2.0 * (np.arange(grid_oversampling * n_ms) + 0.5) / (grid_oversampling * n_ms)
    g_phi = -1.0 + 2.0 * (np.arange(grid_oversampling * n_bs) + 0.5) / (grid_oversampling * n_bs)
    n_psi = psi_atoms if psi_atoms is not None else grid_oversampling * 2 * n_ris
    g_psi = -2.0 + 4.0 * (np.arange(n_psi) + 0.5) / n_psi
    grids = (g_theta, g_phi, np.asarray(g_psi))

    resid = y.copy()
    detected = []
    atoms = []
    for it in range(max_paths):
        resid_rows = _split_rows(resid, design)
        th, ph, ps, explained = _grid_correlate(work, resid_rows, grids)
        if explained < detect_threshold * np.linalg.norm(resid) ** 2:
            if it == 0:
                raise NoPathDetected("no atom explains enough residual energy")
            break
        x = np.array([th, ph, ps])
        if refine:
            x = _refine_newton(work, resid, x, steps=newton_steps)
        mu = work.model(*x)
        detected.append(x)
        atoms.append(mu)
        # joint LS gain refit over all detected atoms, then new residual
        basis = np.stack(atoms, axis=1)
        gains, *_ = np.linalg.lstsq(basis, y, rcond=None)
        resid = y - basis @ gains

    basis = np.stack(atoms, axis=1)
    gains, *_ = np.linalg.lstsq(basis, y, rcond=None)

    c = np.zeros((n_ms * n_bs, n_ris), dtype=complex)
    path_estimates = []
    for g, x in zip(gains, detected):
        a_ms = _steer_cos_vec(n_ms, x[0])
        a_bs = _steer_cos_vec(n_bs, x[1])
        v = _steer_cos_vec(n_ris, x[2])
        c += g * np.outer(np.outer(a_ms, a_bs.conj()).reshape(-1, order="F"), v)
        path_estimates.append((complex(g), float(x[0]), float(x[1]), float(x[2])))

    est = CascadedChannel(c, n_ms, n_bs)
    # conjugate-matched beamformers from the dominant path
    g0, th0, ph0, ps0 = path_estimates[int(np.argmax([abs(p[0]) for p in path_estimates]))]
    w = _steer_cos_vec(n_ms, th0) / np.sqrt(n_ms)
    q = _steer_cos_vec(n_bs, ph0) / np.sqrt(n_bs)
    omega = np.conj(_steer_cos_vec(n_ris, ps0))
    return EstimationResult(estimate=est, path_estimates=path_estimates,
                            precoder=q, combiner=w, ris_profile=RisProfile(omega))


def _split_rows(y: np.ndarray, design: TrainingDesign) -> List[np.ndarray]:
    rows = []
    idx = 0
    for w in design.combiners:
        w = np.asarray(w)
        s = 1 if w.ndim == 1 else w.shape[1]
        rows.append(y[idx:idx + s])
        idx += s
    return rows
