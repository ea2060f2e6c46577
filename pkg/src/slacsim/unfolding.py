"""Deep-unfolded iterative cascade estimation.

Each layer performs one gradient step on the data-fit term followed by
singular-value soft-thresholding (SVT) of the N_MS x (N_BS*N_RIS) matrix
reshaping of the cascade, so the layer count and the per-layer step sizes
and thresholds are the only trainable parameters (2K scalars).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .errors import EmptyDataset
from .estimation import CascadedChannel, EstimationResult, TrainingDesign, build_linear_map


@dataclass(frozen=True)
class UnfoldedEstimator:
    """Fixed-depth iterative estimator with trainable per-layer scalars."""

    step_sizes: Tuple[float, ...]
    thresholds: Tuple[float, ...]

    def __post_init__(self):
        if len(self.step_sizes) != len(self.thresholds):
            raise ValueError("step_sizes and thresholds must have the same length")
        if any(a <= 0 for a in self.step_sizes):
            raise ValueError("step sizes must be positive")
        if any(l < 0 for l in self.thresholds):
            raise ValueError("thresholds must be non-negative")
        if not all(np.isfinite(self.step_sizes)) or not all(np.isfinite(self.thresholds)):
            raise ValueError("parameters must be finite")
        object.__setattr__(self, "step_sizes", tuple(float(a) for a in self.step_sizes))
        object.__setattr__(self, "thresholds", tuple(float(l) for l in self.thresholds))

    @property
    def depth(self) -> int:
        return len(self.step_sizes)


def default_estimator(depth: int = 10, a_norm: float = 1.0) -> UnfoldedEstimator:
    """Untrained initialization: Landweber steps, mild thresholds."""
    alpha = 1.0 / max(a_norm ** 2, 1e-12)
    return UnfoldedEstimator(step_sizes=(alpha,) * depth,
                             thresholds=(0.0,) * depth)


def _svt_batch(mats: np.ndarray, lam: float) -> np.ndarray:
    """Singular-value soft-thresholding of a stack of (r, c) matrices, r <= c.

    Uses the Gram eigendecomposition M M^H = U s^2 U^H so only r x r
    factorizations are needed.
    """
    if lam == 0:
        return mats
    gram = mats @ np.conj(np.swapaxes(mats, -1, -2))
    evals, u = np.linalg.eigh(gram)
    s = np.sqrt(np.clip(evals, 0.0, None))
    scale = np.where(s > lam, 1.0 - lam / np.maximum(s, 1e-30), 0.0)
    # U diag(scale) U^H M
    inner = np.conj(np.swapaxes(u, -1, -2)) @ mats
    return u @ (scale[..., None] * inner)


def _apply_from_gram(est: UnfoldedEstimator, gram: np.ndarray, back: np.ndarray,
                     n_ms: int, n_bs: int, n_ris: int) -> np.ndarray:
    """Unfolded iteration given precomputed A^H A (transposed) and A^H y.

    The gradient step h <- h - alpha A^H(A h - y) only ever touches the data
    through ``gram = (A^H A)^T`` and ``back = (A^H y)^T``, so precomputing both
    once lets every layer (and every loss evaluation during training) run a
    single square matmul instead of two rectangular ones.
    """
    batch, n = back.shape
    h = np.zeros((batch, n), dtype=complex)
    for alpha, lam in zip(est.step_sizes, est.thresholds):
        h = h - alpha * (h @ gram - back)
        # reshape vec(C) (column-major over (n_ms, n_bs, n_ris)) to
        # n_ms x (n_bs*n_ris) matrices and apply SVT
        mats = h.reshape(batch, n_ms, n_bs * n_ris, order="F")
        mats = _svt_batch(mats, lam)
        h = mats.reshape(batch, n, order="F")
    return h


def unfolded_apply_batch(est: UnfoldedEstimator, a: np.ndarray, y: np.ndarray,
                         n_ms: int, n_bs: int, n_ris: int) -> np.ndarray:
    """Run the unfolded iteration on a batch of observation vectors.

    Args:
        a: sensing matrix (rows x unknowns) shared by the batch.
        y: observations, shape (rows,) or (batch, rows).

    Returns:
        Estimates of vec(C), shape matching ``y`` with rows -> unknowns.
    """
    single = y.ndim == 1
    yb = y[None, :] if single else y
    gram = a.T @ np.conj(a)
    back = yb @ np.conj(a)
    h = _apply_from_gram(est, gram, back, n_ms, n_bs, n_ris)
    return h[0] if single else h


def unfolded_apply(est: UnfoldedEstimator, observations: Sequence[np.ndarray],
                   design: TrainingDesign) -> EstimationResult:
    """Apply the unfolded estimator to one observation block."""
    from .estimation import beamformers_from_cascade, stack_observations
    a = build_linear_map(design)
    y = stack_observations(observations)
    h = unfolded_apply_batch(est, a, y, design.n_ms, design.n_bs, design.n_ris)
    c = h.reshape((design.n_ms * design.n_bs, design.n_ris), order="F")
    cascade = CascadedChannel(c, design.n_ms, design.n_bs)
    res = EstimationResult(estimate=cascade)
    if np.linalg.norm(c) > 0:
        res.precoder, res.combiner, res.ris_profile = beamformers_from_cascade(cascade)
    return res


def _mean_nmse(est: UnfoldedEstimator, gram, back, truths, dims) -> float:
    h = _apply_from_gram(est, gram, back, *dims)
    err = np.linalg.norm(h - truths, axis=1) ** 2
    ref = np.linalg.norm(truths, axis=1) ** 2
    return float(np.mean(err / ref))


def unfolded_train(initial: UnfoldedEstimator, dataset: List[Tuple[np.ndarray, np.ndarray]],
                   design: TrainingDesign, epochs: int = 30, learning_rate: float = 0.1,
                   fd_step: float = 1e-3, validation_split: float = 0.2,
                   verbose: bool = False):
    """Train layer scalars by finite-difference gradient descent on mean NMSE.

    ``dataset`` holds (stacked observation vector, vec(C) truth) pairs that
    all share the fixed ``design``.  Gradients come from central finite
    differences over the 2K parameters; a backtracking halving of the step
    keeps the training loss non-increasing.

    Returns:
        (trained estimator, history dict with train/validation loss).
    """
    if not dataset:
        raise EmptyDataset("training dataset is empty")
    a = build_linear_map(design)
    dims = (design.n_ms, design.n_bs, design.n_ris)
    ys = np.stack([d[0] for d in dataset])
    hs = np.stack([d[1] for d in dataset])
    gram = a.T @ np.conj(a)
    backs = ys @ np.conj(a)
    n_val = int(round(len(dataset) * validation_split))
    bs_tr, hs_tr = backs[: len(ys) - n_val], hs[: len(hs) - n_val]
    bs_va, hs_va = backs[len(ys) - n_val:], hs[len(hs) - n_val:]

    def params_of(e):
        return np.array(list(e.step_sizes) + list(e.thresholds))

    def estimator_of(p):
        k = len(p) // 2
        alphas = np.clip(p[:k], 1e-12, None)
        lams = np.clip(p[k:], 0.0, None)
        return UnfoldedEstimator(tuple(alphas), tuple(lams))

    def loss(p, bs_, hs_):
        return _mean_nmse(estimator_of(p), gram, bs_, hs_, dims)

    p = params_of(initial)
    lr = learning_rate
    history = {"train": [loss(p, bs_tr, hs_tr)], "validation": []}
    if n_val:
        history["validation"].append(loss(p, bs_va, hs_va))
    for epoch in range(epochs):
        base = history["train"][-1]
        grad = np.zeros_like(p)
        scale = np.maximum(np.abs(p), 1e-3)
        for i in range(len(p)):
            d = fd_step * scale[i]
            pp, pm = p.copy(), p.copy()
            pp[i] += d
            pm[i] -= d
            grad[i] = (loss(pp, bs_tr, hs_tr) - loss(pm, bs_tr, hs_tr)) / (2 * d)
        step = lr * scale
        accepted = False
        for _ in range(12):
            cand = p - step * grad
            f = loss(cand, bs_tr, hs_tr)
            if f < base:
                p, base = cand, f
                accepted = True
                break
            step *= 0.5
        history["train"].append(base)
        if n_val:
            history["validation"].append(loss(p, bs_va, hs_va))
        if verbose:
            print(f"epoch {epoch}: train {base:.4g}")
        if not accepted:
            break
    return estimator_of(p), history


def save_estimator(est: UnfoldedEstimator, path) -> None:
    """Write a plain-text key-value file with exact decimal round-trip."""
    lines = [f"depth {est.depth}"]
    for k, (a, l) in enumerate(zip(est.step_sizes, est.thresholds), start=1):
        lines.append(f"alpha_{k} {repr(a)}")
        lines.append(f"lambda_{k} {repr(l)}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_estimator(path) -> UnfoldedEstimator:
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            key, val = line.split()
            values[key] = val
    depth = int(values["depth"])
    alphas = tuple(float(values[f"alpha_{k}"]) for k in range(1, depth + 1))
    lams = tuple(float(values[f"lambda_{k}"]) for k in range(1, depth + 1))
    return UnfoldedEstimator(alphas, lams)
