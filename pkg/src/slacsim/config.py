"""Strict run-configuration parsing (YAML key trees, unknown keys rejected)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import yaml

from .errors import ConfigError
from .experiments import (CeSetup, FrameConfig, TradeoffSetup, KNOWN_ESTIMATORS)


def _require(section: dict, path: str, key: str, typ, default=None, required=False):
    if key not in section:
        if required:
            raise ConfigError(f"{path}.{key}", "missing required key")
        return default
    val = section[key]
    if typ is float and isinstance(val, int):
        val = float(val)
    if not isinstance(val, typ):
        raise ConfigError(f"{path}.{key}", f"expected {typ}, got {type(val).__name__}")
    return val


def _check_no_unknown(section: dict, path: str, allowed):
    for key in section:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}", "unknown key")


def _num_list(section: dict, path: str, key: str, default=None, required=False):
    val = _require(section, path, key, list, default=default, required=required)
    if val is default:
        return default
    out = []
    for i, v in enumerate(val):
        if not isinstance(v, (int, float)):
            raise ConfigError(f"{path}.{key}[{i}]", "expected a number")
        out.append(v)
    return out


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration for the cebench / tradeoff commands."""

    snr_db: list
    ce_setup: Optional[CeSetup]
    frame: FrameConfig
    estimators: list
    tradeoff: Optional[TradeoffSetup]
    raw: dict


def load_config(path, seed_override=None, trials_override=None) -> RunConfig:
    """Parse and validate a YAML run configuration.

    Raises:
        ConfigError: naming the offending key for any schema violation.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError("<document>", f"invalid YAML: {exc}")
    if not isinstance(doc, dict):
        raise ConfigError("<document>", "top level must be a mapping")
    _check_no_unknown(doc, "<root>", {"system", "arrays", "channel", "frame",
                                      "estimators", "tradeoff"})

    system = _require(doc, "<root>", "system", dict, default={})
    _check_no_unknown(system, "system", {"carrier_hz", "snr_db", "noise_convention"})
    carrier_hz = _require(system, "system", "carrier_hz", float, default=30e9)
    if carrier_hz <= 0:
        raise ConfigError("system.carrier_hz", "must be positive")
    snr_db = _num_list(system, "system", "snr_db", default=[0.0])
    noise_convention = _require(system, "system", "noise_convention", str, default="unit")
    if noise_convention not in ("unit", "per_antenna"):
        raise ConfigError("system.noise_convention", "must be 'unit' or 'per_antenna'")

    arrays = _require(doc, "<root>", "arrays", dict, default={})
    _check_no_unknown(arrays, "arrays", {"bs", "ms", "ris"})
    counts = {}
    positions = {}
    for name, default_n in (("bs", 16), ("ms", 16), ("ris", 64)):
        sub = _require(arrays, "arrays", name, dict, default={})
        _check_no_unknown(sub, f"arrays.{name}", {"elements", "position"})
        n = _require(sub, f"arrays.{name}", "elements", int, default=default_n)
        if n < 1:
            raise ConfigError(f"arrays.{name}.elements", "must be >= 1")
        counts[name] = n
        positions[name] = _num_list(sub, f"arrays.{name}", "position", default=None)

    channel = _require(doc, "<root>", "channel", dict, default={})
    _check_no_unknown(channel, "channel", {"direct_paths", "blocked_los"})
    direct_paths = _require(channel, "channel", "direct_paths", int, default=2)
    if direct_paths < 0:
        raise ConfigError("channel.direct_paths", "must be >= 0")
    blocked_los = _require(channel, "channel", "blocked_los", bool, default=True)

    frame_sec = _require(doc, "<root>", "frame", dict, default={})
    _check_no_unknown(frame_sec, "frame", {"t_c", "t_p", "trials", "seed"})
    t_c = _require(frame_sec, "frame", "t_c", int, default=500)
    t_p = _num_list(frame_sec, "frame", "t_p", default=[56])
    trials = _require(frame_sec, "frame", "trials", int, default=100)
    seed = _require(frame_sec, "frame", "seed", int, default=0)
    if seed_override is not None:
        seed = int(seed_override)
    if trials_override is not None:
        trials = int(trials_override)
    try:
        frame = FrameConfig(t_c=t_c, t_p_list=[int(t) for t in t_p],
                            trials=trials, seed=seed)
    except ValueError as exc:
        raise ConfigError("frame", str(exc))

    est_sec = _require(doc, "<root>", "estimators", dict, default={})
    _check_no_unknown(est_sec, "estimators",
                      {"enabled", "codebook_oversampling", "beam_bs_atoms",
                       "beam_ris_atoms", "sparse_max_paths", "unfold"})
    enabled = _require(est_sec, "estimators", "enabled", list,
                       default=["full_csi", "sparse", "beam_align"])
    for name in enabled:
        if name not in KNOWN_ESTIMATORS:
            raise ConfigError("estimators.enabled", f"unknown estimator {name!r}")
    codebook_os = _require(est_sec, "estimators", "codebook_oversampling", int, default=1)
    beam_bs = _require(est_sec, "estimators", "beam_bs_atoms", int, default=4)
    beam_ris = _require(est_sec, "estimators", "beam_ris_atoms", int, default=10)
    sparse_max_paths = _require(est_sec, "estimators", "sparse_max_paths", int, default=1)
    unfold = _require(est_sec, "estimators", "unfold", dict, default={})
    _check_no_unknown(unfold, "estimators.unfold", {"depth", "train"})
    depth = _require(unfold, "estimators.unfold", "depth", int, default=10)
    train = _require(unfold, "estimators.unfold", "train", dict, default={})
    _check_no_unknown(train, "estimators.unfold.train", {"samples", "epochs", "lr"})
    samples = _require(train, "estimators.unfold.train", "samples", int, default=200)
    epochs = _require(train, "estimators.unfold.train", "epochs", int, default=12)
    lr = _require(train, "estimators.unfold.train", "lr", float, default=0.5)

    ce_setup = CeSetup(n_bs=counts["bs"], n_ms=counts["ms"], n_ris=counts["ris"],
                       carrier_hz=carrier_hz, direct_nlos_paths=direct_paths,
                       blocked_los=blocked_los, noise_convention=noise_convention,
                       t_c=t_c, codebook_oversampling=codebook_os,
                       beam_bs_atoms=beam_bs, beam_ris_atoms=beam_ris,
                       sparse_max_paths=sparse_max_paths, unfold_depth=depth,
                       unfold_train_samples=samples, unfold_train_epochs=epochs,
                       unfold_train_lr=lr)

    tradeoff_setup = None
    if "tradeoff" in doc:
        td = doc["tradeoff"]
        _check_no_unknown(td, "tradeoff", {"policies", "prior_sigma_m", "dither_rad",
                                           "ris_sizes", "element_snr_db", "scan_radius_m",
                                           "user_position", "fallback_error_m"})
        policies = _require(td, "tradeoff", "policies", list, default=["random", "directional"])
        for pol in policies:
            if pol not in ("random", "directional", "positional"):
                raise ConfigError("tradeoff.policies", f"unknown policy {pol!r}")
        prior_sigma = _require(td, "tradeoff", "prior_sigma_m", float, default=None)
        if any(p != "random" for p in policies) and prior_sigma is None:
            raise ConfigError("tradeoff.prior_sigma_m",
                              "required when a prior-aided policy is enabled")
        dither = _require(td, "tradeoff", "dither_rad", float, default=0.3)
        ris_sizes = _num_list(td, "tradeoff", "ris_sizes", default=[16, 32])
        element_snr = _require(td, "tradeoff", "element_snr_db", float, default=-40.0)
        scan_radius = _require(td, "tradeoff", "scan_radius_m", float, default=1.0)
        user_pos = _num_list(td, "tradeoff", "user_position", default=[5.0, 5.0, -5.0])
        fallback = _require(td, "tradeoff", "fallback_error_m", float, default=20.0)
        if len(user_pos) != 3:
            raise ConfigError("tradeoff.user_position", "needs 3 coordinates")
        bs_pos = positions["bs"] if positions["bs"] is not None else [1.0, 1.0, 0.0]
        if len(bs_pos) != 3:
            raise ConfigError("arrays.bs.position", "needs 3 coordinates")
        tradeoff_setup = TradeoffSetup(carrier_hz=carrier_hz, bs_position=tuple(bs_pos),
                                       user_position=tuple(user_pos),
                                       ris_sizes=[int(n) for n in ris_sizes],
                                       policies=list(policies),
                                       prior_sigma_m=prior_sigma if prior_sigma is not None else 0.5,
                                       dither_rad=dither, element_snr_db=element_snr,
                                       scan_radius_m=scan_radius,
                                       fallback_error_m=fallback)

    return RunConfig(snr_db=snr_db, ce_setup=ce_setup, frame=frame,
                     estimators=list(enabled), tradeoff=tradeoff_setup, raw=doc)
