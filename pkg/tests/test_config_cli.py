"""Tests for config parsing and the command-line interface."""

import json

import numpy as np
import pytest

from slacsim.cli import main
from slacsim.config import load_config
from slacsim.errors import ConfigError

MINIMAL_CE = """
system:
  snr_db: [0]
arrays:
  bs: {elements: 2}
  ms: {elements: 4}
  ris: {elements: 8}
frame:
  t_c: 100
  t_p: [16]
  trials: 3
  seed: 0
estimators:
  enabled: [ls]
"""

MINIMAL_TRADEOFF = """
frame:
  t_c: 100
  t_p: [4, 10, 25, 100]
  trials: 5
  seed: 0
tradeoff:
  policies: [random, directional]
  ris_sizes: [8]
  prior_sigma_m: 0.5
  element_snr_db: -20.0
"""


def _write(tmp_path, text, name="config.yaml"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_load_minimal_config(tmp_path):
    cfg = load_config(_write(tmp_path, MINIMAL_CE))
    assert cfg.frame.seed == 0
    assert cfg.estimators == ["ls"]
    assert cfg.ce_setup.n_ris == 8
    assert cfg.tradeoff is None


def test_unknown_keys_rejected(tmp_path):
    for text, key in (
        (MINIMAL_CE + "\nbogus: 1\n", "bogus"),
        (MINIMAL_CE.replace("t_c: 100", "t_c: 100\n  nonsense: 2"), "nonsense"),
    ):
        with pytest.raises(ConfigError) as err:
            load_config(_write(tmp_path, text))
        assert key in str(err.value)


def test_unknown_estimator_rejected(tmp_path):
    with pytest.raises(ConfigError) as err:
        load_config(_write(tmp_path, MINIMAL_CE.replace("[ls]", "[magic]")))
    assert "estimators.enabled" in str(err.value)


def test_prior_policy_requires_prior_sigma(tmp_path):
    text = MINIMAL_TRADEOFF.replace("  prior_sigma_m: 0.5\n", "")
    with pytest.raises(ConfigError) as err:
        load_config(_write(tmp_path, text))
    assert "tradeoff.prior_sigma_m" in str(err.value)


def test_seed_and_trials_overrides(tmp_path):
    cfg = load_config(_write(tmp_path, MINIMAL_CE), seed_override=9, trials_override=7)
    assert cfg.frame.seed == 9
    assert cfg.frame.trials == 7


def test_cebench_cli_single_row_and_metadata(tmp_path):
    cfg = _write(tmp_path, MINIMAL_CE)
    out = tmp_path / "out"
    assert main(["cebench", "--config", cfg, "--out", str(out)]) == 0
    lines = (out / "cebench.csv").read_text().splitlines()
    assert lines[0] == "estimator,t_p,snr_db,nmse,eff_se_bits"
    assert len(lines) == 2
    meta = json.loads((out / "run.json").read_text())
    assert meta["seed"] == 0
    assert meta["command"] == "cebench"


def test_cebench_cli_byte_reproducible(tmp_path):
    cfg = _write(tmp_path, MINIMAL_CE)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["cebench", "--config", cfg, "--out", str(out_a)]) == 0
    assert main(["cebench", "--config", cfg, "--out", str(out_b)]) == 0
    assert (out_a / "cebench.csv").read_bytes() == (out_b / "cebench.csv").read_bytes()


def test_tradeoff_cli_rows_and_reproducibility(tmp_path):
    cfg = _write(tmp_path, MINIMAL_TRADEOFF)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["tradeoff", "--config", cfg, "--out", str(out_a)]) == 0
    assert main(["tradeoff", "--config", cfg, "--out", str(out_b)]) == 0
    lines = (out_a / "tradeoff.csv").read_text().splitlines()
    assert lines[0] == "ris_elems,policy,t_p,peb_m,eff_se_bits"
    assert len(lines) == 1 + 2 * 4
    assert (out_a / "tradeoff.csv").read_bytes() == (out_b / "tradeoff.csv").read_bytes()


def test_cli_config_error_exit_code(tmp_path):
    cfg = _write(tmp_path, MINIMAL_CE.replace("[ls]", "[magic]"))
    assert main(["cebench", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert main(["tradeoff", "--config", _write(tmp_path, MINIMAL_CE, "t.yaml"),
                 "--out", str(tmp_path / "o2")]) == 2  # missing tradeoff section


def test_cli_missing_config_exit_code(tmp_path):
    assert main(["cebench", "--config", str(tmp_path / "absent.yaml"),
                 "--out", str(tmp_path / "o")]) == 3


def test_cli_io_failure_exit_code(tmp_path):
    cfg = _write(tmp_path, MINIMAL_CE)
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    # output "directory" is an existing file -> I/O failure
    assert main(["cebench", "--config", cfg, "--out", str(blocker)]) == 3


def test_csv_values_round_trip(tmp_path):
    cfg = _write(tmp_path, MINIMAL_TRADEOFF)
    out = tmp_path / "out"
    main(["tradeoff", "--config", cfg, "--out", str(out)])
    lines = (out / "tradeoff.csv").read_text().splitlines()[1:]
    for line in lines:
        _, _, _, peb, se = line.split(",")
        if peb != "inf":
            assert repr(float(peb)) == peb
        assert repr(float(se)) == se
