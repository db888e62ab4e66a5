"""Config loading and CLI flag override precedence."""

import pytest
import yaml

from corpus_forge.cli import build_config
from corpus_forge.config import load_config
from corpus_forge.errors import ConfigError


def test_defaults():
    cfg = load_config(None)
    assert cfg.workers == 1
    assert cfg.global_seed == 0
    assert cfg.segmenter.min_clip_s == 10.0
    assert cfg.captioner.omit_probability == 0.2
    assert cfg.eval.bins == 32
    assert cfg.eval.exclude_prefix is True


def test_file_values(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump({
        "input_dir": "/in", "workers": 4, "global_seed": 7,
        "segmenter": {"min_clip_s": 8.0, "max_clip_s": 20.0},
        "captioner": {"omit_probability": 0.5},
        "adapters": {"caption": "run-caption"},
    }))
    cfg = load_config(path)
    assert cfg.input_dir == "/in"
    assert cfg.workers == 4
    assert cfg.segmenter.max_clip_s == 20.0
    assert cfg.captioner.omit_probability == 0.5
    assert cfg.adapters == {"caption": "run-caption"}


def test_unknown_top_level_key(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("no_such_key: 1\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_unknown_section_key(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("segmenter: {bogus: 1}\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_invalid_section_values(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("segmenter: {min_clip_s: 40.0}\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/no/such/config.yaml")


def test_non_mapping_file(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("- just\n- a list\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_flags_win_over_file(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump({"workers": 4, "global_seed": 7,
                                    "input_dir": "/file-in"}))
    cfg = build_config(config_path=str(path), input_dir="/flag-in",
                       output_dir=None, seed=99, workers=None,
                       adapter_cmds=("caption=cmdline a b",),
                       no_adapter_fallback=True)
    assert cfg.input_dir == "/flag-in"      # flag wins
    assert cfg.global_seed == 99            # flag wins
    assert cfg.workers == 4                 # file wins over default
    assert cfg.adapters["caption"] == "cmdline a b"
    assert cfg.captioner.fallback is False


def test_bad_adapter_cmd_flag():
    with pytest.raises(ConfigError):
        build_config(config_path=None, input_dir=None, output_dir=None,
                     seed=None, workers=None, adapter_cmds=("caption",),
                     no_adapter_fallback=False)
