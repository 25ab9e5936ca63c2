from pathlib import Path

import pytest

encadapter = pytest.importorskip("encadapter")

from encadapter.errors import ConfigError
from encadapter.spec import AdapterSpec, load_spec

CONFIGS = Path(__file__).parents[1] / "configs"


def test_shipped_configs_load():
    for path in sorted(CONFIGS.glob("*.yaml")):
        spec = load_spec(path)
        assert spec.name == path.stem


def test_truncation_token_counts():
    spec = load_spec(CONFIGS / "stub-tokens-30s.yaml")
    assert spec.n_tokens == 90
    assert spec.retained_tokens() == 30  # 90 * (10 s / 30 s)


def test_retention_never_exceeds_sequence():
    spec = AdapterSpec(name="s", sample_rate=16000, input_seconds=5.0,
                       pooling="truncate-then-average", dim=4, tokens_per_second=2.0)
    # encoder window shorter than the clip: keep everything
    assert spec.retained_tokens() == spec.n_tokens == 10


def test_spec_validation():
    ok = dict(name="x", sample_rate=16000, input_seconds=10.0,
              pooling="global-average", dim=8)
    AdapterSpec(**ok)
    with pytest.raises(ConfigError, match="pooling"):
        AdapterSpec(**{**ok, "pooling": "max"})
    with pytest.raises(ConfigError):
        AdapterSpec(**{**ok, "dim": 0})
    with pytest.raises(ConfigError):
        AdapterSpec(**{**ok, "sample_rate": -1})
    with pytest.raises(ConfigError):
        AdapterSpec(**{**ok, "name": "two words"})


def test_load_spec_rejects_unknown_keys(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("name: x\nsample_rate: 16000\ninput_seconds: 10.0\n"
                    "pooling: global-average\ndim: 8\nwindow: hann\n")
    with pytest.raises(ConfigError, match="window"):
        load_spec(path)
    path.write_text("- just\n- a list\n")
    with pytest.raises(ConfigError, match="mapping"):
        load_spec(path)
