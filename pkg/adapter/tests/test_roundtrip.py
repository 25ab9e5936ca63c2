"""Round trip against the benchmark pipeline: adapter files must be
byte-compatible with the consumer's reader/writer and feed eval-coat."""

import json

import numpy as np
import pytest

encadapter = pytest.importorskip("encadapter")
compbench = pytest.importorskip("compbench")

from click.testing import CliRunner

from encadapter.adapt import adapt, validate
from encadapter.aeb import write_embeddings as adapter_write
from encadapter.cli import main as adapter_cli
from encadapter.errors import FormatError
from encadapter.spec import AdapterSpec

from compbench import pipeline
from compbench.config import load_config
from compbench.encoders import EmbeddingSet, read_embeddings
from compbench.encoders import write_embeddings as primary_write

MICRO = {
    "pools": {"coat_candidates": 25, "tre_candidates": 40},
    "balance": {"coat_subset": 8, "tre_subset": 16},
    "embedding_dim": 64,
}


@pytest.fixture(scope="module")
def micro_run(tmp_path_factory):
    """Benchmark run through synth: real pools and rendered WAVs."""
    out = tmp_path_factory.mktemp("micro_run")
    cfg = load_config(None, overrides=MICRO)
    pipeline.stage_gen_pool(cfg, out)
    pipeline.stage_balance(cfg, out)
    pipeline.stage_synth(cfg, out)
    return cfg, out


def linear_spec(tmp_path, dim=64, frame_len=4000):
    ckpt = tmp_path / "proj.npz"
    rng = np.random.default_rng(7)
    np.savez(ckpt, projection=rng.standard_normal((dim, frame_len)))
    return AdapterSpec(name="linear-16k", sample_rate=16000, input_seconds=10.0,
                       pooling="global-average", dim=dim, backend="checkpoint",
                       checkpoint=str(ckpt))


def test_adapter_file_bit_identical_to_primary_writer(micro_run, tmp_path):
    _, out = micro_run
    spec = linear_spec(tmp_path)
    result = adapt(out / "audio/coat", spec, tmp_path / "a.aeb")
    emb = read_embeddings(result.out_path, encoder_name=spec.name)  # validates
    assert emb.dim == spec.dim and len(emb.vectors) == result.n_scenes
    primary_write(tmp_path / "b.aeb", emb)
    assert (tmp_path / "a.aeb").read_bytes() == (tmp_path / "b.aeb").read_bytes()


def test_eval_coat_consumes_adapter_file(micro_run, tmp_path):
    cfg, out = micro_run
    spec = linear_spec(tmp_path)
    (out / "embeddings").mkdir(exist_ok=True)
    adapt(out / "audio/coat", spec, out / "embeddings/linear-16k_coat.aeb")
    pipeline.stage_eval_coat(cfg, out, ("linear-16k",))
    with open(out / "scores/coat_linear-16k_summary.json") as fh:
        summary = json.load(fh)
    assert summary["n_valid"] + summary["n_degenerate"] == 8

    # same vectors re-written by the primary writer give identical results
    emb = read_embeddings(out / "embeddings/linear-16k_coat.aeb", encoder_name="rewrap")
    primary_write(out / "embeddings/rewrap_coat.aeb", emb)
    first = (out / "scores/coat_linear-16k.csv").read_text()
    pipeline.stage_eval_coat(cfg, out, ("rewrap",))
    second = (out / "scores/coat_rewrap.csv").read_text()
    assert first == second


def test_constant_stub_all_quads_degenerate(micro_run, tmp_path):
    cfg, out = micro_run
    spec = AdapterSpec(name="stub-constant", sample_rate=16000, input_seconds=10.0,
                       pooling="global-average", dim=64, backend="stub-constant")
    (out / "embeddings").mkdir(exist_ok=True)
    adapt(out / "audio/coat", spec, out / "embeddings/stub-constant_coat.aeb")
    pipeline.stage_eval_coat(cfg, out, ("stub-constant",))
    with open(out / "scores/coat_stub-constant_summary.json") as fh:
        summary = json.load(fh)
    assert summary["n_valid"] == 0
    assert summary["n_degenerate"] == 8


def test_validate_coverage(micro_run, tmp_path):
    _, out = micro_run
    scene_ids = sorted(p.stem for p in (out / "audio/coat").glob("*.wav"))
    spec = linear_spec(tmp_path)
    path = tmp_path / "v.aeb"
    adapt(out / "audio/coat", spec, path)
    assert validate(path, scene_ids).ok

    report = validate(path, scene_ids + ["zz_missing"])
    assert not report.ok and report.missing == ["zz_missing"] and not report.extra

    report = validate(path, scene_ids[:-1])
    assert not report.ok and report.extra == [scene_ids[-1]]
    assert any("extra" in line for line in report.lines())


def test_validate_corrupted_header_cites_offset(tmp_path):
    path = tmp_path / "c.aeb"
    adapter_write(path, 4, {"a": np.zeros(4, dtype=np.float32)})
    blob = path.read_bytes()
    path.write_bytes(b"XXXX" + blob[4:])
    with pytest.raises(FormatError, match="byte 0"):
        validate(path, ["a"])
    path.write_bytes(blob[:-5])
    with pytest.raises(FormatError, match="byte"):
        validate(path, ["a"])


def test_atomic_write_leaves_no_partial_file(tmp_path):
    target = tmp_path / "x.aeb"
    with pytest.raises(FormatError):
        adapter_write(target, 4, {"a": np.zeros(3, dtype=np.float32)})  # wrong dim
    assert not target.exists()
    assert list(tmp_path.iterdir()) == []  # no temp leftovers


def test_cli_adapt_and_validate(micro_run, tmp_path):
    _, out = micro_run
    spec_path = tmp_path / "spec.yaml"
    spec_path.write_text(
        "name: stub-constant\nbackend: stub-constant\nsample_rate: 16000\n"
        "input_seconds: 10.0\npooling: global-average\ndim: 64\n"
    )
    emb_path = tmp_path / "out.aeb"
    runner = CliRunner()
    r = runner.invoke(adapter_cli, ["adapt", "--wav-dir", str(out / "audio/coat"),
                                    "--spec", str(spec_path), "--out", str(emb_path)])
    assert r.exit_code == 0, r.output

    ids_path = tmp_path / "ids.txt"
    ids_path.write_text("\n".join(p.stem for p in sorted((out / "audio/coat").glob("*.wav"))))
    r = runner.invoke(adapter_cli, ["validate", "--embeddings", str(emb_path),
                                    "--ids", str(ids_path)])
    assert r.exit_code == 0, r.output
    assert "ok" in r.output

    ids_path.write_text(ids_path.read_text() + "\nnot_there\n")
    r = runner.invoke(adapter_cli, ["validate", "--embeddings", str(emb_path),
                                    "--ids", str(ids_path)])
    assert r.exit_code == 1
    assert "not_there" in r.output


def test_cli_adapt_bad_spec_exits_2(tmp_path):
    spec_path = tmp_path / "spec.yaml"
    spec_path.write_text("name: x\nsample_rate: 16000\ninput_seconds: 10.0\n"
                         "pooling: max\ndim: 8\n")
    (tmp_path / "w").mkdir()
    r = CliRunner().invoke(adapter_cli, ["adapt", "--wav-dir", str(tmp_path / "w"),
                                         "--spec", str(spec_path),
                                         "--out", str(tmp_path / "o.aeb")])
    assert r.exit_code == 2
    assert "pooling" in r.output or "pooling" in (r.stderr or "")
