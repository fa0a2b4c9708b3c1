"""End-to-end tests for the chunkprobe command-line interface.

Covers parser wiring and exit codes, config-file resolution, every
subcommand's happy path through a small temp-dir pipeline, and the error
paths that map runtime failures to exit code 1.
"""

import json
from pathlib import Path

import numpy as np
import pytest

from chunkprobe import blm, cli, experiment, models
from chunkprobe import store as store_mod
from chunkprobe.errors import ConfigError

from conftest import SEEDS_EN

SUBCOMMANDS = ["gen-corpus", "gen-blm", "embed-import", "embed-fetch", "train",
               "eval", "traverse", "project", "report", "gradcheck"]

HELP_FLAGS = {
    "gen-corpus": ["--seed-file", "--language", "--target", "--n-negs",
                   "--seed", "--config", "--out"],
    "gen-blm": ["--task", "--lex-type", "--count", "--seed-file",
                "--train-target", "--language"],
    "embed-import": ["--sentences", "--vectors", "--synthetic", "--sigma",
                     "--code-dim", "--model"],
    "embed-fetch": ["--sentences", "--model", "--endpoint", "--batch-size"],
    "train": ["--task", "--lex-type", "--data", "--store", "--epochs",
              "--batch", "--lr", "--preset", "--reshape-order",
              "--early-stop-dev-acc"],
    "eval": ["--checkpoints", "--task", "--data", "--store", "--split",
             "--batch", "--workers", "--reshape-order"],
    "traverse": ["--checkpoint", "--data", "--store", "--steps", "--batch",
                 "--workers"],
    "project": ["--checkpoint", "--data", "--store", "--batch",
                "--reshape-order"],
    "report": ["--metrics", "--projection"],
    "gradcheck": ["--instances"],
}


def read_json(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def tree_bytes(root, skip=("manifest.json",)) -> dict:
    """{relative path: bytes} for every file under root, minus skipped names."""
    root = Path(root)
    return {str(p.relative_to(root)): p.read_bytes()
            for p in sorted(root.rglob("*"))
            if p.is_file() and p.name not in skip}


# ---------------------------------------------------------------------------
# Pipelines shared across tests (built once per module)
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def pipe(tmp_path_factory):
    """gen-corpus -> embed-import --synthetic -> train, all through main()."""
    root = tmp_path_factory.mktemp("cli_pipe")
    corpus_dir = root / "corpus"
    assert cli.main(["gen-corpus", "--seed-file", SEEDS_EN, "--target", "140",
                     "--out", str(corpus_dir)]) == 0
    store_bin = root / "store" / "embeddings.bin"
    assert cli.main(["embed-import", "--synthetic", "--sentences",
                     str(corpus_dir / "sentences.jsonl"),
                     "--out", str(store_bin)]) == 0
    run_dir = root / "run"
    assert cli.main(["train", "--data", str(corpus_dir), "--store",
                     str(store_bin), "--epochs", "2",
                     "--out", str(run_dir)]) == 0
    return {"root": root, "corpus": corpus_dir, "store": store_bin,
            "run": run_dir}


@pytest.fixture(scope="module")
def blm_pipe(tmp_path_factory):
    """Same chain for the agreement BLM task with a small instance pool."""
    root = tmp_path_factory.mktemp("cli_blm")
    blm_dir = root / "blm"
    assert cli.main(["gen-blm", "--seed-file", SEEDS_EN, "--count", "50",
                     "--train-target", "20", "--out", str(blm_dir)]) == 0
    store_bin = root / "store" / "embeddings.bin"
    assert cli.main(["embed-import", "--synthetic", "--sentences",
                     str(blm_dir / "blm_instances.jsonl"),
                     "--out", str(store_bin)]) == 0
    run_dir = root / "run"
    assert cli.main(["train", "--task", "blm_agreement", "--data",
                     str(blm_dir), "--store", str(store_bin), "--epochs", "1",
                     "--batch", "8", "--out", str(run_dir)]) == 0
    return {"root": root, "blm": blm_dir, "store": store_bin, "run": run_dir}


# ---------------------------------------------------------------------------
# Parser and help output
# ---------------------------------------------------------------------------

class TestParser:
    def test_top_help_lists_every_subcommand(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            cli.main(["--help"])
        assert excinfo.value.code == 0
        out = capsys.readouterr().out
        for name in SUBCOMMANDS:
            assert name in out

    @pytest.mark.parametrize("command", sorted(HELP_FLAGS))
    def test_subcommand_help_lists_flags(self, command, capsys):
        with pytest.raises(SystemExit) as excinfo:
            cli.main([command, "--help"])
        assert excinfo.value.code == 0
        out = capsys.readouterr().out
        for flag in HELP_FLAGS[command]:
            assert flag in out, f"{command} help is missing {flag}"

    def test_missing_subcommand_is_usage_error(self):
        with pytest.raises(SystemExit) as excinfo:
            cli.main([])
        assert excinfo.value.code == 2

    def test_unknown_subcommand_is_usage_error(self):
        with pytest.raises(SystemExit) as excinfo:
            cli.main(["frobnicate"])
        assert excinfo.value.code == 2

    def test_unknown_flag_is_usage_error(self):
        with pytest.raises(SystemExit) as excinfo:
            cli.main(["gen-corpus", "--bogus", "1"])
        assert excinfo.value.code == 2

    def test_invalid_choice_is_usage_error(self):
        with pytest.raises(SystemExit) as excinfo:
            cli.main(["gen-blm", "--lex-type", "IV"])
        assert excinfo.value.code == 2


# ---------------------------------------------------------------------------
# Config resolution
# ---------------------------------------------------------------------------

class TestConfig:
    def test_precedence_cli_over_file_over_default(self):
        effective = cli.resolve_config(
            {"a": 1, "b": None, "c": None, "d": None},
            {"b": 2, "c": 3},
            {"a": 0, "b": 0, "c": 0, "d": 4})
        assert effective == {"a": 1, "b": 2, "c": 3, "d": 4}

    def test_unknown_file_keys_rejected_sorted(self):
        with pytest.raises(ConfigError, match="unknown config keys: x, y"):
            cli.resolve_config({}, {"y": 1, "x": 2}, {"a": 0})

    def test_load_json(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text('{"target": 140}', encoding="utf-8")
        assert cli.load_config_file(path) == {"target": 140}

    def test_load_toml(self, tmp_path):
        path = tmp_path / "cfg.toml"
        path.write_text('target = 140\nlanguage = "en"\n', encoding="utf-8")
        assert cli.load_config_file(path) == {"target": 140, "language": "en"}

    def test_other_suffix_rejected(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text("target: 140\n", encoding="utf-8")
        with pytest.raises(ConfigError, match=r"must be \.toml or \.json"):
            cli.load_config_file(path)

    def test_file_values_reach_command(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text('{"target": 140}', encoding="utf-8")
        out = tmp_path / "corpus"
        assert cli.main(["gen-corpus", "--seed-file", SEEDS_EN,
                         "--config", str(cfg), "--out", str(out)]) == 0
        manifest = read_json(out / "manifest.json")
        assert manifest["config"]["target"] == 140
        assert manifest["split_sizes"] == {"train": 98, "dev": 14, "test": 28}

    def test_cli_flag_beats_file_value(self, tmp_path):
        cfg = tmp_path / "cfg.toml"
        cfg.write_text("target = 140\n", encoding="utf-8")
        out = tmp_path / "corpus"
        assert cli.main(["gen-corpus", "--seed-file", SEEDS_EN,
                         "--config", str(cfg), "--target", "280",
                         "--out", str(out)]) == 0
        manifest = read_json(out / "manifest.json")
        assert manifest["config"]["target"] == 280

    def test_unknown_file_key_exits_one(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text('{"bogus": 1}', encoding="utf-8")
        rc = cli.main(["gen-corpus", "--seed-file", SEEDS_EN,
                       "--config", str(cfg), "--out", str(tmp_path / "x")])
        assert rc == 1
        assert "error: unknown config keys: bogus" in capsys.readouterr().err

    def test_write_manifest_is_sorted_json(self, tmp_path):
        cli.write_manifest(tmp_path, "demo", {"b": 1, "a": 2}, {"n": 3})
        text = (tmp_path / "manifest.json").read_text(encoding="utf-8")
        assert text.endswith("\n")
        payload = json.loads(text)
        assert payload == {"command": "demo", "config": {"b": 1, "a": 2},
                           "n": 3}
        assert text.index('"command"') < text.index('"config"') < \
            text.index('"n"')


# ---------------------------------------------------------------------------
# Runtime error paths (exit code 1, "error: ..." on stderr)
# ---------------------------------------------------------------------------

class TestErrorExits:
    def check(self, argv, message, capsys):
        rc = cli.main(argv)
        err = capsys.readouterr().err
        assert rc == 1
        assert "error:" in err and message in err

    def test_gen_corpus_requires_seed_file(self, capsys):
        self.check(["gen-corpus"], "--seed-file is required", capsys)

    def test_gen_blm_requires_seed_file(self, capsys):
        self.check(["gen-blm"], "--seed-file is required", capsys)

    def test_embed_import_requires_a_source(self, capsys):
        self.check(["embed-import"], "need --synthetic", capsys)

    def test_embed_import_synthetic_requires_sentences(self, capsys):
        self.check(["embed-import", "--synthetic"],
                   "--synthetic requires --sentences", capsys)

    def test_embed_fetch_requires_sentences(self, capsys):
        self.check(["embed-fetch"], "--sentences is required", capsys)

    def test_embed_fetch_requires_endpoint(self, tmp_path, capsys, monkeypatch):
        monkeypatch.delenv("EMBED_ENDPOINT", raising=False)
        sent = tmp_path / "s.jsonl"
        sent.write_text("", encoding="utf-8")
        self.check(["embed-fetch", "--sentences", str(sent)],
                   "no endpoint", capsys)

    def test_train_requires_data_and_store(self, capsys):
        self.check(["train"], "--data and --store are required", capsys)

    def test_eval_requires_checkpoints(self, capsys):
        self.check(["eval", "--data", "x", "--store", "y"],
                   "--checkpoints, --data, and --store are required", capsys)

    def test_report_requires_metrics(self, capsys):
        self.check(["report"], "--metrics is required", capsys)

    def test_unexpected_exception_names_type(self, tmp_path, capsys):
        rc = cli.main(["gen-corpus", "--seed-file",
                       str(tmp_path / "missing.tsv")])
        err = capsys.readouterr().err
        assert rc == 1
        assert "error: FileNotFoundError:" in err


# ---------------------------------------------------------------------------
# gen-corpus / gen-blm outputs
# ---------------------------------------------------------------------------

class TestGeneration:
    def test_corpus_outputs(self, pipe):
        corpus_dir = pipe["corpus"]
        assert (corpus_dir / "sentences.jsonl").exists()
        assert (corpus_dir / "triples.jsonl").exists()
        manifest = read_json(corpus_dir / "manifest.json")
        assert manifest["command"] == "gen-corpus"
        assert manifest["config"]["target"] == 140
        assert manifest["config"]["n_negs"] == 7
        assert manifest["split_sizes"] == {"train": 98, "dev": 14, "test": 28}
        lines = (corpus_dir / "sentences.jsonl").read_text(
            encoding="utf-8").splitlines()
        assert len(lines) == 280

    def test_corpus_rerun_is_byte_identical(self, pipe, tmp_path):
        out = tmp_path / "again"
        assert cli.main(["gen-corpus", "--seed-file", SEEDS_EN, "--target",
                         "140", "--out", str(out)]) == 0
        assert tree_bytes(out) == tree_bytes(pipe["corpus"])

    def test_blm_outputs(self, blm_pipe):
        blm_dir = blm_pipe["blm"]
        manifest = read_json(blm_dir / "manifest.json")
        assert manifest["command"] == "gen-blm"
        assert manifest["config"]["count"] == 50
        assert manifest["split_sizes"] == {"train": 16, "dev": 4, "test": 5}
        split = blm.read_blm(blm_dir / "blm_instances.jsonl")
        assert all(inst.task == "blm_agreement" for inst in split.train)
        assert all(inst.lex_type == "I" for inst in split.train)


# ---------------------------------------------------------------------------
# embed-import / embed-fetch
# ---------------------------------------------------------------------------

class TestEmbedImport:
    def test_synthetic_store(self, pipe):
        emb = store_mod.read_store(pipe["store"])
        assert len(emb.sentence_ids) == 280
        assert emb.model_name == "synthetic-oracle"
        manifest = read_json(pipe["store"].parent / "import_manifest.json")
        assert manifest["command"] == "embed-import"
        assert manifest["count"] == 280

    def test_vectors_jsonl_roundtrip(self, tmp_path):
        rng = np.random.default_rng(5)
        rows = rng.normal(size=(2, store_mod.EMBED_DIM)).astype(np.float32)
        vectors = tmp_path / "vectors.jsonl"
        vectors.write_text(
            "\n".join(json.dumps({"sentence_id": f"sid{i}",
                                  "vector": rows[i].tolist()})
                      for i in range(2)) + "\n", encoding="utf-8")
        out = tmp_path / "store" / "embeddings.bin"
        assert cli.main(["embed-import", "--vectors", str(vectors),
                         "--model", "custom-encoder",
                         "--out", str(out)]) == 0
        emb = store_mod.read_store(out)
        assert emb.sentence_ids == ["sid0", "sid1"]
        assert emb.model_name == "custom-encoder"
        np.testing.assert_array_equal(emb.vectors, rows)


class TestEmbedFetch:
    def test_batched_fetch_preserves_order(self, pipe, tmp_path, monkeypatch):
        calls = []

        def fake_fetch(endpoint, sentences, model, **kwargs):
            assert endpoint == "http://svc/embed"
            assert model == "electra-base-discriminator"
            start = sum(calls)
            calls.append(len(sentences))
            block = np.zeros((len(sentences), store_mod.EMBED_DIM),
                             dtype=np.float32)
            block[:, 0] = np.arange(start, start + len(sentences))
            return block

        monkeypatch.setattr(store_mod, "fetch_remote", fake_fetch)
        out = tmp_path / "store" / "embeddings.bin"
        rc = cli.main(["embed-fetch", "--sentences",
                       str(pipe["corpus"] / "sentences.jsonl"),
                       "--endpoint", "http://svc/embed", "--batch-size", "32",
                       "--out", str(out)])
        assert rc == 0
        assert calls == [32] * 8 + [24]          # 280 sentences
        emb = store_mod.read_store(out)
        np.testing.assert_array_equal(emb.vectors[:, 0], np.arange(280))
        manifest = read_json(out.parent / "fetch_manifest.json")
        assert manifest["count"] == 280
        assert manifest["config"]["batch_size"] == 32


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

class TestTrain:
    def test_run_outputs(self, pipe):
        run_dir = pipe["run"]
        assert (run_dir / "final.ckpt").exists()
        assert (run_dir / "best_dev.ckpt").exists()
        lines = (run_dir / "training_log.csv").read_text(
            encoding="utf-8").splitlines()
        assert lines[0] == "epoch,train_loss,dev_accuracy"
        assert len(lines) == 3
        manifest = read_json(run_dir / "manifest.json")
        assert manifest["epochs_run"] == 2
        assert manifest["stopped_early"] is False
        assert manifest["checkpoints"] == {"final": "final.ckpt",
                                           "best_dev": "best_dev.ckpt"}
        assert 0.0 <= manifest["best_dev_accuracy"] <= 1.0

    def test_final_checkpoint_loads(self, pipe):
        model, run_cfg, seed = experiment.load_model(pipe["run"] / "final.ckpt")
        assert isinstance(model, models.SentenceVAE)
        assert seed == 0
        assert run_cfg["task"] == "sentence"
        assert run_cfg["epochs"] == 2

    def test_blm_checkpoint_is_two_level(self, blm_pipe):
        model, run_cfg, _ = experiment.load_model(
            blm_pipe["run"] / "final.ckpt")
        assert isinstance(model, models.TwoLevelVAE)
        assert run_cfg["task"] == "blm_agreement"


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

class TestEval:
    def run_eval(self, pipe, out):
        return cli.main(["eval", "--checkpoints",
                         str(pipe["run"] / "final.ckpt"),
                         "--data", str(pipe["corpus"]),
                         "--store", str(pipe["store"]), "--out", str(out)])

    def test_writes_metrics(self, pipe, tmp_path):
        out = tmp_path / "eval"
        assert self.run_eval(pipe, out) == 0
        metrics = read_json(out / "metrics.json")
        assert metrics["task"] == "sentence"
        assert metrics["lex_train"] == "-" and metrics["lex_test"] == "-"
        assert [run["seed"] for run in metrics["runs"]] == [0]
        assert 0.0 <= metrics["f1_mean"] <= 1.0
        manifest = read_json(out / "manifest.json")
        assert manifest["checkpoints"] == [str(pipe["run"] / "final.ckpt")]

    def test_rerun_is_byte_identical(self, pipe, tmp_path):
        first, second = tmp_path / "one", tmp_path / "two"
        assert self.run_eval(pipe, first) == 0
        assert self.run_eval(pipe, second) == 0
        assert tree_bytes(first) == tree_bytes(second)

    def test_duplicate_run_seeds_rejected(self, pipe, tmp_path, capsys):
        rc = cli.main(["eval", "--checkpoints",
                       str(pipe["run"] / "final.ckpt"),
                       str(pipe["run"] / "best_dev.ckpt"),
                       "--data", str(pipe["corpus"]),
                       "--store", str(pipe["store"]),
                       "--out", str(tmp_path / "eval")])
        assert rc == 1
        assert "duplicate run seed" in capsys.readouterr().err

    def test_task_mismatch_rejected(self, pipe, blm_pipe, tmp_path, capsys):
        rc = cli.main(["eval", "--task", "blm_agreement", "--checkpoints",
                       str(pipe["run"] / "final.ckpt"),
                       "--data", str(blm_pipe["blm"]),
                       "--store", str(blm_pipe["store"]),
                       "--out", str(tmp_path / "eval")])
        assert rc == 1
        assert "does not match --task" in capsys.readouterr().err

    def test_blm_eval(self, blm_pipe, tmp_path):
        out = tmp_path / "eval"
        rc = cli.main(["eval", "--task", "blm_agreement", "--checkpoints",
                       str(blm_pipe["run"] / "final.ckpt"),
                       "--data", str(blm_pipe["blm"]),
                       "--store", str(blm_pipe["store"]), "--out", str(out)])
        assert rc == 0
        metrics = read_json(out / "metrics.json")
        assert metrics["task"] == "blm_agreement"
        assert metrics["lex_train"] == "I" and metrics["lex_test"] == "I"


# ---------------------------------------------------------------------------
# traverse / project / report / gradcheck
# ---------------------------------------------------------------------------

class TestAnalysis:
    def test_traverse_outputs(self, pipe, tmp_path):
        out = tmp_path / "trav"
        rc = cli.main(["traverse", "--checkpoint",
                       str(pipe["run"] / "final.ckpt"),
                       "--data", str(pipe["corpus"]),
                       "--store", str(pipe["store"]), "--steps", "3",
                       "--out", str(out)])
        assert rc == 0
        index = (out / "traversal" / "index.csv").read_text(
            encoding="utf-8").splitlines()
        assert index[0] == "unit,step,value,low,high"
        assert len(index) == 1 + 5 * 3
        assert (out / "traversal" / "baseline.csv").exists()
        matrices = sorted((out / "traversal").glob("unit*_step*.csv"))
        assert len(matrices) == 15
        assert read_json(out / "manifest.json")["command"] == "traverse"

    def test_project_outputs(self, pipe, tmp_path):
        out = tmp_path / "proj"
        rc = cli.main(["project", "--checkpoint",
                       str(pipe["run"] / "final.ckpt"),
                       "--data", str(pipe["corpus"] / "sentences.jsonl"),
                       "--store", str(pipe["store"]), "--out", str(out)])
        assert rc == 0
        ids, labels, coords = experiment.projection_from_csv(
            (out / "projection.csv").read_text(encoding="utf-8"))
        assert len(ids) == 280 and coords.shape == (280, 2)
        assert len(set(labels)) == 14
        latents = (out / "latents.csv").read_text(encoding="utf-8").splitlines()
        assert latents[0] == "id,label,z0,z1,z2,z3,z4"
        assert len(latents) == 281
        svg = (out / "plots" / "projection.svg").read_text(encoding="utf-8")
        assert svg.startswith("<svg")
        assert read_json(out / "manifest.json")["count"] == 280

    def test_project_accepts_blm_instances(self, blm_pipe, tmp_path):
        data = blm_pipe["blm"] / "blm_instances.jsonl"
        out = tmp_path / "proj"
        rc = cli.main(["project", "--checkpoint",
                       str(blm_pipe["run"] / "final.ckpt"),
                       "--data", str(data),
                       "--store", str(blm_pipe["store"]), "--out", str(out)])
        assert rc == 0
        expected = len(blm.blm_sentences(blm.read_blm(data)))
        assert read_json(out / "manifest.json")["count"] == expected

    def test_report_combines_metrics_and_projection(self, pipe, tmp_path):
        eval_out = tmp_path / "eval"
        assert cli.main(["eval", "--checkpoints",
                         str(pipe["run"] / "final.ckpt"),
                         "--data", str(pipe["corpus"]),
                         "--store", str(pipe["store"]),
                         "--out", str(eval_out)]) == 0
        proj_out = tmp_path / "proj"
        assert cli.main(["project", "--checkpoint",
                         str(pipe["run"] / "final.ckpt"),
                         "--data", str(pipe["corpus"] / "sentences.jsonl"),
                         "--store", str(pipe["store"]),
                         "--out", str(proj_out)]) == 0
        report_out = tmp_path / "report"
        rc = cli.main(["report", "--metrics", str(eval_out / "metrics.json"),
                       "--projection", str(proj_out / "projection.csv"),
                       "--out", str(report_out)])
        assert rc == 0
        assert (report_out / "metrics.json").read_bytes() == \
            (eval_out / "metrics.json").read_bytes()
        assert (report_out / "projection.csv").read_bytes() == \
            (proj_out / "projection.csv").read_bytes()
        summary = (report_out / "summary.md").read_text(encoding="utf-8")
        assert "sentence" in summary

    def test_gradcheck_passes_and_writes_battery(self, tmp_path, capsys):
        out = tmp_path / "gc"
        rc = cli.main(["gradcheck", "--instances", "2", "--out", str(out)])
        captured = capsys.readouterr().out
        assert rc == 0
        assert "ok" in captured and "FAIL" not in captured
        assert (out / "gradcheck.txt").read_text(encoding="utf-8") == captured
        assert read_json(out / "manifest.json")["command"] == "gradcheck"
