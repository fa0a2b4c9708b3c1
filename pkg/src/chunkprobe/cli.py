"""Command-line entry point.

Subcommands cover dataset generation, embedding I/O, training, evaluation,
and the analysis battery.  Flag values resolve as CLI > config file >
built-in default, and the effective configuration is echoed into every
output manifest.  Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import blm, corpus, experiment, models, svgplot, synthetic, verify
from . import store as store_mod
from .errors import ChunkProbeError, ConfigError

log = logging.getLogger(__name__)

# Pool sizes whose 90:10 split reproduces the published test-set sizes.
BLM_POOL_DEFAULTS = {
    (blm.AGREEMENT_TASK, "I"): 2520,
    (blm.AGREEMENT_TASK, "II"): 48660,
    (blm.AGREEMENT_TASK, "III"): 48690,
    (blm.ALT_TASKS[1], "I"): 3750,
    (blm.ALT_TASKS[1], "II"): 15000,
    (blm.ALT_TASKS[1], "III"): 15000,
    (blm.ALT_TASKS[2], "I"): 3750,
    (blm.ALT_TASKS[2], "II"): 15000,
    (blm.ALT_TASKS[2], "III"): 15000,
}


def _formatter(prog: str) -> argparse.HelpFormatter:
    return argparse.HelpFormatter(prog, width=96)


def load_config_file(path) -> Dict:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        return json.loads(text)
    if path.suffix == ".toml":
        try:
            import tomllib
        except ImportError:                      # Python < 3.11
            import tomli as tomllib
        return tomllib.loads(text)
    raise ConfigError(f"config file must be .toml or .json, got {path.name}")


def resolve_config(cli_values: Dict, file_values: Dict, defaults: Dict) -> Dict:
    """CLI flag > config file > built-in default; unknown file keys rejected."""
    unknown = sorted(set(file_values) - set(defaults))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    effective = dict(defaults)
    effective.update(file_values)
    effective.update({k: v for k, v in cli_values.items() if v is not None})
    return effective


def write_manifest(outdir, command: str, config: Dict, extra: Optional[Dict] = None,
                   name: str = "manifest.json") -> None:
    payload = {"command": command, "config": config}
    if extra:
        payload.update(extra)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / name).write_text(
        json.dumps(payload, sort_keys=True, ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8")


def _file_config(args) -> Dict:
    return load_config_file(args.config) if args.config else {}


# ---------------------------------------------------------------------------
# Shared data loading
# ---------------------------------------------------------------------------

def load_sentence_entries(path) -> List[Tuple[str, str, str]]:
    """(sentence_id, text, pattern) triples from either dataset file format."""
    path = Path(path)
    first = ""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                first = line
                break
    if not first:
        return []
    obj = json.loads(first)
    if "instance_id" in obj:
        return blm.blm_sentences(blm.read_blm(path))
    records = corpus.read_sentences(path)
    return [(r.sentence_id, r.text, r.pattern.label) for r in records]


def _load_corpus_dir(data_dir):
    data_dir = Path(data_dir)
    sentences = corpus.read_sentences(data_dir / "sentences.jsonl")
    dataset = corpus.read_triples(data_dir / "triples.jsonl")
    return sentences, dataset


def _load_task_data(task: str, data_dir, store_path, order: str):
    """Resolved (train, dev, test) arrays for either task family."""
    emb = store_mod.read_store(store_path)
    if task == experiment.SENTENCE_TASK:
        sentences, dataset = _load_corpus_dir(data_dir)
        resolve = lambda insts: experiment.resolve_sentence_data(
            insts, sentences, emb, order=order)
        return (resolve(dataset.train), resolve(dataset.dev), resolve(dataset.test))
    split = blm.read_blm(Path(data_dir) / "blm_instances.jsonl")
    for name in ("train", "dev", "test"):
        for inst in getattr(split, name):
            if inst.task != task:
                raise ConfigError(f"data file holds task {inst.task!r}, "
                                  f"requested {task!r}")
    resolve = lambda insts: experiment.resolve_blm_data(insts, emb, order=order)
    return (resolve(split.train), resolve(split.dev), resolve(split.test))


# ---------------------------------------------------------------------------
# Subcommand implementations
# ---------------------------------------------------------------------------

def cmd_gen_corpus(args) -> int:
    defaults = {"seed_file": None, "language": "en", "target": 4004,
                "n_negs": 7, "seed": 0, "out": "corpus_out"}
    cfg = resolve_config(
        {"seed_file": args.seed_file, "language": args.language,
         "target": args.target, "n_negs": args.n_negs, "seed": args.seed,
         "out": args.out}, _file_config(args), defaults)
    if not cfg["seed_file"]:
        raise ConfigError("--seed-file is required")
    rng = np.random.default_rng(cfg["seed"])
    seeds = corpus.parse_seed_file(cfg["seed_file"], language=cfg["language"])
    sentences = corpus.generate_sentences(seeds)
    instances = corpus.build_instances(sentences, cfg["n_negs"], rng)
    dataset = corpus.sample_and_split(instances, cfg["target"], rng)
    corpus.write_corpus(cfg["out"], sentences, dataset,
                        {"command": "gen-corpus", "config": cfg})
    log.info("corpus written to %s: %s", cfg["out"], dataset.sizes())
    return 0


def cmd_gen_blm(args) -> int:
    defaults = {"task": blm.AGREEMENT_TASK, "lex_type": "I", "count": None,
                "seed_file": None, "language": "en", "train_target": 2000,
                "seed": 0, "out": "blm_out"}
    cfg = resolve_config(
        {"task": args.task, "lex_type": args.lex_type, "count": args.count,
         "seed_file": args.seed_file, "language": args.language,
         "train_target": args.train_target, "seed": args.seed, "out": args.out},
        _file_config(args), defaults)
    if not cfg["seed_file"]:
        raise ConfigError("--seed-file is required")
    if cfg["count"] is None:
        cfg["count"] = BLM_POOL_DEFAULTS.get((cfg["task"], cfg["lex_type"]), 2520)
    rng = np.random.default_rng(cfg["seed"])
    if cfg["task"] == blm.AGREEMENT_TASK:
        rows = corpus.parse_seed_file(cfg["seed_file"], language=cfg["language"])
    else:
        rows = blm.parse_alternation_file(cfg["seed_file"])
    instances = blm.generate_blm(cfg["task"], rows, cfg["lex_type"], cfg["count"], rng)
    split = blm.dataset_split(instances, rng, train_target=cfg["train_target"])
    blm.write_blm(cfg["out"], split, {"command": "gen-blm", "config": cfg})
    log.info("BLM dataset written to %s: %s", cfg["out"], split.sizes())
    return 0


def cmd_embed_import(args) -> int:
    defaults = {"sentences": None, "vectors": None, "synthetic": False,
                "sigma": 0.1, "code_dim": 64, "model": None, "seed": 0,
                "out": "store_out/embeddings.bin"}
    cfg = resolve_config(
        {"sentences": args.sentences, "vectors": args.vectors,
         "synthetic": args.synthetic or None, "sigma": args.sigma,
         "code_dim": args.code_dim, "model": args.model, "seed": args.seed,
         "out": args.out}, _file_config(args), defaults)
    if cfg["synthetic"]:
        if not cfg["sentences"]:
            raise ConfigError("--synthetic requires --sentences")
        entries = load_sentence_entries(cfg["sentences"])
        emb = synthetic.make_synthetic_store(
            [(sid, pattern) for sid, _, pattern in entries], cfg["seed"],
            synthetic.SyntheticConfig(sigma=cfg["sigma"], code_dim=cfg["code_dim"]),
            model_name=cfg["model"] or "synthetic-oracle")
    elif cfg["vectors"]:
        ids, rows = [], []
        for line in Path(cfg["vectors"]).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            ids.append(obj["sentence_id"])
            rows.append(np.asarray(obj["vector"], dtype=np.float32))
        emb = store_mod.EmbeddingStore(ids, np.stack(rows) if rows else
                                       np.zeros((0, store_mod.EMBED_DIM), np.float32),
                                       cfg["model"] or "imported")
    else:
        raise ConfigError("need --synthetic (with --sentences) or --vectors")
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    store_mod.write_store(emb, out)
    write_manifest(out.parent, "embed-import", cfg,
                   {"count": len(emb.sentence_ids)}, name="import_manifest.json")
    log.info("store written to %s (%d embeddings)", out, len(emb.sentence_ids))
    return 0


def cmd_embed_fetch(args) -> int:
    defaults = {"sentences": None, "model": "electra-base-discriminator",
                "endpoint": None, "batch_size": 32, "seed": 0,
                "out": "store_out/embeddings.bin"}
    cfg = resolve_config(
        {"sentences": args.sentences, "model": args.model,
         "endpoint": args.endpoint, "batch_size": args.batch_size,
         "seed": args.seed, "out": args.out}, _file_config(args), defaults)
    if not cfg["sentences"]:
        raise ConfigError("--sentences is required")
    endpoint = cfg["endpoint"] or os.environ.get("EMBED_ENDPOINT")
    if not endpoint:
        raise ConfigError("no endpoint: pass --endpoint or set EMBED_ENDPOINT")
    entries = load_sentence_entries(cfg["sentences"])
    ids = [sid for sid, _, _ in entries]
    texts = [text for _, text, _ in entries]
    vectors = np.zeros((0, store_mod.EMBED_DIM), dtype=np.float32)
    for start in range(0, len(texts), cfg["batch_size"]):
        batch = texts[start:start + cfg["batch_size"]]
        got = store_mod.fetch_remote(endpoint, batch, cfg["model"])
        vectors = np.concatenate([vectors, got]) if vectors.size else got
    emb = store_mod.EmbeddingStore(ids, vectors, cfg["model"])
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    store_mod.write_store(emb, out)
    write_manifest(out.parent, "embed-fetch", cfg, {"count": len(ids)},
                   name="fetch_manifest.json")
    log.info("fetched %d embeddings from %s", len(ids), endpoint)
    return 0


def cmd_train(args) -> int:
    defaults = {"task": experiment.SENTENCE_TASK, "lex_type": "I",
                "epochs": 300, "batch": 100, "lr": 0.001, "seed": 0,
                "preset": "default", "reshape_order": "rowmajor",
                "early_stop_dev_acc": None, "data": None, "store": None,
                "out": "run_out"}
    cfg = resolve_config(
        {"task": args.task, "lex_type": args.lex_type, "epochs": args.epochs,
         "batch": args.batch, "lr": args.lr, "seed": args.seed,
         "preset": args.preset, "reshape_order": args.reshape_order,
         "early_stop_dev_acc": args.early_stop_dev_acc, "data": args.data,
         "store": args.store, "out": args.out}, _file_config(args), defaults)
    if not cfg["data"] or not cfg["store"]:
        raise ConfigError("--data and --store are required")
    run_cfg = experiment.RunConfig(
        task=cfg["task"], lex_type=cfg["lex_type"], epochs=cfg["epochs"],
        batch=cfg["batch"], lr=cfg["lr"], seed=cfg["seed"], preset=cfg["preset"],
        reshape_order=cfg["reshape_order"],
        early_stop_dev_acc=cfg["early_stop_dev_acc"], data=cfg["data"],
        store=cfg["store"], out=cfg["out"])
    train_data, dev_data, _ = _load_task_data(cfg["task"], cfg["data"],
                                              cfg["store"], cfg["reshape_order"])
    result = experiment.train(run_cfg, train_data, dev_data)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    experiment.save_run(out / "final.ckpt", result)
    # Auxiliary best-dev snapshot: swap weights in, serialize, swap back.
    models.restore_model(result.model, result.best_weights)
    experiment.save_run(out / "best_dev.ckpt", result)
    models.restore_model(result.model, result.final_weights)
    lines = ["epoch,train_loss,dev_accuracy"]
    lines += [f"{e.epoch},{e.train_loss!r},{e.dev_accuracy!r}" for e in result.log]
    (out / "training_log.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    write_manifest(out, "train", cfg, {
        "epochs_run": len(result.log),
        "stopped_early": result.stopped_early,
        "best_dev_accuracy": result.best_dev_accuracy,
        "best_dev_epoch": result.best_epoch,
        "checkpoints": {"final": "final.ckpt", "best_dev": "best_dev.ckpt"}})
    log.info("trained %d epochs; best dev accuracy %.4f (epoch %d)",
             len(result.log), result.best_dev_accuracy, result.best_epoch)
    return 0


def _eval_checkpoints(checkpoints: Sequence[str], task: str, data_dir, store_path,
                      order: str, split: str, batch: int, workers: int):
    emb = store_mod.read_store(store_path)
    if task == experiment.SENTENCE_TASK:
        sentences, dataset = _load_corpus_dir(data_dir)
        instances = getattr(dataset, split)
        data = experiment.resolve_sentence_data(instances, sentences, emb,
                                                order=order)
        lex_test = "-"
    else:
        blm_split = blm.read_blm(Path(data_dir) / "blm_instances.jsonl")
        instances = getattr(blm_split, split)
        data = experiment.resolve_blm_data(instances, emb, order=order)
        lex_types = sorted({inst.lex_type for inst in instances})
        lex_test = "+".join(lex_types)
    results: Dict[int, experiment.EvalResult] = {}
    lex_train = None
    for path in checkpoints:
        model, run_cfg, seed = experiment.load_model(path)
        if run_cfg.get("task", task) != task:
            raise ConfigError(f"{path}: checkpoint task {run_cfg.get('task')!r} "
                              f"does not match --task {task!r}")
        if seed in results:
            raise ConfigError(f"duplicate run seed {seed} among checkpoints")
        ck_lex = run_cfg.get("lex_type", "-") if task != experiment.SENTENCE_TASK \
            else "-"
        if lex_train is None:
            lex_train = ck_lex
        elif lex_train != ck_lex:
            raise ConfigError("checkpoints disagree on training lex_type")
        results[seed] = experiment.evaluate(model, data, batch, workers)
    return experiment.aggregate_metrics(task, lex_train or "-", lex_test, results)


def cmd_eval(args) -> int:
    defaults = {"task": experiment.SENTENCE_TASK, "split": "test", "batch": 100,
                "workers": 1, "reshape_order": "rowmajor", "data": None,
                "store": None, "seed": 0, "out": "eval_out"}
    cfg = resolve_config(
        {"task": args.task, "split": args.split, "batch": args.batch,
         "workers": args.workers, "reshape_order": args.reshape_order,
         "data": args.data, "store": args.store, "seed": args.seed,
         "out": args.out}, _file_config(args), defaults)
    if not cfg["data"] or not cfg["store"] or not args.checkpoints:
        raise ConfigError("--checkpoints, --data, and --store are required")
    metrics = _eval_checkpoints(args.checkpoints, cfg["task"], cfg["data"],
                                cfg["store"], cfg["reshape_order"], cfg["split"],
                                cfg["batch"], cfg["workers"])
    experiment.write_report(cfg["out"], metrics)
    write_manifest(cfg["out"], "eval", cfg, {"checkpoints": list(args.checkpoints)})
    log.info("f1_mean=%.4f f1_std=%.4f over %d run(s)", metrics["f1_mean"],
             metrics["f1_std"], len(metrics["runs"]))
    return 0


def _sentence_model_from(path):
    model, run_cfg, _ = experiment.load_model(path)
    if isinstance(model, models.TwoLevelVAE):
        return model.sentence, run_cfg
    return model, run_cfg


def cmd_traverse(args) -> int:
    defaults = {"steps": 10, "batch": 100, "workers": 1,
                "reshape_order": "rowmajor", "data": None, "store": None,
                "seed": 0, "out": "traversal_out"}
    cfg = resolve_config(
        {"steps": args.steps, "batch": args.batch, "workers": args.workers,
         "reshape_order": args.reshape_order, "data": args.data,
         "store": args.store, "seed": args.seed, "out": args.out},
        _file_config(args), defaults)
    if not args.checkpoint or not cfg["data"] or not cfg["store"]:
        raise ConfigError("--checkpoint, --data, and --store are required")
    model, _ = _sentence_model_from(args.checkpoint)
    emb = store_mod.read_store(cfg["store"])
    sentences, dataset = _load_corpus_dir(cfg["data"])
    train_data = experiment.resolve_sentence_data(dataset.train, sentences, emb,
                                                  order=cfg["reshape_order"])
    test_data = experiment.resolve_sentence_data(dataset.test, sentences, emb,
                                                 order=cfg["reshape_order"])
    tr = experiment.latent_traversal(model, train_data.inputs, test_data,
                                     steps=cfg["steps"], batch=cfg["batch"],
                                     workers=cfg["workers"])
    experiment.write_traversal_files(cfg["out"], tr)
    write_manifest(cfg["out"], "traverse", cfg, {"checkpoint": args.checkpoint})
    log.info("traversal written to %s (%d matrices)", cfg["out"], len(tr.matrices))
    return 0


def cmd_project(args) -> int:
    defaults = {"reshape_order": "rowmajor", "batch": 100, "data": None,
                "store": None, "seed": 0, "out": "projection_out"}
    cfg = resolve_config(
        {"reshape_order": args.reshape_order, "batch": args.batch,
         "data": args.data, "store": args.store, "seed": args.seed,
         "out": args.out}, _file_config(args), defaults)
    if not args.checkpoint or not cfg["data"] or not cfg["store"]:
        raise ConfigError("--checkpoint, --data, and --store are required")
    model, _ = _sentence_model_from(args.checkpoint)
    emb = store_mod.read_store(cfg["store"])
    entries = load_sentence_entries(cfg["data"])
    experiment.preflight([sid for sid, _, _ in entries], emb)
    hw = model.config.input_hw
    grids = np.stack([experiment.to_grid(emb.get(sid), hw, cfg["reshape_order"])[None]
                      for sid, _, _ in entries])
    latents = experiment.encode_mu(model, grids, cfg["batch"])
    coords = experiment.project_latents_2d(latents)
    ids = [sid for sid, _, _ in entries]
    labels = [pattern for _, _, pattern in entries]
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "projection.csv").write_text(
        experiment.projection_to_csv(ids, labels, coords), encoding="utf-8")
    (out / "latents.csv").write_text(
        "\n".join(["id,label," + ",".join(f"z{i}" for i in range(latents.shape[1]))]
                  + [f"{sid},{label}," + ",".join(repr(float(v)) for v in z)
                     for sid, label, z in zip(ids, labels, latents)]) + "\n",
        encoding="utf-8")
    (out / "plots").mkdir(exist_ok=True)
    points = [(float(x), float(y), label) for (x, y), label in zip(coords, labels)]
    (out / "plots" / "projection.svg").write_text(
        svgplot.scatter(points, title="latent PCA projection"), encoding="utf-8")
    write_manifest(out, "project", cfg, {"checkpoint": args.checkpoint,
                                         "count": len(ids)})
    log.info("projected %d latents to %s", len(ids), out)
    return 0


def cmd_report(args) -> int:
    defaults = {"seed": 0, "out": "report_out"}
    cfg = resolve_config({"seed": args.seed, "out": args.out},
                         _file_config(args), defaults)
    if not args.metrics:
        raise ConfigError("--metrics is required (one or more metrics.json files)")
    grid = [json.loads(Path(p).read_text(encoding="utf-8")) for p in args.metrics]
    projection = None
    if args.projection:
        projection = experiment.projection_from_csv(
            Path(args.projection).read_text(encoding="utf-8"))
    experiment.write_report(cfg["out"], grid[0], grid=grid, projection=projection)
    write_manifest(cfg["out"], "report", cfg, {"metrics": list(args.metrics)})
    log.info("report written to %s", cfg["out"])
    return 0


def cmd_gradcheck(args) -> int:
    defaults = {"seed": 0, "instances": 10, "out": None}
    cfg = resolve_config({"seed": args.seed, "instances": args.instances,
                          "out": args.out}, _file_config(args), defaults)
    results = verify.run_battery(seed=cfg["seed"], instances=cfg["instances"])
    text = verify.format_results(results)
    print(text)
    if cfg["out"]:
        outdir = Path(cfg["out"])
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "gradcheck.txt").write_text(text + "\n", encoding="utf-8")
        write_manifest(outdir, "gradcheck", cfg)
    return 0 if verify.battery_passed(results) else 1


# ---------------------------------------------------------------------------
# Parser wiring
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    p.add_argument("--config", default=None,
                   help="TOML or JSON file with flag defaults")
    p.add_argument("--out", default=None, help="output directory or file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chunkprobe", formatter_class=_formatter,
        description="Probe chunk structure in sentence embeddings: dataset "
                    "generation, VAE training, and analysis.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("gen-corpus", formatter_class=_formatter,
                       help="generate the chunk-pattern sentence corpus and triples")
    p.add_argument("--seed-file", help="TSV of seed noun/verb/PP cells")
    p.add_argument("--language", help="language tag for sentence ids (default en)")
    p.add_argument("--target", type=int,
                   help="total instances to sample (default 4004)")
    p.add_argument("--n-negs", type=int, help="negatives per triple (default 7)")
    _add_common(p)
    p.set_defaults(fn=cmd_gen_corpus)

    p = sub.add_parser("gen-blm", formatter_class=_formatter,
                       help="generate Blackbird Language Matrix instances")
    p.add_argument("--task", choices=list(experiment.TASKS[1:]),
                   help="BLM task (default blm_agreement)")
    p.add_argument("--lex-type", choices=list(blm.LEX_TYPES),
                   help="lexical variation type (default I)")
    p.add_argument("--count", type=int,
                   help="pool size before splitting (default per task/type)")
    p.add_argument("--seed-file",
                   help="agreement seed TSV or alternation lexicon TSV")
    p.add_argument("--language", help="language tag (default en)")
    p.add_argument("--train-target", type=int,
                   help="instances sampled as train after the 90:10 split "
                        "(default 2000)")
    _add_common(p)
    p.set_defaults(fn=cmd_gen_blm)

    p = sub.add_parser("embed-import", formatter_class=_formatter,
                       help="build an embedding store from vectors or "
                            "synthetic prototypes")
    p.add_argument("--sentences", help="sentences.jsonl or blm_instances.jsonl")
    p.add_argument("--vectors", help="JSONL of {sentence_id, vector} rows")
    p.add_argument("--synthetic", action="store_true", default=None,
                   help="generate separable synthetic embeddings per pattern")
    p.add_argument("--sigma", type=float,
                   help="synthetic noise level (default 0.1)")
    p.add_argument("--code-dim", type=int,
                   help="synthetic code subspace dim (default 64)")
    p.add_argument("--model", help="model name recorded in the manifest")
    _add_common(p)
    p.set_defaults(fn=cmd_embed_import)

    p = sub.add_parser("embed-fetch", formatter_class=_formatter,
                       help="fetch embeddings over HTTP into a store")
    p.add_argument("--sentences", help="sentences.jsonl or blm_instances.jsonl")
    p.add_argument("--model", help="encoder model name "
                                   "(default electra-base-discriminator)")
    p.add_argument("--endpoint", help="embedding endpoint URL "
                                      "(default $EMBED_ENDPOINT)")
    p.add_argument("--batch-size", type=int, help="sentences per request "
                                                  "(default 32)")
    _add_common(p)
    p.set_defaults(fn=cmd_embed_fetch)

    p = sub.add_parser("train", formatter_class=_formatter,
                       help="train a sentence or two-level VAE")
    p.add_argument("--task", choices=list(experiment.TASKS),
                   help="training task (default sentence)")
    p.add_argument("--lex-type", choices=list(blm.LEX_TYPES),
                   help="lexical type label for BLM runs (default I)")
    p.add_argument("--data", help="dataset directory from gen-corpus/gen-blm")
    p.add_argument("--store", help="embedding store .bin path")
    p.add_argument("--epochs", type=int, help="training epochs (default 300)")
    p.add_argument("--batch", type=int, help="batch size (default 100)")
    p.add_argument("--lr", type=float, help="Adam learning rate (default 0.001)")
    p.add_argument("--preset", choices=["default", "paper-240"],
                   help="model preset (default: stride-1, 7200-unit flatten)")
    p.add_argument("--reshape-order", choices=["rowmajor", "colmajor"],
                   help="embedding-to-grid fill order (default rowmajor)")
    p.add_argument("--early-stop-dev-acc", type=float,
                   help="stop once dev accuracy reaches this value (default off)")
    _add_common(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", formatter_class=_formatter,
                       help="evaluate checkpoints; writes metrics.json")
    p.add_argument("--checkpoints", nargs="+", help="one checkpoint per run seed")
    p.add_argument("--task", choices=list(experiment.TASKS),
                   help="task the checkpoints were trained on (default sentence)")
    p.add_argument("--data", help="dataset directory")
    p.add_argument("--store", help="embedding store .bin path")
    p.add_argument("--split", choices=["train", "dev", "test"],
                   help="evaluation split (default test)")
    p.add_argument("--batch", type=int, help="evaluation batch size (default 100)")
    p.add_argument("--workers", type=int,
                   help="parallel evaluation workers (default 1)")
    p.add_argument("--reshape-order", choices=["rowmajor", "colmajor"],
                   help="embedding-to-grid fill order (default rowmajor)")
    _add_common(p)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("traverse", formatter_class=_formatter,
                       help="latent traversal analysis over the test split")
    p.add_argument("--checkpoint", help="trained checkpoint")
    p.add_argument("--data", help="corpus directory")
    p.add_argument("--store", help="embedding store .bin path")
    p.add_argument("--steps", type=int, help="values per latent unit (default 10)")
    p.add_argument("--batch", type=int, help="evaluation batch size (default 100)")
    p.add_argument("--workers", type=int,
                   help="parallel evaluation workers (default 1)")
    p.add_argument("--reshape-order", choices=["rowmajor", "colmajor"],
                   help="embedding-to-grid fill order (default rowmajor)")
    _add_common(p)
    p.set_defaults(fn=cmd_traverse)

    p = sub.add_parser("project", formatter_class=_formatter,
                       help="PCA projection of sentence latents")
    p.add_argument("--checkpoint", help="trained checkpoint")
    p.add_argument("--data", help="sentences.jsonl or blm_instances.jsonl")
    p.add_argument("--store", help="embedding store .bin path")
    p.add_argument("--batch", type=int, help="encoding batch size (default 100)")
    p.add_argument("--reshape-order", choices=["rowmajor", "colmajor"],
                   help="embedding-to-grid fill order (default rowmajor)")
    _add_common(p)
    p.set_defaults(fn=cmd_project)

    p = sub.add_parser("report", formatter_class=_formatter,
                       help="assemble metrics files into a report")
    p.add_argument("--metrics", nargs="+", help="metrics.json files to combine")
    p.add_argument("--projection", help="projection.csv to include")
    _add_common(p)
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("gradcheck", formatter_class=_formatter,
                       help="finite-difference gradient battery for all ops")
    p.add_argument("--instances", type=int,
                   help="random instances per op (default 10)")
    _add_common(p)
    p.set_defaults(fn=cmd_gradcheck)
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.fn(args)


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)
    try:
        return run(argv)
    except ChunkProbeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:                       # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
