"""Experiment battery: training, evaluation, analysis, and report emission.

Runs are deterministic functions of (config, dataset, embedding store): all
randomness flows from the run seed, split into independent streams for
initialization, latent sampling, and batch shuffling.  Reports are emitted
with canonical formatting so reruns are byte-identical.
"""

from __future__ import annotations

import json
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import svgplot
from .blm import (AGREEMENT_ANSWERS, AGREEMENT_TASK, ALT_TASKS, BLMInstance,
                  LEX_TYPES, SEQUENCE_ERROR_LABELS, ALTERNATION_LABELS)
from .corpus import PATTERNS, SentenceRecord, TripleInstance
from .errors import ConfigError, PreflightError, ShapeError
from .models import (ModelConfig, SentenceVAE, TwoLevelVAE, load_checkpoint,
                     predict_answer, restore_model, save_checkpoint,
                     sentence_batch_loss, two_level_loss)
from .nn import Tensor, adam_step, AdamState
from .store import EmbeddingStore

log = logging.getLogger(__name__)

SENTENCE_TASK = "sentence"
TASKS = (SENTENCE_TASK, AGREEMENT_TASK, ALT_TASKS[1], ALT_TASKS[2])
RUN_SEEDS = (0, 1, 2)
SCHEMA_VERSION = 1

SENTENCE_LABELS: Tuple[str, ...] = tuple(p.label for p in PATTERNS)
AGREEMENT_LABELS: Tuple[str, ...] = tuple(label for label, _ in AGREEMENT_ANSWERS)


@dataclass
class RunConfig:
    """Training/evaluation configuration; defaults follow the reference setup
    (300 epochs, batch size 100, learning rate 0.001, Adam)."""
    task: str = SENTENCE_TASK
    lex_type: str = "I"
    epochs: int = 300
    batch: int = 100
    lr: float = 0.001
    seed: int = 0
    preset: str = "default"
    reshape_order: str = "rowmajor"
    early_stop_dev_acc: Optional[float] = None
    data: str = ""
    store: str = ""
    out: str = ""

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}; expected one of {TASKS}")
        if self.task != SENTENCE_TASK and self.lex_type not in LEX_TYPES:
            raise ConfigError(f"unknown lex_type {self.lex_type!r}")
        if self.epochs <= 0 or self.batch <= 0 or self.lr <= 0:
            raise ConfigError("epochs, batch, and lr must be positive")


# ---------------------------------------------------------------------------
# Data resolution (ids -> arrays)
# ---------------------------------------------------------------------------

@dataclass
class SentenceData:
    """Resolved sentence-task arrays: inputs as grids, candidates flat."""
    inputs: np.ndarray          # [N,1,H,W]
    positives: np.ndarray       # [N,D]
    negatives: np.ndarray       # [N,K,D]
    true_labels: List[str]
    cand_labels: List[List[str]]   # label per candidate; index 0 = positive
    label_set: Tuple[str, ...] = SENTENCE_LABELS

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def candidates(self, i: int) -> np.ndarray:
        return np.concatenate([self.positives[i][None], self.negatives[i]])

    def correct_index(self, i: int) -> int:
        return 0


@dataclass
class BLMData:
    """Resolved BLM arrays: 7-row contexts plus the labeled answer sets."""
    contexts: np.ndarray        # [N,7,1,H,W]
    answers: np.ndarray         # [N,A,D]
    correct: List[int]
    answer_labels: List[List[str]]
    label_set: Tuple[str, ...]

    def __len__(self) -> int:
        return self.contexts.shape[0]

    def candidates(self, i: int) -> np.ndarray:
        return self.answers[i]

    def correct_index(self, i: int) -> int:
        return self.correct[i]


def to_grid(v: np.ndarray, hw: Tuple[int, int], order: str) -> np.ndarray:
    """Reshape a flat embedding to a 2-d grid (row- or column-major fill)."""
    h, w = hw
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.size != h * w:
        raise ShapeError(f"cannot reshape {v.size}-vector to {hw}")
    if order == "rowmajor":
        return v.reshape(h, w)
    if order == "colmajor":
        return v.reshape(w, h).T
    raise ConfigError(f"unknown reshape order {order!r}")


def preflight(ids: Sequence[str], store: EmbeddingStore) -> None:
    missing = store.missing(list(ids))
    if missing:
        shown = ", ".join(missing[:20])
        more = "" if len(missing) <= 20 else f" (+{len(missing) - 20} more)"
        raise PreflightError(
            f"{len(missing)} sentence ids have no embedding: {shown}{more}",
            missing=missing)


def resolve_sentence_data(instances: Sequence[TripleInstance],
                          sentences: Sequence[SentenceRecord],
                          store: EmbeddingStore,
                          hw: Tuple[int, int] = (32, 24),
                          order: str = "rowmajor") -> SentenceData:
    """Look up every triple's embeddings; fails up front on missing ids."""
    id2label = {rec.sentence_id: rec.pattern.label for rec in sentences}
    needed: List[str] = []
    for inst in instances:
        needed.append(inst.input)
        needed.append(inst.positive)
        needed.extend(inst.negatives)
    preflight(needed, store)
    n_negs = {len(inst.negatives) for inst in instances}
    if len(n_negs) > 1:
        raise ShapeError(f"instances disagree on negative count: {sorted(n_negs)}")
    inputs, positives, negatives, true_labels, cand_labels = [], [], [], [], []
    for inst in instances:
        inputs.append(to_grid(store.get(inst.input), hw, order)[None])
        positives.append(np.asarray(store.get(inst.positive), dtype=np.float64))
        negatives.append(np.stack([np.asarray(store.get(s), dtype=np.float64)
                                   for s in inst.negatives]))
        true_labels.append(inst.input_pattern)
        cand_labels.append([id2label[inst.positive]]
                           + [id2label[s] for s in inst.negatives])
    return SentenceData(np.stack(inputs), np.stack(positives), np.stack(negatives),
                        true_labels, cand_labels)


def blm_label_set(task: str) -> Tuple[str, ...]:
    if task == AGREEMENT_TASK:
        return AGREEMENT_LABELS
    if task in ALT_TASKS.values():
        return tuple(ALTERNATION_LABELS)
    raise ConfigError(f"not a BLM task: {task!r}")


def resolve_blm_data(instances: Sequence[BLMInstance], store: EmbeddingStore,
                     hw: Tuple[int, int] = (32, 24),
                     order: str = "rowmajor") -> BLMData:
    if not instances:
        raise ConfigError("no BLM instances to resolve")
    tasks = {inst.task for inst in instances}
    if len(tasks) > 1:
        raise ConfigError(f"mixed tasks in one dataset: {sorted(tasks)}")
    needed: List[str] = []
    for inst in instances:
        needed.extend(s.sentence_id for s in inst.context)
        needed.extend(a.sentence_id for a in inst.answers)
    preflight(needed, store)
    n_answers = {len(inst.answers) for inst in instances}
    if len(n_answers) > 1:
        raise ShapeError(f"instances disagree on answer count: {sorted(n_answers)}")
    contexts, answers, correct, labels = [], [], [], []
    for inst in instances:
        contexts.append(np.stack([to_grid(store.get(s.sentence_id), hw, order)[None]
                                  for s in inst.context]))
        answers.append(np.stack([np.asarray(store.get(a.sentence_id), dtype=np.float64)
                                 for a in inst.answers]))
        correct.append(inst.correct_index)
        labels.append([a.label for a in inst.answers])
    return BLMData(np.stack(contexts), np.stack(answers), correct, labels,
                   blm_label_set(instances[0].task))


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    dev_accuracy: float


@dataclass
class TrainResult:
    config: RunConfig
    model: object                     # holds the final-epoch weights
    log: List[EpochLog]
    final_weights: Dict[str, np.ndarray]
    best_weights: Dict[str, np.ndarray]
    best_epoch: int
    best_dev_accuracy: float
    stopped_early: bool = False


def make_model(config: RunConfig, rng: np.random.Generator):
    mc = ModelConfig(preset=config.preset)
    if config.task == SENTENCE_TASK:
        return SentenceVAE(mc, rng)
    return TwoLevelVAE(mc, rng)


def _snapshot(model) -> Dict[str, np.ndarray]:
    return {k: v.data.copy() for k, v in model.named_params().items()}


def _chunks(n: int, size: int) -> List[slice]:
    return [slice(s, min(s + size, n)) for s in range(0, n, size)]


def _predict_slice(model, data, sl: slice) -> List[int]:
    if isinstance(data, SentenceData):
        recon, _, _, _ = model.forward(Tensor(data.inputs[sl]), None)
        flat = recon.data.reshape(recon.shape[0], -1)
    else:
        answer, _ = model.forward(data.contexts[sl], None)
        flat = answer.data.reshape(answer.shape[0], -1)
    offset = sl.start
    return [predict_answer(flat[j], data.candidates(offset + j))
            for j in range(flat.shape[0])]


def predictions_for(model, data, batch: int = 100, workers: int = 1) -> List[int]:
    """Argmax-cosine candidate choice per instance (evaluation mode, mu path)."""
    slices = _chunks(len(data), batch)
    if workers > 1 and len(slices) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda sl: _predict_slice(model, data, sl), slices))
    else:
        parts = [_predict_slice(model, data, sl) for sl in slices]
    return [p for part in parts for p in part]


def accuracy(model, data, batch: int = 100, workers: int = 1) -> float:
    if len(data) == 0:
        raise ConfigError("empty evaluation set")
    preds = predictions_for(model, data, batch, workers)
    hits = sum(1 for i, p in enumerate(preds) if p == data.correct_index(i))
    return hits / len(preds)


def _batch_loss(model, data, idx: np.ndarray, rng: np.random.Generator) -> Tensor:
    if isinstance(data, SentenceData):
        return sentence_batch_loss(model, data.inputs[idx], data.positives[idx],
                                   data.negatives[idx], rng)
    correct = data.answers[idx, data_correct(data, idx)]
    wrong = np.stack([np.delete(data.answers[i], data.correct[i], axis=0)
                      for i in idx])
    return two_level_loss(model, data.contexts[idx], correct, wrong, rng)


def data_correct(data: BLMData, idx: np.ndarray) -> np.ndarray:
    return np.asarray([data.correct[i] for i in idx])


def train(config: RunConfig, train_data, dev_data) -> TrainResult:
    """Deterministic training loop; logs one entry per completed epoch.

    The final-epoch weights are the reported model; the best-dev weights are
    retained as an auxiliary snapshot only.
    """
    if len(train_data) == 0:
        raise ConfigError("empty training set")
    init_rng, sample_rng, shuffle_rng = (
        np.random.default_rng(s) for s in np.random.SeedSequence(config.seed).spawn(3))
    model = make_model(config, init_rng)
    params = model.params()
    state = AdamState(lr=config.lr)
    n = len(train_data)
    logs: List[EpochLog] = []
    best_weights, best_epoch, best_acc = _snapshot(model), 0, -1.0
    stopped = False
    for epoch in range(1, config.epochs + 1):
        perm = shuffle_rng.permutation(n)
        total = 0.0
        for sl in _chunks(n, config.batch):
            idx = perm[sl]
            for p in params:
                p.grad = None
            loss = _batch_loss(model, train_data, idx, sample_rng)
            loss.backward()
            adam_step(params, [p.grad for p in params], state)
            total += float(loss.data) * len(idx)
        dev_acc = accuracy(model, dev_data, config.batch)
        logs.append(EpochLog(epoch, total / n, dev_acc))
        log.info("epoch %d: train_loss=%.6f dev_acc=%.4f", epoch, total / n, dev_acc)
        if dev_acc > best_acc:
            best_acc, best_epoch, best_weights = dev_acc, epoch, _snapshot(model)
        if (config.early_stop_dev_acc is not None
                and dev_acc >= config.early_stop_dev_acc):
            stopped = True
            log.info("early stop at epoch %d (dev_acc=%.4f)", epoch, dev_acc)
            break
    return TrainResult(config, model, logs, _snapshot(model), best_weights,
                       best_epoch, best_acc, stopped)


def checkpoint_config(config: RunConfig, model) -> Dict:
    return {"run": asdict(config), "model": asdict(model.config)}


def save_run(path, result: TrainResult) -> None:
    save_checkpoint(path, result.model.named_params(),
                    checkpoint_config(result.config, result.model),
                    result.config.seed)


def model_config_from_dict(d: Dict) -> ModelConfig:
    d = dict(d)
    for key in ("kernel", "input_hw", "task_kernel"):
        if key in d:
            d[key] = tuple(d[key])
    return ModelConfig(**d)


def load_model(path):
    """Rebuild the model a checkpoint was saved from; returns (model, run dict, seed)."""
    weights, config, seed = load_checkpoint(path)
    mc = model_config_from_dict(config["model"])
    two_level = any(name.startswith("task_") for name in weights)
    rng = np.random.default_rng(0)
    model = TwoLevelVAE(mc, rng) if two_level else SentenceVAE(mc, rng)
    restore_model(model, weights)
    return model, config.get("run", {}), seed


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

@dataclass
class ConfusionMatrix:
    labels: Tuple[str, ...]
    counts: np.ndarray    # [L,L] int64; rows = true label, columns = predicted

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != (len(self.labels), len(self.labels)):
            raise ShapeError(f"confusion counts shape {self.counts.shape} does not "
                             f"match {len(self.labels)} labels")
        if np.any(self.counts < 0):
            raise ShapeError("confusion counts must be non-negative")

    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)


def make_confusion(labels: Sequence[str], true_pred: Sequence[Tuple[str, str]]
                   ) -> ConfusionMatrix:
    index = {label: i for i, label in enumerate(labels)}
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for true, pred in true_pred:
        if true not in index or pred not in index:
            raise ConfigError(f"unlabeled candidate: {true!r} -> {pred!r}")
        counts[index[true], index[pred]] += 1
    return ConfusionMatrix(tuple(labels), counts)


def positive_class_f1(n_correct: int, n_total: int) -> float:
    """Positive-class F1 in the single-choice protocol.

    Each instance yields exactly one chosen candidate, so a wrong choice is
    simultaneously a false positive (the chosen candidate) and a false
    negative (the missed correct one): FP == FN == n_total - n_correct.
    Precision therefore equals recall equals accuracy, and their harmonic
    mean is accuracy itself.  Computed in exact rational arithmetic and
    asserted, per the evaluation contract.
    """
    if n_total <= 0:
        raise ConfigError("empty test set")
    tp = n_correct
    fp = fn = n_total - n_correct
    precision = Fraction(tp, tp + fp)
    recall = Fraction(tp, tp + fn)
    f1 = Fraction(0) if precision + recall == 0 \
        else 2 * precision * recall / (precision + recall)
    accuracy_exact = Fraction(tp, n_total)
    if f1 != accuracy_exact:
        raise AssertionError(f"F1 {f1} != accuracy {accuracy_exact}")
    return float(f1)


@dataclass
class EvalResult:
    n: int
    n_correct: int
    f1: float
    predictions: List[int]
    confusion: ConfusionMatrix
    errors: Dict[str, int]     # chosen wrong label -> count


def evaluate(model, data, batch: int = 100, workers: int = 1) -> EvalResult:
    """Predict every test instance and score; F1 == accuracy is asserted."""
    if len(data) == 0:
        raise ConfigError("empty test set")
    preds = predictions_for(model, data, batch, workers)
    pairs: List[Tuple[str, str]] = []
    errors: Dict[str, int] = {}
    n_correct = 0
    for i, p in enumerate(preds):
        if isinstance(data, SentenceData):
            true_label = data.true_labels[i]
            pred_label = data.cand_labels[i][p]
        else:
            true_label = data.answer_labels[i][data.correct[i]]
            pred_label = data.answer_labels[i][p]
        pairs.append((true_label, pred_label))
        if p == data.correct_index(i):
            n_correct += 1
        else:
            errors[pred_label] = errors.get(pred_label, 0) + 1
    f1 = positive_class_f1(n_correct, len(preds))
    confusion = make_confusion(data.label_set, pairs)
    return EvalResult(len(preds), n_correct, f1, preds, confusion, errors)


@dataclass
class ErrorAnalysis:
    counts: Dict[str, int]
    groups: Dict[str, int]
    log_percentages: Dict[str, float]


def error_analysis(errors: Dict[str, int], task: str) -> ErrorAnalysis:
    """Histogram of chosen wrong labels; the agreement task also groups
    sequence errors (WN1/WN2) against the linguistically-motivated rest.
    Percentages are emitted on a log10 scale for plotting."""
    counts = dict(sorted(errors.items()))
    total = sum(counts.values())
    groups: Dict[str, int] = {}
    if task == AGREEMENT_TASK:
        seq = sum(counts.get(lbl, 0) for lbl in SEQUENCE_ERROR_LABELS)
        groups = {"sequence": seq, "linguistic": total - seq}
    log_pct = {label: float(np.log10(100.0 * c / total))
               for label, c in counts.items() if c > 0}
    return ErrorAnalysis(counts, groups, log_pct)


def aggregate_metrics(task: str, lex_train: str, lex_test: str,
                      results: Dict[int, EvalResult]) -> Dict:
    """Combine per-seed evaluations into the metrics.json structure."""
    if not results:
        raise ConfigError("no runs to aggregate")
    seeds = sorted(results)
    f1s = [results[s].f1 for s in seeds]
    labels = results[seeds[0]].confusion.labels
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    errors: Dict[str, int] = {}
    for s in seeds:
        r = results[s]
        if r.confusion.labels != labels:
            raise ConfigError("runs disagree on confusion labels")
        counts += r.confusion.counts
        for label, c in r.errors.items():
            errors[label] = errors.get(label, 0) + c
    return {
        "schema_version": SCHEMA_VERSION,
        "task": task,
        "lex_train": lex_train,
        "lex_test": lex_test,
        "runs": [{"seed": s, "f1": results[s].f1} for s in seeds],
        "f1_mean": float(np.mean(f1s)),
        "f1_std": float(np.std(f1s)),
        "confusion": {"labels": list(labels),
                      "counts": [[int(v) for v in row] for row in counts]},
        "errors": dict(sorted(errors.items())),
    }


# ---------------------------------------------------------------------------
# Latent traversal
# ---------------------------------------------------------------------------

def encode_mu(model: SentenceVAE, inputs: np.ndarray, batch: int = 100) -> np.ndarray:
    """Evaluation-mode latents (mu) for a [N,1,H,W] input block."""
    parts = [model.encode(Tensor(inputs[sl]))[0].data
             for sl in _chunks(inputs.shape[0], batch)]
    return np.concatenate(parts, axis=0)


def traversal_predictions(model: SentenceVAE, z: np.ndarray, data: SentenceData,
                          batch: int = 100, workers: int = 1) -> List[int]:
    """Predictions when decoding externally supplied latents (one per instance)."""
    def run(sl: slice) -> List[int]:
        recon = model.decode(Tensor(z[sl]))
        flat = recon.data.reshape(recon.shape[0], -1)
        return [predict_answer(flat[j], data.candidates(sl.start + j))
                for j in range(flat.shape[0])]

    slices = _chunks(len(data), batch)
    if workers > 1 and len(slices) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, slices))
    else:
        parts = [run(sl) for sl in slices]
    return [p for part in parts for p in part]


@dataclass
class TraversalResult:
    unit_ranges: List[Tuple[float, float]]    # training-set (min, max) per unit
    values: np.ndarray                        # [latent, steps]
    matrices: Dict[Tuple[int, int], ConfusionMatrix]
    baseline: ConfusionMatrix


def latent_traversal(model: SentenceVAE, train_inputs: np.ndarray,
                     data: SentenceData, steps: int = 10, batch: int = 100,
                     workers: int = 1) -> TraversalResult:
    """Override each latent unit with `steps` values spanning its range.

    Ranges come from the training-set mu only; interventions are applied to
    every test instance, decoded, and re-scored into one confusion matrix
    per (unit, step).
    """
    train_mu = encode_mu(model, train_inputs, batch)
    base_mu = encode_mu(model, data.inputs, batch)
    latent = train_mu.shape[1]

    def confusion_of(preds: List[int]) -> ConfusionMatrix:
        pairs = [(data.true_labels[i], data.cand_labels[i][p])
                 for i, p in enumerate(preds)]
        return make_confusion(data.label_set, pairs)

    baseline = confusion_of(traversal_predictions(model, base_mu, data, batch, workers))
    ranges, rows, matrices = [], [], {}
    for u in range(latent):
        lo, hi = float(train_mu[:, u].min()), float(train_mu[:, u].max())
        ranges.append((lo, hi))
        values = np.linspace(lo, hi, steps)
        rows.append(values)
        for k, v in enumerate(values):
            z = base_mu.copy()
            z[:, u] = v
            preds = traversal_predictions(model, z, data, batch, workers)
            matrices[(u, k)] = confusion_of(preds)
    return TraversalResult(ranges, np.stack(rows), matrices, baseline)


# ---------------------------------------------------------------------------
# 2-d projection
# ---------------------------------------------------------------------------

def project_latents_2d(latents: np.ndarray) -> np.ndarray:
    """Top-2 principal components of the centered latents.

    Component signs are fixed (largest-magnitude loading positive) so output
    is deterministic; rank-deficient input falls back to the available
    components with a warning, padding the rest with zeros.
    """
    x = np.asarray(latents, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 3:
        raise ShapeError(f"need >= 3 latent vectors, got shape {x.shape}")
    centered = x - x.mean(axis=0)
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    tol = (s[0] if s.size else 0.0) * max(x.shape) * np.finfo(np.float64).eps
    rank = int(np.sum(s > tol))
    k = min(2, rank)
    if k < 2:
        warnings.warn(f"latents have rank {rank}; projecting onto {k} component(s)")
    coords = np.zeros((x.shape[0], 2))
    for j in range(k):
        component = vt[j]
        if component[np.argmax(np.abs(component))] < 0:
            component = -component
        coords[:, j] = centered @ component
    return coords


# ---------------------------------------------------------------------------
# Report emission
# ---------------------------------------------------------------------------

def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def confusion_to_csv(cm: ConfusionMatrix) -> str:
    lines = ["true\\pred," + ",".join(cm.labels)]
    for label, row in zip(cm.labels, cm.counts):
        lines.append(label + "," + ",".join(str(int(v)) for v in row))
    return "\n".join(lines) + "\n"


def confusion_from_csv(text: str) -> ConfusionMatrix:
    lines = [ln for ln in text.splitlines() if ln]
    labels = tuple(lines[0].split(",")[1:])
    counts = []
    for ln in lines[1:]:
        cells = ln.split(",")
        counts.append([int(v) for v in cells[1:]])
    return ConfusionMatrix(labels, np.asarray(counts, dtype=np.int64))


def projection_to_csv(ids: Sequence[str], labels: Sequence[str],
                      coords: np.ndarray) -> str:
    lines = ["id,label,x,y"]
    for sid, label, (x, y) in zip(ids, labels, coords):
        lines.append(f"{sid},{label},{float(x)!r},{float(y)!r}")
    return "\n".join(lines) + "\n"


def projection_from_csv(text: str):
    lines = [ln for ln in text.splitlines() if ln][1:]
    ids, labels, coords = [], [], []
    for ln in lines:
        sid, label, x, y = ln.split(",")
        ids.append(sid)
        labels.append(label)
        coords.append((float(x), float(y)))
    return ids, labels, np.asarray(coords, dtype=np.float64)


def write_traversal_files(outdir, tr: TraversalResult) -> List[Path]:
    """traversal/index.csv plus one confusion CSV per (unit, step)."""
    outdir = Path(outdir)
    tdir = outdir / "traversal"
    tdir.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []
    index_lines = ["unit,step,value,low,high"]
    for u in range(tr.values.shape[0]):
        lo, hi = tr.unit_ranges[u]
        for k in range(tr.values.shape[1]):
            index_lines.append(f"{u},{k},{float(tr.values[u, k])!r},{lo!r},{hi!r}")
    (tdir / "index.csv").write_text("\n".join(index_lines) + "\n", encoding="utf-8")
    written.append(tdir / "index.csv")
    (tdir / "baseline.csv").write_text(confusion_to_csv(tr.baseline),
                                       encoding="utf-8")
    written.append(tdir / "baseline.csv")
    for (u, k), matrix in sorted(tr.matrices.items()):
        path = tdir / f"unit{u}_step{k:02d}.csv"
        path.write_text(confusion_to_csv(matrix), encoding="utf-8")
        written.append(path)
    return written


def _f1_cell(metrics: Dict) -> str:
    return f"{metrics['f1_mean']:.4f} ({metrics['f1_std']:.4f})"


def summary_markdown(grid: Sequence[Dict], log_entries: Optional[List[EpochLog]] = None
                     ) -> str:
    """Markdown report with a train-on/test-on F1 table per task."""
    out = ["# Evaluation summary", ""]
    by_task: Dict[str, List[Dict]] = {}
    for m in grid:
        by_task.setdefault(m["task"], []).append(m)
    for task in sorted(by_task):
        entries = by_task[task]
        out.append(f"## Task: {task}")
        out.append("")
        train_types = sorted({m["lex_train"] for m in entries})
        test_types = sorted({m["lex_test"] for m in entries})
        cell = {(m["lex_train"], m["lex_test"]): _f1_cell(m) for m in entries}
        out.append("| train \\ test | " + " | ".join(test_types) + " |")
        out.append("|" + "---|" * (len(test_types) + 1))
        for tr in train_types:
            row = [cell.get((tr, te), "-") for te in test_types]
            out.append(f"| {tr} | " + " | ".join(row) + " |")
        out.append("")
        for m in entries:
            runs = ", ".join(f"seed {r['seed']}: {r['f1']:.4f}" for r in m["runs"])
            out.append(f"- train {m['lex_train']} / test {m['lex_test']}: {runs}")
        out.append("")
    if log_entries:
        final = log_entries[-1]
        best = max(log_entries, key=lambda e: (e.dev_accuracy, -e.epoch))
        out.append("## Training")
        out.append("")
        out.append(f"- epochs run: {final.epoch}")
        out.append(f"- final train loss: {final.train_loss:.6f}")
        out.append(f"- best dev accuracy: {best.dev_accuracy:.4f} "
                   f"(epoch {best.epoch}; auxiliary checkpoint only)")
        out.append("")
    return "\n".join(out)


def write_report(outdir, metrics: Dict, *, grid: Optional[Sequence[Dict]] = None,
                 traversal: Optional[TraversalResult] = None,
                 projection=None,
                 log_entries: Optional[List[EpochLog]] = None) -> List[Path]:
    """Emit metrics.json, CSVs, SVG plots, and summary.md under outdir.

    Every file is a deterministic function of the inputs; reruns are
    byte-identical.  `projection` is an (ids, labels, coords) triple.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "plots").mkdir(exist_ok=True)
    written: List[Path] = []

    def emit(rel: str, text: str) -> None:
        path = outdir / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        written.append(path)

    emit("metrics.json", canonical_json(metrics))
    task = metrics["task"]
    cm = ConfusionMatrix(tuple(metrics["confusion"]["labels"]),
                         np.asarray(metrics["confusion"]["counts"]))
    emit(f"confusion_{task}.csv", confusion_to_csv(cm))
    emit(f"plots/confusion_{task}.svg",
         svgplot.heatmap(cm.labels, cm.labels, cm.counts.tolist(),
                         title=f"confusion: {task}"))
    errors = metrics.get("errors", {})
    if errors:
        analysis = error_analysis(dict(errors), task)
        labels = list(analysis.log_percentages)
        values = [analysis.log_percentages[k] for k in labels]
        emit(f"plots/errors_{task}.svg",
             svgplot.bars(labels, values, title=f"log10 error % : {task}"))
    if traversal is not None:
        written.extend(write_traversal_files(outdir, traversal))
    if projection is not None:
        ids, labels, coords = projection
        emit("projection.csv", projection_to_csv(ids, labels, coords))
        points = [(float(x), float(y), label)
                  for (x, y), label in zip(coords, labels)]
        emit("plots/projection.svg",
             svgplot.scatter(points, title="latent PCA projection"))
    emit("summary.md", summary_markdown(list(grid) if grid else [metrics],
                                        log_entries))
    return written
