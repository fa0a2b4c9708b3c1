"""Chunk-pattern sentence corpus: seed parsing, generation, triples, splits.

Sentences are built from seed rows of eight chunk cells (subject, two optional
prepositional phrases, verb, each in singular and plural form).  A chunk
pattern selects which chunks appear and with which grammatical number; the
verb's number always matches the subject's.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import GenerationError, SeedFileError

log = logging.getLogger(__name__)

SEED_HEADER = ["Subj_sg", "Subj_pl", "P1_sg", "P1_pl", "P2_sg", "P2_pl", "V_sg", "V_pl"]
NUMBERS = ("s", "p")


@dataclass(frozen=True)
class ChunkPattern:
    """Ordered chunk kinds with grammatical numbers, e.g. "np-s pp1-s vp-s"."""

    chunks: Tuple[Tuple[str, str], ...]

    @property
    def label(self) -> str:
        return " ".join(f"{kind}-{num}" for kind, num in self.chunks)

    @property
    def np_number(self) -> str:
        return self.chunks[0][1]

    def has(self, kind: str) -> bool:
        return any(k == kind for k, _ in self.chunks)

    def number_of(self, kind: str) -> Optional[str]:
        for k, num in self.chunks:
            if k == kind:
                return num
        return None

    def __str__(self) -> str:
        return self.label


def make_pattern(np_num: str, pp1_num: Optional[str] = None,
                 pp2_num: Optional[str] = None) -> ChunkPattern:
    if pp2_num is not None and pp1_num is None:
        raise GenerationError("pp2 requires pp1")
    chunks = [("np", np_num)]
    if pp1_num is not None:
        chunks.append(("pp1", pp1_num))
    if pp2_num is not None:
        chunks.append(("pp2", pp2_num))
    chunks.append(("vp", np_num))
    return ChunkPattern(tuple(chunks))


def enumerate_patterns() -> List[ChunkPattern]:
    """The 14 grammatical patterns in canonical order: by arity, then numbers."""
    patterns = [make_pattern(n) for n in NUMBERS]
    patterns += [make_pattern(n, p1) for n in NUMBERS for p1 in NUMBERS]
    patterns += [make_pattern(n, p1, p2)
                 for n in NUMBERS for p1 in NUMBERS for p2 in NUMBERS]
    return patterns


PATTERNS: List[ChunkPattern] = enumerate_patterns()
PATTERN_BY_LABEL: Dict[str, ChunkPattern] = {p.label: p for p in PATTERNS}


@dataclass(frozen=True)
class SeedRow:
    row_id: int
    language: str
    subj_sg: str
    subj_pl: str
    p1_sg: str
    p1_pl: str
    p2_sg: str
    p2_pl: str
    v_sg: str
    v_pl: str

    def cell(self, kind: str, number: str) -> str:
        name = {"np": "subj", "pp1": "p1", "pp2": "p2", "vp": "v"}[kind]
        return getattr(self, f"{name}_{'sg' if number == 's' else 'pl'}")


@dataclass
class SentenceRecord:
    sentence_id: str
    text: str
    pattern: ChunkPattern
    seed_row_id: int
    split: str = "unassigned"


@dataclass
class TripleInstance:
    input: str
    positive: str
    negatives: List[str]
    input_pattern: str
    split: str = "unassigned"


def parse_seed_file(path, language: str = "en") -> List[SeedRow]:
    """Read a TSV with header Subj_sg..V_pl; every cell must be non-empty."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        return []
    header = lines[0].rstrip("\n").split("\t")
    if header != SEED_HEADER:
        raise SeedFileError(f"{path}: expected header {SEED_HEADER}, got {header}", line=1)
    rows: List[SeedRow] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split("\t")
        if len(cells) != len(SEED_HEADER):
            raise SeedFileError(f"{path}: expected {len(SEED_HEADER)} cells, "
                                f"got {len(cells)}", line=lineno)
        cells = [c.strip() for c in cells]
        for name, value in zip(SEED_HEADER, cells):
            if not value:
                raise SeedFileError(f"{path}: empty cell {name}", line=lineno)
        row = SeedRow(len(rows), language, *cells)
        for slot in ("subj", "p1", "p2", "v"):
            if getattr(row, f"{slot}_sg") == getattr(row, f"{slot}_pl"):
                raise SeedFileError(f"{path}: {slot} singular and plural cells "
                                    f"are identical", line=lineno)
        rows.append(row)
    return rows


def sentence_id_for(language: str, seed_row_id: int, pattern: ChunkPattern) -> str:
    key = f"{language}|{seed_row_id}|{pattern.label}".encode("utf-8")
    return hashlib.sha1(key).hexdigest()[:16]


def realize(seed: SeedRow, pattern: ChunkPattern) -> str:
    return " ".join(seed.cell(kind, num) for kind, num in pattern.chunks) + "."


def generate_sentences(seeds: Sequence[SeedRow]) -> Dict[str, List[SentenceRecord]]:
    """One sentence per (seed row, pattern), grouped by pattern label."""
    out: Dict[str, List[SentenceRecord]] = {p.label: [] for p in PATTERNS}
    for pattern in PATTERNS:
        for seed in seeds:
            out[pattern.label].append(SentenceRecord(
                sentence_id=sentence_id_for(seed.language, seed.row_id, pattern),
                text=realize(seed, pattern),
                pattern=pattern,
                seed_row_id=seed.row_id,
            ))
    return out


def segment_text(text: str, seed: SeedRow) -> Optional[ChunkPattern]:
    """Recover the pattern of a generated sentence by re-segmenting its text.

    Tries every grammatical pattern and checks whether the seed's chunks for
    it reproduce the text exactly; sg/pl prefix ambiguities are resolved by
    the full-sentence match.
    """
    for pattern in PATTERNS:
        if realize(seed, pattern) == text:
            return pattern
    return None


def build_instances(sentences: Dict[str, List[SentenceRecord]], n_negs: int,
                    rng: np.random.Generator) -> List[TripleInstance]:
    """All ordered same-pattern pairs, each with n_negs pattern-distinct negatives."""
    populated = [p for p in PATTERNS if sentences.get(p.label)]
    instances: List[TripleInstance] = []
    for pattern in PATTERNS:
        group = sentences.get(pattern.label, [])
        if len(group) < 2:
            log.warning("pattern %s has %d sentence(s); skipped", pattern.label, len(group))
            continue
        other = [p for p in populated if p.label != pattern.label]
        if len(other) < n_negs:
            raise GenerationError(f"need {n_negs} distinct negative patterns, "
                                  f"only {len(other)} available")
        for s_in in group:
            for s_pos in group:
                if s_pos.sentence_id == s_in.sentence_id:
                    continue
                neg_idx = rng.choice(len(other), size=n_negs, replace=False)
                negatives = []
                for k in neg_idx:
                    pool = sentences[other[int(k)].label]
                    negatives.append(pool[int(rng.integers(len(pool)))].sentence_id)
                instances.append(TripleInstance(
                    input=s_in.sentence_id,
                    positive=s_pos.sentence_id,
                    negatives=negatives,
                    input_pattern=pattern.label,
                ))
    return instances


@dataclass
class SplitDataset:
    train: List[TripleInstance] = field(default_factory=list)
    dev: List[TripleInstance] = field(default_factory=list)
    test: List[TripleInstance] = field(default_factory=list)

    def sizes(self) -> Dict[str, int]:
        return {"train": len(self.train), "dev": len(self.dev), "test": len(self.test)}


def sample_and_split(instances: Sequence[TripleInstance], target: int,
                     rng: np.random.Generator) -> SplitDataset:
    """Sample uniformly over input patterns, then split 80:20 and 80:20.

    The per-pattern quota is floor(target/14) with the remainder given to the
    first patterns in canonical order; both splits use floor arithmetic
    within each pattern, so the result is deterministic for a given seed.
    """
    if target < 0:
        raise GenerationError("target must be non-negative")
    by_pattern: Dict[str, List[TripleInstance]] = {p.label: [] for p in PATTERNS}
    for inst in instances:
        by_pattern.setdefault(inst.input_pattern, []).append(inst)
    base, extra = divmod(target, len(PATTERNS))
    ds = SplitDataset()
    for i, pattern in enumerate(PATTERNS):
        quota = base + (1 if i < extra else 0)
        pool = by_pattern.get(pattern.label, [])
        if quota > len(pool):
            log.warning("pattern %s: requested %d instances, only %d available",
                        pattern.label, quota, len(pool))
            quota = len(pool)
        order = rng.permutation(len(pool))[:quota]
        sampled = [pool[int(k)] for k in order]
        n_test = int(0.2 * len(sampled))
        rest = len(sampled) - n_test
        n_dev = int(0.2 * rest)
        for j, inst in enumerate(sampled):
            split = "test" if j < n_test else ("dev" if j < n_test + n_dev else "train")
            getattr(ds, split).append(replace(inst, split=split))
    return ds


# ---------------------------------------------------------------------------
# File emission
# ---------------------------------------------------------------------------

def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False)


def write_corpus(outdir, sentences: Dict[str, List[SentenceRecord]],
                 dataset: SplitDataset, manifest_extra: Dict) -> None:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "sentences.jsonl", "w", encoding="utf-8") as fh:
        for pattern in PATTERNS:
            for rec in sentences.get(pattern.label, []):
                fh.write(_dump({"sentence_id": rec.sentence_id, "text": rec.text,
                                "pattern": rec.pattern.label, "split": rec.split}) + "\n")
    with open(outdir / "triples.jsonl", "w", encoding="utf-8") as fh:
        for split_name in ("train", "dev", "test"):
            for inst in getattr(dataset, split_name):
                fh.write(_dump({"input": inst.input, "positive": inst.positive,
                                "negatives": inst.negatives,
                                "input_pattern": inst.input_pattern,
                                "split": inst.split}) + "\n")
    counts = {p.label: 0 for p in PATTERNS}
    for split_name in ("train", "dev", "test"):
        for inst in getattr(dataset, split_name):
            counts[inst.input_pattern] += 1
    manifest = dict(manifest_extra)
    manifest.update({"split_sizes": dataset.sizes(), "instances_per_pattern": counts,
                     "n_sentences": sum(len(v) for v in sentences.values())})
    (outdir / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8")


def read_sentences(path) -> List[SentenceRecord]:
    records = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        records.append(SentenceRecord(
            sentence_id=obj["sentence_id"], text=obj["text"],
            pattern=PATTERN_BY_LABEL[obj["pattern"]],
            seed_row_id=-1, split=obj.get("split", "unassigned")))
    return records


def read_triples(path) -> SplitDataset:
    ds = SplitDataset()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        inst = TripleInstance(input=obj["input"], positive=obj["positive"],
                              negatives=list(obj["negatives"]),
                              input_pattern=obj["input_pattern"],
                              split=obj.get("split", "unassigned"))
        getattr(ds, inst.split if inst.split in ("train", "dev", "test") else "train"
                ).append(inst)
    return ds
