"""BLM instance generation: agreement and verb-alternation matrices.

An instance is a 7-sentence context following a fixed structural template
plus a labeled answer set with exactly one correct continuation.  Lexical
variation types: I reuses one seed assignment everywhere, II changes exactly
one lexical slot between consecutive rows, III resamples every row.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .corpus import SeedRow
from .errors import GenerationError, SeedFileError

log = logging.getLogger(__name__)

AGREEMENT_TASK = "blm_agreement"
ALT_TASKS = {1: "blm_alt_g1", 2: "blm_alt_g2"}
LEX_TYPES = ("I", "II", "III")

# Context template: (np number, pp1 number, pp2 number or None); the verb
# always agrees with the subject.
AGREEMENT_CONTEXT: List[Tuple[str, str, Optional[str]]] = [
    ("s", "s", None),
    ("p", "s", None),
    ("s", "p", None),
    ("p", "p", None),
    ("s", "s", "s"),
    ("p", "s", "s"),
    ("s", "p", "s"),
]

# Answer schema: label -> (np, pp1, pp2, vp) numbers; None -> chunk absent,
# "coord" -> the pp2 noun coordinated onto pp1 instead of a pp2.
AGREEMENT_ANSWERS: List[Tuple[str, Tuple[str, str, Optional[str], str]]] = [
    ("correct", ("p", "p", "s", "p")),
    ("Coord", ("s", "s", "coord", "s")),
    ("WNA", ("s", "s", None, "s")),
    ("AE_V", ("p", "p", "p", "s")),
    ("AE_N1", ("p", "s", "p", "s")),
    ("AE_N2", ("p", "p", "s", "s")),
    ("WN1", ("p", "s", "s", "p")),
    ("WN2", ("p", "p", "p", "p")),
]
AGREEMENT_SLOTS = ("subj", "p1", "p2", "v")
SEQUENCE_ERROR_LABELS = ("WN1", "WN2")

ALTERNATION_LABELS = ["Correct", "AgentAct", "Alt1", "Alt2", "NoEmb",
                      "LexPrep", "SSM1", "SSM2", "AASSM"]
ALTERNATION_SLOTS = ("agent", "verb", "theme", "loc")

COORDINATOR = {"en": "and", "fr": "et"}


@dataclass(frozen=True)
class AlternationRow:
    row_id: int
    agent: str
    agent_num: str
    v_act: str
    v_pass_sg: str
    v_pass_pl: str
    theme: str
    theme_num: str
    theme_prep: str
    loc: str
    loc_num: str
    loc_prep: str
    wrong_prep: str
    spurious_pp: str


ALT_HEADER = ["Agent", "Agent_num", "V_act", "V_pass_sg", "V_pass_pl",
              "Theme", "Theme_num", "Theme_prep", "Loc", "Loc_num",
              "Loc_prep", "Wrong_prep", "Spurious_pp"]


def parse_alternation_file(path) -> List[AlternationRow]:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        return []
    header = lines[0].split("\t")
    if header != ALT_HEADER:
        raise SeedFileError(f"{path}: expected header {ALT_HEADER}, got {header}", line=1)
    rows: List[AlternationRow] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = [c.strip() for c in line.split("\t")]
        if len(cells) != len(ALT_HEADER):
            raise SeedFileError(f"{path}: expected {len(ALT_HEADER)} cells, "
                                f"got {len(cells)}", line=lineno)
        if any(not c for c in cells):
            raise SeedFileError(f"{path}: empty cell", line=lineno)
        row = AlternationRow(len(rows), *cells)
        if row.agent_num not in ("sg", "pl") or row.theme_num not in ("sg", "pl") \
                or row.loc_num not in ("sg", "pl"):
            raise SeedFileError(f"{path}: number cells must be sg or pl", line=lineno)
        if len({row.theme_prep, row.loc_prep, row.wrong_prep}) != 3:
            raise SeedFileError(f"{path}: theme/loc/wrong prepositions must be "
                                f"pairwise distinct", line=lineno)
        rows.append(row)
    return rows


@dataclass
class BLMSentence:
    sentence_id: str
    text: str
    pattern: str


@dataclass
class BLMAnswer:
    sentence_id: str
    text: str
    label: str
    pattern: str


@dataclass
class BLMInstance:
    instance_id: str
    task: str
    lex_type: str
    context: List[BLMSentence]
    answers: List[BLMAnswer]
    correct_index: int
    split: str = "unassigned"

    def __post_init__(self):
        if len(self.context) != 7:
            raise GenerationError(f"context must have 7 rows, got {len(self.context)}")
        if sum(1 for a in self.answers if a.label.lower() == "correct") != 1:
            raise GenerationError("answer set must contain exactly one correct label")
        if len({a.label for a in self.answers}) != len(self.answers):
            raise GenerationError("answer labels must be distinct")


def text_id(text: str) -> str:
    return "t" + hashlib.sha1(text.encode("utf-8")).hexdigest()[:16]


def _cap(np_text: str) -> str:
    return np_text[:1].upper() + np_text[1:]


# ---------------------------------------------------------------------------
# Lexical-variation schedules
# ---------------------------------------------------------------------------

def make_assignments(rows: Sequence, slots: Tuple[str, ...], lex_type: str,
                     n_rows: int, rng: np.random.Generator) -> List[Dict[str, object]]:
    """Per-row slot -> seed-row assignments implementing types I/II/III.

    Type II walks the slot list round-robin, swapping exactly one slot's seed
    row between consecutive assignments (Hamming distance 1).
    """
    if lex_type not in LEX_TYPES:
        raise GenerationError(f"unknown lexical variation type: {lex_type}")
    if not rows:
        raise GenerationError("no seed rows available")
    if lex_type == "II" and len(rows) < 2:
        raise GenerationError("type II variation needs at least 2 seed rows")
    assignments: List[Dict[str, object]] = []
    if lex_type == "I":
        row = rows[int(rng.integers(len(rows)))]
        assignments = [{s: row for s in slots} for _ in range(n_rows)]
    elif lex_type == "II":
        current = {s: rows[int(rng.integers(len(rows)))] for s in slots}
        assignments.append(dict(current))
        for i in range(1, n_rows):
            slot = slots[(i - 1) % len(slots)]
            others = [r for r in rows if r is not current[slot]]
            current[slot] = others[int(rng.integers(len(others)))]
            assignments.append(dict(current))
    else:
        for _ in range(n_rows):
            row = rows[int(rng.integers(len(rows)))]
            assignments.append({s: row for s in slots})
    return assignments


def assignment_hamming(a: Dict[str, object], b: Dict[str, object],
                       slots: Tuple[str, ...]) -> int:
    return sum(1 for s in slots if a[s] is not b[s])


# ---------------------------------------------------------------------------
# Agreement task
# ---------------------------------------------------------------------------

def _agreement_cell(assign: Dict[str, SeedRow], slot: str, number: str) -> str:
    return assign[slot].cell({"subj": "np", "p1": "pp1", "p2": "pp2", "v": "vp"}[slot],
                             number)


def realize_agreement(assign: Dict[str, SeedRow], np_num: str, pp1_num: str,
                      pp2_num: Optional[str], vp_num: str) -> Tuple[str, str]:
    """Surface text plus a pattern string (which may be ungrammatical)."""
    parts = [_agreement_cell(assign, "subj", np_num),
             _agreement_cell(assign, "p1", pp1_num)]
    tags = [f"np-{np_num}", f"pp1-{pp1_num}"]
    if pp2_num == "coord":
        p2_cell = _agreement_cell(assign, "p2", "s")
        tokens = p2_cell.split(" ")
        if len(tokens) < 2:
            raise GenerationError(f"P2_sg cell {p2_cell!r} too short to coordinate")
        language = assign["p2"].language
        parts.append(COORDINATOR.get(language, "and") + " " + " ".join(tokens[1:]))
        tags.append("coord")
    elif pp2_num is not None:
        parts.append(_agreement_cell(assign, "p2", pp2_num))
        tags.append(f"pp2-{pp2_num}")
    parts.append(_agreement_cell(assign, "v", vp_num))
    tags.append(f"vp-{vp_num}")
    return " ".join(parts) + ".", " ".join(tags)


def gen_agreement_instance(seeds: Sequence[SeedRow], lex_type: str,
                           rng: np.random.Generator,
                           index: int = 0) -> BLMInstance:
    if not seeds:
        raise GenerationError("agreement generation needs seed rows")
    assigns = make_assignments(seeds, AGREEMENT_SLOTS, lex_type, 8, rng)
    context = []
    for assign, (np_num, pp1_num, pp2_num) in zip(assigns[:7], AGREEMENT_CONTEXT):
        text, tag = realize_agreement(assign, np_num, pp1_num, pp2_num, np_num)
        context.append(BLMSentence(text_id(text), text, tag))
    answer_assign = assigns[7]
    answers = []
    for label, (np_num, pp1_num, pp2_num, vp_num) in AGREEMENT_ANSWERS:
        text, tag = realize_agreement(answer_assign, np_num, pp1_num, pp2_num, vp_num)
        answers.append(BLMAnswer(text_id(text), text, label, tag))
    order = [int(k) for k in rng.permutation(len(answers))]
    answers = [answers[k] for k in order]
    correct_index = next(i for i, a in enumerate(answers) if a.label == "correct")
    iid = hashlib.sha1(f"{AGREEMENT_TASK}|{lex_type}|{index}|"
                       f"{context[0].text}".encode("utf-8")).hexdigest()[:16]
    return BLMInstance(iid, AGREEMENT_TASK, lex_type, context, answers, correct_index)


def is_grammatical_agreement(pattern_tag: str) -> bool:
    """A tag is grammatical iff np and vp numbers match and no coordination glitch."""
    tags = pattern_tag.split(" ")
    np_num = tags[0].split("-")[1]
    vp_num = tags[-1].split("-")[1]
    return np_num == vp_num and "coord" not in tags


# ---------------------------------------------------------------------------
# Verb-alternation task
# ---------------------------------------------------------------------------

def _vpass(row: AlternationRow, number: str) -> str:
    return row.v_pass_sg if number == "sg" else row.v_pass_pl


def _alt_parts(assign: Dict[str, AlternationRow]):
    agent_row, verb_row = assign["agent"], assign["verb"]
    theme_row, loc_row = assign["theme"], assign["loc"]
    return agent_row, verb_row, theme_row, loc_row


def realize_alternation(assign: Dict[str, AlternationRow], spec: str) -> Tuple[str, str]:
    """Render one of the context/answer structure specs to text + pattern tag.

    Specs name the subject role, the verb voice, and the trailing arguments;
    e.g. "agent act theme loc_pp" is the Agent-Verb-Theme-PP(Loc) structure.
    """
    agent_row, verb_row, theme_row, loc_row = _alt_parts(assign)
    np_text = {"agent": agent_row.agent, "theme": theme_row.theme, "loc": loc_row.loc}
    np_num = {"agent": agent_row.agent_num, "theme": theme_row.theme_num,
              "loc": loc_row.loc_num}
    pp_text = {"theme_pp": f"{theme_row.theme_prep} {theme_row.theme}",
               "loc_pp": f"{loc_row.loc_prep} {loc_row.loc}",
               "agent_pp": f"by {agent_row.agent}",
               "wrong_theme_pp": f"{loc_row.wrong_prep} {theme_row.theme}",
               "wrong_loc_pp": f"{loc_row.wrong_prep} {loc_row.loc}",
               "agent_as_loc_pp": f"{loc_row.loc_prep} {agent_row.agent}",
               "agent_as_theme_pp": f"{theme_row.theme_prep} {agent_row.agent}",
               "spurious": loc_row.spurious_pp}
    words = spec.split(" ")
    subject = words[0]
    voice = words[1]
    parts = [_cap(np_text[subject])]
    tags = [f"np:{subject}"]
    if voice == "act":
        parts.append(verb_row.v_act)
        tags.append("v:act")
    else:
        parts.append(_vpass(verb_row, np_num[subject]))
        tags.append("v:pass")
    for w in words[2:]:
        if w in np_text:
            parts.append(np_text[w])
            tags.append(f"np:{w}")
        else:
            parts.append(pp_text[w])
            role = {"theme_pp": "pp:theme", "loc_pp": "pp:loc", "agent_pp": "pp:agent",
                    "wrong_theme_pp": "ppx:theme", "wrong_loc_pp": "ppx:loc",
                    "agent_as_loc_pp": "pp:agent", "agent_as_theme_pp": "pp:agent",
                    "spurious": "pp:spurious"}[w]
            tags.append(role)
    return " ".join(parts) + ".", " ".join(tags)


# Rows 2-7 of the context are shared by both groups; row 1 and the answer
# structures swap the theme/loc alternants between the groups.
ALT_CONTEXT_TAIL = [
    "theme pass agent_pp",
    "theme pass loc_pp agent_pp",
    "theme pass loc_pp",
    "loc pass agent_pp",
    "loc pass theme_pp agent_pp",
    "loc pass theme_pp",
]

ALT_ROW1 = {1: "agent act theme loc_pp", 2: "agent act loc theme_pp"}

ALT_ANSWERS = {
    1: [("Correct", "agent act loc theme_pp"),
        ("AgentAct", "agent pass loc theme_pp"),
        ("Alt1", "agent act loc theme"),
        ("Alt2", "agent act loc_pp theme_pp"),
        ("NoEmb", "agent act loc spurious"),
        ("LexPrep", "agent act loc wrong_theme_pp"),
        ("SSM1", "loc act agent theme_pp"),
        ("SSM2", "theme act agent loc_pp"),
        ("AASSM", "loc act theme agent_as_loc_pp")],
    2: [("Correct", "agent act theme loc_pp"),
        ("AgentAct", "agent pass theme loc_pp"),
        ("Alt1", "agent act theme loc"),
        ("Alt2", "agent act theme_pp loc_pp"),
        ("NoEmb", "agent act theme spurious"),
        ("LexPrep", "agent act theme wrong_loc_pp"),
        ("SSM1", "theme act agent loc_pp"),
        ("SSM2", "loc act agent theme_pp"),
        ("AASSM", "theme act loc agent_as_theme_pp")],
}


def gen_alternation_instance(lexicon: Sequence[AlternationRow], group: int,
                             lex_type: str, rng: np.random.Generator,
                             index: int = 0) -> BLMInstance:
    if group not in (1, 2):
        raise GenerationError(f"alternation group must be 1 or 2, got {group}")
    if not lexicon:
        raise GenerationError("alternation generation needs lexicon rows")
    assigns = make_assignments(lexicon, ALTERNATION_SLOTS, lex_type, 8, rng)
    specs = [ALT_ROW1[group]] + ALT_CONTEXT_TAIL
    context = []
    for assign, spec in zip(assigns[:7], specs):
        text, tag = realize_alternation(assign, spec)
        context.append(BLMSentence(text_id(text), text, tag))
    answers = []
    for label, spec in ALT_ANSWERS[group]:
        text, tag = realize_alternation(assigns[7], spec)
        answers.append(BLMAnswer(text_id(text), text, label, tag))
    order = [int(k) for k in rng.permutation(len(answers))]
    answers = [answers[k] for k in order]
    correct_index = next(i for i, a in enumerate(answers) if a.label == "Correct")
    task = ALT_TASKS[group]
    iid = hashlib.sha1(f"{task}|{lex_type}|{index}|"
                       f"{context[0].text}".encode("utf-8")).hexdigest()[:16]
    return BLMInstance(iid, task, lex_type, context, answers, correct_index)


def generate_blm(task: str, seed_rows: Sequence, lex_type: str, count: int,
                 rng: np.random.Generator) -> List[BLMInstance]:
    instances = []
    for i in range(count):
        if task == AGREEMENT_TASK:
            instances.append(gen_agreement_instance(seed_rows, lex_type, rng, index=i))
        elif task in ALT_TASKS.values():
            group = 1 if task == ALT_TASKS[1] else 2
            instances.append(gen_alternation_instance(seed_rows, group, lex_type,
                                                      rng, index=i))
        else:
            raise GenerationError(f"unknown BLM task: {task}")
    return instances


# ---------------------------------------------------------------------------
# Splits and files
# ---------------------------------------------------------------------------

@dataclass
class BLMSplit:
    train: List[BLMInstance] = field(default_factory=list)
    dev: List[BLMInstance] = field(default_factory=list)
    test: List[BLMInstance] = field(default_factory=list)

    def sizes(self) -> Dict[str, int]:
        return {"train": len(self.train), "dev": len(self.dev), "test": len(self.test)}


def dataset_split(instances: Sequence[BLMInstance], rng: np.random.Generator,
                  train_target: int = 2000, test_frac: float = 0.1,
                  dev_frac: float = 0.2) -> BLMSplit:
    """90:10 split, cap the 90% side at train_target, hold out dev from it."""
    pool = list(instances)
    order = rng.permutation(len(pool))
    shuffled = [pool[int(k)] for k in order]
    n_test = int(test_frac * len(shuffled))
    test, rest = shuffled[:n_test], shuffled[n_test:]
    if len(rest) < train_target:
        log.warning("train pool %d smaller than target %d; taking all",
                    len(rest), train_target)
    sampled = rest[:min(train_target, len(rest))]
    n_dev = int(dev_frac * len(sampled))
    split = BLMSplit(dev=sampled[:n_dev], train=sampled[n_dev:], test=test)
    for name in ("train", "dev", "test"):
        for inst in getattr(split, name):
            inst.split = name
    return split


def write_blm(outdir, split: BLMSplit, manifest_extra: Dict) -> None:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "blm_instances.jsonl", "w", encoding="utf-8") as fh:
        for name in ("train", "dev", "test"):
            for inst in getattr(split, name):
                fh.write(json.dumps({
                    "instance_id": inst.instance_id, "task": inst.task,
                    "lex_type": inst.lex_type,
                    "context": [{"sentence_id": s.sentence_id, "text": s.text,
                                 "pattern": s.pattern} for s in inst.context],
                    "answers": [{"sentence_id": a.sentence_id, "text": a.text,
                                 "label": a.label, "pattern": a.pattern}
                                for a in inst.answers],
                    "correct_index": inst.correct_index, "split": inst.split,
                }, sort_keys=True, ensure_ascii=False) + "\n")
    manifest = dict(manifest_extra)
    manifest["split_sizes"] = split.sizes()
    (outdir / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8")


def read_blm(path) -> BLMSplit:
    split = BLMSplit()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        inst = BLMInstance(
            instance_id=obj["instance_id"], task=obj["task"],
            lex_type=obj["lex_type"],
            context=[BLMSentence(s["sentence_id"], s["text"], s["pattern"])
                     for s in obj["context"]],
            answers=[BLMAnswer(a["sentence_id"], a["text"], a["label"], a["pattern"])
                     for a in obj["answers"]],
            correct_index=obj["correct_index"], split=obj["split"])
        getattr(split, inst.split if inst.split in ("train", "dev", "test") else "train"
                ).append(inst)
    return split


def blm_sentences(split: BLMSplit) -> List[Tuple[str, str, str]]:
    """All unique (sentence_id, text, pattern) across contexts and answers."""
    seen: Dict[str, Tuple[str, str, str]] = {}
    for name in ("train", "dev", "test"):
        for inst in getattr(split, name):
            for s in inst.context:
                seen.setdefault(s.sentence_id, (s.sentence_id, s.text, s.pattern))
            for a in inst.answers:
                seen.setdefault(a.sentence_id, (a.sentence_id, a.text, a.pattern))
    return [seen[k] for k in sorted(seen)]
