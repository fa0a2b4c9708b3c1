"""Matrix-puzzle dataset generation: agreement and alternation tasks."""

import numpy as np
import pytest

from chunkprobe import blm
from chunkprobe.errors import GenerationError, SeedFileError


def assign_all(row, slots):
    return {s: row for s in slots}


class TestAgreementTemplates:
    def test_context_has_seven_templates(self):
        assert len(blm.AGREEMENT_CONTEXT) == 7

    def test_context_rows_grammatical(self, seed_rows):
        inst = blm.gen_agreement_instance(seed_rows, "I", np.random.default_rng(0))
        assert len(inst.context) == 7
        for sent in inst.context:
            assert blm.is_grammatical_agreement(sent.pattern)

    def test_answer_schema(self):
        labels = [label for label, _ in blm.AGREEMENT_ANSWERS]
        assert labels == ["correct", "Coord", "WNA", "AE_V",
                          "AE_N1", "AE_N2", "WN1", "WN2"]

    def test_correct_answer_realization(self, seed_rows):
        assign = assign_all(seed_rows[0], blm.AGREEMENT_SLOTS)
        text, tag = blm.realize_agreement(assign, "p", "p", "s", "p")
        assert text == "The computers with the programs of the experiment are broken."
        assert tag == "np-p pp1-p pp2-s vp-p"

    def test_simple_context_realization(self, seed_rows):
        assign = assign_all(seed_rows[0], blm.AGREEMENT_SLOTS)
        text, _ = blm.realize_agreement(assign, "s", "s", None, "s")
        assert text == "The computer with the program is broken."

    def test_coordination_realization(self, seed_rows):
        assign = assign_all(seed_rows[0], blm.AGREEMENT_SLOTS)
        text, tag = blm.realize_agreement(assign, "s", "s", "coord", "s")
        assert text == "The computer with the program and the experiment is broken."
        assert "coord" in tag.split(" ")
        assert not blm.is_grammatical_agreement(tag)

    def test_wn_answers_grammatical_but_break_pattern(self, seed_rows):
        # WN1/WN2 are well-formed sentences whose chunk numbers nevertheless
        # differ from the correct continuation -- the sequence-only errors.
        inst = blm.gen_agreement_instance(seed_rows, "I", np.random.default_rng(1))
        by_label = {a.label: a for a in inst.answers}
        correct = by_label["correct"]
        for label in blm.SEQUENCE_ERROR_LABELS:
            a = by_label[label]
            assert blm.is_grammatical_agreement(a.pattern)
            assert a.pattern != correct.pattern

    def test_agreement_error_answers_ungrammatical(self, seed_rows):
        inst = blm.gen_agreement_instance(seed_rows, "I", np.random.default_rng(1))
        by_label = {a.label: a for a in inst.answers}
        for label in ("Coord", "AE_V", "AE_N1", "AE_N2"):
            assert not blm.is_grammatical_agreement(by_label[label].pattern)

    def test_exactly_one_correct_and_index(self, seed_rows):
        for seed in range(5):
            inst = blm.gen_agreement_instance(seed_rows, "I",
                                              np.random.default_rng(seed))
            assert len(inst.answers) == 8
            assert sum(a.label == "correct" for a in inst.answers) == 1
            assert inst.answers[inst.correct_index].label == "correct"

    def test_answer_order_varies_between_instances(self, seed_rows):
        rng = np.random.default_rng(0)
        orders = {tuple(a.label for a in
                        blm.gen_agreement_instance(seed_rows, "III", rng).answers)
                  for _ in range(10)}
        assert len(orders) > 1

    def test_context_validation(self, seed_rows):
        inst = blm.gen_agreement_instance(seed_rows, "I", np.random.default_rng(0))
        with pytest.raises(GenerationError):
            blm.BLMInstance("x", inst.task, "I", inst.context[:5],
                            inst.answers, inst.correct_index)


class TestLexicalVariation:
    def test_type_i_single_assignment(self, seed_rows):
        assigns = blm.make_assignments(seed_rows, blm.AGREEMENT_SLOTS, "I", 8,
                                       np.random.default_rng(0))
        assert len(assigns) == 8
        first = assigns[0]
        for a in assigns:
            assert all(a[s] is first[s] for s in blm.AGREEMENT_SLOTS)
        assert len({id(v) for v in first.values()}) == 1

    def test_type_ii_hamming_one_walk(self, seed_rows):
        assigns = blm.make_assignments(seed_rows, blm.AGREEMENT_SLOTS, "II", 8,
                                       np.random.default_rng(0))
        slots = blm.AGREEMENT_SLOTS
        for i in range(1, 8):
            assert blm.assignment_hamming(assigns[i - 1], assigns[i], slots) == 1
            changed = [s for s in slots if assigns[i - 1][s] is not assigns[i][s]]
            assert changed == [slots[(i - 1) % len(slots)]]

    def test_type_iii_varies_rows(self, seed_rows):
        assigns = blm.make_assignments(seed_rows, blm.AGREEMENT_SLOTS, "III", 8,
                                       np.random.default_rng(0))
        # Within one assignment all slots share a seed row; across the
        # sequence several distinct rows appear.
        for a in assigns:
            assert len({id(v) for v in a.values()}) == 1
        assert len({id(a["subj"]) for a in assigns}) > 1

    def test_type_ii_needs_two_rows(self, seed_rows):
        with pytest.raises(GenerationError):
            blm.make_assignments(seed_rows[:1], blm.AGREEMENT_SLOTS, "II", 8,
                                 np.random.default_rng(0))

    def test_unknown_type_rejected(self, seed_rows):
        with pytest.raises(GenerationError):
            blm.make_assignments(seed_rows, blm.AGREEMENT_SLOTS, "IV", 8,
                                 np.random.default_rng(0))


class TestAlternationLexicon:
    def test_bundled_file(self, alternation_rows):
        assert len(alternation_rows) == 14
        assert alternation_rows[0].agent == "the buyer"

    def test_bad_number_cell(self, tmp_path):
        cells = ["the buyer", "singular", "can load", "was loaded", "were loaded",
                 "the tools", "pl", "with", "bags", "pl", "in", "under", "on sale"]
        bad = tmp_path / "bad.tsv"
        bad.write_text("\t".join(blm.ALT_HEADER) + "\n" + "\t".join(cells) + "\n",
                       encoding="utf-8")
        with pytest.raises(SeedFileError, match="sg or pl"):
            blm.parse_alternation_file(bad)

    def test_prepositions_must_differ(self, tmp_path):
        cells = ["the buyer", "sg", "can load", "was loaded", "were loaded",
                 "the tools", "pl", "with", "bags", "pl", "with", "under", "on sale"]
        bad = tmp_path / "bad.tsv"
        bad.write_text("\t".join(blm.ALT_HEADER) + "\n" + "\t".join(cells) + "\n",
                       encoding="utf-8")
        with pytest.raises(SeedFileError, match="distinct"):
            blm.parse_alternation_file(bad)


class TestAlternationRealization:
    def test_group_correct_answers(self, alternation_rows):
        assign = assign_all(alternation_rows[0], blm.ALTERNATION_SLOTS)
        g1, _ = blm.realize_alternation(assign, dict(blm.ALT_ANSWERS[1])["Correct"])
        g2, _ = blm.realize_alternation(assign, dict(blm.ALT_ANSWERS[2])["Correct"])
        assert g1 == "The buyer can load bags with the tools."
        assert g2 == "The buyer can load the tools in bags."

    def test_groups_swap_row1_and_answer(self, alternation_rows):
        # Group 1's first context row uses the structure that is group 2's
        # correct answer, and vice versa.
        assert blm.ALT_ROW1[1] == dict(blm.ALT_ANSWERS[2])["Correct"]
        assert blm.ALT_ROW1[2] == dict(blm.ALT_ANSWERS[1])["Correct"]

    def test_passive_agrees_with_subject(self, alternation_rows):
        assign = assign_all(alternation_rows[0], blm.ALTERNATION_SLOTS)
        text, tag = blm.realize_alternation(assign, "theme pass agent_pp")
        assert text == "The tools were loaded by the buyer."
        assert tag == "np:theme v:pass pp:agent"

    def test_agent_in_disguised_pp(self, alternation_rows):
        assign = assign_all(alternation_rows[0], blm.ALTERNATION_SLOTS)
        text, tag = blm.realize_alternation(
            assign, dict(blm.ALT_ANSWERS[2])["AASSM"])
        assert text == "The tools can load bags with the buyer."
        assert tag.split(" ")[-1] == "pp:agent"

    def test_instance_labels(self, alternation_rows):
        inst = blm.gen_alternation_instance(alternation_rows, 1, "I",
                                            np.random.default_rng(0))
        assert sorted(a.label for a in inst.answers) == sorted(blm.ALTERNATION_LABELS)
        assert len(inst.answers) == 9
        assert inst.answers[inst.correct_index].label == "Correct"
        assert inst.task == "blm_alt_g1"

    def test_bad_group_rejected(self, alternation_rows):
        with pytest.raises(GenerationError):
            blm.gen_alternation_instance(alternation_rows, 3, "I",
                                         np.random.default_rng(0))


class TestGeneration:
    def test_generate_blm_deterministic(self, seed_rows):
        a = blm.generate_blm("blm_agreement", seed_rows, "III", 10,
                             np.random.default_rng(3))
        b = blm.generate_blm("blm_agreement", seed_rows, "III", 10,
                             np.random.default_rng(3))
        assert a == b

    def test_unknown_task(self, seed_rows):
        with pytest.raises(GenerationError):
            blm.generate_blm("blm_unknown", seed_rows, "I", 1,
                             np.random.default_rng(0))

    def test_instance_ids_distinct(self, seed_rows):
        insts = blm.generate_blm("blm_agreement", seed_rows, "III", 20,
                                 np.random.default_rng(0))
        assert len({i.instance_id for i in insts}) == 20


class TestSplit:
    def test_split_arithmetic(self, seed_rows):
        pool = blm.generate_blm("blm_agreement", seed_rows, "III", 50,
                                np.random.default_rng(0))
        split = blm.dataset_split(pool, np.random.default_rng(1), train_target=2000)
        # 10% test = 5; remaining 45 all sampled; 20% dev = 9; train = 36.
        assert split.sizes() == {"train": 36, "dev": 9, "test": 5}

    def test_train_target_caps_pool(self, seed_rows):
        pool = blm.generate_blm("blm_agreement", seed_rows, "III", 50,
                                np.random.default_rng(0))
        split = blm.dataset_split(pool, np.random.default_rng(1), train_target=20)
        assert split.sizes() == {"train": 16, "dev": 4, "test": 5}

    def test_split_fields_and_disjointness(self, seed_rows):
        pool = blm.generate_blm("blm_agreement", seed_rows, "III", 40,
                                np.random.default_rng(0))
        split = blm.dataset_split(pool, np.random.default_rng(1))
        ids = set()
        for name in ("train", "dev", "test"):
            for inst in getattr(split, name):
                assert inst.split == name
                ids.add(inst.instance_id)
        assert len(ids) == 40

    def test_deterministic_for_seed(self, seed_rows):
        pool = blm.generate_blm("blm_agreement", seed_rows, "III", 30,
                                np.random.default_rng(0))
        a = blm.dataset_split(list(pool), np.random.default_rng(7))
        b = blm.dataset_split(list(pool), np.random.default_rng(7))
        assert [i.instance_id for i in a.train] == [i.instance_id for i in b.train]


class TestFiles:
    def _split(self, seed_rows):
        pool = blm.generate_blm("blm_agreement", seed_rows, "II", 30,
                                np.random.default_rng(0))
        return blm.dataset_split(pool, np.random.default_rng(1))

    def test_round_trip(self, seed_rows, tmp_path):
        split = self._split(seed_rows)
        blm.write_blm(tmp_path, split, {"task": "blm_agreement"})
        back = blm.read_blm(tmp_path / "blm_instances.jsonl")
        assert back.sizes() == split.sizes()
        assert [i.instance_id for i in back.test] == \
            [i.instance_id for i in split.test]
        assert back.train[0].answers == split.train[0].answers

    def test_byte_identical_reruns(self, seed_rows, tmp_path):
        for sub in ("a", "b"):
            blm.write_blm(tmp_path / sub, self._split(seed_rows),
                          {"task": "blm_agreement"})
        for name in ("blm_instances.jsonl", "manifest.json"):
            assert (tmp_path / "a" / name).read_bytes() == \
                (tmp_path / "b" / name).read_bytes()

    def test_blm_sentences_sorted_unique(self, seed_rows):
        split = self._split(seed_rows)
        rows = blm.blm_sentences(split)
        ids = [r[0] for r in rows]
        assert ids == sorted(ids)
        assert len(ids) == len(set(ids))
        # Every context and answer sentence is covered.
        want = set()
        for name in ("train", "dev", "test"):
            for inst in getattr(split, name):
                want.update(s.sentence_id for s in inst.context)
                want.update(a.sentence_id for a in inst.answers)
        assert set(ids) == want
