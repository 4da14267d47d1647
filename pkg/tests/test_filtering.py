"""Negative generation, features, losses (with gradient checks), training,
and top-k selection."""

import math
import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sqlsynth.corpus import ParallelExample
from sqlsynth.errors import CorpusError
from sqlsynth.fill import FillCandidate
from sqlsynth.filtering import (FEATURE_DIM, FilterModel, NegativeKind,
                                ScoringContext, build_training_groups,
                                featurize, gen_negatives, loss_bce,
                                loss_bce_grad, loss_xent, loss_xent_grad,
                                ranking_accuracy, select_and_filter, sigmoid,
                                train_filter)
from sqlsynth.masking import SchemaFrequencyTable, tokenize
from sqlsynth.sql2eng import to_pseudo_english
from sqlsynth.sqlast import parse_sql

EMPTY_TABLE = SchemaFrequencyTable({}, 1)


class TestGenNegatives:
    def test_token_swap_flips_order_direction(self, toy_schemas):
        example = ParallelExample(
            "Show the name of the head with the greatest age .",
            "SELECT name FROM head ORDER BY age ASC", "gov")
        result = gen_negatives(example, toy_schemas["gov"],
                               ["SELECT name FROM head ORDER BY age ASC"], seed=5)
        by_kind = {n.kind: n for n in result.negatives}
        assert by_kind[NegativeKind.TOKEN_SWAP].sql == \
            "SELECT name FROM head ORDER BY age DESC"

    def test_token_swap_applies_to_all_occurrences(self, toy_schemas):
        example = ParallelExample(
            "Names of heads older than 50 in big departments ?",
            "SELECT name FROM head WHERE age > 50 AND department_id > 1", "gov")
        result = gen_negatives(example, toy_schemas["gov"], [], seed=5)
        swapped = {n.kind: n for n in result.negatives}[NegativeKind.TOKEN_SWAP].sql
        assert swapped == "SELECT name FROM head WHERE age < 50 OR department_id < 1"

    def test_six_negatives_when_feasible(self, toy_schemas):
        example = ParallelExample(
            "How many heads are older than 56 ?",
            "SELECT count(*) FROM head WHERE age > 56", "gov")
        pool = ["SELECT count(*) FROM head WHERE age > 56",
                "SELECT avg(age) FROM head"]
        result = gen_negatives(example, toy_schemas["gov"], pool, seed=11)
        assert len(result.negatives) == 6
        assert [n.kind for n in result.negatives] == [
            NegativeKind.VALUE_SWAP, NegativeKind.TOKEN_SWAP,
            NegativeKind.CASCADE, NegativeKind.SQL_SWAP,
            NegativeKind.TEXT_DROP, NegativeKind.TEXT_SHUFFLE]
        for negative in result.negatives:
            assert (negative.text, negative.sql) != (example.question, example.sql)

    def test_value_swap_samples_from_column(self, toy_schemas):
        example = ParallelExample(
            "How many heads are older than 56 ?",
            "SELECT count(*) FROM head WHERE age > 56", "gov")
        result = gen_negatives(example, toy_schemas["gov"], [], seed=3)
        value_swap = {n.kind: n for n in result.negatives}[NegativeKind.VALUE_SWAP]
        new_literal = value_swap.sql.rsplit(" ", 1)[-1]
        assert new_literal != "56"
        assert float(new_literal) in {38, 43, 61, 69}  # other ages in the db

    def test_text_shuffle_moves_a_span_only(self, toy_schemas):
        text = "one two three four five six seven eight nine ten"
        example = ParallelExample(text, "SELECT count(*) FROM head", "gov")
        result = gen_negatives(example, toy_schemas["gov"], [], seed=23)
        shuffled = {n.kind: n for n in result.negatives}[NegativeKind.TEXT_SHUFFLE]
        original = text.split()
        mutated = shuffled.text.split()
        assert sorted(mutated) == sorted(original)
        assert mutated != original
        changed = [i for i, (a, b) in enumerate(zip(original, mutated)) if a != b]
        assert max(changed) - min(changed) + 1 <= 3  # round(0.3 * 10)

    def test_text_drop_drops_at_least_one(self, toy_schemas):
        example = ParallelExample(
            "How many heads are older than 56 ?",
            "SELECT count(*) FROM head WHERE age > 56", "gov")
        result = gen_negatives(example, toy_schemas["gov"], [], seed=2)
        dropped = {n.kind: n for n in result.negatives}[NegativeKind.TEXT_DROP]
        original = tokenize(example.question)
        kept = dropped.text.split()
        assert 0 < len(kept) < len(original)

    def test_deterministic(self, toy_schemas):
        example = ParallelExample(
            "How many heads are older than 56 ?",
            "SELECT count(*) FROM head WHERE age > 56", "gov")
        pool = ["SELECT avg(age) FROM head"]
        first = gen_negatives(example, toy_schemas["gov"], pool, seed=77)
        second = gen_negatives(example, toy_schemas["gov"], pool, seed=77)
        assert [(n.kind, n.text, n.sql) for n in first.negatives] == \
               [(n.kind, n.text, n.sql) for n in second.negatives]

    def test_degenerate_inputs_reported_not_duplicated(self, toy_schemas):
        example = ParallelExample("word", "SELECT name FROM head", "gov")
        result = gen_negatives(example, toy_schemas["gov"], [], seed=1)
        skip_kinds = {kind for kind, _ in result.skips}
        assert NegativeKind.VALUE_SWAP in skip_kinds   # no literals
        assert NegativeKind.TOKEN_SWAP in skip_kinds   # no swappable operator
        assert NegativeKind.SQL_SWAP in skip_kinds     # empty pool
        assert NegativeKind.TEXT_DROP in skip_kinds    # single-token text
        for negative in result.negatives:
            assert (negative.text, negative.sql) != (example.question, example.sql)

    def test_every_toy_example_negatives_differ(self, toy_examples, toy_schemas):
        pools = {}
        for example in toy_examples:
            pools.setdefault(example.db_id, []).append(example.sql)
        for row, example in enumerate(toy_examples):
            result = gen_negatives(example, toy_schemas[example.db_id],
                                   pools[example.db_id], seed=row)
            assert result.negatives, example.sql
            for negative in result.negatives:
                assert (negative.text, negative.sql) != \
                    (example.question, example.sql)


class TestFeaturize:
    def _pseudo(self, sql):
        tree = parse_sql(sql)
        return tree, to_pseudo_english(tree)

    def test_dimension_constant(self):
        tree, pseudo = self._pseudo("SELECT count(*) FROM head WHERE age > 56")
        a = featurize("How many heads ?", tree, pseudo, EMPTY_TABLE)
        b = featurize("something else entirely different", tree, pseudo, EMPTY_TABLE)
        assert a.shape == b.shape == (FEATURE_DIM,)

    def test_empty_text_is_bias_only(self):
        tree, pseudo = self._pseudo("SELECT count(*) FROM head WHERE age > 56")
        phi = featurize("", tree, pseudo, EMPTY_TABLE)
        assert phi[0] == 1.0
        assert np.count_nonzero(phi) == 1

    def test_identical_text_maximizes_overlap(self):
        tree, pseudo = self._pseudo("SELECT count(*) FROM head WHERE age > 56")
        phi = featurize(pseudo.stripped(), tree, pseudo, EMPTY_TABLE)
        assert phi[1] == 1.0  # table overlap
        assert phi[2] == 1.0  # column overlap
        assert phi[3] == 1.0  # value overlap

    def test_cue_agreement_features(self):
        tree, pseudo = self._pseudo(
            "SELECT name FROM head ORDER BY age DESC LIMIT 1")
        match = featurize("who is the oldest head ?", tree, pseudo, EMPTY_TABLE)
        tree2, pseudo2 = self._pseudo("SELECT name FROM head")
        spurious = featurize("who is the oldest head ?", tree2, pseudo2, EMPTY_TABLE)
        # superlative_max: (match, spurious) channels sit right after overlaps
        assert match[5] == 1.0 and match[6] == 0.0
        assert spurious[5] == 0.0 and spurious[6] == 1.0


class TestLosses:
    def test_bce_printed_value(self):
        assert loss_bce(0.0, [1.0]) == pytest.approx(2 * math.log(2), abs=1e-12)

    def test_xent_uniform_value(self):
        assert loss_xent(0.0, [0.0] * 6) == pytest.approx(math.log(7), abs=1e-12)

    def test_bce_limit_zero(self):
        assert loss_bce(40.0, [-40.0] * 6) == pytest.approx(0.0, abs=1e-12)

    def test_xent_limit_zero(self):
        assert loss_xent(60.0, [0.0] * 6) == pytest.approx(0.0, abs=1e-12)

    @given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
    def test_bce_monotone_in_positive_score(self, s, lower, negative):
        higher = s + abs(lower) + 0.1
        assert loss_bce(higher, [negative]) < loss_bce(s, [negative])

    @given(st.lists(st.floats(-5, 5), min_size=2, max_size=6), st.floats(-5, 5))
    def test_xent_permutation_invariant(self, negs, pos):
        shuffled = list(negs)
        random.Random(0).shuffle(shuffled)
        assert loss_xent(pos, negs) == pytest.approx(loss_xent(pos, shuffled))

    def test_conventional_form_differs(self):
        printed = loss_bce(0.0, [0.5])
        conventional = loss_bce(0.0, [0.5], conventional=True)
        assert printed != pytest.approx(conventional)
        # conventional: -log σ(0) - log(1 - σ(0.5))
        expected = -math.log(0.5) - math.log(1 - 1 / (1 + math.exp(-0.5)))
        assert conventional == pytest.approx(expected, abs=1e-12)

    def test_gradients_match_central_differences(self):
        rng = random.Random(123)
        eps = 1e-6
        for _ in range(100):
            s_pos = rng.uniform(-4, 4)
            s_negs = [rng.uniform(-4, 4) for _ in range(6)]
            for loss, grad in ((loss_bce, loss_bce_grad),
                               (loss_xent, loss_xent_grad)):
                d_pos, d_negs = grad(s_pos, s_negs)
                numeric = (loss(s_pos + eps, s_negs) - loss(s_pos - eps, s_negs)) / (2 * eps)
                assert d_pos == pytest.approx(numeric, rel=1e-5, abs=1e-7)
                for j in range(6):
                    bumped_up = list(s_negs)
                    bumped_up[j] += eps
                    bumped_down = list(s_negs)
                    bumped_down[j] -= eps
                    numeric_j = (loss(s_pos, bumped_up) - loss(s_pos, bumped_down)) / (2 * eps)
                    assert d_negs[j] == pytest.approx(numeric_j, rel=1e-5, abs=1e-7)


class TestTrainFilter:
    def test_separable_toy_reaches_perfect_ranking(self, toy_examples, toy_schemas,
                                                   toy_freq_table, toy_filter_model):
        groups, _ = build_training_groups(
            toy_examples, toy_schemas, toy_freq_table, seed=7)
        assert ranking_accuracy(toy_filter_model, groups) == 1.0

    def test_loss_non_increasing_with_small_lr(self, toy_examples, toy_schemas,
                                               toy_freq_table):
        _, report = train_filter(toy_examples, toy_schemas, toy_freq_table,
                                 epochs=6, learning_rate=0.01, seed=4)
        for before, after in zip(report.epoch_losses, report.epoch_losses[1:]):
            assert after <= before + 1e-6

    def test_same_seed_identical_weights(self, toy_examples, toy_schemas,
                                         toy_freq_table):
        m1, _ = train_filter(toy_examples, toy_schemas, toy_freq_table,
                             epochs=3, learning_rate=0.2, seed=21)
        m2, _ = train_filter(toy_examples, toy_schemas, toy_freq_table,
                             epochs=3, learning_rate=0.2, seed=21)
        assert np.array_equal(m1.weights, m2.weights)
        assert m1.bias == m2.bias

    def test_no_trainable_groups_raises(self, toy_schemas, toy_freq_table):
        with pytest.raises(CorpusError):
            train_filter([], toy_schemas, toy_freq_table, seed=0)

    def test_save_load_identical_scores(self, toy_filter_model, tmp_path):
        path = tmp_path / "model.json"
        toy_filter_model.save(path)
        loaded = FilterModel.load(path)
        rng = np.random.default_rng(5)
        for _ in range(10):
            phi = rng.normal(size=FEATURE_DIM)
            assert loaded.score_features(phi) == pytest.approx(
                toy_filter_model.score_features(phi), abs=1e-12)


class TestSelectAndFilter:
    def _context(self, toy_freq_table):
        sql = "SELECT count(*) FROM head WHERE age > 56"
        tree = parse_sql(sql)
        return ScoringContext(sql, tree, to_pseudo_english(tree), toy_freq_table)

    def test_top_k_with_zero_threshold(self, toy_freq_table):
        context = self._context(toy_freq_table)
        model = FilterModel(weights=np.zeros(FEATURE_DIM))
        candidates = [FillCandidate(f"text variant {i}") for i in range(10)]
        kept = select_and_filter(candidates, context, model, top_k=5, threshold=0.0)
        assert len(kept) == 5

    def test_all_below_threshold_empty(self, toy_freq_table):
        context = self._context(toy_freq_table)
        model = FilterModel(weights=np.zeros(FEATURE_DIM), bias=-5.0)
        candidates = [FillCandidate("a"), FillCandidate("b")]
        assert select_and_filter(candidates, context, model, threshold=0.5) == []

    def test_ties_broken_lexicographically(self, toy_freq_table):
        context = self._context(toy_freq_table)
        model = FilterModel(weights=np.zeros(FEATURE_DIM))
        candidates = [FillCandidate("zebra text"), FillCandidate("apple text")]
        kept = select_and_filter(candidates, context, model, threshold=0.0)
        assert [c.text for c in kept] == ["apple text", "zebra text"]

    def test_duplicates_merged(self, toy_freq_table):
        context = self._context(toy_freq_table)
        model = FilterModel(weights=np.zeros(FEATURE_DIM))
        candidates = [FillCandidate("same  text"), FillCandidate("same text")]
        kept = select_and_filter(candidates, context, model, threshold=0.0)
        assert len(kept) == 1

    def test_output_never_exceeds_top_k(self, toy_freq_table, toy_filter_model):
        context = self._context(toy_freq_table)
        candidates = [FillCandidate(f"candidate number {i}") for i in range(20)]
        kept = select_and_filter(candidates, context, toy_filter_model,
                                 top_k=5, threshold=0.0)
        assert len(kept) <= 5

    def test_empty_candidates_rejected(self, toy_freq_table, toy_filter_model):
        with pytest.raises(ValueError):
            select_and_filter([], self._context(toy_freq_table), toy_filter_model)

    def test_sigmoid_midpoint(self):
        assert sigmoid(0.0) == 0.5


class TestRemoteScorer:
    @pytest.fixture
    def scoring_server(self):
        import json
        import threading
        from http.server import BaseHTTPRequestHandler, HTTPServer

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers["Content-Length"])
                payload = json.loads(self.rfile.read(length))
                # longer texts score higher; deterministic and inspectable
                body = json.dumps(
                    {"score": float(len(payload["text"].split()))}).encode()
                self.send_response(200)
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def log_message(self, *args):
                pass

        server = HTTPServer(("127.0.0.1", 0), Handler)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        yield f"http://127.0.0.1:{server.server_port}"
        server.shutdown()

    def test_interchangeable_with_filter_model(self, scoring_server, toy_freq_table):
        from sqlsynth.filtering import RemoteScorer

        sql = "SELECT count(*) FROM head WHERE age > 56"
        tree = parse_sql(sql)
        context = ScoringContext(sql, tree, to_pseudo_english(tree), toy_freq_table)
        scorer = RemoteScorer(scoring_server)
        candidates = [FillCandidate("one two three"), FillCandidate("one")]
        kept = select_and_filter(candidates, context, scorer,
                                 top_k=5, threshold=0.5)
        assert [c.text for c in kept] == ["one two three", "one"]
        assert kept[0].score == 3.0

    def test_unreachable_scoring_service(self, toy_freq_table):
        from sqlsynth.errors import TransportError
        from sqlsynth.filtering import RemoteScorer

        tree = parse_sql("SELECT name FROM head")
        scorer = RemoteScorer("http://127.0.0.1:1", timeout=0.3, retries=0)
        with pytest.raises(TransportError):
            scorer.score("text", tree, to_pseudo_english(tree), toy_freq_table)
