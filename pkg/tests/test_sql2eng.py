"""Pseudo-English rendering: goldens, span bookkeeping, determinism."""

import json

import pytest

from sqlsynth.sql2eng import PseudoSql, strip_markers, to_pseudo_english
from sqlsynth.sqlast import LeafKind, iter_nodes, parse_sql


class TestGoldens:
    def test_count_filter(self):
        pseudo = to_pseudo_english(
            parse_sql("SELECT count(*) FROM head WHERE age > 56"))
        assert pseudo.text == ("find the count of ⟦column:*⟧ from "
                               "⟦table:head⟧ where ⟦column:age⟧ "
                               "greater than ⟦value:56⟧")

    def test_minimal_projection(self):
        pseudo = to_pseudo_english(parse_sql("SELECT name FROM t"))
        assert pseudo.text == "find ⟦column:name⟧ from ⟦table:t⟧"

    def test_order_group_limit_clauses(self):
        pseudo = to_pseudo_english(parse_sql(
            "SELECT born_state , count(*) FROM head GROUP BY born_state "
            "ORDER BY count(*) DESC LIMIT 3"))
        text = pseudo.text
        assert "for each" in text
        assert "sorted by the count of" in text
        assert text.endswith("descending top ⟦value:3⟧")

    def test_set_operation(self):
        pseudo = to_pseudo_english(parse_sql(
            "SELECT a FROM t UNION SELECT b FROM u"))
        assert pseudo.text.startswith("union of find")
        assert " and find " in pseudo.text


class TestSpans:
    @pytest.mark.parametrize("sql", [
        "SELECT count(*) FROM head WHERE age > 56",
        "SELECT name FROM head WHERE born_state IN ('CA' , 'OH')",
        "SELECT avg(age) FROM head WHERE age BETWEEN 30 AND 60",
        "SELECT a FROM t UNION SELECT b FROM u",
        "SELECT name FROM head WHERE age > (SELECT avg(age) FROM head)",
    ])
    def test_every_leaf_becomes_exactly_one_span(self, sql):
        tree = parse_sql(sql)
        pseudo = to_pseudo_english(tree)
        leaves = [n for n in iter_nodes(tree) if n.leaf_kind is not None]
        assert len(pseudo.spans) == len(leaves)

    def test_span_offsets_recover_tokens(self):
        pseudo = to_pseudo_english(
            parse_sql("SELECT count(*) FROM head WHERE age > 56"))
        assert pseudo.span_texts() == ["*", "head", "age", "56"]
        assert pseudo.spans_of_kind("table") == ["head"]
        assert pseudo.spans_of_kind("value") == ["56"]

    def test_spans_non_overlapping_and_in_bounds(self, toy_examples, toy_schemas):
        for example in toy_examples:
            pseudo = to_pseudo_english(
                parse_sql(example.sql, toy_schemas[example.db_id]))
            previous_end = -1
            for span in pseudo.spans:
                assert 0 <= span.start < span.end <= len(pseudo.text)
                assert span.start > previous_end
                previous_end = span.end


class TestProperties:
    def test_deterministic(self, toy_examples, toy_schemas):
        for example in toy_examples:
            tree = parse_sql(example.sql, toy_schemas[example.db_id])
            assert to_pseudo_english(tree).text == to_pseudo_english(tree).text

    def test_no_raw_sql_keywords(self, toy_examples, toy_schemas):
        for example in toy_examples:
            pseudo = to_pseudo_english(
                parse_sql(example.sql, toy_schemas[example.db_id]))
            stripped_words = set(pseudo.stripped().split())
            assert not stripped_words & {"SELECT", "FROM", "WHERE", "GROUP", "ORDER"}

    def test_injective_on_toy_corpus(self, toy_examples, toy_schemas):
        rendered = {}
        for example in toy_examples:
            tree = parse_sql(example.sql, toy_schemas[example.db_id])
            text = to_pseudo_english(tree).text
            if text in rendered:
                assert rendered[text] == tree
            rendered[text] = tree
        assert len(rendered) == len({
            to_pseudo_english(parse_sql(e.sql, toy_schemas[e.db_id])).text
            for e in toy_examples})

    def test_strip_markers(self):
        pseudo = to_pseudo_english(parse_sql("SELECT name FROM t"))
        assert strip_markers(pseudo.text) == "find name from t"
        assert "⟦" not in pseudo.stripped()


class TestSerialization:
    def test_json_round_trip(self):
        pseudo = to_pseudo_english(
            parse_sql("SELECT count(*) FROM head WHERE age > 56"))
        payload = json.loads(pseudo.dumps())
        restored = PseudoSql.from_json(payload)
        assert restored == pseudo
        assert payload["spans"][0].keys() == {"start", "end", "kind"}
