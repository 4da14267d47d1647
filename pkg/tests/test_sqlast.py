"""Parser, tree shape, anonymization, and SQL round-trip tests."""

import pytest
from hypothesis import given, strategies as st

from sqlsynth.errors import ResolutionError, SqlParseError
from sqlsynth.sqlast import (Group, LeafKind, RaNode, anonymize, parse_sql,
                             parse_statement, render_sql, render_tree,
                             tree_size)

SQL_COUNT_HEAD = "SELECT count(*) FROM head WHERE age > 56"
SQL_COUNT_GAME = "SELECT count(*) FROM game WHERE season > 2007"
SQL_COUNT_SAFETY = "SELECT count(*) FROM county_public_safety"
SQL_AVG_FILM = "SELECT avg(Gross_in_dollar) FROM film"


class TestGoldenTrees:
    def test_count_filter_shape(self):
        tree = parse_sql(SQL_COUNT_HEAD)
        assert render_tree(tree) == (
            "Table(SELECT)[Agg(COUNT)[Value(*)],"
            "Table(FROM)[Predicate(>)[Value(age),Value(56)],Table(head)]]")
        assert tree_size(tree) == 8

    def test_plain_aggregate_shape(self):
        tree = parse_sql(SQL_AVG_FILM)
        assert render_tree(tree) == (
            "Table(SELECT)[Agg(AVG)[Value(Gross_in_dollar)],Table(film)]")
        assert tree_size(tree) == 4

    def test_single_table_no_from_node(self):
        tree = parse_sql(SQL_COUNT_SAFETY)
        assert render_tree(tree) == (
            "Table(SELECT)[Agg(COUNT)[Value(*)],Table(county_public_safety)]")
        assert tree_size(tree) == 4

    def test_single_leaf_size(self):
        assert tree_size(RaNode("x", (), LeafKind.COLUMN)) == 1


class TestParseErrors:
    def test_dangling_order_by(self):
        with pytest.raises(SqlParseError):
            parse_sql("SELECT name FROM t ORDER BY")

    def test_trailing_garbage(self):
        with pytest.raises(SqlParseError):
            parse_sql("SELECT name FROM t WHERE a = 1 extra_token")

    def test_error_carries_offset(self):
        with pytest.raises(SqlParseError) as err:
            parse_sql("SELECT name FROM t WHERE ^")
        assert err.value.offset == len("SELECT name FROM t WHERE ")

    def test_limit_requires_number(self):
        with pytest.raises(SqlParseError):
            parse_sql("SELECT name FROM t LIMIT x")

    def test_empty_in_list(self):
        with pytest.raises(SqlParseError):
            parse_sql("SELECT name FROM t WHERE a IN ()")


class TestSchemaResolution:
    def test_unknown_table(self, toy_schemas):
        with pytest.raises(ResolutionError):
            parse_sql("SELECT name FROM nowhere", toy_schemas["gov"])

    def test_unknown_column(self, toy_schemas):
        with pytest.raises(ResolutionError):
            parse_sql("SELECT nonsense FROM head", toy_schemas["gov"])

    def test_resolves_case_insensitively(self, toy_schemas):
        stmt = parse_statement("SELECT NAME FROM HEAD", toy_schemas["gov"])
        item = stmt.items[0]
        assert item.column == "name" and item.table == "head"

    def test_alias_resolution_erases_alias(self, toy_schemas):
        stmt = parse_statement(
            "SELECT T1.name FROM head AS T1", toy_schemas["gov"])
        assert stmt.items[0].table == "head"
        assert render_sql(stmt) == "SELECT name FROM head"

    def test_schemaless_parse_keeps_raw_identifiers(self):
        tree = parse_sql("SELECT mystery_col FROM mystery_table")
        assert "mystery_col" in render_tree(tree)


class TestAnonymize:
    def test_leaf_placeholders(self):
        tree = parse_sql(SQL_COUNT_HEAD)
        anon = render_tree(anonymize(tree))
        assert anon == ("Table(SELECT)[Agg(COUNT)[Value(⟨col⟩)],"
                        "Table(FROM)[Predicate(>)[Value(⟨col⟩),"
                        "Value(⟨lit⟩)],Table(⟨tbl⟩)]]")

    def test_twin_pair_identical_after_anonymization(self):
        t1, t2 = parse_sql(SQL_COUNT_HEAD), parse_sql(SQL_COUNT_GAME)
        assert anonymize(t1) == anonymize(t2)

    def test_idempotent(self):
        tree = parse_sql(SQL_AVG_FILM)
        assert anonymize(anonymize(tree)) == anonymize(tree)

    def test_shape_preserved(self):
        tree = parse_sql(SQL_COUNT_HEAD)
        assert tree_size(anonymize(tree)) == tree_size(tree)


GROUP_TABLE = {
    "MAX": Group.AGGREGATION, "MIN": Group.AGGREGATION, "AVG": Group.AGGREGATION,
    "COUNT": Group.AGGREGATION, "SUM": Group.AGGREGATION,
    "ORDERBY_ASC": Group.ORDER, "ORDERBY_DESC": Group.ORDER,
    "OR": Group.BOOLEAN, "AND": Group.BOOLEAN,
    "UNION": Group.SET, "INTERSECT": Group.SET, "EXCEPT": Group.SET,
    "LIKE": Group.SIMILARITY, "IN": Group.SIMILARITY, "NOT_IN": Group.SIMILARITY,
    ">": Group.COMPARISON, ">=": Group.COMPARISON, "<": Group.COMPARISON,
    "<=": Group.COMPARISON, "=": Group.COMPARISON, "!=": Group.COMPARISON,
}


class TestGroups:
    @pytest.mark.parametrize("label,group", sorted(GROUP_TABLE.items()))
    def test_listed_labels(self, label, group):
        assert RaNode(label).group is group

    @pytest.mark.parametrize("kind", list(LeafKind))
    def test_leaf_kinds_are_leaf_group(self, kind):
        assert RaNode("anything", (), kind).group is Group.LEAF

    @given(st.text(min_size=1, max_size=12))
    def test_unlisted_labels_are_other(self, label):
        if label in GROUP_TABLE:
            return
        assert RaNode(label).group is Group.OTHER


ROUND_TRIP_SQLS = [
    SQL_COUNT_HEAD,
    "SELECT count(*) FROM department",
    "SELECT avg(age) FROM head",
    "SELECT name FROM head ORDER BY age DESC LIMIT 1",
    "SELECT DISTINCT born_state FROM head",
    "SELECT count(DISTINCT born_state) FROM head",
    "SELECT born_state , count(*) FROM head GROUP BY born_state HAVING count(*) >= 2",
    "SELECT name FROM head WHERE age BETWEEN 40 AND 60",
    "SELECT name FROM head WHERE born_state NOT IN ('California' , 'Ohio')",
    "SELECT name FROM head WHERE name LIKE 'J%'",
    "SELECT name FROM head WHERE name NOT LIKE '%a%'",
    "SELECT name FROM head WHERE age > 50 AND born_state = 'Ohio' OR age < 20",
    "SELECT name FROM head WHERE age > (SELECT avg(age) FROM head)",
    "SELECT T1.department_name , T2.age FROM department AS T1 "
    "JOIN head AS T2 ON T1.department_id = T2.department_id",
    "SELECT T1.name FROM head AS T1 JOIN head AS T2 "
    "ON T1.department_id = T2.department_id WHERE T2.age > 60",
    "SELECT born_state FROM head UNION SELECT department_name FROM department",
    "SELECT born_state FROM head INTERSECT SELECT born_state FROM head WHERE age > 50",
    "SELECT born_state FROM head EXCEPT SELECT born_state FROM head WHERE age < 40",
    "SELECT max(budget) - min(budget) FROM department",
    "SELECT avg(age) FROM head WHERE department_id IN "
    "(SELECT department_id FROM department WHERE budget > 9000)",
    "SELECT name FROM head WHERE NOT age > 50",
    "SELECT department_id FROM (SELECT department_id , count(*) FROM head "
    "GROUP BY department_id)",
]


class TestRoundTrip:
    @pytest.mark.parametrize("sql", ROUND_TRIP_SQLS)
    def test_render_reparse_fixed_point(self, sql, toy_schemas):
        schema = toy_schemas["gov"]
        first = parse_statement(sql, schema)
        rendered = render_sql(first)
        second = parse_statement(rendered, schema)
        assert parse_sql(rendered, schema) == parse_sql(sql, schema)
        assert render_sql(second) == rendered

    def test_round_trip_on_toy_corpus(self, toy_examples, toy_schemas):
        for example in toy_examples:
            schema = toy_schemas[example.db_id]
            tree = parse_sql(example.sql, schema)
            rendered = render_sql(parse_statement(example.sql, schema))
            assert parse_sql(rendered, schema) == tree, example.sql


class TestTreeInvariants:
    def test_leaves_have_no_children(self, toy_examples, toy_schemas):
        def walk(node):
            if node.leaf_kind is not None:
                assert not node.children
            for child in node.children:
                walk(child)

        for example in toy_examples:
            walk(parse_sql(example.sql, toy_schemas[example.db_id]))

    def test_value_list_leaf(self):
        tree = parse_sql("SELECT name FROM t WHERE x IN (1 , 2 , 3)")
        rendered = render_tree(tree)
        assert "Values(1, 2, 3)" in rendered
