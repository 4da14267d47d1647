"""Shared fixtures: a small multi-schema corpus with structural twins and
real SQLite databases, plus Spider-dataset discovery for the gated tests."""

from __future__ import annotations

import os
import sqlite3
from pathlib import Path

import pytest
from hypothesis import settings

from sqlsynth.corpus import Column, ParallelExample, Schema, Table

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


# ---------------------------------------------------------------------------
# Toy universe: seven schemas, each with a SQLite database
# ---------------------------------------------------------------------------

TOY_TABLES = {
    "gov": {
        "head": [("head_id", "number"), ("name", "text"), ("age", "number"),
                 ("born_state", "text"), ("department_id", "number")],
        "department": [("department_id", "number"), ("department_name", "text"),
                       ("budget", "number")],
    },
    "sports": {
        "game": [("game_id", "number"), ("season", "number"), ("attendance", "number")],
        "team": [("team_id", "number"), ("team_name", "text"), ("wins", "number")],
    },
    "cinema": {
        "film": [("film_id", "number"), ("title", "text"), ("gross_in_dollar", "number")],
        "director": [("director_id", "number"), ("director_name", "text")],
    },
    "campus": {
        "student": [("student_id", "number"), ("gpa", "number"), ("credits", "number")],
    },
    "library": {
        "book": [("book_id", "number"), ("pages", "number"), ("year_published", "number")],
        "author": [("author_id", "number"), ("author_name", "text")],
    },
    "clinic": {
        "patient": [("patient_id", "number"), ("visits", "number"), ("weight", "number")],
    },
    "shop": {
        "product": [("product_id", "number"), ("price", "number"), ("stock", "number")],
    },
}

TOY_ROWS = {
    ("gov", "head"): [
        (1, "Jamie Baker", 43, "California", 1),
        (2, "Morgan Hall", 56, "Ohio", 2),
        (3, "Alex Rivera", 61, "California", 1),
        (4, "Sam Porter", 38, "Texas", 2),
        (5, "Robin Shaw", 69, "Nevada", 1),
    ],
    ("gov", "department"): [
        (1, "Treasury", 11200), (2, "Energy", 8400),
    ],
    ("sports", "game"): [
        (1, 2005, 31000), (2, 2007, 29000), (3, 2009, 35500),
        (4, 2012, 40100), (5, 2014, 27800),
    ],
    ("sports", "team"): [
        (1, "Falcons", 12), (2, "Harbor Cats", 9), (3, "Miners", 17),
    ],
    ("cinema", "film"): [
        (1, "Dust Road", 310), (2, "Night Ferry", 540),
        (3, "Paper Sun", 470), (4, "Gold Coast", 150),
    ],
    ("cinema", "director"): [
        (1, "Dana Wells"), (2, "Chris Munro"),
    ],
    ("campus", "student"): [
        (1, 3.1, 90), (2, 2.7, 44), (3, 3.8, 120), (4, 3.4, 60),
    ],
    ("library", "book"): [
        (1, 120, 1998), (2, 340, 2004), (3, 190, 2004), (4, 505, 2011),
    ],
    ("library", "author"): [
        (1, "P. Onda"), (2, "L. Marsh"),
    ],
    ("clinic", "patient"): [
        (1, 4, 71.5), (2, 1, 88.0), (3, 6, 65.2),
    ],
    ("shop", "product"): [
        (1, 19.5, 14), (2, 7.25, 3), (3, 120.0, 55), (4, 42.0, 8),
    ],
}

# (db_id, question, sql) with cross-schema structural twins. Family 1 shares
# the count-filter skeleton across all seven schemas, family 2 the
# order-by-limit skeleton, family 3 plain averages, family 4 group counts.
# Scaffolding words recur across schemas (so they survive frequency masking)
# while each donor phrases its question differently (so retrieved templates
# stay textually diverse); domain nouns appear in a single schema only.
TOY_EXAMPLES = [
    ("gov", "How many of the heads are older than 56 in total ?",
     "SELECT count(*) FROM head WHERE age > 56"),
    ("sports", "Count the total number of games that came later than season 2007 .",
     "SELECT count(*) FROM game WHERE season > 2007"),
    ("cinema", "What is the count of every single film with a gross of more than 400 ?",
     "SELECT count(*) FROM film WHERE gross_in_dollar > 400"),
    ("campus", "Give me the overall number of students with a gpa of more than 3 .",
     "SELECT count(*) FROM student WHERE gpa > 3"),
    ("library", "How many of the books out there have more than 150 pages in them ?",
     "SELECT count(*) FROM book WHERE pages > 150"),
    ("clinic", "Count all of the patients that have more than 2 visits on record please .",
     "SELECT count(*) FROM patient WHERE visits > 2"),
    ("shop", "Find the total count of the products with a stock of more than 10 now .",
     "SELECT count(*) FROM product WHERE stock > 10"),

    ("gov", "Show me the name of the head with the highest age .",
     "SELECT name FROM head ORDER BY age DESC LIMIT 1"),
    ("sports", "What is the name of the single team with the most wins of them all ?",
     "SELECT team_name FROM team ORDER BY wins DESC LIMIT 1"),
    ("cinema", "Find the title of the top film sorted by the gross it made .",
     "SELECT title FROM film ORDER BY gross_in_dollar DESC LIMIT 1"),
    ("library", "Give me the one book out there with the most pages overall .",
     "SELECT book_id FROM book ORDER BY pages DESC LIMIT 1"),
    ("shop", "Show me the single product that has the highest price on record .",
     "SELECT product_id FROM product ORDER BY price DESC LIMIT 1"),
    ("campus", "What is the top student when sorted by the gpa they have now ?",
     "SELECT student_id FROM student ORDER BY gpa DESC LIMIT 1"),
    ("clinic", "Find the one patient with the highest number of visits in total please .",
     "SELECT patient_id FROM patient ORDER BY visits DESC LIMIT 1"),

    ("gov", "What is the average age of all of the heads ?",
     "SELECT avg(age) FROM head"),
    ("cinema", "Show me the average gross across every single film please .",
     "SELECT avg(gross_in_dollar) FROM film"),
    ("campus", "Give me the overall average of the gpa for the students now .",
     "SELECT avg(gpa) FROM student"),
    ("clinic", "Find the average weight value across all of the patients on record .",
     "SELECT avg(weight) FROM patient"),
    ("sports", "What is the overall average for the attendance of the games out there ?",
     "SELECT avg(attendance) FROM game"),
    ("library", "Across every book out there show me the average pages value please .",
     "SELECT avg(pages) FROM book"),
    ("shop", "What do the products average out to in price overall now ?",
     "SELECT avg(price) FROM product"),

    ("gov", "For each state show me the number of heads that are from there .",
     "SELECT born_state , count(*) FROM head GROUP BY born_state"),
    ("sports", "For each season give me the count of games played in them all .",
     "SELECT season , count(*) FROM game GROUP BY season"),
    ("library", "For each year out there find the total number of books published then .",
     "SELECT year_published , count(*) FROM book GROUP BY year_published"),
    ("cinema", "For each director what is the overall count of films they made ?",
     "SELECT director_name , count(*) FROM director GROUP BY director_name"),
    ("clinic", "For each weight on record show me how many patients are known please .",
     "SELECT weight , count(*) FROM patient GROUP BY weight"),
    ("shop", "For each stock value give me how many products are held now .",
     "SELECT stock , count(*) FROM product GROUP BY stock"),

    ("gov", "List the names of the heads born in California sorted in order .",
     "SELECT name FROM head WHERE born_state = 'California' ORDER BY name ASC"),
    ("gov", "Show me the department names and the ages of their heads now .",
     "SELECT T1.department_name , T2.age FROM department AS T1 "
     "JOIN head AS T2 ON T1.department_id = T2.department_id"),
]


def _build_schema(db_id: str, db_path: Path | None) -> Schema:
    tables = tuple(
        Table(name, tuple(Column(cn, ct) for cn, ct in cols))
        for name, cols in TOY_TABLES[db_id].items()
    )
    return Schema(db_id, tables, db_path=db_path)


@pytest.fixture(scope="session")
def toy_db_dir(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("toy_dbs")
    for db_id, tables in TOY_TABLES.items():
        db_home = root / db_id
        db_home.mkdir()
        path = db_home / f"{db_id}.sqlite"
        with sqlite3.connect(path) as conn:
            for table_name, cols in tables.items():
                decls = ", ".join(
                    f'"{c}" ' + ("TEXT" if t == "text" else "NUMERIC")
                    for c, t in cols)
                conn.execute(f'CREATE TABLE "{table_name}" ({decls})')
                rows = TOY_ROWS.get((db_id, table_name), [])
                if rows:
                    marks = ", ".join("?" for _ in cols)
                    conn.executemany(
                        f'INSERT INTO "{table_name}" VALUES ({marks})', rows)
            conn.commit()
    return root


@pytest.fixture(scope="session")
def toy_schemas(toy_db_dir) -> dict[str, Schema]:
    return {
        db_id: _build_schema(db_id, toy_db_dir / db_id / f"{db_id}.sqlite")
        for db_id in TOY_TABLES
    }


@pytest.fixture(scope="session")
def toy_examples() -> list[ParallelExample]:
    return [ParallelExample(q, sql, db) for db, q, sql in TOY_EXAMPLES]


@pytest.fixture(scope="session")
def toy_freq_table(toy_examples):
    from sqlsynth.masking import build_frequency_table

    return build_frequency_table(toy_examples)


@pytest.fixture(scope="session")
def toy_index(toy_examples, toy_schemas):
    from sqlsynth.retrieval import build_index

    index = build_index(toy_examples, toy_schemas)
    assert not index.quarantine, index.quarantine
    return index


@pytest.fixture(scope="session")
def toy_filter_model(toy_examples, toy_schemas, toy_freq_table):
    from sqlsynth.filtering import train_filter

    model, _report = train_filter(
        toy_examples, toy_schemas, toy_freq_table,
        epochs=8, learning_rate=0.5, seed=7)
    return model


# ---------------------------------------------------------------------------
# Spider dataset discovery (acceptance tests marked with these skip cleanly
# when the dataset is not mounted)
# ---------------------------------------------------------------------------

def spider_dir() -> Path | None:
    candidate = os.environ.get("SPIDER_DIR", "")
    if candidate and Path(candidate).exists():
        return Path(candidate)
    default = Path(__file__).resolve().parent.parent / "data" / "spider"
    if default.exists():
        return default
    return None


def spider_eval_dir() -> Path | None:
    candidate = os.environ.get("SPIDER_EVAL_DIR", "")
    if candidate and Path(candidate).exists():
        return Path(candidate)
    return None


requires_spider = pytest.mark.skipif(
    spider_dir() is None,
    reason="Spider dataset not available (set SPIDER_DIR to the extracted "
           "dataset root with train_spider.json, tables.json, database/)")


@pytest.fixture(scope="session")
def spider():
    """Loaded Spider training split; skips the test when absent."""
    root = spider_dir()
    if root is None:
        pytest.skip("Spider dataset not available")
    from sqlsynth.corpus import load_examples, load_schemas

    examples = []
    for name in ("train_spider.json", "train_others.json"):
        path = root / name
        if path.exists():
            examples.extend(load_examples(path).examples)
    schemas = load_schemas(root / "tables.json", root / "database")
    dev_path = root / "dev.json"
    dev = load_examples(dev_path).examples if dev_path.exists() else []
    return {"examples": examples, "schemas": schemas, "dev": dev, "root": root}
