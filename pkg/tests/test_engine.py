"""AQL statements end to end through a small instance."""

import pytest

from tinybdms.adm.text import print_adm
from tinybdms.errors import (AqlSyntaxError, ArithmeticOverflow, CatalogError, ConformanceError, DuplicateKey,
                             SemanticError, TypeMismatch)

PEOPLE = """
create dataverse T; use dataverse T;
create type P as closed { id: int32, name: string, age: int32?, tags: {{ string }} }
create dataset People(P) primary key id;
insert into dataset People ([
  {"id": 1, "name": "ann", "age": 30, "tags": {{"a", "b"}}},
  {"id": 2, "name": "bob", "tags": {{"b"}}},
  {"id": 3, "name": "cy", "age": 25, "tags": {{}}}]);
"""


@pytest.fixture
def people(make_instance):
    inst = make_instance(partitions=3)
    s = inst.session()
    inst.execute(PEOPLE, s)
    return lambda q: inst.query(q, s)


@pytest.mark.parametrize("q, expected", [
    ("for $p in dataset People order by $p.id return $p.name;", ["ann", "bob", "cy"]),
    ("for $p in dataset People order by $p.age desc, $p.id return $p.id;", [1, 3, 2]),
    ('for $p in dataset People where some $t in $p.tags satisfies $t = "b" order by $p.id return $p.id;', [1, 2]),
    ('for $p in dataset People where every $t in $p.tags satisfies $t = "b" order by $p.id return $p.id;', [2, 3]),
    ("for $p in dataset People order by $p.id limit 1 offset 1 return $p.name;", ["bob"]),
    ("for $p in dataset People where $p.age > 26 return $p.name;", ["ann"]),
    ("for $p in dataset People return $p.missing;", [None, None, None]),
    ("let $x := 3 return $x * 2;", [6]),
    ('if (1 < 2) then "y" else "n";', ["y"]),
    ("for $i in [3, 1, 2] order by $i desc limit 2 return $i;", [3, 2]),
    ('string-length("héllo");', [5]),
    ("count(for $p in dataset People return $p);", [3]),
    ("max(for $p in dataset People return $p.age);", [None]),
    ("sql-max(for $p in dataset People return $p.age);", [30]),
    ('like("bob", "b%");', [True]),
])
def test_query(people, q, expected):
    got = people(q)
    assert got == expected


def test_group_by_counts_null_group(people):
    got = people("for $p in dataset People group by $a := $p.age with $p order by $a "
                 "return {\"a\": $a, \"n\": count($p)};")
    assert [(r["a"], r["n"]) for r in got] == [(None, 1), (25, 1), (30, 1)]


def test_temporal_arithmetic(people):
    (v,) = people('datetime("2014-01-01T00:00:00") + duration("P1D");')
    assert print_adm(v) == 'datetime("2014-01-02T00:00:00")'


def test_user_function(make_instance):
    inst = make_instance()
    s = inst.session()
    inst.execute(PEOPLE, s)
    inst.execute("create function older($a) { for $p in dataset People where $p.age > $a return $p.name };", s)
    assert inst.query("older(26);", s) == ["ann"]
    assert sorted(inst.query("older(0);", s)) == ["ann", "cy"]
    rows = inst.query('for $f in dataset Metadata.Function where $f.Name = "older" return $f.Params;', s)
    assert rows == [["a"]]


def test_modify_is_delete_then_insert(make_instance):
    inst = make_instance()
    s = inst.session()
    inst.execute(PEOPLE, s)
    inst.execute("delete $p from dataset People where $p.id = 2;", s)
    inst.execute('insert into dataset People ({"id": 2, "name": "bobby", "tags": {{}}});', s)
    assert inst.query("for $p in dataset People where $p.id = 2 return $p.name;", s) == ["bobby"]


@pytest.mark.parametrize("stmt, error", [
    ('insert into dataset People ({"id": 1, "name": "dup", "tags": {{}}});', DuplicateKey),
    ('insert into dataset People ({"id": 9, "name": "x", "tags": {{}}, "extra": 1});', ConformanceError),
    ('insert into dataset People ({"id": 9, "tags": {{}}});', ConformanceError),
    ("for $p in dataset Nope return $p;", SemanticError),
    ("for $p in dataset People return $q;", SemanticError),
    ("for $p in dataset People retur $p;", AqlSyntaxError),
    ("2147483647 + 1;", ArithmeticOverflow),
    ('"a" + 1;', TypeMismatch),
    ('for $x in [1, "a", 2] order by $x return $x;', TypeMismatch),
    ("create type N as closed { id: int32, next: N? }", CatalogError),
    ("create dataset D2(P) primary key nope;", CatalogError),
    ("create index ix on People(nope);", CatalogError),
    ("create dataverse T;", CatalogError),
])
def test_errors(make_instance, stmt, error):
    inst = make_instance()
    s = inst.session()
    inst.execute(PEOPLE, s)
    with pytest.raises(error):
        inst.execute(stmt, s)


def test_syntax_error_position(make_instance):
    inst = make_instance()
    with pytest.raises(AqlSyntaxError) as e:
        inst.execute("for $p in [1]\n  retur $p;")
    assert (e.value.line, e.value.column) == (2, 3)
    assert "return" in str(e.value)


def test_failed_statement_leaves_earlier_statements_applied(make_instance):
    inst = make_instance()
    s = inst.session()
    inst.execute(PEOPLE, s)
    with pytest.raises(DuplicateKey):
        inst.execute('insert into dataset People ({"id": 7, "name": "g", "tags": {{}}});'
                     'insert into dataset People ({"id": 1, "name": "dup", "tags": {{}}});', s)
    assert inst.query("for $p in dataset People where $p.id = 7 return $p.name;", s) == ["g"]


def test_open_type_accepts_extra_fields_closed_rejects(make_instance):
    inst = make_instance()
    s = inst.session()
    inst.execute("""
        create dataverse C; use dataverse C;
        create type O as open { id: int32 }
        create type K as closed { id: int32 }
        create dataset Op(O) primary key id;
        create dataset Cl(K) primary key id;
        insert into dataset Op ({"id": 1, "mood": "ok"});
    """, s)
    assert inst.query("for $x in dataset Op return $x.mood;", s) == ["ok"]
    with pytest.raises(ConformanceError):
        inst.execute('insert into dataset Cl ({"id": 1, "mood": "ok"});', s)


def test_create_index_on_populated_dataset_builds_it(make_instance):
    inst = make_instance()
    s = inst.session()
    inst.execute(PEOPLE, s)
    inst.execute("create index ageIdx on People(age);", s)
    q = "for $p in dataset People where $p.age >= 26 return $p.name;"
    assert "secondary-index-search" in inst.explain(q, s)
    assert inst.query(q, s) == ["ann"]


def test_drop_dataverse_removes_its_metadata(make_instance):
    inst = make_instance()
    s = inst.session()
    inst.execute(PEOPLE, s)
    inst.execute("drop dataverse T;", s)
    assert inst.query('for $d in dataset Metadata.Dataset where $d.DataverseName = "T" return $d;', s) == []
    inst.execute("drop dataverse T if exists;", s)


def test_set_statements_are_session_scoped(make_instance):
    inst = make_instance()
    a, b = inst.session(), inst.session()
    inst.execute('set simfunction "edit-distance"; set simthreshold "1";', a)
    assert inst.query('"tonight" ~= "tonite";', a) == [False]
    inst.execute('set simthreshold "3";', a)
    assert inst.query('"tonight" ~= "tonite";', a) == [True]
    # the other session still has the default, jaccard, which needs collections
    with pytest.raises(TypeMismatch):
        inst.query('"tonight" ~= "tonite";', b)
    assert inst.query("[1, 2] ~= [1, 2];", b) == [True]
