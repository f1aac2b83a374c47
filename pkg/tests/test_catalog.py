import pytest
from hypothesis import given
from hypothesis import strategies as st

from tinybdms.adm.types import (EXTRA_FIELD_CLOSED, MISSING_REQUIRED, FieldDef, RecordType, TypeRef,
                                conforms_expr)
from tinybdms.aql.parser import parse_type
from tinybdms.config import Config
from tinybdms.instance import Instance

FIELDS = st.lists(
    st.builds(FieldDef, st.sampled_from(["a", "b", "c", "d"]), st.sampled_from([TypeRef("int32"), TypeRef("string")]),
              st.booleans()),
    max_size=4, unique_by=lambda f: f.name)
VALUES = st.dictionaries(st.sampled_from(["a", "b", "c", "d", "e"]),
                         st.one_of(st.none(), st.integers(-5, 5), st.text(max_size=3)), max_size=5)


@given(FIELDS, VALUES)
def test_closed_conformance_implies_open_conformance(fields, value):
    closed, opened = RecordType(fields, open=False), RecordType(fields, open=True)
    if conforms_expr(value, closed, None).ok:
        assert conforms_expr(value, opened, None).ok


def test_conformance_reasons():
    t = parse_type("closed { id: int32, end-date: date? }")
    assert conforms_expr({"id": 1}, t, None).ok
    assert conforms_expr({"end-date": None}, t, None).violations == [("id", MISSING_REQUIRED)]
    assert conforms_expr({"id": 1, "mood": "ok"}, t, None).violations == [("mood", EXTRA_FIELD_CLOSED)]


SETUP = """
create dataverse K; use dataverse K;
create type T as open { id: int32, name: string }
create dataset D(T) primary key id;
create index nameIdx on D(name);
create function hello() { "hi" };
"""


def test_catalog_survives_restart(tmp_path):
    cfg = Config(data_dir=str(tmp_path), partitions=3, fsync=False)
    with Instance(cfg) as inst:
        s = inst.session()
        inst.execute(SETUP, s)
        inst.execute('insert into dataset D ({"id": 1, "name": "x"});', s)
    # a different default partition count does not change the existing dataset
    with Instance(cfg, partitions=1) as inst:
        s = inst.session(dataverse="K")
        assert inst.query("hello();", s) == ["hi"]
        assert inst.catalog.store("K", "D").n == 3
        assert [i.name for i in inst.catalog.secondary_indexes("K", "D")] == ["nameIdx"]
        assert inst.query('for $d in dataset D where $d.name = "x" return $d.id;', s) == [1]
        assert inst.catalog.integrity_problems() == []


def test_metadata_is_queryable(make_instance):
    inst = make_instance()
    s = inst.session()
    inst.execute(SETUP, s)
    rows = inst.query('for $x in dataset Metadata.Index where $x.DataverseName = "K" order by $x.Name '
                      'return [$x.DatasetName, $x.Name, $x.IsPrimary];', s)
    assert rows == [["D", "D", True], ["D", "nameIdx", False]]
    assert inst.query('for $t in dataset Metadata.Datatype where $t.DataverseName = "K" return $t.Name;',
                      s) == ["T"]


def test_metadata_dataverse_is_read_only(make_instance):
    from tinybdms.errors import SemanticError

    inst = make_instance()
    with pytest.raises(SemanticError):
        inst.execute("drop dataverse Metadata;")
    with pytest.raises(SemanticError):
        inst.execute('insert into dataset Metadata.Dataverse ({"DataverseName": "Z"});')


@pytest.mark.parametrize("stmt", [
    "drop type T;",  # still used by D
    "create index nameIdx on D(name);",
    "drop index D.nope;",
    "drop dataset Nope;",
    "create function hello() { 1 };",
])
def test_ddl_conflicts(make_instance, stmt):
    from tinybdms.errors import SemanticError

    inst = make_instance()
    s = inst.session()
    inst.execute(SETUP, s)
    with pytest.raises(SemanticError):
        inst.execute(stmt, s)


def test_if_exists_and_if_not_exists(make_instance):
    inst = make_instance()
    s = inst.session()
    inst.execute(SETUP, s)
    inst.execute("create dataverse K if not exists; drop dataset Nope if exists; drop index D.nope if exists;"
                 "create type T if not exists as open { id: int32 }", s)
