import socket
import threading
import time

import pytest

import reference as ref
from conftest import open_tinysocial
from tinysocial import corpus, to_adm

from tinybdms.errors import CatalogError, DuplicateKey, IngestError, SemanticError

FEED = """
create dataverse F; use dataverse F;
create type T as closed { id: int32, msg: string }
create type Raw as open { id: int32 }
create dataset D(T) primary key id;
create feed f using socket_adaptor (("sockets"="127.0.0.1:0"), ("type-name"="T"), ("format"="adm"));
"""


def _connect(inst, s, feed="f", dataset="D"):
    (r,) = inst.execute(f"connect feed {feed} to dataset {dataset};", s)
    host, port = r.status["address"].rsplit(":", 1)
    return host, int(port)


def _send(addr, lines) -> list:
    with socket.create_connection(addr, timeout=30) as conn:
        conn.sendall("".join(line + "\n" for line in lines).encode())
        conn.shutdown(socket.SHUT_WR)
        return conn.makefile("r").read().split("\n")[:-1]


def _records(n, start=0):
    return [to_adm({"id": i, "msg": f"m{i}"}) for i in range(start, start + n)]


def test_feed_skips_bad_records_and_counts_them(make_instance):
    inst = make_instance()
    s = inst.session()
    inst.execute(FEED, s)
    addr = _connect(inst, s)
    lines = _records(150)
    lines[10] = "{ this is not adm"
    lines[20] = '{"id": 20, "msg": "x", "mood": "extra field on a closed type"}'
    lines[30] = to_adm({"id": 5, "msg": "repeats the key of record 5"})
    acks = _send(addr, lines)
    assert acks == ["OK 100", "OK 150"]
    pipe = inst.feeds.active[("F", "f")]
    assert (pipe.stats.stored, pipe.stats.rejected) == (147, 3)
    ids = inst.query("for $d in dataset D return $d.id;", s)
    assert sorted(ids) == [i for i in range(150) if i not in (10, 20, 30)]


def test_feed_applies_function(make_instance):
    inst = make_instance()
    s = inst.session()
    inst.execute(FEED, s)
    inst.execute('create function tag($r) { {"id": $r.id, "msg": string-concat(["<", $r.msg, ">"])} };'
                 'create feed g using socket_adaptor (("sockets"="127.0.0.1:0"), ("type-name"="Raw"), '
                 '("format"="adm")) apply function tag;', s)
    addr = _connect(inst, s, "g")
    _send(addr, _records(3))
    assert sorted(inst.query("for $d in dataset D return $d.msg;", s)) == ["<m0>", "<m1>", "<m2>"]


def test_feed_type_must_match_dataset(make_instance):
    inst = make_instance()
    s = inst.session()
    inst.execute(FEED, s)
    inst.execute('create feed h using socket_adaptor (("sockets"="127.0.0.1:0"), ("type-name"="Raw"), '
                 '("format"="adm"));', s)
    with pytest.raises(IngestError):
        inst.execute("connect feed h to dataset D;", s)


def test_feed_intake_blocks_when_store_is_slow(make_instance):
    inst = make_instance()
    s = inst.session()
    inst.execute(FEED, s)
    addr = _connect(inst, s)
    gate = threading.Event()
    real_insert = inst.txn.insert

    def slow_insert(store, record):
        gate.wait()
        return real_insert(store, record)

    inst.txn.insert = slow_insert
    sender = threading.Thread(target=_send, args=(addr, _records(2000)))
    sender.start()
    time.sleep(0.5)
    pipe = inst.feeds.active[("F", "f")]
    held_back = pipe.stats.received
    assert 0 < held_back < 100  # bounded by the connector queues, not by the input size
    gate.set()
    sender.join(30)
    assert pipe.stats.received == 2000
    assert inst.query("count(for $d in dataset D return $d);", s) == [2000]


def test_disconnect_and_drop_rules(make_instance):
    inst = make_instance()
    s = inst.session()
    inst.execute(FEED, s)
    _connect(inst, s)
    with pytest.raises(CatalogError):
        inst.execute("drop dataverse F;", s)
    inst.execute("disconnect feed f from dataset D;", s)
    inst.execute("drop dataverse F;", s)


def test_address_in_use_is_reported(make_instance):
    inst = make_instance()
    s = inst.session()
    busy = socket.socket()
    busy.bind(("127.0.0.1", 0))
    busy.listen(1)
    port = busy.getsockname()[1]
    try:
        inst.execute(FEED.replace("127.0.0.1:0", f"127.0.0.1:{port}"), s)
        with pytest.raises(IngestError):
            inst.execute("connect feed f to dataset D;", s)
    finally:
        busy.close()


# ------------------------------------------------------------- load / external

LOADABLE = """
create dataverse L; use dataverse L;
create type T as open { id: int32, v: int32 }
create dataset D(T) primary key id;
create index vIdx on D(v);
"""


def _load(inst, s, path):
    return inst.execute(f'load dataset D using localfs (("path"="localhost://{path}"), ("format"="adm"));', s)


def test_load_into_non_empty_dataset_fails(make_instance, tmp_path):
    inst = make_instance()
    s = inst.session()
    inst.execute(LOADABLE, s)
    path = tmp_path / "d.adm"
    path.write_text("\n".join(to_adm({"id": i, "v": i}) for i in range(10)))
    inst.execute('insert into dataset D ({"id": 100, "v": 1});', s)
    with pytest.raises(IngestError):
        _load(inst, s, path)


@pytest.mark.parametrize("bad, error", [
    ('{"id": 3, "v": ', IngestError),
    ('{"v": 3}', IngestError),
    ('{"id": 1, "v": 9}', DuplicateKey),
])
def test_bad_record_aborts_whole_load(make_instance, tmp_path, bad, error):
    inst = make_instance()
    s = inst.session()
    inst.execute(LOADABLE, s)
    path = tmp_path / "d.adm"
    path.write_text("\n".join([to_adm({"id": i, "v": i}) for i in range(5)] + [bad]))
    with pytest.raises(error):
        _load(inst, s, path)
    assert inst.query("count(for $d in dataset D return $d);", s) == [0]


def test_loaded_equals_inserted(make_instance, tmp_path):
    recs = [{"id": i, "v": (i * 37) % 11} for i in range(300)]
    path = tmp_path / "d.adm"
    path.write_text("\n".join(to_adm(r) for r in recs))
    a, b = make_instance("a"), make_instance("b")
    sa, sb = a.session(), b.session()
    a.execute(LOADABLE, sa)
    b.execute(LOADABLE, sb)
    _load(a, sa, path)
    for r in recs:
        b.execute(f"insert into dataset D ({to_adm(r)});", sb)
    for inst in (a, b):
        store = inst.catalog.store("L", "D")
        inst.txn.flush(store)
    scans = [[list(idx.scan()) for part in i.catalog.store("L", "D").partitions for _, idx in part.indexes()]
             for i in (a, b)]
    assert scans[0] == scans[1]
    q = "for $d in dataset D where $d.v = 3 order by $d.id return $d.id;"
    assert a.query(q, sa) == b.query(q, sb) == [r["id"] for r in recs if r["v"] == 3]


def _external(inst, s, path, rows=None):
    if rows is not None:
        path.write_text(rows)
    inst.execute(f"""
        create dataverse E; use dataverse E;
        create type Row as closed {{ ip: string, n: int32, when: datetime, note: string? }}
        create external dataset R(Row) using localfs
            (("path"="localhost://{path}"), ("format"="delimited-text"), ("delimiter"="|"));
    """, s)


def test_external_dataset_rows(make_instance, tmp_path):
    inst = make_instance()
    s = inst.session()
    _external(inst, s, tmp_path / "r.txt", "1.2.3.4|5|2013-01-01T10:00:00|hi\n5.6.7.8|6|2013-01-02T10:00:00|\n")
    got = inst.query("for $r in dataset R order by $r.n return [$r.ip, $r.n, $r.note];", s)
    assert got == [["1.2.3.4", 5, "hi"], ["5.6.7.8", 6, None]]


def test_external_empty_file_is_empty(make_instance, tmp_path):
    inst = make_instance()
    s = inst.session()
    _external(inst, s, tmp_path / "r.txt", "")
    assert inst.query("for $r in dataset R return $r;", s) == []


@pytest.mark.parametrize("rows", ["1.2.3.4|5\n", "1.2.3.4|five|2013-01-01T10:00:00|x\n"])
def test_external_bad_rows_name_the_line(make_instance, tmp_path, rows):
    inst = make_instance()
    s = inst.session()
    _external(inst, s, tmp_path / "r.txt", "1.2.3.4|5|2013-01-01T10:00:00|ok\n" + rows)
    with pytest.raises(Exception) as e:
        inst.query("for $r in dataset R return $r;", s)
    assert "r.txt:2" in str(e.value)


def test_external_missing_file(make_instance, tmp_path):
    inst = make_instance()
    s = inst.session()
    _external(inst, s, tmp_path / "nowhere.txt")
    with pytest.raises(Exception) as e:
        inst.query("for $r in dataset R return $r;", s)
    assert "not found" in str(e.value)


def test_external_dataset_is_read_only(make_instance, tmp_path):
    inst = make_instance()
    s = inst.session()
    _external(inst, s, tmp_path / "r.txt", "")
    with pytest.raises(SemanticError):
        inst.execute('insert into dataset R ({"ip": "x", "n": 1, "when": datetime("2013-01-01T00:00:00")});', s)
    with pytest.raises(SemanticError):
        inst.execute("create index ix on R(n);", s)


def test_feed_and_load_give_same_corpus_answers(tinysocial_data, tinysocial_files, tmp_path):
    """The TinySocial messages arrive once by load and once over the feed."""
    loaded, s1 = open_tinysocial(tmp_path / "load", tinysocial_files)
    fed, s2 = open_tinysocial(tmp_path / "feed", tinysocial_files)
    try:
        fed.execute("disconnect feed socket_feed from dataset MugshotMessages;"
                    "delete $m from dataset MugshotMessages;", s2)
        assert fed.query("count(for $m in dataset MugshotMessages return $m);", s2) == [0]
        (r,) = fed.execute("connect feed socket_feed to dataset MugshotMessages;", s2)
        host, port = r.status["address"].rsplit(":", 1)
        _send((host, int(port)), [to_adm(m) for m in tinysocial_data.messages])
        for name in ("q03_equijoin.aql", "q08_simple_aggregation.aql", "q09_group_sort_limit.aql",
                     "q11_fuzzy_join.aql"):
            (a,) = [x.values for x in loaded.execute(corpus(name), s1) if x.kind == "query"]
            (b,) = [x.values for x in fed.execute(corpus(name), s2) if x.kind == "query"]
            assert ref.bag(a) == ref.bag(b), name
    finally:
        loaded.close()
        fed.close()


def test_feed_joint_is_only_an_interface(make_instance):
    from tinybdms.ingest import FeedJoint

    inst = make_instance()
    s = inst.session()
    inst.execute(FEED, s)
    _connect(inst, s)
    with pytest.raises(NotImplementedError):
        FeedJoint(inst.feeds.active[("F", "f")]).subscribe(print)
