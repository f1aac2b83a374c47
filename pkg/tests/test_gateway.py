import io
import time

import pytest
from fastapi.testclient import TestClient

import reference as ref
from tinysocial import corpus

from tinybdms.adm.text import parse_adm_stream
from tinybdms.gateway.repl import EmbeddedBackend, ReplError, complete, repl_loop
from tinybdms.gateway.server import SESSION_HEADER, create_app


@pytest.fixture(scope="module")
def client(tinysocial):
    inst, _s = tinysocial
    with TestClient(create_app(inst)) as c:
        yield c


def post(client, text, mode="sync", sid=None, **params):
    headers = {SESSION_HEADER: sid} if sid else {}
    return client.post("/query", params={"mode": mode, **params}, content=text.encode(), headers=headers)


def wait(client, hid, timeout=30.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        r = client.get(f"/query/{hid}/status")
        if r.json()["status"] != "running":
            return r.json()
        time.sleep(0.02)
    raise AssertionError("query did not finish")


def test_sync_query_1_lists_datasets(client):
    r = post(client, corpus("q01_metadata.aql"))
    assert r.status_code == 200
    rows = list(parse_adm_stream(r.text))
    names = {(x["DataverseName"], x["Name"]) for x in rows if "DatasetName" not in x}
    assert ("TinySocial", "MugshotUsers") in names and ("Metadata", "Dataset") in names


def test_async_query_8_handle_flow(client, tinysocial_data):
    r = post(client, "use dataverse TinySocial;\n" + corpus("q08_simple_aggregation.aql"), mode="async")
    assert r.status_code == 202
    hid = r.json()["handle"]
    assert wait(client, hid)["status"] == "success"
    first = client.get(f"/query/{hid}/result")
    second = client.get(f"/query/{hid}/result")
    assert first.status_code == 200 and first.content == second.content
    (value,) = [v for v in parse_adm_stream(first.text) if not isinstance(v, dict)]
    assert ref.canon(value) == ref.canon(ref.q08(tinysocial_data)[0])
    assert client.delete(f"/query/{hid}").status_code == 204
    assert client.get(f"/query/{hid}/status").status_code == 404
    assert client.get(f"/query/{hid}/result").status_code == 404
    assert client.delete(f"/query/{hid}").status_code == 404


def test_sync_and_async_results_are_byte_identical(client):
    text = "use dataverse TinySocial;\n" + corpus("q09_group_sort_limit.aql")
    sync = post(client, text).content
    hid = post(client, text, mode="async").json()["handle"]
    wait(client, hid)
    assert client.get(f"/query/{hid}/result").content == sync


def test_syntax_error_is_400_with_caret(client):
    r = post(client, "use dataverse TinySocial;\nfor $u in dataset MugshotUsers\n  retrun $u;")
    assert r.status_code == 400
    body = r.json()
    assert (body["error"], body["line"], body["column"]) == ("syntax", 3, 3)
    assert body["caret"] == "  retrun $u;\n  ^"


def test_async_syntax_error_is_reported_at_once(client):
    r = post(client, "for for;", mode="async")
    assert r.status_code == 400 and r.json()["error"] == "syntax"


def test_semantic_error_is_400(client):
    r = post(client, "for $x in dataset TinySocial.Nope return $x;")
    assert r.status_code == 400 and r.json()["error"] == "semantic"


def test_runtime_error_is_500_with_trace_id(client):
    r = post(client, 'for $x in [1, 2] return $x + "a";')
    assert r.status_code == 500
    assert r.json()["trace_id"]


def test_failed_async_job_reports_structured_error(client):
    hid = post(client, 'for $x in [1, 2] return $x + "a";', mode="async").json()["handle"]
    status = wait(client, hid)
    assert status["status"] == "failed"
    assert status["error"]["error"] == "runtime" and status["error"]["trace_id"]
    assert client.get(f"/query/{hid}/result").status_code == 500


def test_unknown_handle_and_mode(client):
    assert client.get("/query/nope/status").status_code == 404
    assert post(client, "1;", mode="sideways").status_code == 400


def test_sessions_are_isolated(client):
    assert post(client, 'set simfunction "edit-distance"; set simthreshold "3";', sid="a").status_code == 200
    post(client, 'set simfunction "edit-distance"; set simthreshold "1";', sid="b")
    assert post(client, '"tonight" ~= "tonite";', sid="a").text == "true\n"
    assert post(client, '"tonight" ~= "tonite";', sid="b").text == "false\n"
    # no session header: a fresh session every time
    post(client, "use dataverse TinySocial;")
    assert post(client, "for $u in dataset MugshotUsers return $u;").status_code == 400


def test_ddl_returns_status_records(client):
    r = post(client, "create dataverse Scratch if not exists; drop dataverse Scratch;")
    rows = list(parse_adm_stream(r.text))
    assert [x["status"] for x in rows] == ["ok", "ok"]


def test_explain_parameter_prefixes_plan(client):
    r = post(client, "use dataverse TinySocial;\n" + corpus("q08_simple_aggregation.aql"), explain="true")
    assert r.text.split("\n")[1] == "-- plan" and "aggregate (global)" in r.text


# ---------------------------------------------------------------- repl

@pytest.mark.parametrize("text, done", [
    ("1;", True),
    ("1", False),
    ('"a;b"', False),
    ('"a;b";', True),
    ("1; // trailing comment", True),
    ("1 /* ; */", False),
    ("1 /* unterminated ;", False),
])
def test_statement_completion(text, done):
    assert complete(text) is done


def run_repl(inst, script: str) -> str:
    out = io.StringIO()
    repl_loop(EmbeddedBackend(inst), io.StringIO(script), out)
    return out.getvalue()


def test_repl_session(tinysocial):
    inst, _ = tinysocial
    out = run_repl(inst, "\\dv\n\\ds\nuse dataverse TinySocial;\nfor $u in dataset MugshotUsers\n"
                         "where $u.id = 1000 return $u.id;\n\\explain on\n"
                         + corpus("q08_simple_aggregation.aql") + ";\n\\explain off\n1 +\n;\n\\bogus\n\\quit\n2;\n")
    lines = out.splitlines()
    assert '"Metadata"' in lines and '"TinySocial"' in lines
    assert any('"dataset": "MugshotUsers"' in line for line in lines)
    assert "1000" in lines
    assert "explain on" in lines and "-- plan" in lines
    assert lines.index("-- plan") > lines.index("explain on")
    assert "explain off" in lines
    assert any(line.startswith("error:") for line in lines)
    assert any(line.startswith("unknown command") for line in lines)
    assert "2" not in lines  # nothing runs after \quit


def test_repl_errors_do_not_end_the_session(tinysocial):
    inst, _ = tinysocial
    out = run_repl(inst, "for for;\n7;\n")
    assert out.splitlines()[-1] == "7" and "error:" in out and "^" in out


def test_embedded_backend_raises_repl_error(tinysocial):
    inst, _ = tinysocial
    with pytest.raises(ReplError):
        EmbeddedBackend(inst).execute("retrun;")


def test_repl_ends_on_eof_with_pending_statement(tinysocial):
    inst, _ = tinysocial
    assert run_repl(inst, "41 + 1").strip() == "42"
