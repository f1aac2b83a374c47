import pytest
from click.testing import CliRunner

from tinybdms.cli import main
from tinybdms.config import Config

SETUP = """
create dataverse C; use dataverse C;
create type T as open { id: int32 }
create dataset D(T) primary key id;
insert into dataset D ([{"id": 1}, {"id": 2}]);
"""


@pytest.fixture
def cli(tmp_path):
    runner = CliRunner()
    base = ["--data-dir", str(tmp_path / "db"), "--partitions", "2"]
    return lambda *args, **kw: runner.invoke(main, base + list(args), catch_exceptions=False, **kw)


def test_run_files_and_stdin(cli, tmp_path):
    script = tmp_path / "setup.aql"
    script.write_text(SETUP)
    r = cli("run", str(script))
    assert r.exit_code == 0
    assert r.output.count('"status": "ok"') == 5
    r = cli("run", input="for $d in dataset C.D order by $d.id return $d.id;")
    assert r.output == "1\n2\n"


def test_run_explain_and_errors(cli, tmp_path):
    cli("run", input=SETUP)
    r = cli("run", "--explain", input="for $d in dataset C.D where $d.id = 2 return $d.id;")
    assert r.output.startswith("-- plan\n") and r.output.endswith("2\n")
    bad = tmp_path / "bad.aql"
    bad.write_text("for for;")
    r = cli("run", str(bad))
    assert r.exit_code != 0 and "bad.aql" in r.output


def test_recover_prints_replay_summary(cli):
    cli("run", input=SETUP)
    r = cli("recover")
    assert r.exit_code == 0
    assert r.output.splitlines()[0].startswith("meta: ")
    assert all("committed txns" in line for line in r.output.splitlines())


def test_repl_over_stdin(cli):
    r = cli("repl", input=SETUP + "\\ds\n\\q\n")
    assert '"dataset": "D"' in r.output


def test_config_environment_overrides():
    env = {"TINYBDMS_PARTITIONS": "3", "TINYBDMS_FSYNC": "off", "TINYBDMS_LISTEN": "0.0.0.0:9"}
    cfg = Config.from_env(env, partitions=None, log_level="DEBUG")
    assert (cfg.partitions, cfg.fsync, cfg.listen, cfg.log_level) == (3, False, "0.0.0.0:9", "DEBUG")
    assert Config.from_env({}, partitions=5).partitions == 5
    assert Config.from_env({}).memory_budget == Config().memory_budget


@pytest.mark.parametrize("var, value", [("TINYBDMS_PARTITIONS", "many"), ("TINYBDMS_FSYNC", "perhaps")])
def test_config_rejects_bad_values(var, value):
    with pytest.raises(ValueError, match=var):
        Config.from_env({var: value})


def test_cli_reads_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("TINYBDMS_DATA_DIR", str(tmp_path / "envdb"))
    r = CliRunner().invoke(main, ["run"], input="create dataverse Env;")
    assert r.exit_code == 0
    assert (tmp_path / "envdb" / "log").is_dir()
