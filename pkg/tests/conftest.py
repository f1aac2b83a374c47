from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tinysocial import generate, setup_script  # noqa: E402

from tinybdms.config import Config  # noqa: E402
from tinybdms.instance import Instance  # noqa: E402

# criterion number -> (passed, title, detail), filled by test_acceptance
ACCEPTANCE: dict = {}


@pytest.fixture
def make_instance(tmp_path):
    """Factory for open instances in a fresh directory; closed at teardown."""
    opened = []

    def make(name: str = "db", **overrides) -> Instance:
        overrides.setdefault("fsync", False)
        faults = overrides.pop("faults", None)
        optimize = overrides.pop("optimize", True)
        inst = Instance(Config(data_dir=str(tmp_path / name), **overrides), faults=faults, optimize=optimize).open()
        opened.append(inst)
        return inst

    yield make
    for inst in opened:
        inst.close()


@pytest.fixture(scope="session")
def tinysocial_data():
    return generate()


@pytest.fixture(scope="session")
def tinysocial_files(tinysocial_data, tmp_path_factory):
    return tinysocial_data.write(tmp_path_factory.mktemp("tinysocial"))


def open_tinysocial(directory: Path, files: dict, partitions: int = 4, **overrides):
    """An instance with Data definitions 1 to 4 executed and the data loaded."""
    inst = Instance(Config(data_dir=str(directory), partitions=partitions, fsync=False, **overrides)).open()
    session = inst.session()
    inst.execute(setup_script(files), session)
    return inst, session


@pytest.fixture(scope="module")
def tinysocial(tinysocial_files, tmp_path_factory):
    inst, session = open_tinysocial(tmp_path_factory.mktemp("ts"), tinysocial_files)
    yield inst, session
    inst.close()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[n]
        line = f"{'PASS' if ok else 'FAIL'} criterion {n:>2}: {title}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)
