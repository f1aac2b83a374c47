"""Golden EXPLAIN output. Regenerate with ``python3 tests/golden/regen.py``."""

from pathlib import Path

import pytest

from tinysocial import corpus

GOLDEN = Path(__file__).parent / "golden"
QUERIES = sorted(p.stem for p in GOLDEN.glob("*.plan"))


def test_golden_set():
    assert QUERIES == ["q02_range_scan", "q03_equijoin", "q08_simple_aggregation", "q09_group_sort_limit",
                       "q12_index_hint"]


@pytest.mark.parametrize("name", QUERIES)
def test_plan_matches_golden(tinysocial, name):
    inst, s = tinysocial
    assert inst.explain(corpus(name + ".aql"), s) + "\n" == (GOLDEN / f"{name}.plan").read_text()


def test_unoptimized_plan_scans(make_instance, tinysocial_files):
    from conftest import open_tinysocial

    inst, s = open_tinysocial(Path(make_instance().config.data_dir).parent / "raw", tinysocial_files,
                              partitions=2)
    try:
        inst.optimize = False
        text = inst.explain(corpus("q02_range_scan.aql"), s)
        assert "secondary-index-search" not in text and "dataset-scan" in text
    finally:
        inst.close()


@pytest.mark.parametrize("name", ["q02_range_scan", "q03_equijoin", "q04_outer_join", "q05_spatial_join",
                                  "q06_fuzzy_selection", "q07_existential", "q08_simple_aggregation",
                                  "q09_group_sort_limit", "q11_fuzzy_join", "q12_index_hint"])
def test_rewrites_preserve_results(tinysocial, name):
    import reference as ref

    inst, s = tinysocial
    text = corpus(name + ".aql")
    optimized = inst.query(text, s)
    inst.optimize = False
    try:
        plain = inst.query(text, s)
    finally:
        inst.optimize = True
    if name + ".aql" in ref.ORDERED:
        assert ref.seq(plain) == ref.seq(optimized)
    else:
        assert ref.bag(plain) == ref.bag(optimized)
