import datetime as dt
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tinybdms.adm.compare import Ordering, compare_values, sort_key
from tinybdms.adm.text import parse_adm_stream, parse_adm_text, print_adm
from tinybdms.adm.values import Bag, Duration, Int64, Point, adm_equal
from tinybdms.errors import AdmSyntaxError, ArithmeticOverflow

INT32 = st.integers(-(2 ** 31), 2 ** 31 - 1)
FINITE = st.floats(allow_nan=False, allow_infinity=False)

scalars = st.one_of(
    st.none(), st.booleans(), INT32, FINITE, st.text(max_size=12),
    st.integers(-(2 ** 63), 2 ** 63 - 1).map(Int64),
    st.datetimes(min_value=dt.datetime(1900, 1, 1), max_value=dt.datetime(2100, 1, 1)).map(
        lambda d: d.replace(microsecond=d.microsecond // 1000 * 1000)),
    st.dates(min_value=dt.date(1900, 1, 1), max_value=dt.date(2100, 1, 1)),
    st.builds(Point, FINITE, FINITE),
    st.builds(Duration, st.integers(0, 500), st.integers(0, 10 ** 9)),
)

values = st.recursive(
    scalars,
    lambda inner: st.one_of(
        st.lists(inner, max_size=4),
        st.lists(inner, max_size=4).map(Bag),
        st.dictionaries(st.text(min_size=1, max_size=6), inner, max_size=4),
    ),
    max_leaves=12,
)


@settings(max_examples=300, deadline=None)
@given(values)
def test_print_parse_roundtrip(v):
    assert adm_equal(parse_adm_text(print_adm(v)), v)


@settings(max_examples=300, deadline=None)
@given(values)
def test_printing_is_canonical(v):
    text = print_adm(v)
    assert print_adm(parse_adm_text(text)) == text


@given(st.lists(values, max_size=6))
def test_stream_of_lines(vs):
    text = "\n".join(print_adm(v) for v in vs)
    assert all(adm_equal(a, b) for a, b in zip(parse_adm_stream(text), vs))


@given(values, values, values)
def test_sort_key_is_a_total_order(a, b, c):
    ka, kb, kc = sort_key(a), sort_key(b), sort_key(c)
    assert (ka < kb) + (kb < ka) + (ka == kb) == 1
    if ka <= kb and kb <= kc:
        assert ka <= kc


@given(st.one_of(INT32, FINITE), st.one_of(INT32, FINITE))
def test_numeric_comparison_matches_python(a, b):
    expected = Ordering.LESS if a < b else Ordering.GREATER if a > b else Ordering.EQUAL
    assert compare_values(a, b) is expected
    assert (sort_key(a) < sort_key(b)) == (a < b)


def test_nulls_sort_first_and_nan_is_incomparable():
    assert compare_values(None, 1) is Ordering.LESS
    assert compare_values(math.nan, 1.0) is Ordering.INCOMPARABLE
    assert compare_values("a", 1) is Ordering.INCOMPARABLE


def test_bags_compare_regardless_of_order():
    assert adm_equal(Bag([1, 2, 2]), Bag([2, 1, 2]))
    assert not adm_equal(Bag([1, 2]), Bag([1, 2, 2]))


@pytest.mark.parametrize("text, line, col", [
    ('{"a": 1,\n "b": }', 2, 7),
    ('[1, 2', 1, 6),
    ('point("1.0")', 1, 1),
])
def test_syntax_errors_report_position(text, line, col):
    with pytest.raises(AdmSyntaxError) as e:
        parse_adm_text(text)
    assert (e.value.line, e.value.column) == (line, col)


def test_literal_past_int32_becomes_int64():
    assert type(parse_adm_text("2147483647")) is int
    v = parse_adm_text("2147483648")
    assert isinstance(v, Int64) and v == 2 ** 31
    with pytest.raises(ArithmeticOverflow):
        parse_adm_text("9223372036854775808")
