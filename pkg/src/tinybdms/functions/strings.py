"""String and similarity functions."""

from __future__ import annotations

import functools
import re

from ..adm.binary import encode_key
from ..adm.values import Bag, type_name
from ..errors import QueryError, TypeMismatch

_TOKEN_RE = re.compile(r"[^\W_]+")


def _str(v, fn: str) -> str:
    if not isinstance(v, str):
        raise TypeMismatch(f"{fn} expects a string, got {type_name(v)}")
    return v


def word_tokens(s: str) -> Bag:
    """Lowercased alphanumeric runs. The keyword index uses the same tokens."""
    return Bag(_TOKEN_RE.findall(_str(s, "word-tokens").lower()))


def tokens(s: str) -> list[str]:
    return _TOKEN_RE.findall(s.lower())


def edit_distance(a, b) -> int:
    """Levenshtein distance over strings or ordered lists."""
    if isinstance(a, str) and isinstance(b, str) or isinstance(a, list) and isinstance(b, list):
        return _levenshtein(a, b, None)
    raise TypeMismatch(f"edit-distance expects two strings or two lists, got {type_name(a)}, {type_name(b)}")


def _levenshtein(a, b, limit: int | None) -> int:
    if len(a) < len(b):
        a, b = b, a
    if limit is not None and len(a) - len(b) > limit:
        return limit + 1
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        best = i
        for j, cb in enumerate(b, 1):
            d = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb))
            cur.append(d)
            if d < best:
                best = d
        if limit is not None and best > limit:
            return limit + 1
        prev = cur
    return prev[-1]


def edit_distance_check(a, b, threshold) -> list:
    """``[d <= t, d]``; gives up once every row exceeds ``t`` and then reports
    ``t + 1`` as the distance."""
    if isinstance(threshold, bool) or not isinstance(threshold, int):
        raise TypeMismatch("edit-distance-check threshold must be an integer")
    if not (isinstance(a, str) and isinstance(b, str) or isinstance(a, list) and isinstance(b, list)):
        raise TypeMismatch("edit-distance-check expects two strings or two lists")
    d = _levenshtein(a, b, threshold)
    return [d <= threshold, d]


def _distinct(coll, fn: str) -> set:
    if isinstance(coll, (list, Bag)):
        return {encode_key(x) for x in coll}
    raise TypeMismatch(f"{fn} expects a list or bag, got {type_name(coll)}")


def similarity_jaccard(a, b) -> float:
    """|A ∩ B| / |A ∪ B| over distinct elements; two empty inputs give 1.0."""
    sa, sb = _distinct(a, "similarity-jaccard"), _distinct(b, "similarity-jaccard")
    union = len(sa | sb)
    if union == 0:
        return 1.0
    return len(sa & sb) / union


def similarity_jaccard_check(a, b, threshold) -> list:
    s = similarity_jaccard(a, b)
    return [s >= threshold, s]


def contains(s, sub) -> bool:
    return _str(sub, "contains") in _str(s, "contains")


@functools.lru_cache(maxsize=256)
def _like_regex(pattern: str) -> re.Pattern:
    out = []
    i = 0
    while i < len(pattern):
        c = pattern[i]
        if c == "\\" and i + 1 < len(pattern):
            out.append(re.escape(pattern[i + 1]))
            i += 2
            continue
        out.append(".*" if c == "%" else "." if c == "_" else re.escape(c))
        i += 1
    return re.compile("".join(out), re.DOTALL)


def like(s, pattern) -> bool:
    """SQL ``LIKE``: ``%`` any run, ``_`` one character, ``\\`` escapes."""
    return _like_regex(_str(pattern, "like")).fullmatch(_str(s, "like")) is not None


@functools.lru_cache(maxsize=256)
def _regex(pattern: str, flags: str = "") -> re.Pattern:
    f = 0
    for ch in flags:
        f |= {"i": re.IGNORECASE, "s": re.DOTALL, "m": re.MULTILINE, "x": re.VERBOSE}.get(ch, 0)
    try:
        return re.compile(pattern, f)
    except re.error as e:
        raise QueryError(f"invalid regular expression {pattern!r}: {e}") from None


def matches(s, pattern, flags="") -> bool:
    """True if the (Python ``re``) pattern occurs anywhere in ``s``."""
    return _regex(_str(pattern, "matches"), flags).search(_str(s, "matches")) is not None


_GROUP_REF = re.compile(r"\$(\d+)")


def replace(s, pattern, replacement, flags="") -> str:
    """Regex replace of every match; ``$1`` in the replacement names a group."""
    rx = _regex(_str(pattern, "replace"), flags)
    repl = _GROUP_REF.sub(r"\\g<\1>", _str(replacement, "replace").replace("\\", "\\\\"))
    return rx.sub(repl, _str(s, "replace"))


def string_length(s) -> int:
    return len(_str(s, "string-length"))


def lowercase(s) -> str:
    return _str(s, "lowercase").lower()


def uppercase(s) -> str:
    return _str(s, "uppercase").upper()


def starts_with(s, prefix) -> bool:
    return _str(s, "starts-with").startswith(_str(prefix, "starts-with"))


def ends_with(s, suffix) -> bool:
    return _str(s, "ends-with").endswith(_str(suffix, "ends-with"))


def string_concat(items) -> str:
    if not isinstance(items, (list, Bag)):
        raise TypeMismatch("string-concat expects a list of strings")
    if any(x is None for x in items):
        return None
    return "".join(_str(x, "string-concat") for x in items)


def string_join(items, sep) -> str:
    if not isinstance(items, (list, Bag)):
        raise TypeMismatch("string-join expects a list of strings")
    return _str(sep, "string-join").join(_str(x, "string-join") for x in items)


def substring(s, offset, length=None) -> str:
    """Zero-based substring."""
    s = _str(s, "substring")
    if length is None:
        return s[offset:]
    return s[offset:offset + length]
