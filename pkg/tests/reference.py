"""Naive reference answers for the TinySocial corpus.

Each query is written out by hand as plain Python loops over the generated
records, with its own edit distance, Jaccard and tokenizer, so nothing here
shares code with the engine. ``canon`` maps engine output and reference
output to the same comparable form.
"""

from __future__ import annotations

import datetime as dt
import math
import re
from collections import Counter

from tinysocial import Multi

USERS_FROM = dt.datetime(2010, 7, 22)
USERS_TO = dt.datetime(2012, 7, 29, 23, 59, 59)

METADATA_DATASETS = ["Dataverse", "Datatype", "Dataset", "Index", "Function", "Feed"]
SECONDARY_INDEXES = [("MugshotUsers", "msUserSinceIdx"), ("MugshotMessages", "msTimestampIdx"),
                     ("MugshotMessages", "msAuthorIdx"), ("MugshotMessages", "msSenderLocIndex"),
                     ("MugshotMessages", "msMessageIdx")]


# ---------------------------------------------------------------- helpers

def levenshtein(a: str, b: str) -> int:
    d = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(len(a) + 1):
        d[i][0] = i
    for j in range(len(b) + 1):
        d[0][j] = j
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            d[i][j] = min(d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] != b[j - 1]))
    return d[len(a)][len(b)]


def jaccard(a, b) -> float:
    sa, sb = set(a), set(b)
    return len(sa & sb) / len(sa | sb) if sa | sb else 1.0


def words(s: str) -> list:
    return re.findall(r"[a-z0-9]+", s.lower())


def in_users_range(u) -> bool:
    return USERS_FROM <= u["user-since"] <= USERS_TO


def canon(v):
    """Hashable, order-insensitive-for-bags form of an ADM value. Numbers
    compare by value to 1e-9; records compare by field set."""
    if v is None:
        return ("null",)
    if isinstance(v, bool):
        return ("b", v)
    if isinstance(v, (int, float)):
        return ("n", round(float(v), 9))
    if isinstance(v, str):
        return ("s", v)
    if isinstance(v, dt.datetime):
        return ("dt", v.isoformat())
    if isinstance(v, dt.date):
        return ("d", v.isoformat())
    if isinstance(v, dict):
        return ("rec", tuple(sorted((k, canon(x)) for k, x in v.items())))
    if isinstance(v, tuple):
        return ("pt", float(v[0]), float(v[1]))
    if hasattr(v, "x") and hasattr(v, "y"):  # engine point
        return ("pt", float(v.x), float(v.y))
    if isinstance(v, Multi) or type(v).__name__ == "Bag":
        return ("bag", tuple(sorted((canon(x) for x in v), key=repr)))
    if isinstance(v, list):
        return ("list", tuple(canon(x) for x in v))
    raise TypeError(f"no canonical form for {type(v).__name__}")


def bag(values) -> Counter:
    return Counter(canon(v) for v in values)


def seq(values) -> list:
    return [canon(v) for v in values]


# ---------------------------------------------------------------- queries

def q01(data):
    datasets = [("Metadata", n) for n in METADATA_DATASETS]
    datasets += [("TinySocial", n) for n in ("MugshotUsers", "MugshotMessages", "AccessLog")]
    indexes = [("Metadata", n, n) for n in METADATA_DATASETS]
    indexes += [("TinySocial", n, n) for n in ("MugshotUsers", "MugshotMessages")]
    indexes += [("TinySocial", d, i) for d, i in SECONDARY_INDEXES]
    return datasets, indexes


def q02(data):
    return [u for u in data.users if in_users_range(u)]


def q03(data):
    return [{"uname": u["name"], "message": m["message"]}
            for u in data.users for m in data.messages
            if m["author-id"] == u["id"] and in_users_range(u)]


def q04(data):
    return [{"uname": u["name"],
             "messages": Multi(m["message"] for m in data.messages if m["author-id"] == u["id"])}
            for u in data.users if in_users_range(u)]


def q05(data):
    out = []
    for t in data.messages:
        near = Multi()
        for t2 in data.messages:
            a, b = t.get("sender-location"), t2.get("sender-location")
            if a is not None and b is not None and math.hypot(a[0] - b[0], a[1] - b[1]) <= 1:
                near.append({"msgtxt": t2["message"]})
        out.append({"message": t["message"], "nearby-messages": near})
    return out


def q06(data):
    return [{"name": u["name"], "message": m["message"]}
            for u in data.users for m in data.messages
            if u["id"] == m["author-id"] and any(levenshtein(w, "tonight") <= 3 for w in words(m["message"]))]


def q07(data):
    return [u for u in data.users
            if any(e.get("end-date") is None and e.get("job-kind") == "part-time" for e in u["employment"])]


def q08(data):
    lo, hi = dt.datetime(2014, 1, 1), dt.datetime(2014, 4, 1)
    lens = [len(m["message"]) for m in data.messages if lo <= m["timestamp"] < hi]
    return [sum(lens) / len(lens) if lens else None]


def q09(data):
    lo, hi = dt.datetime(2014, 2, 20), dt.datetime(2014, 2, 21)
    counts = Counter(m["author-id"] for m in data.messages if lo <= m["timestamp"] < hi)
    top = sorted(counts.items(), key=lambda kv: -kv[1])[:3]
    return [{"author": a, "no messages": n} for a, n in top]


def q10(data, now: dt.datetime):
    start = now - dt.timedelta(days=30)
    active = Counter()
    for u in data.users:
        if any(u["alias"] == row[2] and start <= dt.datetime.fromisoformat(row[1]) <= now
               for row in data.access_log):
            active[u["address"]["country"]] += 1
    return [{"country": c, "active users": n} for c, n in active.items()]


def q11(data):
    out = []
    for msg in data.messages:
        similar = Multi(m2["message"] for m2 in data.messages
                        if jaccard(m2["tags"], msg["tags"]) >= 0.3 and m2["message-id"] != msg["message-id"])
        if similar:
            out.append({"message": msg["message"], "similarly tagged": similar})
    return out


def q12(data):
    return [{"uname": u["name"], "message": m["message"]}
            for u in data.users for m in data.messages if m["author-id"] == u["id"]]


def unemployed_98765(data):
    return [{"name": u["name"], "address": u["address"]} for u in data.users
            if all(e.get("end-date") is not None for e in u["employment"]) and u["address"]["zip"] == "98765"]


ORDERED = {"q09_group_sort_limit.aql"}
