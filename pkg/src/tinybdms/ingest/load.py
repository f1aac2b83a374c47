"""Bulk load of an empty internal dataset from a file of ADM records.

The whole file is parsed and checked before anything is written, so a bad
record aborts the load without side effects. Records are hash-partitioned,
sorted per partition and written as one new disk component per index.
"""

from __future__ import annotations

from ..adm.compare import key_of
from ..adm.text import parse_adm_stream
from ..adm.types import coerce, conforms
from ..errors import AdmSyntaxError, DuplicateKey, IngestError
from .external import localfs_path, parse_delimited, record_type


def read_load_file(catalog, ds, properties: dict) -> list:
    path = localfs_path(properties.get("path", ""))
    fmt = properties.get("format", "adm")
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise IngestError(f"cannot read {path}: {e.strerror}") from None
    if fmt == "adm":
        try:
            return list(parse_adm_stream(text))
        except AdmSyntaxError as e:
            raise IngestError(f"{path}: {e}") from None
    if fmt == "delimited-text":
        return list(parse_delimited(text.splitlines(), record_type(catalog, ds), properties.get("delimiter", ","),
                                    path))
    raise IngestError(f"unsupported load format {fmt!r}")


def bulk_load(catalog, txn, ds, records) -> int:
    store = catalog.store(ds.dataverse, ds.name)
    resolver = catalog.resolver(ds.dataverse)
    dt = resolver.get(ds.type_name)
    parts = [[] for _ in range(store.n)]
    seen = set()
    for i, rec in enumerate(records, 1):
        report = conforms(rec, ds.type_name, resolver)
        if not report.ok:
            raise IngestError(f"record {i} does not conform to {ds.type_name}: {report.describe()}")
        rec = coerce(rec, dt.body, resolver)
        pk = store.pk_of(rec)
        sk = key_of(pk)
        if sk in seen:
            raise DuplicateKey(f"duplicate primary key {list(pk)!r} in load input")
        seen.add(sk)
        parts[store.partition_of(pk)].append((sk, pk, rec))
    with txn.exclusive(store):
        if not store.is_empty():
            raise IngestError(f"load requires an empty dataset; {ds.qualified} has data")
        # empty the memory components so the loaded component is the newest
        for part in store.partitions:
            for _name, idx in part.indexes():
                idx.flush()
        lsns = txn.current_lsns(store)
        for p, rows in enumerate(parts):
            rows.sort(key=lambda r: r[0])
            part = store.partitions[p]
            part.primary.bulk_load([(pk, rec) for _sk, pk, rec in rows], lsn=lsns[p])
            for _name, (spec, idx) in part.secondaries.items():
                entries = [(k, None) for _sk, pk, rec in rows for k in spec.keys_for(rec, pk)]
                entries.sort(key=lambda e: key_of(e[0]))
                idx.bulk_load(entries, lsn=lsns[p])
    return len(seen)
