"""External datasets: read-only delimited text files on the local file system.

Each line is one record of the dataset's closed type. Fields appear in the
order the type declares them and are converted by their declared primitive
type; an empty field becomes null when the field is optional.
"""

from __future__ import annotations

import os

from ..adm.text import STRING_CONSTRUCTORS
from ..adm.types import RecordType, TypeRef
from ..errors import IngestError


def localfs_path(value: str) -> str:
    """``host://path`` -> ``path``. Only local files are readable, so the
    host part is accepted but not interpreted."""
    if "://" in value:
        _host, path = value.split("://", 1)
        return path
    return value


def record_type(catalog, ds) -> RecordType:
    dt = catalog.datatype(ds.dataverse, ds.type_name)
    body = dt.body if dt is not None else None
    if not isinstance(body, RecordType):
        raise IngestError(f"{ds.qualified}: type {ds.type_name} is not a record type")
    return body


def _converter(t):
    if not isinstance(t, TypeRef) or t.name not in STRING_CONSTRUCTORS:
        raise IngestError(f"delimited text cannot hold a field of type {t}")
    return STRING_CONSTRUCTORS[t.name]


def parse_delimited(lines, rtype: RecordType, delimiter: str, source: str = ""):
    convs = [(f.name, f.optional, _converter(f.type)) for f in rtype.fields]
    for no, raw in enumerate(lines, 1):
        line = raw.rstrip("\r\n")
        if not line:
            continue
        parts = line.split(delimiter)
        if len(parts) != len(convs):
            raise IngestError(f"{source}:{no}: expected {len(convs)} fields, found {len(parts)}")
        rec = {}
        for (name, optional, conv), text in zip(convs, parts):
            if text == "" and optional:
                rec[name] = None
                continue
            try:
                rec[name] = conv(text)
            except (ValueError, TypeError) as e:
                raise IngestError(f"{source}:{no}: field {name}: {e}") from None
        yield rec


def read_external(catalog, ds):
    """Records of an external dataset, read fresh on every call."""
    if ds.adaptor != "localfs":
        raise IngestError(f"unsupported adaptor {ds.adaptor}")
    path = localfs_path(ds.property("path", ""))
    if not os.path.exists(path):
        raise IngestError(f"{ds.qualified}: file not found: {path}")
    rtype = record_type(catalog, ds)
    with open(path, encoding="utf-8") as f:
        yield from parse_delimited(f, rtype, ds.property("delimiter", ","), path)
