"""Catalog objects and their ADM record forms.

Every object is stored as one record in a dataset of the ``Metadata``
dataverse. Each record has ``DataverseName`` and ``Name`` plus the fields
listed on its class.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..adm.types import Datatype, RecordType, print_type
from ..adm.values import Int64
from ..aql.ast import Expr
from ..aql.parser import parse_expression, parse_type
from ..aql.printer import print_expr

METADATA = "Metadata"


def _paths(paths) -> list:
    return [list(p) for p in paths]


def _props(props) -> list:
    return [{"Name": k, "Value": v} for k, v in props]


def _unprops(rec) -> tuple:
    return tuple((p["Name"], p["Value"]) for p in rec or [])


@dataclass(frozen=True)
class DataverseDef:
    name: str

    def to_record(self) -> dict:
        return {"DataverseName": self.name, "Name": self.name}

    @classmethod
    def from_record(cls, r: dict) -> "DataverseDef":
        return cls(r["DataverseName"])


def datatype_record(dt: Datatype) -> dict:
    """``Kind`` is record | orderedList | bag | primitive-alias; ``Definition``
    is the body in DDL syntax."""
    return {"DataverseName": dt.dataverse, "Name": dt.name, "Kind": dt.kind, "Definition": print_type(dt.body)}


def datatype_from_record(r: dict) -> Datatype:
    return Datatype(r["Name"], parse_type(r["Definition"]), r["DataverseName"])


@dataclass(frozen=True)
class DatasetDef:
    """``DatasetType`` INTERNAL (primary key) or EXTERNAL (adaptor and
    properties). The partition count is physical and lives in the dataset's
    storage directory, so the Metadata record does not depend on it; ``0``
    means not known yet."""

    dataverse: str
    name: str
    type_name: str
    dataset_id: int
    internal: bool = True
    primary_key: tuple = ()
    partitions: int = 1
    adaptor: str = ""
    properties: tuple = ()

    @property
    def qualified(self) -> str:
        return f"{self.dataverse}.{self.name}"

    def property(self, key: str, default=None):
        for k, v in self.properties:
            if k == key:
                return v
        return default

    def to_record(self) -> dict:
        r = {
            "DataverseName": self.dataverse,
            "Name": self.name,
            "DatatypeName": self.type_name,
            "DatasetType": "INTERNAL" if self.internal else "EXTERNAL",
            "DatasetId": Int64(self.dataset_id),
        }
        if self.internal:
            r["PrimaryKey"] = _paths(self.primary_key)
        else:
            r["Adaptor"] = self.adaptor
            r["Properties"] = _props(self.properties)
        return r

    @classmethod
    def from_record(cls, r: dict) -> "DatasetDef":
        internal = r["DatasetType"] == "INTERNAL"
        return cls(r["DataverseName"], r["Name"], r["DatatypeName"], int(r["DatasetId"]), internal,
                   tuple(tuple(p) for p in r.get("PrimaryKey") or []), 0,
                   r.get("Adaptor", ""), _unprops(r.get("Properties")))


@dataclass(frozen=True)
class IndexDef:
    """``IndexType`` btree | rtree | keyword; the primary index of a dataset is
    listed too, named after the dataset, with ``IsPrimary`` true."""

    dataverse: str
    dataset: str
    name: str
    fields: tuple
    index_type: str = "btree"
    is_primary: bool = False

    def to_record(self) -> dict:
        return {
            "DataverseName": self.dataverse,
            "DatasetName": self.dataset,
            "Name": self.name,
            "IndexType": self.index_type,
            "KeyFields": _paths(self.fields),
            "IsPrimary": self.is_primary,
        }

    @classmethod
    def from_record(cls, r: dict) -> "IndexDef":
        return cls(r["DataverseName"], r["DatasetName"], r["Name"], tuple(tuple(p) for p in r["KeyFields"]),
                   r["IndexType"], bool(r["IsPrimary"]))


@dataclass(frozen=True)
class FunctionDef:
    dataverse: str
    name: str
    params: tuple
    body: Expr = field(compare=False)

    @property
    def arity(self) -> int:
        return len(self.params)

    def to_record(self) -> dict:
        return {
            "DataverseName": self.dataverse,
            "Name": self.name,
            "Arity": len(self.params),
            "Params": list(self.params),
            "Definition": print_expr(self.body),
        }

    @classmethod
    def from_record(cls, r: dict) -> "FunctionDef":
        return cls(r["DataverseName"], r["Name"], tuple(r["Params"]), parse_expression(r["Definition"]))


@dataclass(frozen=True)
class FeedDef:
    dataverse: str
    name: str
    adaptor: str
    properties: tuple = ()
    function: str | None = None
    connected_dataset: str | None = None

    def property(self, key: str, default=None):
        for k, v in self.properties:
            if k == key:
                return v
        return default

    def to_record(self) -> dict:
        return {
            "DataverseName": self.dataverse,
            "Name": self.name,
            "AdaptorName": self.adaptor,
            "Properties": _props(self.properties),
            "Function": self.function,
            "ConnectedDataset": self.connected_dataset,
        }

    @classmethod
    def from_record(cls, r: dict) -> "FeedDef":
        return cls(r["DataverseName"], r["Name"], r["AdaptorName"], _unprops(r.get("Properties")),
                   r.get("Function"), r.get("ConnectedDataset"))


# The Metadata datasets: name -> (dataset id, primary key fields, declared fields)
METADATA_DATASETS = {
    "Dataverse": (1, ("DataverseName",), ("DataverseName", "Name")),
    "Datatype": (2, ("DataverseName", "Name"), ("DataverseName", "Name", "Kind", "Definition")),
    "Dataset": (3, ("DataverseName", "Name"), ("DataverseName", "Name", "DatatypeName", "DatasetType")),
    "Index": (4, ("DataverseName", "DatasetName", "Name"),
              ("DataverseName", "DatasetName", "Name", "IndexType")),
    "Function": (5, ("DataverseName", "Name"), ("DataverseName", "Name", "Definition")),
    "Feed": (6, ("DataverseName", "Name"), ("DataverseName", "Name", "AdaptorName")),
}


def metadata_types() -> list[Datatype]:
    from ..adm.types import FieldDef, TypeRef

    out = []
    for name, (_id, _pk, fields) in METADATA_DATASETS.items():
        body = RecordType(tuple(FieldDef(f, TypeRef("string")) for f in fields), True)
        out.append(Datatype(f"{name}RecordType", body, METADATA))
    return out


def metadata_datasets() -> list[DatasetDef]:
    return [DatasetDef(METADATA, name, f"{name}RecordType", ds_id, True, tuple((f,) for f in pk), 1)
            for name, (ds_id, pk, _f) in METADATA_DATASETS.items()]
