"""The system catalog.

Catalog objects live in six internal datasets of the ``Metadata`` dataverse
(``Dataverse``, ``Datatype``, ``Dataset``, ``Index``, ``Function``, ``Feed``),
stored through the same LSM and write-ahead-log path as user data on a single
partition with its own log. Each DDL statement turns into one batch
transaction over those datasets, so a statement is either fully recorded or
not at all. The in-memory maps are a cache of the stored records, rebuilt on
open.
"""

from __future__ import annotations

import os
import shutil
import threading
from dataclasses import replace

from ..adm.types import (
    PRIMITIVES,
    BagType,
    Datatype,
    ListType,
    RecordType,
    TypeRef,
    check_definition,
    field_type,
    references,
)
from ..aql import ast as A
from ..aql.resolve import SessionConfig, check_function_body
from ..errors import CatalogError, SemanticError, UnknownType
from ..functions import lookup as lookup_builtin
from ..storage.dataset import PRIMARY, DatasetStore, IndexSpec
from ..txn.recovery import replay
from .model import (
    METADATA,
    METADATA_DATASETS,
    DatasetDef,
    DataverseDef,
    FeedDef,
    FunctionDef,
    IndexDef,
    datatype_from_record,
    datatype_record,
    metadata_datasets,
    metadata_types,
)

META_LOG = "meta"
USER_ID_BASE = 1000
SPATIAL_TYPE_NAMES = ("point", "line", "rectangle", "circle", "polygon")
FEED_ADAPTORS = ("socket_adaptor",)
EXTERNAL_ADAPTORS = ("localfs",)


def _err(msg: str, stmt=None, cls=CatalogError) -> SemanticError:
    line, col = getattr(stmt, "pos", (0, 0))
    return cls(msg, line, col)


def _path_text(p) -> str:
    return ".".join(p)


class TypeResolver:
    """Datatype lookup within one dataverse (what conformance checks need)."""

    def __init__(self, catalog: "Catalog", dataverse: str):
        self.catalog = catalog
        self.dataverse = dataverse

    def get(self, name: str):
        return self.catalog.datatypes.get((self.dataverse, name))


class Catalog:
    def __init__(self, data_root: str, txn, *, partitions: int = 4, memory_budget: int = 1 << 20,
                 merge_k: int = 4, faults=None):
        self.data_root = data_root
        self.txn = txn
        self.partitions = partitions
        self.memory_budget = memory_budget
        self.merge_k = merge_k
        self.faults = faults
        self.lock = threading.RLock()
        self.dataverses: dict[str, DataverseDef] = {}
        self.datatypes: dict[tuple, Datatype] = {}
        self.datasets: dict[tuple, DatasetDef] = {}
        self.indexes: dict[tuple, IndexDef] = {}
        self.functions: dict[tuple, FunctionDef] = {}
        self.feeds: dict[tuple, FeedDef] = {}
        self.meta_stores: dict[str, DatasetStore] = {}
        self.stores: dict[tuple, DatasetStore] = {}
        # set by the ingest layer: (dataverse, feed) -> bool
        self.feed_is_active = lambda dv, name: False

    # ---- opening

    def _store(self, d: DatasetDef, log_partition=None) -> DatasetStore:
        return DatasetStore(self.data_root, d.dataset_id, d.dataverse, d.name, d.primary_key,
                            d.partitions or self.partitions,
                            memory_budget=self.memory_budget, merge_k=self.merge_k, faults=self.faults,
                            log_partition=log_partition)

    def open_metadata(self):
        """Open the Metadata datasets, replay their log and load the catalog."""
        by_id = {}
        for d in metadata_datasets():
            s = self._store(d, log_partition=lambda p: META_LOG)
            s.open()
            self.meta_stores[d.name] = s
            by_id[d.dataset_id] = s
        pl = self.txn.partition(META_LOG)

        def resolve_index(ds_id, ix):
            s = by_id.get(ds_id)
            return s.partitions[0].index(ix) if s else None

        summary = replay(META_LOG, pl.log, resolve_index)
        self._load()
        if METADATA not in self.dataverses:
            self._bootstrap()
        self._repair()
        return summary

    def _scan_meta(self, name: str):
        return list(self.meta_stores[name].scan())

    def _load(self) -> None:
        self.dataverses = {r["DataverseName"]: DataverseDef.from_record(r) for r in self._scan_meta("Dataverse")}
        self.datatypes = {}
        for r in self._scan_meta("Datatype"):
            dt = datatype_from_record(r)
            self.datatypes[(dt.dataverse, dt.name)] = dt
        self.datasets = {}
        for r in self._scan_meta("Dataset"):
            d = DatasetDef.from_record(r)
            if d.dataverse == METADATA:
                d = replace(d, partitions=1)
            else:
                known = self.stores.get((d.dataverse, d.name))
                d = replace(d, partitions=known.n if known else 0)
            self.datasets[(d.dataverse, d.name)] = d
        self.indexes = {}
        for r in self._scan_meta("Index"):
            ix = IndexDef.from_record(r)
            self.indexes[(ix.dataverse, ix.dataset, ix.name)] = ix
        self.functions = {}
        for r in self._scan_meta("Function"):
            f = FunctionDef.from_record(r)
            self.functions[(f.dataverse, f.name)] = f
        self.feeds = {}
        for r in self._scan_meta("Feed"):
            f = FeedDef.from_record(r)
            self.feeds[(f.dataverse, f.name)] = f

    def _bootstrap(self) -> None:
        ops = [self._ins("Dataverse", DataverseDef(METADATA).to_record())]
        ops += [self._ins("Datatype", datatype_record(t)) for t in metadata_types()]
        for d in metadata_datasets():
            ops.append(self._ins("Dataset", d.to_record()))
            ops.append(self._ins("Index", IndexDef(METADATA, d.name, d.name, d.primary_key, "btree", True).to_record()))
        self.txn.apply_batch(ops)
        self._load()

    def _repair(self) -> None:
        """Feeds cannot stay connected across a restart; clear stale links."""
        ops = []
        for key, f in self.feeds.items():
            if f.connected_dataset is not None:
                ops.append(self._del("Feed", key))
                ops.append(self._ins("Feed", replace(f, connected_dataset=None).to_record()))
        if ops:
            self.txn.apply_batch(ops)
            self._load()

    def open_user_stores(self) -> dict[int, DatasetStore]:
        """Open storage for every internal user dataset; returns them by id."""
        out = {}
        for key, d in sorted(self.datasets.items()):
            if d.dataverse == METADATA or not d.internal:
                continue
            s = self._store(d)
            specs = [IndexSpec(ix.name, ix.index_type, ix.fields) for ix in self.secondary_indexes(*key)]
            s.open(specs)
            self.stores[key] = s
            self.datasets[key] = replace(d, partitions=s.n)
            out[d.dataset_id] = s
        return out

    def close(self) -> None:
        for s in list(self.stores.values()) + list(self.meta_stores.values()):
            s.close()

    # ---- record helpers

    def _ins(self, meta: str, record: dict):
        return (self.meta_stores[meta], "insert", record)

    def _del(self, meta: str, key: tuple):
        return (self.meta_stores[meta], "delete", tuple(key))

    def _commit(self, ops) -> None:
        self.txn.apply_batch(ops)

    # ---- lookups

    def resolver(self, dataverse: str) -> TypeResolver:
        return TypeResolver(self, dataverse)

    def dataset(self, dataverse: str, name: str) -> DatasetDef | None:
        return self.datasets.get((dataverse, name))

    def store(self, dataverse: str, name: str) -> DatasetStore | None:
        if dataverse == METADATA:
            return self.meta_stores.get(name)
        return self.stores.get((dataverse, name))

    def secondary_indexes(self, dataverse: str, dataset: str) -> list[IndexDef]:
        return [ix for (dv, ds, _n), ix in sorted(self.indexes.items())
                if dv == dataverse and ds == dataset and not ix.is_primary]

    def lookup_function(self, dataverse: str, name: str) -> FunctionDef | None:
        return self.functions.get((dataverse, name))

    def datatype(self, dataverse: str, name: str) -> Datatype | None:
        return self.datatypes.get((dataverse, name))

    def list_dataverses(self) -> list[str]:
        return sorted(self.dataverses)

    def list_datasets(self, dataverse: str | None = None) -> list[DatasetDef]:
        return [d for (dv, _n), d in sorted(self.datasets.items()) if dataverse is None or dv == dataverse]

    # ---- DDL

    def _dv(self, qname_dv: str | None, session: SessionConfig, stmt) -> str:
        dv = qname_dv or session.dataverse
        if dv is None:
            raise _err("no dataverse selected; issue 'use dataverse' first", stmt)
        if dv not in self.dataverses:
            raise _err(f"unknown dataverse {dv}", stmt)
        return dv

    @staticmethod
    def _user_dv(dv: str, stmt) -> None:
        if dv == METADATA:
            raise _err("the Metadata dataverse is read-only", stmt)

    def execute(self, stmt, session: SessionConfig) -> dict:
        """Run one DDL statement; returns a status record."""
        with self.lock:
            handler = getattr(self, "_ddl_" + type(stmt).__name__, None)
            if handler is None:
                raise _err(f"not a DDL statement: {type(stmt).__name__}", stmt)
            changed = handler(stmt, session)
            return {"status": "ok" if changed is not False else "unchanged", "statement": _describe(stmt)}

    def _ddl_CreateDataverse(self, s: A.CreateDataverse, session):
        if s.name == METADATA:
            raise _err("the Metadata dataverse is reserved", s)
        if s.name in self.dataverses:
            if s.if_not_exists:
                return False
            raise _err(f"dataverse {s.name} already exists", s)
        self._commit([self._ins("Dataverse", DataverseDef(s.name).to_record())])
        self.dataverses[s.name] = DataverseDef(s.name)
        return True

    def _ddl_DropDataverse(self, s: A.DropDataverse, session):
        if s.name == METADATA:
            raise _err("the Metadata dataverse cannot be dropped", s)
        if s.name not in self.dataverses:
            if s.if_exists:
                return False
            raise _err(f"unknown dataverse {s.name}", s)
        dv = s.name
        for (fdv, fname), f in self.feeds.items():
            if fdv == dv and (f.connected_dataset or self.feed_is_active(fdv, fname)):
                raise _err(f"dataverse {dv} has an active feed connection ({fname}); disconnect it first", s)
        ops = [self._del("Feed", k) for k in self.feeds if k[0] == dv]
        ops += [self._del("Function", k) for k in self.functions if k[0] == dv]
        ops += [self._del("Index", k) for k in self.indexes if k[0] == dv]
        ops += [self._del("Dataset", k) for k in self.datasets if k[0] == dv]
        ops += [self._del("Datatype", k) for k in self.datatypes if k[0] == dv]
        ops.append(self._del("Dataverse", (dv,)))
        self._commit(ops)
        for key in [k for k in self.stores if k[0] == dv]:
            self.stores.pop(key).destroy()
        shutil.rmtree(os.path.join(self.data_root, dv), ignore_errors=True)
        for m in (self.feeds, self.functions, self.indexes, self.datasets, self.datatypes):
            for k in [k for k in m if k[0] == dv]:
                del m[k]
        del self.dataverses[dv]
        if session.dataverse == dv:
            session.dataverse = None
        return True

    def _ddl_CreateType(self, s: A.CreateType, session):
        dv = self._dv(s.qname.dataverse, session, s)
        self._user_dv(dv, s)
        name = s.qname.name
        if name in PRIMITIVES:
            raise _err(f"{name} is a builtin type name", s)
        if (dv, name) in self.datatypes:
            if s.if_not_exists:
                return False
            raise _err(f"type {dv}.{name} already exists", s)
        try:
            check_definition(name, s.body, self.resolver(dv))
        except CatalogError as e:
            raise _err(str(e), s, type(e)) from None
        dt = Datatype(name, s.body, dv)
        self._commit([self._ins("Datatype", datatype_record(dt))])
        self.datatypes[(dv, name)] = dt
        return True

    def _ddl_DropType(self, s: A.DropType, session):
        dv = self._dv(s.qname.dataverse, session, s)
        self._user_dv(dv, s)
        name = s.qname.name
        if (dv, name) not in self.datatypes:
            if s.if_exists:
                return False
            raise _err(f"unknown type {dv}.{name}", s, UnknownType)
        users = [d.name for (ddv, _n), d in self.datasets.items() if ddv == dv and d.type_name == name]
        users += [t.name for (tdv, _n), t in self.datatypes.items()
                  if tdv == dv and t.name != name and name in set(references(t.body))]
        if users:
            raise _err(f"type {name} is still used by {', '.join(sorted(users))}", s)
        self._commit([self._del("Datatype", (dv, name))])
        del self.datatypes[(dv, name)]
        return True

    def _check_key_field(self, body, path, resolver, s, what: str):
        t, optional = field_type(body, path, resolver)
        if t is None:
            raise _err(f"{what} field {_path_text(path)} is not declared in the datatype", s)
        return t, optional

    def _ddl_CreateDataset(self, s: A.CreateDataset, session):
        dv = self._dv(s.qname.dataverse, session, s)
        self._user_dv(dv, s)
        name = s.qname.name
        if (dv, name) in self.datasets:
            if s.if_not_exists:
                return False
            raise _err(f"dataset {dv}.{name} already exists", s)
        tdv = s.type_name.dataverse or dv
        dt = self.datatypes.get((tdv, s.type_name.name))
        if dt is None:
            raise _err(f"unknown type {s.type_name}", s, UnknownType)
        if not isinstance(dt.body, RecordType):
            raise _err(f"dataset type {s.type_name} must be a record type", s)
        resolver = self.resolver(tdv)
        ds_id = USER_ID_BASE + self.txn.partition(META_LOG).log.next_lsn
        if s.external:
            if s.adaptor not in EXTERNAL_ADAPTORS:
                raise _err(f"unknown adaptor {s.adaptor}; supported: {', '.join(EXTERNAL_ADAPTORS)}", s)
            props = dict(s.properties)
            for req in ("path", "format"):
                if req not in props:
                    raise _err(f"external dataset needs the {req!r} property", s)
            if props["format"] != "delimited-text":
                raise _err(f"unsupported format {props['format']!r}; only delimited-text is supported", s)
            if len(props.get("delimiter", ",")) != 1:
                raise _err("the delimiter must be a single character", s)
            if dt.body.open:
                raise _err("an external delimited-text dataset needs a closed record type", s)
            d = DatasetDef(dv, name, s.type_name.name, ds_id, False, adaptor=s.adaptor, properties=s.properties)
            self._commit([self._ins("Dataset", d.to_record())])
            self.datasets[(dv, name)] = d
            return True
        for path in s.primary_key:
            t, optional = self._check_key_field(dt.body, path, resolver, s, "primary key")
            if optional:
                raise _err(f"primary key field {_path_text(path)} must not be optional", s)
            if not (isinstance(t, TypeRef) and t.name not in SPATIAL_TYPE_NAMES):
                raise _err(f"primary key field {_path_text(path)} must have a scalar type", s)
        d = DatasetDef(dv, name, s.type_name.name, ds_id, True, s.primary_key, self.partitions)
        store = self._store(d)
        shutil.rmtree(store.directory, ignore_errors=True)  # debris of an uncommitted create
        store.open()
        primary = IndexDef(dv, name, name, s.primary_key, "btree", True)
        try:
            self._commit([self._ins("Dataset", d.to_record()), self._ins("Index", primary.to_record())])
        except Exception:
            store.destroy()
            raise
        self.datasets[(dv, name)] = d
        self.indexes[(dv, name, name)] = primary
        self.stores[(dv, name)] = store
        return True

    def _ddl_DropDataset(self, s: A.DropDataset, session):
        dv = self._dv(s.qname.dataverse, session, s)
        self._user_dv(dv, s)
        name = s.qname.name
        if (dv, name) not in self.datasets:
            if s.if_exists:
                return False
            raise _err(f"unknown dataset {dv}.{name}", s)
        for (fdv, fname), f in self.feeds.items():
            if f.connected_dataset == f"{dv}.{name}" or (fdv == dv and f.connected_dataset == name):
                raise _err(f"feed {fname} is connected to {name}; disconnect it first", s)
        ix_keys = [k for k in self.indexes if k[0] == dv and k[1] == name]
        self._commit([self._del("Index", k) for k in ix_keys] + [self._del("Dataset", (dv, name))])
        store = self.stores.pop((dv, name), None)
        if store is not None:
            store.destroy()
        for k in ix_keys:
            del self.indexes[k]
        del self.datasets[(dv, name)]
        return True

    def _ddl_CreateIndex(self, s: A.CreateIndex, session):
        dv = self._dv(s.dataset.dataverse, session, s)
        self._user_dv(dv, s)
        dsname = s.dataset.name
        d = self.datasets.get((dv, dsname))
        if d is None:
            raise _err(f"unknown dataset {dv}.{dsname}", s)
        if not d.internal:
            raise _err("external datasets cannot be indexed", s)
        if (dv, dsname, s.name) in self.indexes:
            if s.if_not_exists:
                return False
            raise _err(f"index {s.name} already exists on {dsname}", s)
        dt = self.datatypes[(dv, d.type_name)]
        resolver = self.resolver(dv)
        if s.index_type != "btree" and len(s.fields) != 1:
            raise _err(f"a {s.index_type} index takes exactly one field", s)
        for path in s.fields:
            t, _opt = self._check_key_field(dt.body, path, resolver, s, "index")
            ok = True
            if s.index_type == "btree":
                ok = isinstance(t, TypeRef) and t.name not in SPATIAL_TYPE_NAMES
            elif s.index_type == "rtree":
                ok = isinstance(t, TypeRef) and t.name in SPATIAL_TYPE_NAMES
            elif s.index_type == "keyword":
                ok = (isinstance(t, TypeRef) and t.name == "string") or (
                    isinstance(t, (ListType, BagType)) and t.item == TypeRef("string"))
            if not ok:
                raise _err(f"field {_path_text(path)} cannot be indexed by a {s.index_type} index", s)
        ix = IndexDef(dv, dsname, s.name, s.fields, s.index_type, False)
        store = self.stores[(dv, dsname)]
        spec = IndexSpec(s.name, s.index_type, s.fields)
        with self.txn.exclusive(store):
            store.add_index(spec, lsns=self.txn.current_lsns(store))
            try:
                self._commit([self._ins("Index", ix.to_record())])
            except Exception:
                store.drop_index(s.name)
                raise
        self.indexes[(dv, dsname, s.name)] = ix
        return True

    def _ddl_DropIndex(self, s: A.DropIndex, session):
        dv = self._dv(s.dataset.dataverse, session, s)
        self._user_dv(dv, s)
        key = (dv, s.dataset.name, s.name)
        ix = self.indexes.get(key)
        if ix is None:
            if s.if_exists:
                return False
            raise _err(f"unknown index {s.dataset.name}.{s.name}", s)
        if ix.is_primary:
            raise _err("a primary index cannot be dropped; drop the dataset instead", s)
        store = self.stores[(dv, s.dataset.name)]
        with self.txn.exclusive(store):
            self._commit([self._del("Index", key)])
            store.drop_index(s.name)
        del self.indexes[key]
        return True

    def _ddl_CreateFunction(self, s: A.CreateFunction, session):
        dv = self._dv(s.qname.dataverse, session, s)
        self._user_dv(dv, s)
        name = s.qname.name
        if lookup_builtin(name) is not None:
            raise _err(f"{name} is a builtin function", s)
        if (dv, name) in self.functions:
            if s.if_not_exists:
                return False
            raise _err(f"function {dv}.{name} already exists", s)
        if len(set(s.params)) != len(s.params):
            raise _err("duplicate parameter name", s)
        scoped = session.copy()
        scoped.dataverse = dv
        check_function_body(s.body, s.params, self, scoped)
        f = FunctionDef(dv, name, tuple(s.params), s.body)
        self._commit([self._ins("Function", f.to_record())])
        self.functions[(dv, name)] = f
        return True

    def _ddl_DropFunction(self, s: A.DropFunction, session):
        dv = self._dv(s.qname.dataverse, session, s)
        self._user_dv(dv, s)
        key = (dv, s.qname.name)
        if key not in self.functions:
            if s.if_exists:
                return False
            raise _err(f"unknown function {s.qname}", s)
        self._commit([self._del("Function", key)])
        del self.functions[key]
        return True

    def _ddl_CreateFeed(self, s: A.CreateFeed, session):
        dv = self._dv(s.qname.dataverse, session, s)
        self._user_dv(dv, s)
        name = s.qname.name
        if (dv, name) in self.feeds:
            if s.if_not_exists:
                return False
            raise _err(f"feed {dv}.{name} already exists", s)
        if s.adaptor not in FEED_ADAPTORS:
            raise _err(f"unknown feed adaptor {s.adaptor}; supported: {', '.join(FEED_ADAPTORS)}", s)
        props = dict(s.properties)
        for req in ("sockets", "type-name"):
            if req not in props:
                raise _err(f"feed needs the {req!r} property", s)
        if props.get("format", "adm") != "adm":
            raise _err(f"unsupported feed format {props['format']!r}; only adm is supported", s)
        if (dv, props["type-name"]) not in self.datatypes:
            raise _err(f"unknown type {props['type-name']}", s, UnknownType)
        if s.function is not None:
            f = self.functions.get((dv, s.function))
            if f is None or f.arity != 1:
                raise _err(f"feed function {s.function} must exist and take one argument", s)
        f = FeedDef(dv, name, s.adaptor, s.properties, s.function)
        self._commit([self._ins("Feed", f.to_record())])
        self.feeds[(dv, name)] = f
        return True

    def _ddl_DropFeed(self, s: A.DropFeed, session):
        dv = self._dv(s.qname.dataverse, session, s)
        self._user_dv(dv, s)
        key = (dv, s.qname.name)
        f = self.feeds.get(key)
        if f is None:
            if s.if_exists:
                return False
            raise _err(f"unknown feed {s.qname}", s)
        if f.connected_dataset or self.feed_is_active(*key):
            raise _err(f"feed {s.qname.name} is connected; disconnect it first", s)
        self._commit([self._del("Feed", key)])
        del self.feeds[key]
        return True

    def set_feed_connection(self, dataverse: str, name: str, dataset: str | None) -> FeedDef:
        with self.lock:
            key = (dataverse, name)
            f = replace(self.feeds[key], connected_dataset=dataset)
            self._commit([self._del("Feed", key), self._ins("Feed", f.to_record())])
            self.feeds[key] = f
            return f

    # ---- integrity (used by tests and the consistency checker)

    def integrity_problems(self) -> list[str]:
        out = []
        for (dv, ds, name), ix in self.indexes.items():
            if (dv, ds) not in self.datasets:
                out.append(f"index {dv}.{ds}.{name} without dataset")
        for (dv, name), d in self.datasets.items():
            if (dv, d.type_name) not in self.datatypes:
                out.append(f"dataset {dv}.{name} without datatype {d.type_name}")
            if dv not in self.dataverses:
                out.append(f"dataset {dv}.{name} without dataverse")
            if d.internal and (dv, name, name) not in self.indexes:
                out.append(f"dataset {dv}.{name} without primary index record")
        for (dv, name) in self.datatypes:
            if dv not in self.dataverses:
                out.append(f"datatype {dv}.{name} without dataverse")
        return out


def _describe(stmt) -> str:
    words = {
        "CreateDataverse": "create dataverse", "DropDataverse": "drop dataverse", "CreateType": "create type",
        "DropType": "drop type", "CreateDataset": "create dataset", "DropDataset": "drop dataset",
        "CreateIndex": "create index", "DropIndex": "drop index", "CreateFunction": "create function",
        "DropFunction": "drop function", "CreateFeed": "create feed", "DropFeed": "drop feed",
    }
    name = getattr(stmt, "qname", None) or getattr(stmt, "name", "")
    return f"{words.get(type(stmt).__name__, type(stmt).__name__)} {name}".strip()


__all__ = ["Catalog", "TypeResolver", "META_LOG", "METADATA_DATASETS", "PRIMARY"]
