"""Partitioned datasets: a hash-partitioned primary index plus node-local
secondary indexes, one LSM index per (partition, index).

On-disk layout: ``<root>/<dataverse>/<dataset>/<partition>/<index>/``.
"""

from __future__ import annotations

import os
import shutil
from dataclasses import dataclass, field

from ..adm.binary import hash64
from ..adm.compare import key_of
from ..adm.values import SPATIAL_TYPES, Bag
from ..functions.spatial import mbr
from ..functions.strings import tokens
from .lsm import DEFAULT_MEMORY_BUDGET, DEFAULT_MERGE_K, LsmIndex

PRIMARY = "primary"
INDEX_KINDS = ("btree", "rtree", "keyword")


def get_path(record, path):
    """Value at a field path; ``None`` if any step is absent or not a record."""
    v = record
    for step in path:
        if not isinstance(v, dict):
            return None
        v = v.get(step)
    return v


def hash_partition(pk: tuple, n: int) -> int:
    """Partition of a primary key among ``n`` partitions."""
    if n == 1:
        return 0
    return hash64(pk) % n


def _spatial_mbr(v):
    return mbr(v) if isinstance(v, SPATIAL_TYPES) else None


@dataclass(frozen=True)
class IndexSpec:
    name: str
    kind: str  # btree | rtree | keyword
    fields: tuple  # field paths

    def keys_for(self, record, pk: tuple) -> list:
        """Index keys a record contributes. Null or absent values are not indexed."""
        if self.kind == "btree":
            vals = tuple(get_path(record, p) for p in self.fields)
            if any(v is None for v in vals):
                return []
            return [vals + pk]
        v = get_path(record, self.fields[0])
        if v is None:
            return []
        if self.kind == "rtree":
            return [(v,) + pk] if isinstance(v, SPATIAL_TYPES) else []
        # keyword
        if isinstance(v, str):
            toks = set(tokens(v))
        elif isinstance(v, (list, Bag)):
            toks = {x for x in v if isinstance(x, str)}
        else:
            return []
        return [(t,) + pk for t in sorted(toks)]


@dataclass
class DatasetPartition:
    partition: int
    primary: LsmIndex
    secondaries: dict = field(default_factory=dict)  # name -> (IndexSpec, LsmIndex)

    def indexes(self):
        yield PRIMARY, self.primary
        for name, (_spec, idx) in self.secondaries.items():
            yield name, idx

    def index(self, name: str) -> LsmIndex | None:
        if name == PRIMARY:
            return self.primary
        s = self.secondaries.get(name)
        return s[1] if s else None


MANIFEST = "PARTITIONS"


class DatasetStore:
    """Storage for one internal dataset across its partitions."""

    def __init__(self, root: str, dataset_id: int, dataverse: str, name: str, primary_key: tuple,
                 partitions: int, *, memory_budget: int = DEFAULT_MEMORY_BUDGET, merge_k: int = DEFAULT_MERGE_K,
                 faults=None, log_partition=None):
        self.root = root
        self.dataset_id = dataset_id
        self.dataverse = dataverse
        self.name = name
        self.primary_key = tuple(tuple(p) for p in primary_key)
        self.n = partitions
        self.memory_budget = memory_budget
        self.merge_k = merge_k
        self.faults = faults
        # which transaction log serves partition p
        self.log_partition = log_partition or (lambda p: str(p))
        self.directory = os.path.join(root, dataverse, name)
        self.specs: dict[str, IndexSpec] = {}
        self.partitions: list[DatasetPartition] = []

    @property
    def qualified_name(self) -> str:
        return f"{self.dataverse}.{self.name}"

    def _index_dir(self, p: int, index: str) -> str:
        return os.path.join(self.directory, str(p), index)

    def _make(self, p: int, index: str, spatial: bool) -> LsmIndex:
        return LsmIndex(self._index_dir(p, index), spatial=spatial, memory_budget=self.memory_budget,
                        merge_k=self.merge_k, faults=self.faults, mbr_of=_spatial_mbr if spatial else None,
                        name=f"{self.qualified_name}/{p}/{index}")

    def open(self, specs=()) -> dict:
        """Open (or create) every partition. Returns per-index open reports."""
        reports = {}
        self.partitions = []
        self._read_or_write_manifest()
        for p in range(self.n):
            prim = self._make(p, PRIMARY, False)
            reports[(p, PRIMARY)] = prim.open()
            self.partitions.append(DatasetPartition(p, prim))
        for spec in specs:
            for p, part in enumerate(self.partitions):
                idx = self._make(p, spec.name, spec.kind == "rtree")
                reports[(p, spec.name)] = idx.open()
                part.secondaries[spec.name] = (spec, idx)
            self.specs[spec.name] = spec
        return reports

    def _read_or_write_manifest(self) -> None:
        """The partition count is fixed when the dataset is created."""
        path = os.path.join(self.directory, MANIFEST)
        if os.path.exists(path):
            with open(path) as f:
                self.n = int(f.read().strip())
            return
        os.makedirs(self.directory, exist_ok=True)
        tmp = path + ".tmp"
        with open(tmp, "w") as f:
            f.write(f"{self.n}\n")
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)

    def add_index(self, spec: IndexSpec, build: bool = True, lsns=None) -> None:
        """Create a secondary index, bulk-building it from the primary data.

        ``lsns[p]`` is partition p's current log position: everything logged so
        far is reflected in the build, so replay must start after it.
        """
        for p, part in enumerate(self.partitions):
            d = self._index_dir(p, spec.name)
            if os.path.exists(d):
                shutil.rmtree(d)  # leftover of an earlier, uncommitted build
            idx = self._make(p, spec.name, spec.kind == "rtree")
            idx.open()
            if build:
                entries = []
                for pk, rec in part.primary.scan():
                    entries.extend((k, None) for k in spec.keys_for(rec, pk))
                entries.sort(key=lambda e: key_of(e[0]))
                idx.bulk_load(entries, lsn=lsns[p] if lsns else 0)
            part.secondaries[spec.name] = (spec, idx)
        self.specs[spec.name] = spec

    def drop_index(self, name: str) -> None:
        for p, part in enumerate(self.partitions):
            s = part.secondaries.pop(name, None)
            if s is not None:
                s[1].close()
            shutil.rmtree(self._index_dir(p, name), ignore_errors=True)
        self.specs.pop(name, None)

    def close(self) -> None:
        for part in self.partitions:
            for _, idx in part.indexes():
                idx.close()

    def destroy(self) -> None:
        self.close()
        shutil.rmtree(self.directory, ignore_errors=True)

    # ---- keys

    def pk_of(self, record) -> tuple:
        return tuple(get_path(record, p) for p in self.primary_key)

    def partition_of(self, pk: tuple) -> int:
        return hash_partition(pk, self.n)

    # ---- reads (no locking; see txn for the transactional paths)

    def scan_partition(self, p: int):
        for _pk, rec in self.partitions[p].primary.scan():
            yield rec

    def scan(self):
        for p in range(self.n):
            yield from self.scan_partition(p)

    def get(self, pk: tuple):
        return self.partitions[self.partition_of(pk)].primary.get(pk)

    def count(self) -> int:
        return sum(1 for _ in self.scan())

    def is_empty(self) -> bool:
        for part in self.partitions:
            for _ in part.primary.scan():
                return False
        return True


def remove_tree(path: str) -> None:
    shutil.rmtree(path, ignore_errors=True)
