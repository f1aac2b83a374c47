"""LSM-based storage: components, indexes and partitioned datasets."""

from .component import ANTIMATTER
from .dataset import PRIMARY, DatasetStore, IndexSpec, get_path, hash_partition
from .lsm import LsmIndex
from .rtree import RTree

__all__ = ["ANTIMATTER", "PRIMARY", "DatasetStore", "IndexSpec", "LsmIndex", "RTree", "get_path",
           "hash_partition"]
