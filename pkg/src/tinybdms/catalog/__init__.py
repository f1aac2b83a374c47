"""System catalog, itself stored as datasets of the Metadata dataverse."""

from .catalog import META_LOG, Catalog, TypeResolver
from .model import METADATA, DatasetDef, DataverseDef, FeedDef, FunctionDef, IndexDef

__all__ = ["META_LOG", "METADATA", "Catalog", "DatasetDef", "DataverseDef", "FeedDef", "FunctionDef", "IndexDef",
           "TypeResolver"]
