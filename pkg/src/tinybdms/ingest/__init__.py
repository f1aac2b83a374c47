"""Data entry: external datasets, bulk load and socket feeds."""

from .external import read_external
from .feeds import FeedJoint, FeedManager, FeedPipeline
from .load import bulk_load, read_load_file

__all__ = ["FeedJoint", "FeedManager", "FeedPipeline", "bulk_load", "read_external", "read_load_file"]
