"""ADM: the value model, datatypes, ordering and text syntax."""

from .compare import Ordering, compare_values, key_of, sort_key
from .text import parse_adm_stream, parse_adm_text, print_adm
from .types import (
    BagType,
    ConformanceReport,
    Datatype,
    FieldDef,
    ListType,
    RecordType,
    TypeRef,
    conforms,
)
from .values import Bag, Circle, Duration, Int64, Interval, Line, Point, Polygon, Rectangle, adm_equal, type_name

__all__ = [
    "Bag", "BagType", "Circle", "ConformanceReport", "Datatype", "Duration", "FieldDef", "Int64",
    "Interval", "Line", "ListType", "Ordering", "Point", "Polygon", "RecordType", "Rectangle",
    "TypeRef", "adm_equal", "compare_values", "conforms", "key_of", "parse_adm_stream",
    "parse_adm_text", "print_adm", "sort_key", "type_name",
]
