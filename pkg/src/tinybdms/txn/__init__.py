"""Record-level transactions, write-ahead logging and recovery."""

from ..faults import POINTS, FaultInjector, NoFaults
from .locks import LockTable
from .log import LogManager, LogRecord
from .manager import TransactionManager
from .recovery import ReplaySummary, replay

__all__ = ["POINTS", "FaultInjector", "LockTable", "LogManager", "LogRecord", "NoFaults", "ReplaySummary",
           "TransactionManager", "replay"]
