"""Partitioned dataflow runtime: jobs, activities, stages and operators."""

from .executor import JobRun, execute
from .job import ActivityGraph, ConnectorDescriptor, JobSpec, OperatorDescriptor, compute_stages, expand_activities

__all__ = ["ActivityGraph", "ConnectorDescriptor", "JobRun", "JobSpec", "OperatorDescriptor", "compute_stages",
           "execute", "expand_activities"]
