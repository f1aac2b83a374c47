"""Job specifications, activity expansion and stage computation.

A job is a DAG of operators joined by connectors. Each operator runs as
``partitions`` instances. An operator consists of one or more activities; an
activity consumes some of the operator's input ports and/or produces its
output. A blocking edge ``(a, b)`` inside an operator means activity ``b``
may start only after ``a`` has finished on every partition (a hash join's
build before its probe, a sort's run generation before its merge).

Stages: activities linked by connectors run concurrently and form one
component; components are ordered by the longest chain of blocking edges
leading to them, which gives the fewest stages in which every blocking edge
crosses a stage boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

CONNECTOR_KINDS = ("OneToOne", "MToNPartitioning", "MToNPartitioningMerging", "MToNReplicating")


@dataclass
class OperatorDescriptor:
    id: int
    name: str  # descriptor class name in the operator taxonomy
    label: str
    partitions: int
    factory: Callable  # (partition, task) -> operator instance
    activities: tuple = ("main",)
    blocking: tuple = ()  # ((before, after), ...)
    input_activity: dict = field(default_factory=dict)  # port -> activity (default "main")
    output_activity: str = "main"
    n_inputs: int = 0

    def activity_of_port(self, port: int) -> str:
        return self.input_activity.get(port, "main")


@dataclass
class ConnectorDescriptor:
    id: int
    kind: str
    src: int
    dst: int
    dst_port: int = 0
    hash_fn: Callable | None = None  # tuple -> tuple of key values
    sort_key: Callable | None = None  # tuple -> comparable key
    label: str = ""


@dataclass
class JobSpec:
    operators: dict = field(default_factory=dict)  # id -> OperatorDescriptor
    connectors: list = field(default_factory=list)
    root: int = 0

    def add_operator(self, desc: OperatorDescriptor) -> OperatorDescriptor:
        self.operators[desc.id] = desc
        return desc

    def connect(self, kind: str, src: int, dst: int, port: int = 0, **kw) -> ConnectorDescriptor:
        if kind not in CONNECTOR_KINDS:
            raise ValueError(f"unknown connector kind {kind}")
        c = ConnectorDescriptor(len(self.connectors) + 1, kind, src, dst, port, **kw)
        self.connectors.append(c)
        self.operators[dst].n_inputs = max(self.operators[dst].n_inputs, port + 1)
        return c

    def validate(self) -> None:
        for c in self.connectors:
            if c.src not in self.operators or c.dst not in self.operators:
                raise ValueError(f"connector {c.id} has a dangling endpoint")
            if c.kind == "OneToOne" and self.operators[c.src].partitions != self.operators[c.dst].partitions:
                raise ValueError(f"OneToOne connector {c.id} joins {self.operators[c.src].partitions} to "
                                 f"{self.operators[c.dst].partitions} partitions")

    def output_connector(self, op_id: int) -> ConnectorDescriptor | None:
        for c in self.connectors:
            if c.src == op_id:
                return c
        return None

    def input_connectors(self, op_id: int) -> list:
        return sorted((c for c in self.connectors if c.dst == op_id), key=lambda c: c.dst_port)

    def describe(self) -> str:
        lines = []
        for op in self.operators.values():
            acts = "" if op.activities == ("main",) else f" activities={'/'.join(op.activities)}"
            lines.append(f"op{op.id} {op.name} x{op.partitions}{acts}: {op.label}")
        for c in self.connectors:
            extra = f" [{c.label}]" if c.label else ""
            lines.append(f"conn{c.id} {c.kind} op{c.src} -> op{c.dst}:{c.dst_port}{extra}")
        return "\n".join(lines)


@dataclass
class ActivityGraph:
    nodes: list  # (op_id, activity)
    data_edges: list  # ((op, act), (op, act))
    blocking_edges: list


def expand_activities(job: JobSpec) -> ActivityGraph:
    nodes = [(op.id, a) for op in job.operators.values() for a in op.activities]
    data = []
    for c in job.connectors:
        src = (c.src, job.operators[c.src].output_activity)
        dst = (c.dst, job.operators[c.dst].activity_of_port(c.dst_port))
        data.append((src, dst))
    blocking = [((op.id, a), (op.id, b)) for op in job.operators.values() for a, b in op.blocking]
    return ActivityGraph(nodes, data, blocking)


def compute_stages(g: ActivityGraph) -> list:
    """Ordered list of stages, each a sorted list of ``(op_id, activity)``."""
    parent = {n: n for n in g.nodes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in g.data_edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    comps: dict = {}
    for n in g.nodes:
        comps.setdefault(find(n), []).append(n)
    succ: dict = {r: set() for r in comps}
    for a, b in g.blocking_edges:
        ra, rb = find(a), find(b)
        if ra == rb:
            raise RuntimeError(f"blocking edge {a} -> {b} inside one pipelined component")
        succ[ra].add(rb)
    # longest path layering (Kahn order)
    indeg = {r: 0 for r in comps}
    for r in succ:
        for s in succ[r]:
            indeg[s] += 1
    level = {r: 0 for r in comps}
    ready = sorted(r for r in comps if indeg[r] == 0)
    seen = 0
    while ready:
        r = ready.pop()
        seen += 1
        for s in sorted(succ[r]):
            level[s] = max(level[s], level[r] + 1)
            indeg[s] -= 1
            if indeg[s] == 0:
                ready.append(s)
    if seen != len(comps):
        raise RuntimeError("cycle in the activity graph")
    n_stages = max(level.values(), default=-1) + 1
    stages = [[] for _ in range(n_stages)]
    for r, members in comps.items():
        stages[level[r]].extend(members)
    return [sorted(s) for s in stages]
