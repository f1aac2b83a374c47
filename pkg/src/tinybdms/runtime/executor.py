"""Stage-by-stage job execution.

Stages run in order. Within a stage every (activity, partition) pair gets its
own thread; the threads talk only through connector queues. The first
failure sets the job's abort flag, which makes every blocked queue operation
raise, so the stage drains quickly and the error is re-raised to the caller.

Trace format (one line each, collected in ``JobRun.trace``)::

    stage <i> start <op>.<activity> ...
    op<id>.<activity>[<p>] in=<n> out=<n>
    stage <i> finish
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field

from ..errors import JobFailed, SimulatedCrash, TinyBdmsError
from .connectors import Counter, Inbox, JobAborted, Writer
from .job import JobSpec, compute_stages, expand_activities

log = logging.getLogger("tinybdms.runtime")

DEFAULT_FRAME_SIZE = 256
DEFAULT_QUEUE_DEPTH = 16


@dataclass
class JobRun:
    stages: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    connector_counts: dict = field(default_factory=dict)  # connector id -> (sent, delivered)
    instance_counts: dict = field(default_factory=dict)  # (op, activity, p) -> (in, out)


class _Slot:
    """Input and output counters of one activity instance."""

    def __init__(self):
        self.n_in = 0
        self.n_out = 0

    def count_in(self, k: int) -> None:
        self.n_in += k


def execute(job: JobSpec, task, *, frame_size: int = DEFAULT_FRAME_SIZE, queue_depth: int = DEFAULT_QUEUE_DEPTH,
            debug: bool = False) -> JobRun:
    job.validate()
    graph = expand_activities(job)
    stages = compute_stages(graph)
    run = JobRun(stages=stages)
    abort = threading.Event()
    instances = {op.id: [op.factory(p, task) for p in range(op.partitions)] for op in job.operators.values()}
    counters = {c.id: (Counter(), Counter()) for c in job.connectors}

    def note(line: str) -> None:
        run.trace.append(line)
        if debug:
            log.debug(line)

    try:
        for si, stage in enumerate(stages):
            members = set(stage)
            note(f"stage {si} start " + " ".join(f"op{o}.{a}" for o, a in stage))
            # inboxes of every connector whose consumer activity runs now
            inboxes = {}
            for c in job.connectors:
                dst = job.operators[c.dst]
                if (c.dst, dst.activity_of_port(c.dst_port)) in members:
                    merging = c.kind == "MToNPartitioningMerging"
                    n_src = job.operators[c.src].partitions
                    producers = 1 if c.kind == "OneToOne" else n_src
                    inboxes[c.id] = [Inbox(producers, merging, queue_depth, abort, c.sort_key)
                                     for _ in range(dst.partitions)]
            threads, errors, slots = [], [], {}
            for op_id, act in stage:
                op = job.operators[op_id]
                out_conn = job.output_connector(op_id) if act == op.output_activity else None
                in_conns = [c for c in job.input_connectors(op_id) if op.activity_of_port(c.dst_port) == act]
                for p in range(op.partitions):
                    slot = _Slot()
                    slots[(op_id, act, p)] = slot
                    inputs = {c.dst_port: inboxes[c.id][p].reader(counters[c.id][1], slot.count_in)
                              for c in in_conns}
                    writer = None
                    if out_conn is not None:
                        targets = inboxes[out_conn.id]
                        if out_conn.kind == "OneToOne":
                            targets = [targets[p]]
                        writer = Writer(out_conn.kind, p, targets, frame_size, counters[out_conn.id][0],
                                        out_conn.hash_fn)
                    th = threading.Thread(target=_work, name=f"op{op_id}.{act}[{p}]",
                                          args=(instances[op_id][p], act, inputs, writer, slot, abort, errors),
                                          daemon=True)
                    threads.append(th)
            for th in threads:
                th.start()
            for th in threads:
                th.join()
            for (op_id, act, p), slot in sorted(slots.items()):
                run.instance_counts[(op_id, act, p)] = (slot.n_in, slot.n_out)
                note(f"op{op_id}.{act}[{p}] in={slot.n_in} out={slot.n_out}")
            if errors:
                _raise(errors)
            note(f"stage {si} finish")
    finally:
        for insts in instances.values():
            for inst in insts:
                try:
                    inst.close()
                except Exception:  # cleanup must not mask the job's outcome
                    log.exception("operator cleanup failed")
        run.connector_counts = {cid: (s.n, d.n) for cid, (s, d) in counters.items()}
    return run


def _work(inst, act, inputs, writer, slot, abort, errors) -> None:
    try:
        if writer is None:
            emit = _discard
        else:
            def emit(t, _e=writer.emit):
                slot.n_out += 1
                _e(t)
        inst.run(act, inputs, emit)
        # a consumer must see end-of-stream on every input before it returns
        for it in inputs.values():
            for _ in it:
                pass
        if writer is not None:
            writer.close()
    except JobAborted:
        pass
    except BaseException as e:  # noqa: B036 - a simulated crash must also stop the job
        errors.append((threading.current_thread().name, e))
        abort.set()


def _discard(t) -> None:
    raise RuntimeError("operator emitted a tuple but has no output connector")


def _raise(errors) -> None:
    for _name, e in errors:
        if isinstance(e, SimulatedCrash):
            raise e
    name, first = errors[0]
    if isinstance(first, TinyBdmsError):
        raise first
    raise JobFailed(f"{name}: {first!r}", operator=name, cause=first) from first
