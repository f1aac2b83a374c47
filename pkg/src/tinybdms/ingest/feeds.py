"""Socket feeds: continuous ingestion through an intake, compute, store job.

Wire protocol (client side):

* connect to the feed's address and port and send ADM records, one per line;
* the server answers ``OK <n>`` after every 100 records and once more when
  the client closes its sending side, where ``n`` counts the records of this
  connection processed so far (stored or rejected);
* an acknowledged record that was stored is durable (its commit record was
  forced before the ack was written).

Lines that fail to parse, fail the feed function, do not conform to the
dataset type or repeat a primary key are skipped and counted as rejected.

The pipeline runs as a resident job of three singleton operators linked by
OneToOne connectors with one-tuple frames, so a slow store stage fills the
bounded queues and the intake stops reading from the socket.
"""

from __future__ import annotations

import logging
import socket
import threading
from dataclasses import dataclass, field

from ..adm.text import parse_adm_text
from ..adm.types import coerce, conforms
from ..aql import ast as A
from ..aql.resolve import SessionConfig, resolve_expr
from ..compiler.expr import EvalContext, ExprCompiler
from ..errors import IngestError, TinyBdmsError
from ..runtime.executor import execute
from ..runtime.job import JobSpec, OperatorDescriptor
from ..runtime.operators import Instance

log = logging.getLogger("tinybdms.feeds")

ACK_EVERY = 100
FEED_VAR = "feed-record"


def parse_sockets(value: str) -> tuple[str, int]:
    host, _, port = value.rpartition(":")
    try:
        return host or "127.0.0.1", int(port)
    except ValueError:
        raise IngestError(f"malformed sockets property {value!r}; expected host:port") from None


@dataclass
class FeedStats:
    received: int = 0
    stored: int = 0
    rejected: int = 0
    connections: int = 0
    errors: list = field(default_factory=list)


class _Intake(Instance):
    def __init__(self, p, task, pipe):
        super().__init__(p, task)
        self.pipe = pipe

    def run(self, activity, inputs, emit):
        srv = self.pipe.server
        while not self.pipe.stopping.is_set():
            try:
                conn, _addr = srv.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            cid = self.pipe.register(conn)
            try:
                with conn.makefile("rb") as f:
                    for raw in f:
                        line = raw.decode("utf-8", errors="replace").strip()
                        if line:
                            self.pipe.stats.received += 1
                            emit({"conn": cid, "line": line})
            except OSError:
                pass
            emit({"conn": cid, "eof": True})


class _Compute(Instance):
    def __init__(self, p, task, pipe):
        super().__init__(p, task)
        self.pipe = pipe
        self.fn = pipe.compiled_function()

    def run(self, activity, inputs, emit):
        for t in inputs[0]:
            if "line" not in t:
                emit(t)
                continue
            try:
                rec = parse_adm_text(t["line"])
                if self.fn is not None:
                    rec = self.fn({FEED_VAR: rec})
                emit({"conn": t["conn"], "record": rec})
            except TinyBdmsError as e:
                emit({"conn": t["conn"], "error": str(e)})


class _Store(Instance):
    def __init__(self, p, task, pipe):
        super().__init__(p, task)
        self.pipe = pipe

    def run(self, activity, inputs, emit):
        pipe, ds = self.pipe, self.pipe.dataset
        store = pipe.catalog.store(ds.dataverse, ds.name)
        resolver = pipe.catalog.resolver(ds.dataverse)
        body = resolver.get(ds.type_name).body
        counts: dict = {}
        for t in inputs[0]:
            cid = t["conn"]
            if t.get("eof"):
                pipe.ack(cid, counts.get(cid, 0), final=True)
                continue
            err = t.get("error")
            if err is None:
                rec = t["record"]
                report = conforms(rec, ds.type_name, resolver)
                if not report.ok:
                    err = f"does not conform to {ds.type_name}: {report.describe()}"
                else:
                    try:
                        pipe.txn.insert(store, coerce(rec, body, resolver))
                        pipe.stats.stored += 1
                    except TinyBdmsError as e:
                        err = str(e)
            if err is not None:
                pipe.stats.rejected += 1
                if len(pipe.stats.errors) < 100:
                    pipe.stats.errors.append(err)
                log.info("feed %s rejected a record: %s", pipe.feed.name, err)
            n = counts[cid] = counts.get(cid, 0) + 1
            if n % ACK_EVERY == 0:
                pipe.ack(cid, n)


class FeedPipeline:
    def __init__(self, catalog, txn, feed, dataset, *, host: str | None = None, port: int | None = None):
        self.catalog = catalog
        self.txn = txn
        self.feed = feed
        self.dataset = dataset
        h, p = parse_sockets(feed.property("sockets", ""))
        self.host = host if host is not None else h
        self.port = port if port is not None else p
        self.state = "stopped"
        self.error: BaseException | None = None
        self.stats = FeedStats()
        self.stopping = threading.Event()
        self.server: socket.socket | None = None
        self.thread: threading.Thread | None = None
        self._conns: dict = {}
        self._lock = threading.Lock()

    # ---- job pieces

    def compiled_function(self):
        if not self.feed.function:
            return None
        session = SessionConfig(dataverse=self.feed.dataverse)
        call = A.Call(self.feed.function, (A.VarRef(FEED_VAR),))
        e = resolve_expr(call, self.catalog, session, (FEED_VAR,))
        return ExprCompiler(EvalContext(read_dataset=self._read)).compile(e)

    def _read(self, dv, name):
        store = self.catalog.store(dv, name)
        return store.scan() if store is not None else ()

    def job(self) -> JobSpec:
        job = JobSpec()
        for i, (name, cls) in enumerate((("FeedIntakeOperatorDescriptor", _Intake),
                                         ("FeedComputeOperatorDescriptor", _Compute),
                                         ("FeedStoreOperatorDescriptor", _Store)), 1):
            job.add_operator(OperatorDescriptor(i, name, f"{self.feed.name} {name[4:-18].lower()}", 1,
                                                lambda p, task, c=cls: c(p, task, self)))
        job.connect("OneToOne", 1, 2)
        job.connect("OneToOne", 2, 3)
        job.root = 3
        return job

    # ---- connections

    def register(self, conn) -> int:
        with self._lock:
            cid = len(self._conns) + 1
            self._conns[cid] = conn
            self.stats.connections += 1
            return cid

    def ack(self, cid: int, n: int, final: bool = False) -> None:
        conn = self._conns.get(cid)
        if conn is None:
            return
        try:
            conn.sendall(f"OK {n}\n".encode())
        except OSError:
            pass
        if final:
            self._close_conn(cid)

    def _close_conn(self, cid: int) -> None:
        with self._lock:
            conn = self._conns.pop(cid, None)
        if conn is not None:
            try:
                conn.close()
            except OSError:
                pass

    # ---- lifecycle

    def start(self) -> "FeedPipeline":
        srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            srv.bind((self.host, self.port))
        except OSError as e:
            srv.close()
            raise IngestError(f"feed {self.feed.name}: cannot listen on {self.host}:{self.port}: {e.strerror}") \
                from None
        srv.listen(8)
        srv.settimeout(0.1)
        self.server = srv
        self.port = srv.getsockname()[1]
        self.state = "connected"
        self.thread = threading.Thread(target=self._run, name=f"feed-{self.feed.name}", daemon=True)
        self.thread.start()
        return self

    def _run(self) -> None:
        try:
            execute(self.job(), None, frame_size=1)
            self.state = "stopped"
        except BaseException as e:  # noqa: B036 - includes simulated crashes
            self.error = e
            self.state = "failed"
            log.warning("feed %s failed: %r", self.feed.name, e)
        finally:
            self._shutdown_sockets()

    def _shutdown_sockets(self) -> None:
        if self.server is not None:
            try:
                self.server.close()
            except OSError:
                pass
        for cid in list(self._conns):
            self._close_conn(cid)

    def stop(self, timeout: float = 10.0) -> None:
        self.stopping.set()
        # end the current connection's input; already queued records still get stored
        for conn in list(self._conns.values()):
            try:
                conn.shutdown(socket.SHUT_RD)
            except OSError:
                pass
        if self.thread is not None:
            self.thread.join(timeout)

    @property
    def address(self) -> tuple[str, int]:
        return self.host, self.port

    def describe(self) -> dict:
        return {"feed": self.feed.name, "dataset": self.dataset.name, "state": self.state,
                "address": f"{self.host}:{self.port}", "received": self.stats.received,
                "stored": self.stats.stored, "rejected": self.stats.rejected}


class FeedManager:
    """Active feed connections of one instance."""

    def __init__(self, catalog, txn):
        self.catalog = catalog
        self.txn = txn
        self.active: dict = {}  # (dataverse, feed) -> FeedPipeline
        catalog.feed_is_active = self.is_active

    def is_active(self, dataverse: str, name: str) -> bool:
        pipe = self.active.get((dataverse, name))
        return pipe is not None and pipe.state == "connected"

    def connect(self, dataverse: str, feed_name: str, dataset_name: str, **where) -> FeedPipeline:
        feed = self.catalog.feeds.get((dataverse, feed_name))
        if feed is None:
            raise IngestError(f"unknown feed {dataverse}.{feed_name}")
        ds = self.catalog.dataset(dataverse, dataset_name)
        if ds is None:
            raise IngestError(f"unknown dataset {dataverse}.{dataset_name}")
        if not ds.internal:
            raise IngestError(f"feed target {ds.qualified} must be an internal dataset")
        if self.is_active(dataverse, feed_name):
            raise IngestError(f"feed {feed_name} is already connected")
        if feed.property("type-name") != ds.type_name and not feed.function:
            raise IngestError(f"feed {feed_name} delivers {feed.property('type-name')} but {ds.qualified} "
                              f"holds {ds.type_name}")
        pipe = FeedPipeline(self.catalog, self.txn, feed, ds, **where).start()
        self.active[(dataverse, feed_name)] = pipe
        self.catalog.set_feed_connection(dataverse, feed_name, dataset_name)
        return pipe

    def disconnect(self, dataverse: str, feed_name: str) -> FeedPipeline | None:
        pipe = self.active.pop((dataverse, feed_name), None)
        if pipe is not None:
            pipe.stop()
        if (dataverse, feed_name) in self.catalog.feeds:
            self.catalog.set_feed_connection(dataverse, feed_name, None)
        return pipe

    def stop_all(self) -> None:
        for key in list(self.active):
            pipe = self.active.pop(key)
            pipe.stop()


class FeedJoint:
    """Tap point where a secondary feed would subscribe to a primary feed's
    records. Cascading feeds are out of scope, so only the interface exists."""

    def __init__(self, pipeline: FeedPipeline, stage: str = "intake"):
        self.pipeline = pipeline
        self.stage = stage

    def subscribe(self, consumer) -> None:
        raise NotImplementedError("secondary feeds are not supported")
