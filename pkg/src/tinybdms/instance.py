"""One embedded database instance: storage, log, catalog, compiler and feeds.

``Instance.execute`` runs a script of statements in order. Queries and DML go
through resolve → translate → optimize → job generation → execution; DDL goes
to the catalog, which serializes it under its own lock.
"""

from __future__ import annotations

import logging
import os
import threading
from dataclasses import dataclass, field, replace

from .adm.text import print_adm
from .aql import ast as A
from .aql.parser import parse
from .aql.resolve import SessionConfig, resolve_expr
from .catalog.catalog import META_LOG, Catalog
from .compiler import jobgen, rules
from .compiler.expr import EvalContext, ExprCompiler
from .compiler.plan import InsertSink, explain as explain_plan
from .compiler.translate import Translator
from .config import Config
from .errors import IngestError, SemanticError
from .ingest.external import read_external
from .ingest.feeds import FeedManager
from .ingest.load import bulk_load, read_load_file
from .runtime.executor import JobRun, execute as run_job
from .runtime.job import compute_stages, expand_activities
from .runtime.operators import TaskContext
from .txn.manager import TransactionManager
from .txn.recovery import replay

log = logging.getLogger("tinybdms")


@dataclass
class StatementResult:
    kind: str  # query | ddl | update | set | feed | load
    values: list | None = None  # query results in output order
    status: dict = field(default_factory=dict)
    plan: str | None = None  # EXPLAIN text when requested
    run: JobRun | None = None

    def lines(self) -> list[str]:
        if self.values is not None:
            return [print_adm(v) for v in self.values]
        return [print_adm(self.status)]


@dataclass
class Compiled:
    plan: object
    job: object
    task: TaskContext

    def explain(self) -> str:
        stages = compute_stages(expand_activities(self.job))
        parts = ["-- plan", explain_plan(self.plan), "-- job", self.job.describe(), "-- stages"]
        parts += [f"stage {i}: " + " ".join(f"op{o}.{a}" for o, a in st) for i, st in enumerate(stages)]
        return "\n".join(parts)


class Instance:
    """Open with :meth:`open` (or as a context manager); every open replays
    the logs, so reopening a crashed data directory is recovery."""

    def __init__(self, config: Config | None = None, *, faults=None, optimize: bool = True, **overrides):
        self.config = replace(config or Config(), **overrides)
        self.faults = faults
        self.optimize = optimize
        self.hooks: dict = {}
        self.recovery: list = []
        self.last_run: JobRun | None = None
        self.txn: TransactionManager | None = None
        self.catalog: Catalog | None = None
        self.feeds: FeedManager | None = None
        self._open = False
        self._lock = threading.Lock()

    # ---- lifecycle

    def open(self) -> "Instance":
        cfg = self.config
        for sub in ("log", "storage", "tmp"):
            os.makedirs(os.path.join(cfg.data_dir, sub), exist_ok=True)
        self.txn = TransactionManager(os.path.join(cfg.data_dir, "log"), self.faults, cfg.fsync)
        self.catalog = Catalog(os.path.join(cfg.data_dir, "storage"), self.txn, partitions=cfg.partitions,
                               memory_budget=cfg.memory_budget, merge_k=cfg.merge_k, faults=self.faults)
        self.recovery = [self.catalog.open_metadata()]
        stores = self.catalog.open_user_stores()
        self.recovery += self._replay_user_logs(stores)
        self.feeds = FeedManager(self.catalog, self.txn)
        self._open = True
        for s in self.recovery:
            if s.replayed or s.truncated_bytes:
                log.info("recovery %s", s.describe())
        return self

    def _replay_user_logs(self, stores: dict) -> list:
        log_dir = self.txn.log_dir
        names = sorted((f[:-4] for f in os.listdir(log_dir) if f.endswith(".wal") and f[:-4] != META_LOG),
                       key=lambda n: (len(n), n))
        out = []
        for name in names:
            p = int(name)

            def resolve_index(ds_id, ix, p=p):
                s = stores.get(ds_id)
                if s is None or p >= s.n:
                    return None
                return s.partitions[p].index(ix)

            out.append(replay(name, self.txn.partition(name).log, resolve_index))
        return out

    def close(self) -> None:
        if not self._open:
            return
        self._open = False
        self.feeds.stop_all()
        # clean shutdown: persist memory components so a restart replays nothing
        for store in list(self.catalog.stores.values()) + list(self.catalog.meta_stores.values()):
            self.txn.flush(store)
        self.catalog.close()
        self.txn.close()

    def crash(self) -> None:
        """Drop the instance the way a killed process would: nothing is
        flushed and unforced log records are lost. For fault-injection tests."""
        if not self._open:
            return
        self._open = False
        for pipe in list(self.feeds.active.values()):
            pipe.stopping.set()
            pipe._shutdown_sockets()
        self.txn.close()
        self.catalog.close()

    def __enter__(self) -> "Instance":
        return self if self._open else self.open()

    def __exit__(self, *exc) -> None:
        self.close()

    # ---- statements

    def session(self, **settings) -> SessionConfig:
        return SessionConfig(**settings)

    def execute(self, text: str, session: SessionConfig | None = None, *, explain: bool = False) -> list:
        """Run every statement of ``text``; returns one :class:`StatementResult`
        per statement. ``session`` carries ``use``/``set`` state across calls."""
        session = session if session is not None else SessionConfig()
        return [self.execute_statement(s, session, explain=explain) for s in parse(text)]

    def query(self, text: str, session: SessionConfig | None = None) -> list:
        """Values of the last query in ``text``."""
        results = [r for r in self.execute(text, session) if r.kind == "query"]
        if not results:
            raise SemanticError("no query statement in the request")
        return results[-1].values

    def execute_statement(self, s: A.Statement, session: SessionConfig, *, explain: bool = False):
        if isinstance(s, A.SetStmt):
            session.apply_set(s.name, s.value)
            return StatementResult("set", status={"status": "ok", "statement": f"set {s.name}"})
        if isinstance(s, A.UseDataverse):
            if s.name not in self.catalog.dataverses:
                line, col = s.pos
                raise SemanticError(f"unknown dataverse {s.name}", line, col)
            session.dataverse = s.name
            return StatementResult("set", status={"status": "ok", "statement": f"use dataverse {s.name}"})
        if isinstance(s, A.DDL_TYPES):
            return StatementResult("ddl", status=self.catalog.execute(s, session))
        if isinstance(s, A.QueryStmt):
            c = self.compile_query(s.expr, session)
            return self._run(c, "query", explain)
        if isinstance(s, (A.Insert, A.Delete)):
            c = self.compile_update(s, session)
            return self._run(c, "update", explain)
        if isinstance(s, A.ConnectFeed):
            dv = self._dataverse(s.feed, session, s)
            pipe = self.feeds.connect(dv, s.feed.name, s.dataset.name)
            return StatementResult("feed", status={"status": "ok", "statement": f"connect feed {s.feed.name}",
                                                   "address": f"{pipe.host}:{pipe.port}"})
        if isinstance(s, A.DisconnectFeed):
            dv = self._dataverse(s.feed, session, s)
            pipe = self.feeds.disconnect(dv, s.feed.name)
            status = {"status": "ok", "statement": f"disconnect feed {s.feed.name}"}
            if pipe is not None:
                status.update(stored=pipe.stats.stored, rejected=pipe.stats.rejected)
            return StatementResult("feed", status=status)
        if isinstance(s, A.LoadDataset):
            return StatementResult("load", status=self.load(s, session))
        raise SemanticError(f"unsupported statement {type(s).__name__}")

    def _dataverse(self, qn: A.QName, session: SessionConfig, node) -> str:
        dv = qn.dataverse or session.dataverse
        if dv is None:
            line, col = getattr(node, "pos", (0, 0))
            raise SemanticError(f"no dataverse selected for {qn.name}; add 'use dataverse'", line, col)
        return dv

    def _qualify(self, qn: A.QName, session, node) -> A.QName:
        return A.QName(self._dataverse(qn, session, node), qn.name)

    # ---- compilation

    def task(self) -> TaskContext:
        cfg = self.config
        ctx = EvalContext(read_dataset=self._read_dataset)
        return TaskContext(self.catalog, self.txn, ExprCompiler(ctx),
                           read_external=lambda ds: read_external(self.catalog, ds),
                           sort_budget=cfg.sort_budget, join_budget=cfg.join_budget,
                           temp_dir=os.path.join(cfg.data_dir, "tmp"), hooks=self.hooks)

    def _read_dataset(self, dv: str, name: str):
        ds = self.catalog.dataset(dv, name)
        if ds is None:
            raise SemanticError(f"unknown dataset {dv}.{name}")
        if not ds.internal:
            return list(read_external(self.catalog, ds))
        return list(self.catalog.store(dv, name).scan())

    def _finish(self, root, translator: Translator) -> Compiled:
        n = self.config.partitions
        if self.optimize:
            plan = rules.optimize(root, self.catalog, n, translator.fresh)
        else:
            plan = rules.physical(root, n)
        task = self.task()
        return Compiled(plan, jobgen.generate_job(plan, task), task)

    def compile_query(self, e: A.Expr, session: SessionConfig) -> Compiled:
        t = Translator(self.catalog)
        return self._finish(t.query(resolve_expr(e, self.catalog, session)), t)

    def compile_update(self, s, session: SessionConfig) -> Compiled:
        t = Translator(self.catalog)
        ds = self._qualify(s.dataset, session, s)
        if isinstance(s, A.Insert):
            root = t.insert(replace(s, dataset=ds, expr=resolve_expr(s.expr, self.catalog, session)))
        else:
            where = None if s.where is None else resolve_expr(s.where, self.catalog, session, (s.var,))
            root = t.delete(replace(s, dataset=ds, where=where))
        return self._finish(root, t)

    def explain(self, text: str, session: SessionConfig | None = None) -> str:
        """EXPLAIN text of the last query or DML statement in ``text``."""
        session = session if session is not None else SessionConfig()
        out = None
        for s in parse(text):
            if isinstance(s, A.QueryStmt):
                out = self.compile_query(s.expr, session).explain()
            elif isinstance(s, (A.Insert, A.Delete)):
                out = self.compile_update(s, session).explain()
            else:
                self.execute_statement(s, session)
        if out is None:
            raise SemanticError("nothing to explain")
        return out

    def _run(self, c: Compiled, kind: str, explain: bool) -> StatementResult:
        cfg = self.config
        run = run_job(c.job, c.task, frame_size=cfg.frame_size, queue_depth=cfg.queue_depth,
                      debug=log.isEnabledFor(logging.DEBUG))
        self.last_run = run
        plan = c.explain() if explain else None
        if kind == "query":
            values = [v for p in sorted(c.task.results) for v in c.task.results[p]]
            return StatementResult("query", values=values, plan=plan, run=run)
        n = sum(c.task.mutations.values())
        word = "inserted" if isinstance(c.plan, InsertSink) else "deleted"
        return StatementResult("update", status={"status": "ok", word: n}, plan=plan, run=run)

    # ---- bulk load

    def load(self, s: A.LoadDataset, session: SessionConfig) -> dict:
        dv = self._dataverse(s.dataset, session, s)
        ds = self.catalog.dataset(dv, s.dataset.name)
        if ds is None:
            raise SemanticError(f"unknown dataset {dv}.{s.dataset.name}", *s.pos)
        if not ds.internal:
            raise IngestError(f"cannot load into external dataset {ds.qualified}")
        if s.adaptor != "localfs":
            raise IngestError(f"unsupported load adaptor {s.adaptor!r}; only localfs is available")
        records = read_load_file(self.catalog, ds, dict(s.properties))
        n = bulk_load(self.catalog, self.txn, ds, records)
        return {"status": "ok", "statement": f"load dataset {ds.qualified}", "loaded": n}

