"""Container-management layer: ingest orchestration and the HTTP service.

The portal mediates every interaction at the container level and never
interprets document semantics itself; parsing, rendering, metadata and
navigation are delegated to the markup/render/triples/graph/services
modules.  All reads run on immutable state snapshots; mutations are
serialized and swap in a new snapshot atomically, so concurrent readers
always observe either the pre- or post-mutation corpus, never a mix.
"""

from __future__ import annotations

import os
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from . import docmodel, graph, markup, render, services, store, triples
from .docmodel import LinkedDocument
from .markup import ParseError, ParseFailure, SymbolRegistry
from .services import ThreadAnchor
from .store import Store

DERIVED_DIR = "derived"


class AuthFailed(Exception):
    code = "AuthFailed"


@dataclass(frozen=True)
class PortalConfig:
    data_dir: str = "data"
    listen: str = "127.0.0.1:8030"
    write_token: str = ""
    corpus_root: str = "fixtures/corpus"

    @classmethod
    def from_env(cls, **overrides) -> "PortalConfig":
        values = {
            "data_dir": os.environ.get("PORTAL_DATA_DIR", cls.data_dir),
            "listen": os.environ.get("PORTAL_LISTEN", cls.listen),
            "write_token": os.environ.get("PORTAL_WRITE_TOKEN", cls.write_token),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass(frozen=True)
class IngestReport:
    path: str
    revision: int | None
    parse_errors: tuple[ParseError, ...]
    triples_added: int
    fragments: int
    status: str  # ok | failed

    def to_obj(self) -> dict:
        return {
            "path": self.path,
            "revision": self.revision,
            "parse_errors": [
                {
                    "line": e.line,
                    "column": e.column,
                    "code": e.code,
                    "message": e.message,
                }
                for e in self.parse_errors
            ],
            "triples_added": self.triples_added,
            "fragments": self.fragments,
            "status": self.status,
        }


def _failed(path: str, errors: list[ParseError]) -> IngestReport:
    return IngestReport(
        path=path,
        revision=None,
        parse_errors=tuple(errors),
        triples_added=0,
        fragments=0,
        status="failed",
    )


@dataclass
class _State:
    """Immutable corpus snapshot; derived structures are cached lazily."""

    head: int
    docs: dict[str, LinkedDocument]
    doc_revs: dict[str, int]
    registry: SymbolRegistry
    doc_triples: dict[str, frozenset[triples.Triple]]
    _lock: threading.Lock = field(default_factory=threading.Lock)
    _graph: graph.DepGraph | None = None
    _merged: frozenset[triples.Triple] | None = None
    _def_index: services.DefinitionIndex | None = None

    @property
    def triple_graph(self) -> frozenset[triples.Triple]:
        with self._lock:
            if self._merged is None:
                merged: set[triples.Triple] = set()
                for ts in self.doc_triples.values():
                    merged |= ts
                self._merged = frozenset(merged)
            return self._merged

    @property
    def dep_graph(self) -> graph.DepGraph:
        with self._lock:
            if self._graph is None:
                self._graph = graph.build_dependency_graph(self.docs)
            return self._graph

    @property
    def definition_index(self) -> services.DefinitionIndex:
        with self._lock:
            if self._def_index is None:
                self._def_index = services.DefinitionIndex(self.docs)
            return self._def_index

    def labels(self) -> dict[str, str]:
        out: dict[str, str] = {}
        for path, doc in self.docs.items():
            out[docmodel.document_uri(path)] = doc.title or docmodel.doc_id(path)
            for module in doc.modules:
                for sym in module.symbols:
                    if sym.uri:
                        out[sym.uri] = sym.name
        return out


class Portal:
    """One portal instance over one data directory."""

    def __init__(self, config: PortalConfig):
        self.config = config
        self.store = Store(config.data_dir)
        self._mutate = threading.Lock()
        self._state = self._rebuild_state()
        self.threads = services.ThreadService(self.store, self._anchor_exists)
        self.folds = services.FoldSessions(self._fragment_at_head)

    # -- state construction --------------------------------------------------

    @property
    def state(self) -> _State:
        return self._state

    def _derived_path(self, path: str, revision: int) -> Path:
        return Path(self.config.data_dir) / DERIVED_DIR / str(revision) / (path + ".json")

    def _persist_derived(self, doc: LinkedDocument, revision: int) -> None:
        target = self._derived_path(doc.path, revision)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(docmodel.document_to_json(doc), encoding="utf-8")

    def _load_derived(self, path: str, revision: int) -> LinkedDocument | None:
        target = self._derived_path(path, revision)
        try:
            return docmodel.document_from_json(target.read_text(encoding="utf-8"))
        except (OSError, ValueError, KeyError):
            return None

    def _rebuild_state(self) -> _State:
        """Reconstruct the head snapshot from the store (source of truth)."""
        head = self.store.head()
        docs: dict[str, LinkedDocument] = {}
        doc_revs: dict[str, int] = {}
        registry = SymbolRegistry()
        doc_triples: dict[str, frozenset[triples.Triple]] = {}
        stx_paths = [p for p in self.store.list_paths() if p.endswith(".stx")]
        asts: dict[str, markup.DocumentAST] = {}
        for path in stx_paths:
            revision = self.store.history(path)[-1].revision
            doc_revs[path] = revision
            cached = self._load_derived(path, revision)
            if cached is not None:
                docs[path] = cached
                registry.add_document(path, cached.modules)
                continue
            text = self.store.get(path).decode("utf-8")
            ast = markup.parse_text(path, text)
            asts[path] = ast
            registry.add_ast(ast)
        for path, ast in asts.items():
            linked = markup.link_document(ast, registry)
            docs[path] = linked
            self._persist_derived(linked, doc_revs[path])
        for path, doc in docs.items():
            doc_triples[path] = triples.extract_triples(doc, doc_revs[path])
        return _State(
            head=head,
            docs=docs,
            doc_revs=doc_revs,
            registry=registry,
            doc_triples=doc_triples,
        )

    # -- lookups used by services --------------------------------------------

    def _fragment_at_head(self, fragment: str) -> bool:
        try:
            path, _ = docmodel.split_fragment_id(fragment)
        except ValueError:
            return False
        doc = self._state.docs.get(path)
        return doc is not None and fragment in doc.fragments

    def _anchor_exists(self, anchor: ThreadAnchor) -> bool:
        try:
            doc = self.document_at(anchor.doc, anchor.revision)
        except (store.NotFound, store.NoSuchRevision, ParseFailure):
            return False
        return anchor.fragment in doc.fragments

    def document_at(self, path: str, revision: int | None = None) -> LinkedDocument:
        """Linked snapshot of a document at a revision (default head)."""
        state = self._state
        if revision is None or (
            path in state.doc_revs and revision >= state.doc_revs[path]
        ):
            doc = state.docs.get(path)
            if doc is None:
                raise store.NotFound(f"{path!r} is not an ingested document")
            if revision is not None and revision > state.head:
                raise store.NoSuchRevision(
                    f"revision {revision} does not exist (head is {state.head})"
                )
            return doc
        # historical view: the snapshot persisted when that revision was made
        self.store.get(path, revision)  # raises NotFound/NoSuchRevision
        history = self.store.history(path)
        commit_rev = max(r.revision for r in history if r.revision <= revision)
        cached = self._load_derived(path, commit_rev)
        if cached is not None:
            return cached
        # derived snapshot lost: rebuild from the sources at that revision
        registry = SymbolRegistry()
        asts = {}
        for other in self.store.list_paths(commit_rev):
            if not other.endswith(".stx"):
                continue
            ast = markup.parse_text(other, self.store.get(other, commit_rev).decode())
            asts[other] = ast
            registry.add_ast(ast)
        linked = markup.link_document(asts[path], registry)
        self._persist_derived(linked, commit_rev)
        return linked

    # -- ingest ----------------------------------------------------------------

    def ingest(self, path: str, text: str, author: str, message: str) -> IngestReport:
        """Parse, resolve, commit, extract and merge one document atomically.

        On any parse or resolution failure nothing is committed and the head
        snapshot is untouched.
        """
        store.validate_path(path)
        if not path.endswith(".stx"):
            raise store.InvalidPath(f"ingest expects an .stx path, got {path!r}")
        if path.startswith(services.THREAD_PREFIX):
            raise store.InvalidPath(f"{services.THREAD_PREFIX!r} is a reserved prefix")
        with self._mutate:
            return self._ingest_locked(path, text, author, message)

    def _ingest_locked(self, path: str, text: str, author: str, message: str) -> IngestReport:
        state = self._state
        try:
            ast = markup.parse_text(path, text)
        except ParseFailure as exc:
            return _failed(path, exc.errors)
        registry = state.registry.copy()
        registry.add_ast(ast)
        try:
            linked = markup.link_document(ast, registry)
        except ParseFailure as exc:
            return _failed(path, exc.errors)
        revision = self.store.commit([(path, text.encode("utf-8"))], author, message)
        doc_triples = triples.extract_triples(linked, revision)
        self._persist_derived(linked, revision)
        docs = dict(state.docs)
        docs[path] = linked
        doc_revs = dict(state.doc_revs)
        doc_revs[path] = revision
        new_registry = state.registry.copy()
        new_registry.add_ast(ast)
        all_triples = dict(state.doc_triples)
        all_triples[path] = doc_triples
        self._state = _State(
            head=revision,
            docs=docs,
            doc_revs=doc_revs,
            registry=new_registry,
            doc_triples=all_triples,
        )
        return IngestReport(
            path=path,
            revision=revision,
            parse_errors=(),
            triples_added=len(doc_triples),
            fragments=len(linked.fragments),
            status="ok",
        )

    def ingest_corpus(self, root: str | Path, author: str, message: str) -> list[IngestReport]:
        """Ingest every .stx under `root` as one atomic batch.

        Resolution runs against the whole batch, so documents may reference
        one another regardless of file order (cycles included), and all
        successfully linked documents land in a single commit: the corpus
        becomes visible at one revision, at which every cross-reference is
        valid.  Failures stay per-document, all-or-nothing: a broken file is
        reported and left out without disturbing the rest.
        """
        root = Path(root)
        sources: dict[str, str] = {}
        for file in sorted(root.rglob("*.stx")):
            rel = file.relative_to(root).as_posix()
            sources[rel] = file.read_text(encoding="utf-8")
        return self.ingest_batch(sources, author, message)

    def ingest_batch(
        self, sources: dict[str, str], author: str, message: str
    ) -> list[IngestReport]:
        with self._mutate:
            state = self._state
            batch_registry = state.registry.copy()
            asts: dict[str, markup.DocumentAST] = {}
            failures: dict[str, list[ParseError]] = {}
            for path, text in sources.items():
                try:
                    store.validate_path(path)
                    if not path.endswith(".stx") or path.startswith(services.THREAD_PREFIX):
                        raise store.InvalidPath(f"not an ingestable path: {path!r}")
                    ast = markup.parse_text(path, text)
                except ParseFailure as exc:
                    failures[path] = exc.errors
                    continue
                except store.InvalidPath as exc:
                    failures[path] = [ParseError(1, 1, "MalformedReference", str(exc))]
                    continue
                asts[path] = ast
                batch_registry.add_ast(ast)
            linked_docs: dict[str, LinkedDocument] = {}
            for path, ast in asts.items():
                try:
                    linked_docs[path] = markup.link_document(ast, batch_registry)
                except ParseFailure as exc:
                    failures[path] = exc.errors
            reports: dict[str, IngestReport] = {
                path: _failed(path, errors) for path, errors in failures.items()
            }
            if linked_docs:
                revision = self.store.commit(
                    [(path, sources[path].encode("utf-8")) for path in sorted(linked_docs)],
                    author,
                    message,
                )
                docs = dict(state.docs)
                doc_revs = dict(state.doc_revs)
                all_triples = dict(state.doc_triples)
                new_registry = state.registry.copy()
                for path, linked in linked_docs.items():
                    self._persist_derived(linked, revision)
                    extracted = triples.extract_triples(linked, revision)
                    docs[path] = linked
                    doc_revs[path] = revision
                    all_triples[path] = extracted
                    new_registry.add_ast(asts[path])
                    reports[path] = IngestReport(
                        path=path,
                        revision=revision,
                        parse_errors=(),
                        triples_added=len(extracted),
                        fragments=len(linked.fragments),
                        status="ok",
                    )
                self._state = _State(
                    head=revision,
                    docs=docs,
                    doc_revs=doc_revs,
                    registry=new_registry,
                    doc_triples=all_triples,
                )
            return [reports[path] for path in sources]

    # -- reads -------------------------------------------------------------------

    def rendered_document(
        self, path: str, revision: int | None = None, session: str | None = None
    ) -> str:
        doc = self.document_at(path, revision)
        fold_state = render.FoldState()
        if session:
            folds = self.folds.get_folds(session).folded
            fold_state = render.FoldState(folds & set(doc.fragments))
        return render.serialize_document(doc, fold_state)

    def document_source(self, path: str, revision: int | None = None) -> bytes:
        return self.store.get(path, revision)

    def fragment_html(self, fragment_id: str) -> str:
        try:
            path, _ = docmodel.split_fragment_id(fragment_id)
        except ValueError as exc:
            raise services.UnknownFragment(str(exc)) from None
        doc = self._state.docs.get(path)
        if doc is None or fragment_id not in doc.fragments:
            raise services.UnknownFragment(f"unknown fragment {fragment_id}")
        node = render.find_fragment(render.render_document(doc), fragment_id)
        assert node is not None  # fragment map is total over the render
        return render.serialize(node) + "\n"

    def definition_html(self, symbol_uri: str) -> str:
        state = self._state
        node = services.definition_lookup(state.docs, symbol_uri, state.definition_index)
        return render.serialize(node) + "\n"

    def prerequisites(self, uri: str) -> graph.PrereqResult:
        state = self._state
        return graph.prerequisites(state.dep_graph, uri)

    def prerequisites_svg(self, uri: str) -> str:
        state = self._state
        return graph.export_svg(self.prerequisites(uri), state.labels())

    def prerequisites_dot(self, uri: str) -> str:
        state = self._state
        return graph.export_dot(self.prerequisites(uri), state.labels())

    def services_for(self, fragment: str) -> list[services.ServiceDescriptor]:
        try:
            path, _ = docmodel.split_fragment_id(fragment)
        except ValueError as exc:
            raise services.UnknownFragment(str(exc)) from None
        doc = self._state.docs.get(path)
        if doc is None or fragment not in doc.fragments:
            raise services.UnknownFragment(f"unknown fragment {fragment}")
        return services.available_services(services.context_for(doc.fragments[fragment]))

    def run_query(self, query_text: str) -> list[dict[str, str]]:
        return triples.query(self._state.triple_graph, triples.parse_query(query_text))

    def msc_browse(self, prefix: str) -> list[tuple[str, str]]:
        return triples.msc_browse(self._state.triple_graph, prefix)

    def check_token(self, token: str | None) -> None:
        if self.config.write_token and token != self.config.write_token:
            raise AuthFailed("missing or wrong write token")


# ---------------------------------------------------------------------------
# HTTP layer
# ---------------------------------------------------------------------------


def create_app(portal: Portal):
    from fastapi import FastAPI, Header, Query, Request, Response
    from fastapi.exceptions import RequestValidationError
    from fastapi.responses import JSONResponse

    app = FastAPI(title="semportal", version="0.1.0")

    def error_response(status: int, code: str, message: str, detail=None) -> JSONResponse:
        return JSONResponse(
            status_code=status,
            content={"code": code, "message": message, "detail": detail},
        )

    def _handler(status: int):
        async def handle(request: Request, exc: Exception):
            return error_response(status, getattr(exc, "code", type(exc).__name__), str(exc))

        return handle

    for cls in (
        store.NotFound,
        store.NoSuchRevision,
        services.DefinitionNotFound,
        services.UnknownFragment,
        services.UnknownThread,
        graph.UnknownNode,
    ):
        app.add_exception_handler(cls, _handler(404))
    for cls in (
        store.EmptyCommit,
        store.InvalidPath,
        services.EmptyBody,
        triples.MalformedQuery,
        ValueError,
    ):
        app.add_exception_handler(cls, _handler(400))
    app.add_exception_handler(AuthFailed, _handler(401))

    @app.exception_handler(RequestValidationError)
    async def handle_validation_error(request: Request, exc: RequestValidationError):
        return error_response(400, "ValidationError", "invalid request", exc.errors())

    def html_response(body: str, head: int, session: str | None = None) -> Response:
        headers = {"X-Revision": str(head)}
        if session:
            headers["X-Session"] = session
        return Response(content=body, media_type="text/html; charset=utf-8", headers=headers)

    def thread_obj(thread: services.DiscussionThread) -> dict:
        return {
            "id": thread.id,
            "anchor": {
                "doc": thread.anchor.doc,
                "revision": thread.anchor.revision,
                "fragment": thread.anchor.fragment,
            },
            "title": thread.title,
            "posts": [
                {"author": p.author, "timestamp": p.timestamp, "body": p.body}
                for p in thread.posts
            ],
        }

    @app.get("/doc/{path:path}/source")
    def get_source(path: str, rev: int | None = None):
        content = portal.document_source(path, rev)
        return Response(
            content=content,
            media_type="text/plain; charset=utf-8",
            headers={"X-Revision": str(portal.state.head)},
        )

    @app.get("/doc/{path:path}")
    def get_document(
        path: str,
        rev: int | None = None,
        x_session: str | None = Header(default=None),
    ):
        state = portal.state
        body = portal.rendered_document(path, rev, session=x_session)
        return html_response(body, state.head, x_session)

    @app.get("/fragment/{fragment_id:path}")
    def get_fragment(fragment_id: str):
        state = portal.state
        return html_response(portal.fragment_html(fragment_id), state.head)

    @app.get("/definition")
    def get_definition(symbol: str):
        state = portal.state
        return html_response(portal.definition_html(symbol), state.head)

    @app.get("/prereq")
    def get_prereq(uri: str, format: str = Query(default="json", pattern="^(svg|json)$")):
        state = portal.state
        if format == "svg":
            return Response(
                content=portal.prerequisites_svg(uri),
                media_type="image/svg+xml",
                headers={"X-Revision": str(state.head)},
            )
        result = portal.prerequisites(uri)
        return JSONResponse(
            content={
                "root": result.root,
                "prerequisites": list(result.prerequisites),
                "edges": [list(e) for e in result.edges],
            },
            headers={"X-Revision": str(state.head)},
        )

    @app.get("/services")
    def get_services(fragment: str):
        state = portal.state
        descriptors = portal.services_for(fragment)
        return JSONResponse(
            content={
                "fragment": fragment,
                "services": [
                    {"id": d.id, "label": d.label, "icon": d.icon} for d in descriptors
                ],
            },
            headers={"X-Revision": str(state.head)},
        )

    @app.get("/threads")
    def get_threads(doc: str | None = None, fragment: str | None = None):
        if (doc is None) == (fragment is None):
            raise ValueError("pass exactly one of ?doc= or ?fragment=")
        if doc is not None:
            found = portal.threads.list_for_document(doc)
        else:
            found = portal.threads.list_for_fragment(fragment)
        return JSONResponse(
            content={"threads": [thread_obj(t) for t in found]},
            headers={"X-Revision": str(portal.state.head)},
        )

    @app.post("/threads")
    def post_thread(
        payload: dict,
        x_write_token: str | None = Header(default=None),
    ):
        portal.check_token(x_write_token)
        anchor = payload.get("anchor") or {}
        thread = portal.threads.create_thread(
            ThreadAnchor(
                doc=anchor.get("doc", ""),
                revision=int(anchor.get("revision", portal.state.head)),
                fragment=anchor.get("fragment", ""),
            ),
            title=payload.get("title", ""),
            author=payload.get("author", "anonymous"),
            body=payload.get("body", ""),
        )
        return JSONResponse(content=thread_obj(thread), status_code=201)

    @app.post("/threads/{thread_id}/posts")
    def post_post(
        thread_id: str,
        payload: dict,
        x_write_token: str | None = Header(default=None),
    ):
        portal.check_token(x_write_token)
        thread = portal.threads.add_post(
            thread_id,
            author=payload.get("author", "anonymous"),
            body=payload.get("body", ""),
        )
        return JSONResponse(content=thread_obj(thread), status_code=201)

    @app.post("/folds")
    def post_fold(
        payload: dict,
        x_session: str | None = Header(default=None),
    ):
        session = x_session or uuid.uuid4().hex
        fold_state = portal.folds.set_fold(
            session, payload.get("fragment", ""), bool(payload.get("folded", True))
        )
        return JSONResponse(
            content={"session": session, "folded": sorted(fold_state.folded)},
            headers={"X-Session": session},
        )

    @app.post("/ingest")
    def post_ingest(
        payload: dict,
        x_write_token: str | None = Header(default=None),
    ):
        portal.check_token(x_write_token)
        report = portal.ingest(
            path=payload.get("path", ""),
            text=payload.get("text", ""),
            author=payload.get("author", "anonymous"),
            message=payload.get("message", ""),
        )
        return JSONResponse(content=report.to_obj())

    @app.post("/query")
    def post_query(payload: dict):
        bindings = portal.run_query(payload.get("query", ""))
        return JSONResponse(
            content={"bindings": bindings},
            headers={"X-Revision": str(portal.state.head)},
        )

    @app.get("/msc/{code_prefix}")
    def get_msc(code_prefix: str):
        results = portal.msc_browse(code_prefix)
        return JSONResponse(
            content={
                "prefix": code_prefix,
                "results": [{"document": doc, "title": title} for doc, title in results],
            },
            headers={"X-Revision": str(portal.state.head)},
        )

    @app.get("/history/{path:path}")
    def get_history(path: str):
        records = portal.store.history(path)
        return JSONResponse(
            content={
                "path": path,
                "history": [
                    {
                        "revision": r.revision,
                        "timestamp": r.timestamp,
                        "author": r.author,
                        "message": r.message,
                        "changed_paths": list(r.changed_paths),
                    }
                    for r in records
                ],
            },
            headers={"X-Revision": str(portal.state.head)},
        )

    @app.get("/diff/{path:path}")
    def get_diff(path: str, r1: int, r2: int):
        hunks = portal.store.diff(path, r1, r2)
        return JSONResponse(
            content={
                "path": path,
                "r1": r1,
                "r2": r2,
                "hunks": [
                    {
                        "op": h.op,
                        "old_start": h.old_start,
                        "old_lines": list(h.old_lines),
                        "new_start": h.new_start,
                        "new_lines": list(h.new_lines),
                    }
                    for h in hunks
                ],
            },
            headers={"X-Revision": str(portal.state.head)},
        )

    return app
