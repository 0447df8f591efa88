"""User-facing semantic services.

Definition lookup, context-sensitive service discovery for the icon menu,
localized discussion threads (persisted through the versioned store under
the reserved `_threads/` prefix, so discussions are themselves versioned),
and per-session fold state.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, replace
from typing import Callable, Mapping

from . import docmodel, render
from .docmodel import LinkedDocument, Statement
from .store import Store


class ServiceError(Exception):
    code = "ServiceError"


class DefinitionNotFound(ServiceError):
    code = "NotFound"


class UnknownFragment(ServiceError):
    code = "UnknownFragment"


class UnknownThread(ServiceError):
    code = "UnknownThread"


class EmptyBody(ServiceError):
    code = "EmptyBody"


# ---------------------------------------------------------------------------
# Definition lookup
# ---------------------------------------------------------------------------


class DefinitionIndex:
    """symbol URI -> (document path, fragment id of its defining statement).

    The defining document is the one that declares the symbol (the document
    named in its URI); within it, the earliest definition statement in
    document order whose for= set contains the symbol wins.
    """

    def __init__(self, corpus: Mapping[str, LinkedDocument]):
        self._by_symbol: dict[str, tuple[str, str]] = {}
        for path, doc in corpus.items():
            did = docmodel.doc_id(path)
            for bi, block in enumerate(doc.body):
                if isinstance(block, docmodel.Paragraph):
                    continue
                for ci, item in enumerate(block.body):
                    if not isinstance(item, Statement) or item.kind != "definition":
                        continue
                    fragment = docmodel.make_fragment_id(path, (bi, ci))
                    for uri in item.for_uris:
                        if docmodel.split_uri(uri)[0] != did:
                            continue  # lookup resolves in the declaring document
                        self._by_symbol.setdefault(uri, (path, fragment))

    def lookup(self, symbol_uri: str) -> tuple[str, str]:
        entry = self._by_symbol.get(symbol_uri)
        if entry is None:
            raise DefinitionNotFound(f"no definition for symbol {symbol_uri}")
        return entry

    def __len__(self) -> int:
        return len(self._by_symbol)


def definition_lookup(
    corpus: Mapping[str, LinkedDocument],
    symbol_uri: str,
    index: DefinitionIndex | None = None,
) -> render.RenderNode:
    """Rendered definition statement for a symbol at the head corpus."""
    if index is None:
        index = DefinitionIndex(corpus)
    path, fragment = index.lookup(symbol_uri)
    tree = render.render_document(corpus[path])
    node = render.find_fragment(tree, fragment)
    if node is None:  # fragment map and render disagree; treat as missing
        raise DefinitionNotFound(f"definition fragment {fragment} not rendered")
    return node


# ---------------------------------------------------------------------------
# Context-sensitive service discovery
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ServiceDescriptor:
    id: str
    label: str
    icon: str
    kinds: frozenset[str]  # context kinds the service can apply to


@dataclass(frozen=True)
class ContextObject:
    fragment: str
    kind: str  # document|module|statement|formula|subterm|symbol-occurrence
    symbol: str | None = None


_FOLDABLE = frozenset({"module", "statement", "formula", "subterm"})

CATALOG: tuple[ServiceDescriptor, ...] = (
    ServiceDescriptor(
        id="discuss",
        label="Discuss",
        icon="question-mark",
        kinds=frozenset(docmodel.FRAGMENT_KINDS),
    ),
    ServiceDescriptor(
        id="definition-lookup",
        label="Definition",
        icon="book",
        kinds=frozenset({"symbol-occurrence", "formula", "subterm"}),
    ),
    ServiceDescriptor(
        id="prerequisites",
        label="Prerequisites",
        icon="graph",
        kinds=frozenset({"symbol-occurrence", "formula", "subterm", "module", "document"}),
    ),
    ServiceDescriptor(
        id="fold",
        label="Fold",
        icon="collapse",
        kinds=_FOLDABLE,
    ),
)


def _applicable(descriptor: ServiceDescriptor, ctx: ContextObject) -> bool:
    if descriptor.id == "discuss":
        return True
    if descriptor.id == "definition-lookup":
        return ctx.symbol is not None
    if descriptor.id == "prerequisites":
        return ctx.symbol is not None or ctx.kind in ("module", "document")
    if descriptor.id == "fold":
        return ctx.kind in _FOLDABLE
    return False


def available_services(ctx: ContextObject) -> list[ServiceDescriptor]:
    """Exactly the catalog entries whose applicability predicate holds.

    Deterministic order: discuss, definition-lookup, prerequisites, fold.
    """
    return [d for d in CATALOG if _applicable(d, ctx)]


def context_for(info: docmodel.FragmentInfo) -> ContextObject:
    return ContextObject(fragment=info.id, kind=info.kind, symbol=info.symbol)


# ---------------------------------------------------------------------------
# Discussion threads
# ---------------------------------------------------------------------------

THREAD_PREFIX = "_threads/"


@dataclass(frozen=True)
class ThreadAnchor:
    doc: str
    revision: int
    fragment: str


@dataclass(frozen=True)
class Post:
    author: str
    timestamp: int
    body: str


@dataclass(frozen=True)
class DiscussionThread:
    id: str
    anchor: ThreadAnchor
    title: str
    posts: tuple[Post, ...]

    @property
    def created(self) -> int:
        return self.posts[0].timestamp


def _thread_to_json(thread: DiscussionThread) -> bytes:
    obj = {
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
    return (json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":")) + "\n").encode()


def _thread_from_json(data: bytes) -> DiscussionThread:
    obj = json.loads(data)
    return DiscussionThread(
        id=obj["id"],
        anchor=ThreadAnchor(
            doc=obj["anchor"]["doc"],
            revision=obj["anchor"]["revision"],
            fragment=obj["anchor"]["fragment"],
        ),
        title=obj["title"],
        posts=tuple(
            Post(author=p["author"], timestamp=p["timestamp"], body=p["body"])
            for p in obj["posts"]
        ),
    )


class ThreadService:
    """Discussion threads anchored to document fragments.

    `anchor_check(anchor)` must return True when the anchored fragment exists
    at the anchored revision; the portal wires this to its per-revision
    fragment maps.
    """

    def __init__(self, store: Store, anchor_check: Callable[[ThreadAnchor], bool]):
        self._store = store
        self._anchor_check = anchor_check
        self._lock = threading.Lock()
        self._threads: dict[str, DiscussionThread] = {}
        self._load()

    def _load(self) -> None:
        for path in self._store.list_paths():
            if not path.startswith(THREAD_PREFIX):
                continue
            thread = _thread_from_json(self._store.get(path))
            self._threads[thread.id] = thread

    def _next_id(self) -> str:
        numbers = [int(t[1:]) for t in self._threads if t[1:].isdigit()]
        return f"t{max(numbers, default=0) + 1:04d}"

    def _now(self, floor: int = 0) -> int:
        return max(int(time.time()), floor)

    def create_thread(
        self, anchor: ThreadAnchor, title: str, author: str, body: str
    ) -> DiscussionThread:
        if not body.strip():
            raise EmptyBody("a thread needs a non-empty first post")
        if not self._anchor_check(anchor):
            raise UnknownFragment(
                f"fragment {anchor.fragment} does not exist at revision {anchor.revision}"
            )
        with self._lock:
            thread = DiscussionThread(
                id=self._next_id(),
                anchor=anchor,
                title=title,
                posts=(Post(author=author, timestamp=self._now(), body=body),),
            )
            self._store.commit(
                [(THREAD_PREFIX + thread.id + ".json", _thread_to_json(thread))],
                author=author,
                message=f"open thread {thread.id}",
            )
            self._threads[thread.id] = thread
            return thread

    def add_post(self, thread_id: str, author: str, body: str) -> DiscussionThread:
        if not body.strip():
            raise EmptyBody("post body must be non-empty")
        with self._lock:
            thread = self._threads.get(thread_id)
            if thread is None:
                raise UnknownThread(f"unknown thread {thread_id}")
            post = Post(
                author=author,
                timestamp=self._now(floor=thread.posts[-1].timestamp),
                body=body,
            )
            updated = replace(thread, posts=thread.posts + (post,))
            self._store.commit(
                [(THREAD_PREFIX + thread_id + ".json", _thread_to_json(updated))],
                author=author,
                message=f"post to thread {thread_id}",
            )
            self._threads[thread_id] = updated
            return updated

    def get(self, thread_id: str) -> DiscussionThread:
        thread = self._threads.get(thread_id)
        if thread is None:
            raise UnknownThread(f"unknown thread {thread_id}")
        return thread

    def list_for_document(self, doc_path: str) -> list[DiscussionThread]:
        """All threads anchored to any fragment of the document, any revision."""
        found = [t for t in self._threads.values() if t.anchor.doc == doc_path]
        return sorted(found, key=lambda t: (t.created, t.id))

    def list_for_fragment(self, fragment: str) -> list[DiscussionThread]:
        found = [t for t in self._threads.values() if t.anchor.fragment == fragment]
        return sorted(found, key=lambda t: (t.created, t.id))


# ---------------------------------------------------------------------------
# Fold sessions
# ---------------------------------------------------------------------------


class FoldSessions:
    """Per-session fold state; sessions are isolated from one another.

    `fragment_exists(fragment)` validates against the head revision.
    """

    def __init__(self, fragment_exists: Callable[[str], bool]):
        self._fragment_exists = fragment_exists
        self._lock = threading.Lock()
        self._sessions: dict[str, frozenset[str]] = {}

    def set_fold(self, session_id: str, fragment: str, folded: bool) -> render.FoldState:
        if not self._fragment_exists(fragment):
            raise UnknownFragment(f"unknown fragment {fragment}")
        with self._lock:
            current = self._sessions.get(session_id, frozenset())
            updated = current | {fragment} if folded else current - {fragment}
            self._sessions[session_id] = updated
            return render.FoldState(updated)

    def get_folds(self, session_id: str) -> render.FoldState:
        return render.FoldState(self._sessions.get(session_id, frozenset()))
