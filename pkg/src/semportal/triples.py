"""Metadata triple graph and its query engine.

Documents export their metadata as subject/predicate/object triples under
the fixed `plnt:` vocabulary; classification codes live under `msc:`.
Queries are conjunctive basic graph patterns with optional transitive
(`+`) predicate paths -- the textual syntax is documented in
docs/query-syntax.md.

Representation convention: IRI terms are plain strings; literal terms are
stored in quoted-escaped form (leading '"'), which keeps the engine's term
universe uniformly comparable and makes the N-Triples dump trivial.
"""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple

from . import docmodel
from .docmodel import (
    Apply,
    Formula,
    LinkedDocument,
    Paragraph,
    Statement,
    SymbolRef,
    TermRef,
)

VOCAB = "plnt:"
MSC = "msc:"

HAS_TITLE = VOCAB + "hasTitle"
HAS_MSC = VOCAB + "hasMSC"
DECLARES_SYMBOL = VOCAB + "declaresSymbol"
DEFINES_SYMBOL = VOCAB + "definesSymbol"
IMPORTS = VOCAB + "imports"
USES_SYMBOL = VOCAB + "usesSymbol"
DEPENDS_ON = VOCAB + "dependsOn"
AT_REVISION = VOCAB + "atRevision"


class Triple(NamedTuple):
    subject: str
    predicate: str
    object: str


def lit(value: str) -> str:
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


def is_literal(term: str) -> bool:
    return term.startswith('"')


def literal_value(term: str) -> str:
    assert is_literal(term)
    body = term[1:-1]
    return body.replace('\\"', '"').replace("\\\\", "\\")


class MalformedQuery(Exception):
    code = "MalformedQuery"


# ---------------------------------------------------------------------------
# Extraction
# ---------------------------------------------------------------------------


def _used_symbols(doc: LinkedDocument) -> set[str]:
    uris: set[str] = set()

    def walk_term(term) -> None:
        if isinstance(term, Apply):
            walk_term(term.head)
            for arg in term.args:
                walk_term(arg)
        elif isinstance(term, SymbolRef) and term.uri:
            uris.add(term.uri)

    def walk_inlines(inlines) -> None:
        for inline in inlines:
            if isinstance(inline, TermRef) and inline.uri:
                uris.add(inline.uri)
            elif isinstance(inline, Formula):
                walk_term(inline.term)

    for block in doc.body:
        if isinstance(block, Paragraph):
            walk_inlines(block.inlines)
            continue
        for item in block.body:
            walk_inlines(item.inlines)
    return uris


def extract_triples(doc: LinkedDocument, revision: int) -> frozenset[Triple]:
    """Metadata triples for one linked document at one revision.

    Deterministic: identical (doc, revision) yields an identical set.
    """
    subject = docmodel.document_uri(doc.path)
    triples: set[Triple] = {Triple(subject, AT_REVISION, lit(str(revision)))}
    if doc.title:
        triples.add(Triple(subject, HAS_TITLE, lit(doc.title)))
    for code in doc.msc:
        triples.add(Triple(subject, HAS_MSC, MSC + code))
    depends: set[str] = set()
    for module in doc.modules:
        for sym in module.symbols:
            if sym.uri:
                triples.add(Triple(subject, DECLARES_SYMBOL, sym.uri))
        for imp in module.imports:
            if imp.uri:
                triples.add(Triple(subject, IMPORTS, imp.uri))
                target_doc = "//" + docmodel.split_uri(imp.uri)[0]
                if target_doc != subject:
                    depends.add(target_doc)
        for item in module.body:
            if isinstance(item, Statement) and item.kind == "definition":
                for uri in item.for_uris:
                    triples.add(Triple(subject, DEFINES_SYMBOL, uri))
    for uri in _used_symbols(doc):
        triples.add(Triple(subject, USES_SYMBOL, uri))
        target_doc = "//" + docmodel.split_uri(uri)[0]
        if target_doc != subject:
            depends.add(target_doc)
    for target in depends:
        triples.add(Triple(subject, DEPENDS_ON, target))
    return frozenset(triples)


# ---------------------------------------------------------------------------
# Queries
# ---------------------------------------------------------------------------


def is_var(term: str) -> bool:
    return term.startswith("?")


@dataclass(frozen=True)
class TriplePattern:
    subject: str
    predicate: str
    object: str
    transitive: bool = False

    def variables(self) -> set[str]:
        return {t[1:] for t in (self.subject, self.predicate, self.object) if is_var(t)}


@dataclass(frozen=True)
class Query:
    patterns: tuple[TriplePattern, ...]
    select: tuple[str, ...]  # variable names without the '?' sigil


class _Index:
    def __init__(self, graph: Iterable[Triple]):
        self.triples = frozenset(graph)
        self.by_predicate: dict[str, list[Triple]] = defaultdict(list)
        for t in self.triples:
            self.by_predicate[t.predicate].append(t)
        self._succ: dict[str, dict[str, set[str]]] = {}

    def successors(self, predicate: str) -> dict[str, set[str]]:
        cached = self._succ.get(predicate)
        if cached is None:
            cached = defaultdict(set)
            for t in self.by_predicate.get(predicate, ()):
                cached[t.subject].add(t.object)
            self._succ[predicate] = cached
        return self._succ[predicate]

    def reachable(self, predicate: str, start: str) -> set[str]:
        """Nodes reachable from `start` via >= 1 step of `predicate`."""
        succ = self.successors(predicate)
        seen: set[str] = set()
        frontier = list(succ.get(start, ()))
        while frontier:
            node = frontier.pop()
            if node in seen:
                continue
            seen.add(node)
            frontier.extend(succ.get(node, ()))
        return seen


def _substitute(term: str, binding: Mapping[str, str]) -> str:
    if is_var(term) and term[1:] in binding:
        return binding[term[1:]]
    return term


def _match_pattern(
    index: _Index, pattern: TriplePattern, binding: dict[str, str]
) -> Iterable[dict[str, str]]:
    s = _substitute(pattern.subject, binding)
    p = _substitute(pattern.predicate, binding)
    o = _substitute(pattern.object, binding)
    if pattern.transitive:
        targets: Iterable[tuple[str, str]]
        if not is_var(s):
            targets = ((s, obj) for obj in index.reachable(p, s))
        else:
            succ = index.successors(p)
            targets = (
                (subj, obj) for subj in list(succ) for obj in index.reachable(p, subj)
            )
        for subj, obj in targets:
            new = dict(binding)
            ok = True
            for term, value in ((s, subj), (o, obj)):
                if is_var(term):
                    name = term[1:]
                    if new.get(name, value) != value:
                        ok = False
                        break
                    new[name] = value
                elif term != value:
                    ok = False
                    break
            if ok:
                yield new
        return
    candidates = index.by_predicate.get(p, ()) if not is_var(p) else index.triples
    for triple in candidates:
        new = dict(binding)
        ok = True
        for term, value in ((s, triple.subject), (p, triple.predicate), (o, triple.object)):
            if is_var(term):
                name = term[1:]
                if new.get(name, value) != value:
                    ok = False
                    break
                new[name] = value
            elif term != value:
                ok = False
                break
        if ok:
            yield new


def query(graph: Iterable[Triple], q: Query) -> list[dict[str, str]]:
    """All variable bindings satisfying every pattern conjunctively.

    Transitive patterns match predicate paths of length >= 1.  Results are
    deduplicated and ordered lexicographically over the bound values in
    select order.
    """
    pattern_vars: set[str] = set()
    for pattern in q.patterns:
        pattern_vars |= pattern.variables()
        if pattern.transitive and is_var(pattern.predicate):
            raise MalformedQuery("transitive patterns need a constant predicate")
    for name in q.select:
        if name not in pattern_vars:
            raise MalformedQuery(f"selected variable ?{name} is not used in any pattern")
    index = _Index(graph)
    bindings: list[dict[str, str]] = [{}]
    for pattern in q.patterns:
        bindings = [new for b in bindings for new in _match_pattern(index, pattern, b)]
        if not bindings:
            break
    projected = {tuple(b[name] for name in q.select) for b in bindings}
    return [dict(zip(q.select, values)) for values in sorted(projected)]


_TOKEN_RE = re.compile(r'"(?:[^"\\]|\\.)*"|\S+')


def parse_query(text: str) -> Query:
    """Parse the textual query syntax (docs/query-syntax.md)."""
    select: list[str] = []
    patterns: list[TriplePattern] = []
    for raw_line in text.splitlines():
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = _TOKEN_RE.findall(line)
        if tokens[0].upper() == "SELECT":
            if select:
                raise MalformedQuery("duplicate SELECT line")
            for token in tokens[1:]:
                if not token.startswith("?") or len(token) < 2:
                    raise MalformedQuery(f"SELECT expects ?variables, got {token!r}")
                select.append(token[1:])
            continue
        if len(tokens) != 3:
            raise MalformedQuery(f"pattern needs 3 terms: {line!r}")
        subject, predicate, obj = tokens
        transitive = False
        if predicate.endswith("+") and not is_var(predicate):
            predicate = predicate[:-1]
            transitive = True
        patterns.append(
            TriplePattern(
                subject=subject, predicate=predicate, object=obj, transitive=transitive
            )
        )
    if not select:
        raise MalformedQuery("missing SELECT line")
    if not patterns:
        raise MalformedQuery("query has no patterns")
    return Query(patterns=tuple(patterns), select=tuple(select))


# ---------------------------------------------------------------------------
# Classification browsing and dumps
# ---------------------------------------------------------------------------


def msc_browse(graph: Iterable[Triple], code_prefix: str) -> list[tuple[str, str]]:
    """Documents classified at or below `code_prefix`, sorted by title.

    Prefix match on the code string: "20A" matches "20A05".
    """
    if not code_prefix:
        raise ValueError("code prefix must be non-empty")
    index = _Index(graph)
    docs = {
        t.subject
        for t in index.by_predicate.get(HAS_MSC, ())
        if t.object.startswith(MSC + code_prefix)
    }
    titles: dict[str, str] = {}
    for t in index.by_predicate.get(HAS_TITLE, ()):
        if t.subject in docs:
            titles[t.subject] = literal_value(t.object)
    return sorted(((doc, titles.get(doc, "")) for doc in docs), key=lambda x: (x[1], x[0]))


def _term_nt(term: str) -> str:
    return term if is_literal(term) else f"<{term}>"


def dump_ntriples(graph: Iterable[Triple]) -> str:
    """Canonical N-Triples-compatible dump: sorted lines, UTF-8."""
    lines = sorted(
        f"{_term_nt(t.subject)} {_term_nt(t.predicate)} {_term_nt(t.object)} ."
        for t in graph
    )
    return "\n".join(lines) + ("\n" if lines else "")
