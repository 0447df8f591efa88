"""Linked content document model.

Holds the document structure shared by the parser and every downstream
service: term trees with positional addressing, stable fragment identities,
and the canonical JSON interchange form documented in docs/docmodel-schema.md.

All values are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Iterator, Mapping, Union

# ---------------------------------------------------------------------------
# Term trees
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SymbolRef:
    """Reference to a declared symbol, as written in the source.

    `ref` keeps the source spelling (`name`, `module?name` or
    `doc?module?name`); `uri` is filled in by reference resolution.
    """

    ref: str
    uri: str | None = None
    pos: tuple[int, int] = field(default=(1, 1), compare=False, repr=False)


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Num:
    literal: str  # arbitrary-precision decimal string, never a machine int


@dataclass(frozen=True)
class TextLeaf:
    text: str


@dataclass(frozen=True)
class Apply:
    head: "Term"
    args: tuple["Term", ...] = ()


Term = Union[Apply, SymbolRef, Var, Num, TextLeaf]

# A term path addresses a subterm: 0 = head of an Apply, k >= 1 = k-th argument.
TermPath = tuple[int, ...]


class InvalidTermPath(LookupError):
    """A path step does not index an existing child."""

    code = "InvalidPath"


def parse_term_path(text: str) -> TermPath:
    """Parse the dotted form used in `data-termpath` attributes ('' = root)."""
    if text == "":
        return ()
    return tuple(int(step) for step in text.split("."))


def format_term_path(path: TermPath) -> str:
    return ".".join(str(step) for step in path)


def _child(term: Term, step: int) -> Term:
    if not isinstance(term, Apply):
        raise InvalidTermPath(f"step {step} into leaf node {type(term).__name__}")
    if step == 0:
        return term.head
    if 1 <= step <= len(term.args):
        return term.args[step - 1]
    raise InvalidTermPath(f"step {step} exceeds child count {len(term.args)}")


def subterm_at(term: Term, path: TermPath) -> Term:
    """Return the node addressed by `path`; the empty path is the term itself."""
    node = term
    for step in path:
        node = _child(node, step)
    return node


def replace_subterm(term: Term, path: TermPath, replacement: Term) -> Term:
    """Return a new tree differing from `term` exactly at `path`.

    The original tree is never modified.
    """
    if not path:
        return replacement
    step, rest = path[0], path[1:]
    if not isinstance(term, Apply):
        raise InvalidTermPath(f"step {step} into leaf node {type(term).__name__}")
    if step == 0:
        return replace(term, head=replace_subterm(term.head, rest, replacement))
    if 1 <= step <= len(term.args):
        args = list(term.args)
        args[step - 1] = replace_subterm(args[step - 1], rest, replacement)
        return replace(term, args=tuple(args))
    raise InvalidTermPath(f"step {step} exceeds child count {len(term.args)}")


def term_nodes(term: Term) -> Iterator[tuple[TermPath, Term]]:
    """Yield (path, node) for every node of the tree in pre-order."""
    stack: list[tuple[TermPath, Term]] = [((), term)]
    while stack:
        path, node = stack.pop()
        yield path, node
        if isinstance(node, Apply):
            children = [(path + (0,), node.head)]
            children += [(path + (i,), a) for i, a in enumerate(node.args, start=1)]
            stack.extend(reversed(children))


def term_symbol(term: Term) -> str | None:
    """The symbol a subterm stands for: a SymbolRef itself, or an Apply's head."""
    if isinstance(term, SymbolRef):
        return term.uri
    if isinstance(term, Apply) and isinstance(term.head, SymbolRef):
        return term.head.uri
    return None


# ---------------------------------------------------------------------------
# Blocks and inline content
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TextRun:
    text: str


@dataclass(frozen=True)
class TermRef:
    """An in-text reference to a symbol, with display text."""

    ref: str
    text: str
    uri: str | None = None
    pos: tuple[int, int] = field(default=(1, 1), compare=False, repr=False)


@dataclass(frozen=True)
class Definiendum:
    """The defining occurrence of a symbol inside a definition statement."""

    name: str
    text: str
    uri: str | None = None
    pos: tuple[int, int] = field(default=(1, 1), compare=False, repr=False)


@dataclass(frozen=True)
class Formula:
    term: Term


Inline = Union[TextRun, TermRef, Definiendum, Formula]

STATEMENT_KINDS = ("definition", "theorem", "example")


@dataclass(frozen=True)
class Statement:
    kind: str  # one of STATEMENT_KINDS
    for_refs: tuple[str, ...]  # effective `for=` set, source spelling
    inlines: tuple[Inline, ...]
    for_uris: tuple[str, ...] = ()
    pos: tuple[int, int] = field(default=(1, 1), compare=False, repr=False)


@dataclass(frozen=True)
class Paragraph:
    inlines: tuple[Inline, ...]


@dataclass(frozen=True)
class ImportDecl:
    ref: str  # "doc?module"
    uri: str | None = None
    pos: tuple[int, int] = field(default=(1, 1), compare=False, repr=False)


@dataclass(frozen=True)
class SymbolDecl:
    name: str
    arity: int = 0
    uri: str | None = None


@dataclass(frozen=True)
class ModuleDecl:
    name: str
    imports: tuple[ImportDecl, ...] = ()
    symbols: tuple[SymbolDecl, ...] = ()
    body: tuple[Union[Statement, Paragraph], ...] = ()
    uri: str | None = None
    pos: tuple[int, int] = field(default=(1, 1), compare=False, repr=False)


Block = Union[ModuleDecl, Paragraph]


# ---------------------------------------------------------------------------
# URIs
# ---------------------------------------------------------------------------
#
# Scheme: documents  //<doc-path>            (path without the .stx extension)
#         modules    //<doc-path>#<module>
#         symbols    //<doc-path>#<module>/<symbol>


def doc_id(path: str) -> str:
    """Repository path -> document id used inside URIs (extension stripped)."""
    return path[: -len(".stx")] if path.endswith(".stx") else path


def document_uri(path: str) -> str:
    return f"//{doc_id(path)}"


def module_uri(path: str, module: str) -> str:
    return f"//{doc_id(path)}#{module}"


def symbol_uri(path: str, module: str, symbol: str) -> str:
    return f"//{doc_id(path)}#{module}/{symbol}"


def split_uri(uri: str) -> tuple[str, str | None, str | None]:
    """Split a URI into (doc id, module or None, symbol or None)."""
    if not uri.startswith("//"):
        raise ValueError(f"not a portal URI: {uri!r}")
    rest = uri[2:]
    if "#" not in rest:
        return rest, None, None
    doc, frag = rest.rsplit("#", 1)
    if "/" in frag:
        module, symbol = frag.split("/", 1)
        return doc, module, symbol
    return doc, frag, None


# ---------------------------------------------------------------------------
# Fragment identities
# ---------------------------------------------------------------------------
#
# A FragmentID is `<doc-path>!<ordinal-path>`: dot-separated child indices in
# the fragment tree rooted at the document.  The root's ordinal path is empty.
# A formula's subterms extend the formula's ordinal path with term-path steps,
# so decoding a subterm id relative to its formula reproduces its TermPath.

FRAGMENT_KINDS = (
    "document",
    "module",
    "statement",
    "formula",
    "subterm",
    "symbol-occurrence",
)


def make_fragment_id(path: str, ordinal: tuple[int, ...]) -> str:
    return f"{path}!{format_term_path(ordinal)}"


def split_fragment_id(fragment_id: str) -> tuple[str, tuple[int, ...]]:
    path, _, ordinal = fragment_id.rpartition("!")
    if not path:
        raise ValueError(f"not a fragment id: {fragment_id!r}")
    return path, parse_term_path(ordinal)


@dataclass(frozen=True)
class FragmentInfo:
    id: str
    kind: str  # one of FRAGMENT_KINDS
    symbol: str | None = None


@dataclass(frozen=True)
class LinkedDocument:
    """A reference-resolved document with its fragment map.

    `fragments` is total: every module, statement, formula, formula subterm
    and symbol occurrence in the body appears under exactly one id, plus the
    document root itself.
    """

    path: str
    title: str
    msc: tuple[str, ...]
    body: tuple[Block, ...]
    fragments: Mapping[str, FragmentInfo] = field(default_factory=dict)

    @property
    def modules(self) -> tuple[ModuleDecl, ...]:
        return tuple(b for b in self.body if isinstance(b, ModuleDecl))

    @property
    def root_fragment(self) -> str:
        return make_fragment_id(self.path, ())


def _inline_fragments(
    inlines: tuple[Inline, ...], base: tuple[int, ...], path: str
) -> Iterator[FragmentInfo]:
    for index, inline in enumerate(inlines):
        if isinstance(inline, (TermRef, Definiendum)):
            fid = make_fragment_id(path, base + (index,))
            yield FragmentInfo(fid, "symbol-occurrence", inline.uri)
        elif isinstance(inline, Formula):
            formula_ordinal = base + (index,)
            for tpath, node in term_nodes(inline.term):
                fid = make_fragment_id(path, formula_ordinal + tpath)
                kind = "formula" if not tpath else "subterm"
                yield FragmentInfo(fid, kind, term_symbol(node))


def assign_fragment_ids(doc: LinkedDocument) -> LinkedDocument:
    """Recompute the fragment map from the document structure.

    Ordinal steps are positions among all siblings in the body tree, so ids
    are a pure function of structure; two calls on the same input yield
    identical maps.  Ids are revision-scoped: inserting an earlier sibling
    shifts later ids, which is why anchors carry (path, revision) pairs.
    """
    fragments: dict[str, FragmentInfo] = {}

    def put(info: FragmentInfo) -> None:
        fragments[info.id] = info

    put(FragmentInfo(make_fragment_id(doc.path, ()), "document"))
    for bi, block in enumerate(doc.body):
        if isinstance(block, Paragraph):
            for info in _inline_fragments(block.inlines, (bi,), doc.path):
                put(info)
            continue
        put(FragmentInfo(make_fragment_id(doc.path, (bi,)), "module"))
        for ci, item in enumerate(block.body):
            ordinal = (bi, ci)
            if isinstance(item, Statement):
                put(FragmentInfo(make_fragment_id(doc.path, ordinal), "statement"))
            for info in _inline_fragments(item.inlines, ordinal, doc.path):
                put(info)
    return replace(doc, fragments=fragments)


# ---------------------------------------------------------------------------
# Canonical serialization (docs/docmodel-schema.md)
# ---------------------------------------------------------------------------

SCHEMA = "semportal-doc.v1"


def _term_to_obj(term: Term) -> dict:
    if isinstance(term, Apply):
        return {
            "type": "apply",
            "head": _term_to_obj(term.head),
            "args": [_term_to_obj(a) for a in term.args],
        }
    if isinstance(term, SymbolRef):
        return {"type": "symbol", "ref": term.ref, "uri": term.uri}
    if isinstance(term, Var):
        return {"type": "var", "name": term.name}
    if isinstance(term, Num):
        return {"type": "num", "literal": term.literal}
    return {"type": "text", "text": term.text}


def _term_from_obj(obj: dict) -> Term:
    kind = obj["type"]
    if kind == "apply":
        return Apply(
            head=_term_from_obj(obj["head"]),
            args=tuple(_term_from_obj(a) for a in obj["args"]),
        )
    if kind == "symbol":
        return SymbolRef(ref=obj["ref"], uri=obj.get("uri"))
    if kind == "var":
        return Var(name=obj["name"])
    if kind == "num":
        return Num(literal=obj["literal"])
    return TextLeaf(text=obj["text"])


def _inline_to_obj(inline: Inline) -> dict:
    if isinstance(inline, TextRun):
        return {"type": "text", "text": inline.text}
    if isinstance(inline, TermRef):
        return {"type": "termref", "ref": inline.ref, "text": inline.text, "uri": inline.uri}
    if isinstance(inline, Definiendum):
        return {
            "type": "definiendum",
            "name": inline.name,
            "text": inline.text,
            "uri": inline.uri,
        }
    return {"type": "formula", "term": _term_to_obj(inline.term)}


def _inline_from_obj(obj: dict) -> Inline:
    kind = obj["type"]
    if kind == "text":
        return TextRun(text=obj["text"])
    if kind == "termref":
        return TermRef(ref=obj["ref"], text=obj["text"], uri=obj.get("uri"))
    if kind == "definiendum":
        return Definiendum(name=obj["name"], text=obj["text"], uri=obj.get("uri"))
    return Formula(term=_term_from_obj(obj["term"]))


def _block_to_obj(block: Block) -> dict:
    if isinstance(block, Paragraph):
        return {"type": "paragraph", "inlines": [_inline_to_obj(i) for i in block.inlines]}
    return {
        "type": "module",
        "name": block.name,
        "uri": block.uri,
        "imports": [{"ref": i.ref, "uri": i.uri} for i in block.imports],
        "symbols": [
            {"name": s.name, "arity": s.arity, "uri": s.uri} for s in block.symbols
        ],
        "body": [
            {
                "type": "statement",
                "kind": item.kind,
                "for_refs": list(item.for_refs),
                "for_uris": list(item.for_uris),
                "inlines": [_inline_to_obj(i) for i in item.inlines],
            }
            if isinstance(item, Statement)
            else {"type": "paragraph", "inlines": [_inline_to_obj(i) for i in item.inlines]}
            for item in block.body
        ],
    }


def _block_from_obj(obj: dict) -> Block:
    if obj["type"] == "paragraph":
        return Paragraph(inlines=tuple(_inline_from_obj(i) for i in obj["inlines"]))
    body: list[Statement | Paragraph] = []
    for item in obj["body"]:
        if item["type"] == "statement":
            body.append(
                Statement(
                    kind=item["kind"],
                    for_refs=tuple(item["for_refs"]),
                    for_uris=tuple(item["for_uris"]),
                    inlines=tuple(_inline_from_obj(i) for i in item["inlines"]),
                )
            )
        else:
            body.append(Paragraph(inlines=tuple(_inline_from_obj(i) for i in item["inlines"])))
    return ModuleDecl(
        name=obj["name"],
        uri=obj.get("uri"),
        imports=tuple(ImportDecl(ref=i["ref"], uri=i.get("uri")) for i in obj["imports"]),
        symbols=tuple(
            SymbolDecl(name=s["name"], arity=s["arity"], uri=s.get("uri"))
            for s in obj["symbols"]
        ),
        body=tuple(body),
    )


def document_to_json(doc: LinkedDocument) -> str:
    """Serialize to the canonical interchange form: sorted keys, no spaces."""
    obj = {
        "schema": SCHEMA,
        "path": doc.path,
        "title": doc.title,
        "msc": list(doc.msc),
        "body": [_block_to_obj(b) for b in doc.body],
        "fragments": {
            fid: {"kind": info.kind, "symbol": info.symbol}
            for fid, info in doc.fragments.items()
        },
    }
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":")) + "\n"


def document_from_json(text: str) -> LinkedDocument:
    obj = json.loads(text)
    if obj.get("schema") != SCHEMA:
        raise ValueError(f"unsupported document schema: {obj.get('schema')!r}")
    return LinkedDocument(
        path=obj["path"],
        title=obj["title"],
        msc=tuple(obj["msc"]),
        body=tuple(_block_from_obj(b) for b in obj["body"]),
        fragments={
            fid: FragmentInfo(id=fid, kind=f["kind"], symbol=f.get("symbol"))
            for fid, f in obj["fragments"].items()
        },
    )
