"""Annotated hypertext rendering of linked documents.

Produces an XML-serializable tree whose normative `data-*` attributes
(`data-fragment`, `data-symbol`, `data-termpath`, `data-kind`, `data-folded`)
carry the semantic annotations every client service reads.  Also computes the
per-line gutter data backing the folding and info side bars.

Pure functions over immutable inputs; output is byte-deterministic.
"""

from __future__ import annotations

import html
from dataclasses import dataclass
from typing import Iterator, Sequence, Union

from . import docmodel
from .docmodel import (
    Apply,
    Definiendum,
    Formula,
    LinkedDocument,
    ModuleDecl,
    Num,
    Statement,
    SymbolRef,
    Term,
    TermRef,
    TextRun,
    Var,
)

ELLIPSIS = "⋯"  # placeholder text for folded content

BLOCK_KINDS = ("module",) + docmodel.STATEMENT_KINDS


@dataclass(frozen=True)
class RenderNode:
    tag: str
    attrs: tuple[tuple[str, str], ...] = ()
    children: tuple[Union["RenderNode", str], ...] = ()

    def attr(self, name: str) -> str | None:
        for key, value in self.attrs:
            if key == name:
                return value
        return None


@dataclass(frozen=True)
class FoldState:
    folded: frozenset[str] = frozenset()

    def toggle(self, fragment: str, folded: bool) -> "FoldState":
        if folded:
            return FoldState(self.folded | {fragment})
        return FoldState(self.folded - {fragment})


@dataclass(frozen=True)
class GutterLine:
    number: int
    foldable: bool
    fold_target: str | None
    thread_ids: tuple[str, ...]

    @property
    def thread_count(self) -> int:
        return len(self.thread_ids)


@dataclass(frozen=True)
class GutterData:
    lines: tuple[GutterLine, ...]


# ---------------------------------------------------------------------------
# Building the render tree
# ---------------------------------------------------------------------------


def _symbol_display(ref: SymbolRef) -> str:
    return ref.ref.split("?")[-1]


def render_term(term: Term, base: str) -> RenderNode:
    """Render a term tree; every subterm gets its own addressable node.

    The root node carries the formula's fragment id and an empty
    `data-termpath`; descendants extend both with their term-path steps.
    """

    def build(node: Term, tpath: docmodel.TermPath) -> RenderNode:
        fragment = base + ("." + docmodel.format_term_path(tpath) if tpath else "")
        attrs: list[tuple[str, str]] = [
            ("data-fragment", fragment),
            ("data-kind", "formula" if not tpath else "subterm"),
        ]
        if isinstance(node, Apply):
            head = build(node.head, tpath + (0,))
            children: list[RenderNode | str] = [head, "("]
            for i, arg in enumerate(node.args, start=1):
                if i > 1:
                    children.append(", ")
                children.append(build(arg, tpath + (i,)))
            children.append(")")
            attrs.append(("data-termpath", docmodel.format_term_path(tpath)))
            return RenderNode("span", tuple(attrs), tuple(children))
        if isinstance(node, SymbolRef):
            if node.uri:
                attrs.append(("data-symbol", node.uri))
            attrs.append(("data-termpath", docmodel.format_term_path(tpath)))
            return RenderNode("span", tuple(attrs), (_symbol_display(node),))
        attrs.append(("data-termpath", docmodel.format_term_path(tpath)))
        if isinstance(node, Var):
            text = node.name
        elif isinstance(node, Num):
            text = node.literal
        else:
            text = node.text
        return RenderNode("span", tuple(attrs), (text,))

    return build(term, ())


def _render_inline(inline, fragment: str) -> RenderNode | str:
    if isinstance(inline, TextRun):
        return inline.text
    if isinstance(inline, TermRef):
        attrs: list[tuple[str, str]] = [
            ("data-fragment", fragment),
            ("data-kind", "symbol-occurrence"),
        ]
        if inline.uri:
            attrs.append(("data-symbol", inline.uri))
        return RenderNode("a", tuple(attrs), (inline.text,))
    if isinstance(inline, Definiendum):
        attrs = [("data-fragment", fragment), ("data-kind", "symbol-occurrence")]
        if inline.uri:
            attrs.append(("data-symbol", inline.uri))
        return RenderNode("dfn", tuple(attrs), (inline.text,))
    assert isinstance(inline, Formula)
    return render_term(inline.term, fragment)


def _render_inlines(
    inlines: Sequence, base_ordinal: tuple[int, ...], path: str
) -> tuple[RenderNode | str, ...]:
    out: list[RenderNode | str] = []
    for index, inline in enumerate(inlines):
        fragment = docmodel.make_fragment_id(path, base_ordinal + (index,))
        if out:
            out.append(" ")
        out.append(_render_inline(inline, fragment))
    return tuple(out)


def _render_statement(stmt: Statement, ordinal: tuple[int, ...], path: str) -> RenderNode:
    attrs = (
        ("data-fragment", docmodel.make_fragment_id(path, ordinal)),
        ("data-kind", stmt.kind),
    )
    return RenderNode("div", attrs, _render_inlines(stmt.inlines, ordinal, path))


def _render_module(module: ModuleDecl, ordinal: tuple[int, ...], path: str) -> RenderNode:
    children: list[RenderNode | str] = [RenderNode("h2", (), (module.name,))]
    for imp in module.imports:
        children.append(RenderNode("p", (), (f"imports {imp.ref}",)))
    for sym in module.symbols:
        symbol_attrs: tuple[tuple[str, str], ...] = ()
        if sym.uri:
            symbol_attrs = (("data-symbol", sym.uri),)
        label = f"{sym.name}/{sym.arity}" if sym.arity else sym.name
        children.append(
            RenderNode("p", (), (RenderNode("span", symbol_attrs, (label,)),))
        )
    for index, item in enumerate(module.body):
        item_ordinal = ordinal + (index,)
        if isinstance(item, Statement):
            children.append(_render_statement(item, item_ordinal, path))
        else:
            children.append(
                RenderNode("p", (), _render_inlines(item.inlines, item_ordinal, path))
            )
    attrs = (
        ("data-fragment", docmodel.make_fragment_id(path, ordinal)),
        ("data-kind", "module"),
    )
    return RenderNode("section", attrs, tuple(children))


def build_tree(doc: LinkedDocument) -> RenderNode:
    """Render without folding; every fragment gets exactly one annotated node."""
    children: list[RenderNode | str] = []
    if doc.title:
        children.append(RenderNode("h1", (), (doc.title,)))
    if doc.msc:
        children.append(RenderNode("p", (), ("MSC: " + ", ".join(doc.msc),)))
    for index, block in enumerate(doc.body):
        if isinstance(block, ModuleDecl):
            children.append(_render_module(block, (index,), doc.path))
        else:
            children.append(
                RenderNode("p", (), _render_inlines(block.inlines, (index,), doc.path))
            )
    attrs = (
        ("data-fragment", doc.root_fragment),
        ("data-kind", "document"),
    )
    return RenderNode("article", attrs, tuple(children))


def apply_folds(tree: RenderNode, folds: FoldState) -> RenderNode:
    """Replace folded fragments' content with the ellipsis placeholder.

    Attributes are preserved and `data-folded="true"` is appended; nodes
    outside the fold set are untouched.  Idempotent.
    """
    if not folds.folded:
        return tree

    def walk(node: RenderNode | str) -> RenderNode | str:
        if isinstance(node, str):
            return node
        fragment = node.attr("data-fragment")
        if fragment is not None and fragment in folds.folded:
            attrs = tuple(kv for kv in node.attrs if kv[0] != "data-folded")
            return RenderNode(node.tag, attrs + (("data-folded", "true"),), (ELLIPSIS,))
        return RenderNode(node.tag, node.attrs, tuple(walk(c) for c in node.children))

    result = walk(tree)
    assert isinstance(result, RenderNode)
    return result


def render_document(doc: LinkedDocument, folds: FoldState | None = None) -> RenderNode:
    """Annotation-complete render of `doc` with `folds` applied."""
    tree = build_tree(doc)
    if folds is None:
        return tree
    return apply_folds(tree, folds)


# ---------------------------------------------------------------------------
# Tree utilities
# ---------------------------------------------------------------------------


def iter_nodes(tree: RenderNode) -> Iterator[RenderNode]:
    stack: list[RenderNode] = [tree]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(c for c in reversed(node.children) if isinstance(c, RenderNode))


def find_fragment(tree: RenderNode, fragment_id: str) -> RenderNode | None:
    for node in iter_nodes(tree):
        if node.attr("data-fragment") == fragment_id:
            return node
    return None


def serialize(node: RenderNode | str) -> str:
    """Deterministic UTF-8 HTML5-compatible serialization."""
    if isinstance(node, str):
        return html.escape(node, quote=False)
    attrs = "".join(
        f' {key}="{html.escape(value, quote=True)}"' for key, value in node.attrs
    )
    inner = "".join(serialize(c) for c in node.children)
    return f"<{node.tag}{attrs}>{inner}</{node.tag}>"


def serialize_document(doc: LinkedDocument, folds: FoldState | None = None) -> str:
    return serialize(render_document(doc, folds)) + "\n"


# ---------------------------------------------------------------------------
# Gutter data (folding bar on the left, info bar on the right)
# ---------------------------------------------------------------------------


def fragment_lines(rendered: RenderNode) -> tuple[dict[str, int], tuple[tuple[int, str], ...]]:
    """Assign one line per block-level fragment, in document order.

    Returns (fragment id -> line number, ordered (line, block fragment) list).
    Fragments rendered before the first block (the document root) carry no
    line and are omitted from the map.
    """
    line_of: dict[str, int] = {}
    blocks: list[tuple[int, str]] = []
    current = 0

    def walk(node: RenderNode | str) -> None:
        nonlocal current
        if isinstance(node, str):
            return
        kind = node.attr("data-kind")
        fragment = node.attr("data-fragment")
        if kind in BLOCK_KINDS and fragment is not None:
            current += 1
            blocks.append((current, fragment))
        if fragment is not None and current > 0:
            line_of[fragment] = current
        for child in node.children:
            walk(child)

    walk(rendered)
    return line_of, tuple(blocks)


def gutter_data(
    doc: LinkedDocument,
    rendered: RenderNode,
    threads: Sequence[tuple[str, str]] = (),
) -> GutterData:
    """Per-line foldability and discussion-thread counts.

    `threads` is a sequence of (thread id, anchor fragment id); anchors must
    refer to fragments of `doc`.  A thread's line is the line its anchor
    fragment renders on.
    """
    line_of, blocks = fragment_lines(rendered)
    ids_by_line: dict[int, list[str]] = {}
    for thread_id, fragment in threads:
        line = line_of.get(fragment)
        if line is None and fragment in doc.fragments:
            continue  # anchored above the first block (e.g. document root)
        if line is not None:
            ids_by_line.setdefault(line, []).append(thread_id)
    lines = tuple(
        GutterLine(
            number=number,
            foldable=True,
            fold_target=fragment,
            thread_ids=tuple(ids_by_line.get(number, ())),
        )
        for number, fragment in blocks
    )
    return GutterData(lines=lines)
