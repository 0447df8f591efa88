"""Typed dependency graph over documents and symbols.

Edges: `imports` (document -> document), `uses` (document -> symbol),
`defines` (document -> declared symbol).  Powers prerequisite closure,
cycle reporting, and the annotated SVG / DOT exports of closure results.

Built graphs are immutable snapshots; all functions here are pure.
"""

from __future__ import annotations

import html
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping

from . import docmodel
from .docmodel import LinkedDocument

EDGE_KINDS = ("imports", "uses", "defines")

Edge = tuple[str, str, str]  # (from, to, kind)


class UnknownNode(KeyError):
    code = "UnknownNode"

    def __str__(self) -> str:  # KeyError quotes repr by default
        return self.args[0] if self.args else ""


@dataclass(frozen=True)
class DepGraph:
    nodes: frozenset[str]
    edges: frozenset[Edge]

    def outgoing(self, kinds: frozenset[str] | None = None) -> dict[str, list[tuple[str, str]]]:
        out: dict[str, list[tuple[str, str]]] = defaultdict(list)
        for src, dst, kind in self.edges:
            if kinds is None or kind in kinds:
                out[src].append((dst, kind))
        return out


@dataclass(frozen=True)
class PrereqResult:
    root: str
    prerequisites: tuple[str, ...]  # breadth-first layers, lexicographic within
    edges: tuple[Edge, ...]  # induced edge set, sorted
    layers: tuple[tuple[str, ...], ...] = ()  # layer 0 is the root


def build_dependency_graph(corpus: Mapping[str, LinkedDocument]) -> DepGraph:
    """One node per document and per declared symbol over the head corpus."""
    nodes: set[str] = set()
    edges: set[Edge] = set()
    for doc in corpus.values():
        doc_uri = docmodel.document_uri(doc.path)
        nodes.add(doc_uri)
        for module in doc.modules:
            for sym in module.symbols:
                if sym.uri:
                    nodes.add(sym.uri)
                    edges.add((doc_uri, sym.uri, "defines"))
            for imp in module.imports:
                if imp.uri:
                    target = "//" + docmodel.split_uri(imp.uri)[0]
                    if target != doc_uri:
                        edges.add((doc_uri, target, "imports"))
    from .triples import USES_SYMBOL, extract_triples  # local to avoid cycle

    for doc in corpus.values():
        doc_uri = docmodel.document_uri(doc.path)
        for t in extract_triples(doc, 0):
            if t.predicate == USES_SYMBOL:
                edges.add((doc_uri, t.object, "uses"))
                nodes.add(t.object)
    for src, dst, _ in edges:
        nodes.add(src)
        nodes.add(dst)
    return DepGraph(nodes=frozenset(nodes), edges=frozenset(edges))


def prerequisites(
    g: DepGraph, root: str, kinds: Iterable[str] | None = None
) -> PrereqResult:
    """Transitive dependency closure of `root`.

    Reachable set via directed edges of the selected kinds (default all);
    the root is excluded unless it lies on a cycle through itself.  Order is
    deterministic: breadth-first layers, lexicographic within each layer.
    """
    if root not in g.nodes:
        raise UnknownNode(f"unknown node {root}")
    kind_filter = frozenset(kinds) if kinds is not None else None
    adjacency = g.outgoing(kind_filter)
    visited: set[str] = set()
    layers: list[tuple[str, ...]] = [(root,)]
    ordered: list[str] = []
    frontier = [root]
    while frontier:
        next_layer: set[str] = set()
        for node in frontier:
            for target, _ in adjacency.get(node, ()):
                if target not in visited and target != root:
                    next_layer.add(target)
                elif target == root and root not in visited:
                    next_layer.add(root)  # root reached through a cycle
        next_layer -= visited
        visited |= next_layer
        if next_layer:
            layer = tuple(sorted(next_layer))
            layers.append(layer)
            ordered.extend(layer)
        frontier = sorted(next_layer)
    closure = {root} | visited
    induced = tuple(
        sorted(
            (src, dst, kind)
            for src, dst, kind in g.edges
            if src in closure
            and dst in closure
            and (kind_filter is None or kind in kind_filter)
        )
    )
    return PrereqResult(
        root=root,
        prerequisites=tuple(ordered),
        edges=induced,
        layers=tuple(layers),
    )


def detect_cycles(g: DepGraph) -> list[frozenset[str]]:
    """Strongly connected components of size >= 2, plus self-looped singletons.

    Deterministic order (by sorted members); empty for a DAG.
    """
    adjacency: dict[str, list[str]] = defaultdict(list)
    self_loops: set[str] = set()
    for src, dst, _ in g.edges:
        adjacency[src].append(dst)
        if src == dst:
            self_loops.add(src)
    index_of: dict[str, int] = {}
    lowlink: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    counter = 0
    components: list[frozenset[str]] = []

    for start in sorted(g.nodes):
        if start in index_of:
            continue
        # iterative Tarjan: (node, iterator position)
        work = [(start, 0)]
        while work:
            node, child_index = work.pop()
            if child_index == 0:
                index_of[node] = lowlink[node] = counter
                counter += 1
                stack.append(node)
                on_stack.add(node)
            children = adjacency.get(node, [])
            advanced = False
            for i in range(child_index, len(children)):
                child = children[i]
                if child not in index_of:
                    work.append((node, i + 1))
                    work.append((child, 0))
                    advanced = True
                    break
                if child in on_stack:
                    lowlink[node] = min(lowlink[node], index_of[child])
            if advanced:
                continue
            if lowlink[node] == index_of[node]:
                component = []
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    component.append(member)
                    if member == node:
                        break
                if len(component) > 1 or node in self_loops:
                    components.append(frozenset(component))
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[node])
    return sorted(components, key=lambda c: sorted(c))


# ---------------------------------------------------------------------------
# Exports
# ---------------------------------------------------------------------------

_NODE_W = 160
_NODE_H = 28
_X_GAP = 40
_Y_GAP = 80
_MARGIN = 40


def _layout(result: PrereqResult) -> dict[str, tuple[int, int]]:
    layers = result.layers or ((result.root,),)
    positions: dict[str, tuple[int, int]] = {}
    for depth, layer in enumerate(layers):
        y = _MARGIN + depth * _Y_GAP
        for i, node in enumerate(sorted(layer)):
            x = _MARGIN + i * (_NODE_W + _X_GAP)
            positions.setdefault(node, (x, y))
    return positions


def export_svg(result: PrereqResult, labels: Mapping[str, str]) -> str:
    """Layered SVG of a closure: one `data-uri`-annotated group per node.

    Root is on the top layer with breadth-first layers below; byte output is
    deterministic for identical input.
    """
    positions = _layout(result)
    width = max(x for x, _ in positions.values()) + _NODE_W + _MARGIN
    height = max(y for _, y in positions.values()) + _NODE_H + _MARGIN
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'viewBox="0 0 {width} {height}" width="{width}" height="{height}">',
    ]
    for src, dst, kind in result.edges:
        x1, y1 = positions[src]
        x2, y2 = positions[dst]
        parts.append(
            f'<line x1="{x1 + _NODE_W // 2}" y1="{y1 + _NODE_H}" '
            f'x2="{x2 + _NODE_W // 2}" y2="{y2}" '
            f'stroke="#555" data-kind="{kind}"/>'
        )
    for node in sorted(positions):
        x, y = positions[node]
        label = labels.get(node, node)
        uri = html.escape(node, quote=True)
        parts.append(
            f'<g data-uri="{uri}">'
            f'<rect x="{x}" y="{y}" width="{_NODE_W}" height="{_NODE_H}" '
            f'rx="4" fill="#eef" stroke="#336"/>'
            f'<text x="{x + _NODE_W // 2}" y="{y + 19}" text-anchor="middle" '
            f'font-size="12">{html.escape(label)}</text>'
            f"</g>"
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def export_dot(result: PrereqResult, labels: Mapping[str, str]) -> str:
    """DOT-format dump of a closure result, for debugging."""
    def quote(s: str) -> str:
        return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'

    lines = ["digraph prerequisites {", "  rankdir=TB;"]
    for node in sorted({result.root, *result.prerequisites}):
        lines.append(f"  {quote(node)} [label={quote(labels.get(node, node))}];")
    for src, dst, kind in result.edges:
        lines.append(f"  {quote(src)} -> {quote(dst)} [label={quote(kind)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
