#!/usr/bin/env python3
"""Independent fixture-corpus scanner.

Computes expected counts for the test suite by regex/line scanning only --
deliberately no import of the real parser, so these numbers form an
independent oracle.  Assumes fixture conventions: one command per construct,
module names and symbol names globally unique, symbol names longer than one
letter.

Usage: python scripts/scan_fixtures.py [corpus-dir]
Prints a JSON report.
"""

from __future__ import annotations

import json
import re
import sys
from pathlib import Path

MODULE_RE = re.compile(r"\\begin\{smodule\}\{([A-Za-z][\w-]*)\}")
SYMDEF_RE = re.compile(r"\\symdef\{([A-Za-z][\w-]*)\}")
IMPORT_RE = re.compile(r"\\importmodule\{([^}]*)\}")
TERMREF_RE = re.compile(r"\\termref\{([^}]*)\}")
DEFINIENDUM_RE = re.compile(r"\\definiendum\{([A-Za-z][\w-]*)\}")
APPLY_RE = re.compile(r"\\apply\{([^}]*)\}")
STMT_BEGIN_RE = re.compile(r"\\begin\{(definition|theorem|example)\}(?:\[for=([^\]]*)\])?")
STMT_END_RE = re.compile(r"\\end\{(definition|theorem|example)\}")
TITLE_RE = re.compile(r"\\title\{([^}]*)\}")
MSC_RE = re.compile(r"\\msc\{([^}]*)\}")
TEXTLEAF_RE = re.compile(r"\\text\{[^{}]*\}")
NUM_RE = re.compile(r"(?<![0-9.])[0-9]+(?:\.[0-9]+)?(?![0-9.])")
VAR_RE = re.compile(r"(?<![A-Za-z\\])[A-Za-z](?![A-Za-z])")


def formula_spans(text: str) -> list[str]:
    """Content of every $...$ pair, ignoring escaped dollars."""
    spans = []
    content: list[str] | None = None
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\\" and i + 1 < len(text):
            if content is not None:
                content.append(text[i : i + 2])
            i += 2
            continue
        if ch == "$":
            if content is None:
                content = []
            else:
                spans.append("".join(content))
                content = None
        elif content is not None:
            content.append(ch)
        i += 1
    return spans


def formula_node_count(span: str) -> int:
    """Term-tree node count: each apply is 2 nodes (apply + head reference)."""
    applies = len(APPLY_RE.findall(span))
    stripped = TEXTLEAF_RE.sub(" ", span)
    texts = span.count("\\text{")
    stripped = re.sub(r"\\apply", " ", stripped)
    nums = len(NUM_RE.findall(stripped))
    variables = len(VAR_RE.findall(stripped))
    return 2 * applies + texts + nums + variables


def scan_file(path: Path) -> dict:
    text = path.read_text(encoding="utf-8").replace("\r\n", "\n")
    spans = formula_spans(text)
    counts = {
        "modules": len(MODULE_RE.findall(text)),
        "symbols": len(SYMDEF_RE.findall(text)),
        "imports": len(IMPORT_RE.findall(text)),
        "termrefs": len(TERMREF_RE.findall(text)),
        "definiendums": len(DEFINIENDUM_RE.findall(text)),
        "applies": len(APPLY_RE.findall(text)),
        "statements": len(STMT_END_RE.findall(text)),
        "formulas": len(spans),
        "formula_nodes": sum(formula_node_count(s) for s in spans),
        "msc_codes": sum(len([c for c in m.split(",") if c.strip()])
                         for m in MSC_RE.findall(text)),
        "titles": len(TITLE_RE.findall(text)),
    }
    # Every fragment: root + modules + statements + occurrences + term nodes.
    counts["fragments"] = (
        1
        + counts["modules"]
        + counts["statements"]
        + counts["termrefs"]
        + counts["definiendums"]
        + counts["formula_nodes"]
    )
    # data-symbol carriers: symbol declarations, occurrences, apply heads.
    counts["symbol_attrs"] = (
        counts["symbols"] + counts["termrefs"] + counts["definiendums"] + counts["applies"]
    )
    return counts


def build_tables(files: dict[str, str]) -> tuple[dict, dict]:
    """module name -> doc id, symbol name -> (doc id, module)."""
    module_doc: dict[str, str] = {}
    symbol_home: dict[str, tuple[str, str]] = {}
    for name, text in files.items():
        doc = name[: -len(".stx")]
        current = None
        for line in text.splitlines():
            m = MODULE_RE.search(line)
            if m:
                current = m.group(1)
                module_doc[current] = doc
            for sym in SYMDEF_RE.findall(line):
                if current:
                    symbol_home[sym] = (doc, current)
    return module_doc, symbol_home


def resolve(ref: str, module_doc: dict, symbol_home: dict) -> str | None:
    parts = ref.split("?")
    if len(parts) == 3:
        return f"//{parts[0]}#{parts[1]}/{parts[2]}"
    if len(parts) == 2:
        doc = module_doc.get(parts[0])
        return f"//{doc}#{parts[0]}/{parts[1]}" if doc else None
    home = symbol_home.get(parts[0])
    return f"//{home[0]}#{home[1]}/{parts[0]}" if home else None


def scan_triples(files: dict[str, str]) -> dict:
    """Expected triple counts per predicate over the whole corpus."""
    module_doc, symbol_home = build_tables(files)
    totals = {
        "hasTitle": 0,
        "hasMSC": 0,
        "declaresSymbol": 0,
        "definesSymbol": 0,
        "imports": 0,
        "usesSymbol": 0,
        "dependsOn": 0,
        "atRevision": 0,
    }
    for name, text in files.items():
        doc = name[: -len(".stx")]
        totals["atRevision"] += 1
        totals["hasTitle"] += min(1, len(TITLE_RE.findall(text)))
        totals["hasMSC"] += sum(
            len([c for c in m.split(",") if c.strip()]) for m in MSC_RE.findall(text)
        )
        totals["declaresSymbol"] += len(SYMDEF_RE.findall(text))
        imports = set(IMPORT_RE.findall(text))
        totals["imports"] += len(imports)
        uses: set[str] = set()
        for ref in TERMREF_RE.findall(text):
            uri = resolve(ref, module_doc, symbol_home)
            if uri:
                uses.add(uri)
        for span in formula_spans(text):
            for head in APPLY_RE.findall(span):
                uri = resolve(head, module_doc, symbol_home)
                if uri:
                    uses.add(uri)
        totals["usesSymbol"] += len(uses)
        defines: set[str] = set()
        current_module = None
        in_defn = False
        for line in text.splitlines():
            m = MODULE_RE.search(line)
            if m:
                current_module = m.group(1)
            sm = STMT_BEGIN_RE.search(line)
            if sm:
                in_defn = sm.group(1) == "definition"
                if in_defn and sm.group(2):
                    for ref in sm.group(2).split(","):
                        uri = resolve(ref.strip(), module_doc, symbol_home)
                        if uri:
                            defines.add(uri)
            if in_defn:
                for sym in DEFINIENDUM_RE.findall(line):
                    home = symbol_home.get(sym)
                    if home:
                        defines.add(f"//{home[0]}#{home[1]}/{sym}")
            if STMT_END_RE.search(line):
                in_defn = False
        del current_module
        totals["definesSymbol"] += len(defines)
        depends: set[str] = set()
        for ref in imports:
            target_doc = ref.split("?")[0]
            if target_doc != doc:
                depends.add(f"//{target_doc}")
        for uri in uses:
            target_doc = uri[2:].split("#")[0]
            if target_doc != doc:
                depends.add(f"//{target_doc}")
        totals["dependsOn"] += len(depends)
    return totals


def scan_graph(files: dict[str, str]) -> dict:
    """Expected dependency-graph node/edge counts."""
    module_doc, symbol_home = build_tables(files)
    nodes: set[str] = set()
    edges: set[tuple[str, str, str]] = set()
    for name, text in files.items():
        doc = name[: -len(".stx")]
        doc_uri = f"//{doc}"
        nodes.add(doc_uri)
        current = None
        for line in text.splitlines():
            m = MODULE_RE.search(line)
            if m:
                current = m.group(1)
            for sym in SYMDEF_RE.findall(line):
                if current:
                    uri = f"//{doc}#{current}/{sym}"
                    nodes.add(uri)
                    edges.add((doc_uri, uri, "defines"))
        for ref in set(IMPORT_RE.findall(text)):
            target_doc = ref.split("?")[0]
            if target_doc != doc:
                edges.add((doc_uri, f"//{target_doc}", "imports"))
        uses: set[str] = set()
        for ref in TERMREF_RE.findall(text):
            uri = resolve(ref, module_doc, symbol_home)
            if uri:
                uses.add(uri)
        for span in formula_spans(text):
            for head in APPLY_RE.findall(span):
                uri = resolve(head, module_doc, symbol_home)
                if uri:
                    uses.add(uri)
        for uri in uses:
            edges.add((doc_uri, uri, "uses"))
    return {"nodes": len(nodes), "edges": len(edges)}


def main() -> int:
    corpus = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("fixtures/corpus")
    files = {
        p.name: p.read_text(encoding="utf-8") for p in sorted(corpus.glob("*.stx"))
    }
    report = {
        "files": {name: scan_file(corpus / name) for name in files},
        "totals": {},
        "triples": scan_triples(files),
        "graph": scan_graph(files),
    }
    per_file = report["files"].values()
    for key in next(iter(per_file)).keys():
        report["totals"][key] = sum(f[key] for f in per_file)
    report["totals"]["documents"] = len(files)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
