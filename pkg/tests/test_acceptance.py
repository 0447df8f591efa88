"""Acceptance criteria, one test per criterion.

Each test prints one `PASS`/`FAIL` line (visible with `pytest -s` or on
failure) and enforces its stated runtime bound.  Run via:

    pytest tests/test_acceptance.py -s
"""

from __future__ import annotations

import random
import statistics
import time

import pytest
from fastapi.testclient import TestClient

from semportal import markup, render, triples
from semportal.graph import DepGraph, prerequisites
from semportal.portal import Portal, PortalConfig, create_app
from semportal.render import ELLIPSIS, FoldState
from semportal.store import NoSuchRevision, NotFound, Store
from semportal.triples import Query, Triple, TriplePattern, query

from .conftest import CORPUS
from .oracles import ReplayStore, bfs_reachable, enumerate_query


def _report(name: str, elapsed: float, ok: bool = True, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    suffix = f"  {detail}" if detail else ""
    print(f"{status}  {name}  ({elapsed:.2f}s){suffix}", flush=True)


class _Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def test_parser_round_trip(corpus_sources):
    """pretty-print . parse is the identity on >= 20 fixture ASTs, < 5 s."""
    with _Timer() as timer:
        failures = []
        count = 0
        for name, text in corpus_sources.items():
            count += 1
            ast = markup.parse_text(name, text)
            if markup.parse_text(name, markup.pretty_print(ast)) != ast:
                failures.append(name)
    ok = not failures and count >= 20 and timer.elapsed < 5.0
    _report(
        "parser-round-trip",
        timer.elapsed,
        ok,
        f"{count} documents, {len(failures)} failures",
    )
    assert count >= 20
    assert failures == []
    assert timer.elapsed < 5.0


def test_definition_lookup_totality(loaded_portal):
    """Every data-symbol in the rendered fixture corpus resolves (100%)."""
    with _Timer() as timer:
        state = loaded_portal.state
        symbols = set()
        for doc in state.docs.values():
            tree = render.render_document(doc)
            for node in render.iter_nodes(tree):
                symbol = node.attr("data-symbol")
                if symbol:
                    symbols.add(symbol)
        misses = []
        for symbol in sorted(symbols):
            try:
                loaded_portal.definition_html(symbol)
            except Exception:  # noqa: BLE001 - any failure counts as a miss
                misses.append(symbol)
        # the same sweep through the HTTP surface, sampled
        client = TestClient(create_app(loaded_portal))
        for symbol in sorted(symbols)[::4]:
            response = client.get("/definition", params={"symbol": symbol})
            if response.status_code != 200:
                misses.append(symbol)
    ok = not misses and symbols
    _report(
        "definition-lookup-totality",
        timer.elapsed,
        bool(ok),
        f"{len(symbols)} distinct symbols, {len(misses)} misses",
    )
    assert symbols, "sweep found no annotated symbols"
    assert misses == []


def test_closure_oracle():
    """200 random digraphs (<= 25 nodes, p = 0.15): exact set equality, < 10 s."""
    rng = random.Random(0xC105)
    with _Timer() as timer:
        mismatches = 0
        for _ in range(200):
            count = rng.randint(1, 25)
            names = [f"n{i:02d}" for i in range(count)]
            plain = {
                (a, b)
                for a in names
                for b in names
                if a != b and rng.random() < 0.15
            }
            g = DepGraph(
                nodes=frozenset(names),
                edges=frozenset((a, b, "uses") for a, b in plain),
            )
            root = rng.choice(names)
            got = set(prerequisites(g, root).prerequisites)
            expected, _ = bfs_reachable(plain, root)
            if got != expected:
                mismatches += 1
    ok = mismatches == 0 and timer.elapsed < 10.0
    _report("closure-oracle", timer.elapsed, ok, f"200 digraphs, {mismatches} mismatches")
    assert mismatches == 0
    assert timer.elapsed < 10.0


def test_query_engine_oracle():
    """100 random graphs (<= 200 triples) x random queries: equals brute force, < 30 s."""
    rng = random.Random(0xBEEF)
    with _Timer() as timer:
        mismatches = 0
        for _ in range(100):
            terms = [f"t{i}" for i in range(rng.randint(4, 12))]
            predicates = [f"p{i}" for i in range(rng.randint(1, 3))]
            graph = {
                Triple(rng.choice(terms), rng.choice(predicates), rng.choice(terms))
                for _ in range(rng.randint(1, 200))
            }
            variables = ["v0", "v1"][: rng.randint(1, 2)]
            patterns = []
            for _ in range(rng.randint(1, 3)):
                transitive = rng.random() < 0.4

                def term(allow_var: bool = True) -> str:
                    if allow_var and rng.random() < 0.5:
                        return "?" + rng.choice(variables)
                    return rng.choice(terms)

                predicate = (
                    rng.choice(predicates)
                    if transitive or rng.random() < 0.8
                    else "?" + rng.choice(variables)
                )
                patterns.append(TriplePattern(term(), predicate, term(), transitive))
            used = set()
            for pattern in patterns:
                used |= pattern.variables()
            if not used & set(variables):
                first = patterns[0]
                patterns[0] = TriplePattern(
                    "?" + variables[0], first.predicate, first.object, first.transitive
                )
                used = patterns[0].variables()
            select = tuple(sorted(used & set(variables)))
            got = query(graph, Query(patterns=tuple(patterns), select=select))
            expected = enumerate_query(
                {tuple(t) for t in graph},
                [(p.subject, p.predicate, p.object, p.transitive) for p in patterns],
                list(select),
            )
            if {tuple(b[name] for name in select) for b in got} != expected:
                mismatches += 1
    ok = mismatches == 0 and timer.elapsed < 30.0
    _report("query-engine-oracle", timer.elapsed, ok, f"100 graphs, {mismatches} mismatches")
    assert mismatches == 0
    assert timer.elapsed < 30.0


def test_versioned_store_replay(tmp_path, monkeypatch):
    """1000 randomized ops match the map-of-revision-maps oracle; crash-safe."""
    rng = random.Random(0x5708E)
    with _Timer() as timer:
        real = Store(tmp_path / "replay")
        model = ReplayStore()
        paths = [f"doc{i}.stx" for i in range(12)] + ["nested/a.stx", "nested/deep/b.stx"]
        operations = 0
        for step in range(1000):
            operations += 1
            roll = rng.random()
            if roll < 0.4 or model.head == 0:
                changes, used = [], set()
                for _ in range(rng.randint(1, 3)):
                    path = rng.choice(paths)
                    if path in used:
                        continue
                    used.add(path)
                    if rng.random() < 0.12 and model.get(path) is not None:
                        changes.append((path, None))
                    else:
                        changes.append((path, f"{step}:{rng.getrandbits(64)}".encode()))
                assert real.commit(changes, author="replay") == model.commit(changes)
            elif roll < 0.75:
                path = rng.choice(paths)
                at = rng.randint(0, model.head + 2) if rng.random() < 0.7 else None
                expected = model.get(path, at)
                if expected is None:
                    with pytest.raises((NotFound, NoSuchRevision)):
                        real.get(path, at)
                else:
                    assert real.get(path, at) == expected
            else:
                path = rng.choice(paths)
                got = [r.revision for r in real.history(path)]
                assert got == model.history_revisions(path)
        # every (path, revision) read agrees with the oracle
        for at in range(1, model.head + 1):
            for path in paths:
                expected = model.get(path, at)
                if expected is None:
                    with pytest.raises((NotFound, NoSuchRevision)):
                        real.get(path, at)
                else:
                    assert real.get(path, at) == expected

        # crash recovery: kill between log append and index update
        crash = Store(tmp_path / "crash")
        crash.commit([("a.stx", b"1")], author="c")
        monkeypatch.setattr(Store, "_write_index", lambda self, snap, size: None)
        crash.commit([("a.stx", b"2")], author="c")
        crash.commit([("b.stx", b"3")], author="c")
        monkeypatch.undo()
        reopened = Store(tmp_path / "crash")
        assert reopened.head() == 3
        assert reopened.get("a.stx") == b"2"
        assert reopened.get("b.stx") == b"3"
        # and a torn tail write is discarded without losing commits
        with open(tmp_path / "crash" / "log", "ab") as fh:
            fh.write(b"\x00\x00\xff\xffhalf a record")
        (tmp_path / "crash" / "index").unlink()
        reopened_again = Store(tmp_path / "crash")
        assert reopened_again.head() == 3
    _report("versioned-store-replay", timer.elapsed, True, f"{operations} operations")


def test_fold_involution_and_locality(corpus_linked):
    """100 random fold sets: apply/unapply identity; diff confined to folds."""
    rng = random.Random(0xF01D)
    with _Timer() as timer:
        docs = sorted(corpus_linked)
        for case in range(100):
            doc = corpus_linked[docs[case % len(docs)]]
            ids = sorted(doc.fragments)
            folds = frozenset(rng.sample(ids, k=rng.randint(1, min(5, len(ids)))))
            base = render.render_document(doc)
            folded = render.apply_folds(base, FoldState(folds))
            # involution: re-render with the empty set reproduces the original
            assert render.render_document(doc, FoldState()) == base
            assert render.apply_folds(folded, FoldState(folds)) == folded  # idempotent
            # locality: outside folded subtrees everything is structurally equal
            base_nodes = {
                n.attr("data-fragment"): n
                for n in render.iter_nodes(base)
                if n.attr("data-fragment")
            }
            subtree = {
                fid: {
                    m.attr("data-fragment")
                    for m in render.iter_nodes(node)
                    if m.attr("data-fragment")
                }
                for fid, node in base_nodes.items()
            }
            for node in render.iter_nodes(folded):
                fid = node.attr("data-fragment")
                if not fid:
                    continue
                if fid in folds:
                    assert node.children == (ELLIPSIS,)
                elif subtree[fid] & folds:
                    assert node.attrs == base_nodes[fid].attrs
                else:
                    assert node == base_nodes[fid]
    _report("fold-involution-and-locality", timer.elapsed, True, "100 fold sets")


def test_ingest_atomicity(tmp_path):
    """A parse failure mid-corpus leaves store, triples, and graph untouched."""
    with _Timer() as timer:
        # a dependency-closed subset of the fixture corpus
        subset = ["sets.stx", "relations.stx", "functions.stx", "nat.stx", "int.stx", "groups.stx"]
        clean = {name: (CORPUS / name).read_text() for name in subset}
        broken = dict(clean)
        broken["zzz-broken.stx"] = "\\begin{smodule}{broken}\n\\symdef{x}\n"

        with_failure = Portal(PortalConfig(data_dir=str(tmp_path / "a")))
        reports = with_failure.ingest_batch(broken, author="t", message="m")
        by_status = {r.path: r.status for r in reports}
        assert by_status.pop("zzz-broken.stx") == "failed"
        assert set(by_status.values()) == {"ok"}

        without_failure = Portal(PortalConfig(data_dir=str(tmp_path / "b")))
        assert all(
            r.status == "ok"
            for r in without_failure.ingest_batch(clean, author="t", message="m")
        )

        # byte-compared snapshots: triple dump, graph counts, head revision
        assert with_failure.store.head() == without_failure.store.head()
        assert triples.dump_ntriples(
            with_failure.state.triple_graph
        ) == triples.dump_ntriples(without_failure.state.triple_graph)
        g1, g2 = with_failure.state.dep_graph, without_failure.state.dep_graph
        assert (g1.nodes, g1.edges) == (g2.nodes, g2.edges)

        # and a failing single-document ingest is a complete no-op
        head = with_failure.store.head()
        dump = triples.dump_ntriples(with_failure.state.triple_graph)
        report = with_failure.ingest(
            "another-broken.stx", "\\begin{smodule}{x}", author="t", message="m"
        )
        assert report.status == "failed"
        assert with_failure.store.head() == head
        assert triples.dump_ntriples(with_failure.state.triple_graph) == dump
    _report("ingest-atomicity", timer.elapsed, True)


def _generated_doc(i: int) -> tuple[str, str]:
    path = f"gen/doc{i:04d}.stx"
    lines = [f"\\title{{Generated article {i}}}", "\\msc{11-XX}"]
    lines.append(f"\\begin{{smodule}}{{mod{i}}}")
    if i > 0:
        lines.append(f"  \\importmodule{{gen/doc{i-1:04d}?mod{i-1}}}")
    for s in range(3):
        lines.append(f"  \\symdef{{sym{i}x{s}}}[args=2]")
    for s in range(3):
        lines.append(f"  \\begin{{definition}}[for=sym{i}x{s}]")
        body = (
            f"The \\definiendum{{sym{i}x{s}}}{{operation {s}}} acts as "
            f"$\\apply{{sym{i}x{s}}}{{x,y}}$ on its arguments. "
        )
        if i > 0:
            body += (
                f"It refines \\termref{{mod{i-1}?sym{i-1}x{s}}}{{an earlier operation}}. "
            )
        body += "Filler prose keeps this article near its two kilobyte target size. " * 6
        lines.append("    " + body)
        lines.append("  \\end{definition}")
    lines.append("\\end{smodule}")
    return path, "\n".join(lines) + "\n"


def test_end_to_end_smoke(tmp_path):
    """Ingest 1000 generated ~2 KB documents < 60 s; then /doc, /prereq and
    /query each answer with < 100 ms median."""
    portal = Portal(PortalConfig(data_dir=str(tmp_path / "smoke")))
    documents = [_generated_doc(i) for i in range(1000)]
    sizes = [len(text.encode()) for _, text in documents]
    assert 1024 <= statistics.mean(sizes) <= 4096  # "~2 KB"

    with _Timer() as ingest_timer:
        for path, text in documents:
            report = portal.ingest(path, text, author="gen", message="bulk")
            assert report.status == "ok", (path, report.parse_errors[:2])
    ingest_ok = ingest_timer.elapsed < 60.0

    client = TestClient(create_app(portal))

    def median_ms(fn, samples: int = 30) -> float:
        times = []
        for _ in range(samples):
            start = time.perf_counter()
            response = fn()
            times.append(time.perf_counter() - start)
            assert response.status_code == 200
        return statistics.median(times) * 1000.0

    doc_ms = median_ms(lambda: client.get("/doc/gen/doc0500.stx"))
    prereq_ms = median_ms(
        lambda: client.get("/prereq", params={"uri": "//gen/doc0990", "format": "json"})
    )
    query_ms = median_ms(
        lambda: client.post(
            "/query", json={"query": "SELECT ?d\n?d plnt:dependsOn //gen/doc0500"}
        )
    )
    ok = ingest_ok and max(doc_ms, prereq_ms, query_ms) < 100.0
    _report(
        "end-to-end-smoke",
        ingest_timer.elapsed,
        ok,
        f"ingest={ingest_timer.elapsed:.1f}s "
        f"doc={doc_ms:.1f}ms prereq={prereq_ms:.1f}ms query={query_ms:.1f}ms",
    )
    assert ingest_timer.elapsed < 60.0
    assert doc_ms < 100.0
    assert prereq_ms < 100.0
    assert query_ms < 100.0
