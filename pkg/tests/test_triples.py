from __future__ import annotations

import random
from collections import Counter

import pytest

from semportal import triples as T
from semportal.triples import (
    MalformedQuery,
    Query,
    Triple,
    TriplePattern,
    dump_ntriples,
    extract_triples,
    lit,
    msc_browse,
    parse_query,
    query,
)

from .oracles import enumerate_query

# Frozen corpus-wide triple counts per predicate (scripts/scan_fixtures.py).
EXPECTED_PREDICATE_COUNTS = {
    "plnt:hasTitle": 21,
    "plnt:hasMSC": 38,
    "plnt:declaresSymbol": 56,
    "plnt:definesSymbol": 56,
    "plnt:imports": 25,
    "plnt:usesSymbol": 66,
    "plnt:dependsOn": 31,
    "plnt:atRevision": 21,
}


def corpus_graph(corpus_linked) -> set[Triple]:
    graph: set[Triple] = set()
    for revision, (name, doc) in enumerate(sorted(corpus_linked.items()), start=1):
        graph |= extract_triples(doc, revision)
    return graph


class TestExtraction:
    def test_title_and_msc(self, corpus_linked):
        doc = corpus_linked["groups.stx"]
        triples = extract_triples(doc, 3)
        assert Triple("//groups", T.HAS_TITLE, lit("Groups")) in triples
        assert Triple("//groups", T.HAS_MSC, "msc:20A05") in triples
        assert Triple("//groups", T.AT_REVISION, lit("3")) in triples

    def test_no_dependencies_no_depends_on(self):
        from semportal import markup

        linked = markup.link_document(
            markup.parse_text(
                "solo.stx",
                r"\title{Solo}\begin{smodule}{m}\symdef{s}"
                r"\begin{definition}[for=s]\definiendum{s}{s}\end{definition}"
                r"\end{smodule}",
            ),
            markup.SymbolRegistry(),
        )
        extracted = extract_triples(linked, 1)
        assert not [t for t in extracted if t.predicate == T.DEPENDS_ON]
        assert not [t for t in extracted if t.predicate == T.IMPORTS]
        assert Triple("//solo", T.DEFINES_SYMBOL, "//solo#m/s") in extracted

    def test_corpus_counts_match_scan(self, corpus_linked, scan_report):
        counts = Counter(t.predicate for t in corpus_graph(corpus_linked))
        for predicate, expected in EXPECTED_PREDICATE_COUNTS.items():
            assert counts[predicate] == expected, predicate
        for key, value in scan_report["triples"].items():
            assert counts[T.VOCAB + key] == value, key

    def test_extraction_deterministic(self, corpus_linked):
        doc = corpus_linked["nat.stx"]
        assert extract_triples(doc, 5) == extract_triples(doc, 5)
        # revision participates in the set
        assert extract_triples(doc, 5) != extract_triples(doc, 6)


class TestQuery:
    def test_simple_binding(self):
        graph = {Triple("a", "p", "b")}
        outcome = query(graph, Query(patterns=(TriplePattern("?x", "p", "b"),), select=("x",)))
        assert outcome == [{"x": "a"}]

    def test_transitive_chain(self):
        graph = {Triple("a", "p", "b"), Triple("b", "p", "c")}
        outcome = query(
            graph,
            Query(patterns=(TriplePattern("a", "p", "?y", transitive=True),), select=("y",)),
        )
        assert outcome == [{"y": "b"}, {"y": "c"}]

    def test_selected_variable_must_occur(self):
        with pytest.raises(MalformedQuery):
            query(set(), Query(patterns=(TriplePattern("?x", "p", "b"),), select=("z",)))

    def test_transitive_needs_constant_predicate(self):
        with pytest.raises(MalformedQuery):
            query(
                set(),
                Query(
                    patterns=(TriplePattern("a", "?p", "?y", transitive=True),),
                    select=("y",),
                ),
            )

    def test_conjunction_joins_on_shared_variables(self):
        graph = {
            Triple("a", "kind", "doc"),
            Triple("b", "kind", "doc"),
            Triple("a", "title", lit("A")),
        }
        outcome = query(
            graph,
            Query(
                patterns=(
                    TriplePattern("?d", "kind", "doc"),
                    TriplePattern("?d", "title", "?t"),
                ),
                select=("d", "t"),
            ),
        )
        assert outcome == [{"d": "a", "t": lit("A")}]

    def test_deterministic_order(self):
        graph = {Triple(s, "p", "o") for s in "zyxw"}
        outcome = query(graph, Query(patterns=(TriplePattern("?s", "p", "o"),), select=("s",)))
        assert [b["s"] for b in outcome] == ["w", "x", "y", "z"]

    def _random_graph(self, rng: random.Random, max_triples: int = 60) -> set[Triple]:
        terms = [f"n{i}" for i in range(rng.randint(3, 10))]
        predicates = [f"p{i}" for i in range(rng.randint(1, 3))]
        count = rng.randint(1, max_triples)
        return {
            Triple(rng.choice(terms), rng.choice(predicates), rng.choice(terms))
            for _ in range(count)
        }

    def _random_query(self, rng: random.Random, graph: set[Triple]) -> Query:
        terms = sorted({x for t in graph for x in t})
        predicates = sorted({t.predicate for t in graph})
        variables = ["v0", "v1"][: rng.randint(1, 2)]
        patterns = []
        for _ in range(rng.randint(1, 3)):
            transitive = rng.random() < 0.3

            def pick(allow_var: bool = True) -> str:
                if allow_var and rng.random() < 0.5:
                    return "?" + rng.choice(variables)
                return rng.choice(terms)

            predicate = rng.choice(predicates) if transitive else (
                "?" + rng.choice(variables) if rng.random() < 0.2 else rng.choice(predicates)
            )
            patterns.append(
                TriplePattern(pick(), predicate, pick(), transitive=transitive)
            )
        used = set()
        for pattern in patterns:
            used |= pattern.variables()
        select = sorted(used & set(variables)) or None
        if select is None:
            patterns[0] = TriplePattern("?" + variables[0], patterns[0].predicate,
                                        patterns[0].object, patterns[0].transitive)
            select = [variables[0]]
        return Query(patterns=tuple(patterns), select=tuple(select))

    def test_enumeration_oracle(self):
        rng = random.Random(1234)
        for _ in range(30):
            graph = self._random_graph(rng)
            q = self._random_query(rng, graph)
            got = query(graph, q)
            expected = enumerate_query(
                {tuple(t) for t in graph},
                [(p.subject, p.predicate, p.object, p.transitive) for p in q.patterns],
                list(q.select),
            )
            assert {tuple(b[name] for name in q.select) for b in got} == expected

    def test_monotonicity(self):
        rng = random.Random(77)
        for _ in range(15):
            graph = self._random_graph(rng, max_triples=30)
            q = self._random_query(rng, graph)
            base = {tuple(b.items()) for b in query(graph, q)}
            bigger = graph | self._random_graph(rng, max_triples=10)
            grown = {tuple(b.items()) for b in query(bigger, q)}
            assert base <= grown


class TestParseQuery:
    def test_select_and_patterns(self):
        q = parse_query("# c\nSELECT ?a ?b\n?a plnt:imports ?b\n?a plnt:dependsOn+ //x\n")
        assert q.select == ("a", "b")
        assert q.patterns[0] == TriplePattern("?a", "plnt:imports", "?b")
        assert q.patterns[1] == TriplePattern("?a", "plnt:dependsOn", "//x", transitive=True)

    def test_quoted_literal_term(self):
        q = parse_query('SELECT ?d\n?d plnt:hasTitle "Groups"\n')
        assert q.patterns[0].object == '"Groups"'

    def test_errors(self):
        for bad in ["", "SELECT ?x", "?a p ?b", "SELECT x\n?a p ?b", "SELECT ?x\na p"]:
            with pytest.raises(MalformedQuery):
                parse_query(bad)

    def test_fixture_query_files_parse(self):
        from .conftest import QUERIES

        for path in QUERIES.glob("*.q"):
            parse_query(path.read_text())


class TestMscBrowse:
    def test_prefix_match(self, corpus_linked):
        graph = corpus_graph(corpus_linked)
        hits = msc_browse(graph, "20A")
        assert hits == [("//groups", "Groups")]

    def test_no_match_empty(self, corpus_linked):
        assert msc_browse(corpus_graph(corpus_linked), "99") == []

    def test_results_equal_bruteforce_filter(self, corpus_linked, scan_report):
        graph = corpus_graph(corpus_linked)
        for prefix in ["0", "03", "11", "20-", "54E35", "1"]:
            expected_docs = {
                t.subject
                for t in graph
                if t.predicate == T.HAS_MSC and t.object.startswith("msc:" + prefix)
            }
            assert {d for d, _ in msc_browse(graph, prefix)} == expected_docs

    def test_prefix_refinement_subset(self, corpus_linked):
        graph = corpus_graph(corpus_linked)
        wide = {d for d, _ in msc_browse(graph, "2")}
        narrow = {d for d, _ in msc_browse(graph, "20A")}
        assert narrow <= wide

    def test_sorted_by_title(self, corpus_linked):
        graph = corpus_graph(corpus_linked)
        hits = msc_browse(graph, "1")
        titles = [title for _, title in hits]
        assert titles == sorted(titles)


class TestDump:
    def test_canonical_sorted_lines(self, corpus_linked):
        graph = corpus_graph(corpus_linked)
        dump = dump_ntriples(graph)
        lines = dump.strip().split("\n")
        assert lines == sorted(lines)
        assert len(lines) == len(graph)
        assert dump == dump_ntriples(set(graph))  # set order independent

    def test_literal_escaping_round_trip(self):
        term = lit('say "hi" \\ there')
        assert T.literal_value(term) == 'say "hi" \\ there'
        dump = dump_ntriples({Triple("//d", T.HAS_TITLE, term)})
        assert dump == f"<//d> <plnt:hasTitle> {term} .\n"
