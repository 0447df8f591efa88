"""Independent oracles used by the test suite.

Each function here re-derives an expected answer by a different method from
the implementation it checks (brute force, exhaustive enumeration, replay);
none of them import the modules they verify beyond plain data types.
"""

from __future__ import annotations

from itertools import product


def bfs_reachable(edges: set[tuple[str, str]], root: str) -> tuple[set[str], dict[str, int]]:
    """Plain breadth-first reachability (>= 1 edge); returns (set, distance)."""
    adjacency: dict[str, set[str]] = {}
    for src, dst in edges:
        adjacency.setdefault(src, set()).add(dst)
    distance: dict[str, int] = {}
    frontier = [root]
    depth = 0
    while frontier:
        depth += 1
        nxt: set[str] = set()
        for node in frontier:
            for target in adjacency.get(node, ()):
                if target not in distance:
                    nxt.add(target)
        for node in nxt:
            distance[node] = depth
        frontier = sorted(nxt)
    return set(distance), distance


def pairwise_reachability_sccs(
    nodes: set[str], edges: set[tuple[str, str]]
) -> list[frozenset[str]]:
    """SCCs of size >= 2 plus self-looped singletons, by mutual reachability."""
    reach = {node: bfs_reachable(edges, node)[0] for node in nodes}
    assigned: set[str] = set()
    components: list[frozenset[str]] = []
    for node in sorted(nodes):
        if node in assigned:
            continue
        component = {node} | {
            other
            for other in nodes
            if other != node and other in reach[node] and node in reach[other]
        }
        assigned |= component
        if len(component) > 1 or node in reach[node]:
            components.append(frozenset(component))
    return sorted(components, key=lambda c: sorted(c))


def transitive_pairs(triples: set[tuple[str, str, str]], predicate: str) -> set[tuple[str, str]]:
    """All (x, y) with a predicate path of length >= 1, by iterated composition."""
    direct = {(s, o) for s, p, o in triples if p == predicate}
    closure = set(direct)
    while True:
        extra = {
            (a, d)
            for (a, b) in closure
            for (c, d) in direct
            if b == c and (a, d) not in closure
        }
        if not extra:
            return closure
        closure |= extra


def enumerate_query(
    triples: set[tuple[str, str, str]],
    patterns: list[tuple[str, str, str, bool]],
    select: list[str],
) -> set[tuple[str, ...]]:
    """Brute-force query answering: try every assignment of graph terms.

    Patterns are (subject, predicate, object, transitive) with variables
    written as '?name'.  Returns the set of projected binding tuples.
    """
    universe: set[str] = set()
    for s, p, o in triples:
        universe.update((s, p, o))
    variables: list[str] = []
    for s, p, o, _ in patterns:
        for term in (s, p, o):
            if term.startswith("?") and term[1:] not in variables:
                variables.append(term[1:])
    closures: dict[str, set[tuple[str, str]]] = {}
    for s, p, o, transitive in patterns:
        if transitive and p not in closures:
            closures[p] = transitive_pairs(triples, p)

    results: set[tuple[str, ...]] = set()
    for assignment in product(sorted(universe), repeat=len(variables)):
        binding = dict(zip(variables, assignment))

        def value(term: str) -> str:
            return binding[term[1:]] if term.startswith("?") else term

        ok = True
        for s, p, o, transitive in patterns:
            if transitive:
                if (value(s), value(o)) not in closures[p]:
                    ok = False
                    break
            elif (value(s), value(p), value(o)) not in triples:
                ok = False
                break
        if ok:
            results.add(tuple(binding[name] for name in select))
    return results


class ReplayStore:
    """Map-of-revision-maps model of the versioned store."""

    def __init__(self) -> None:
        self.revisions: list[dict[str, bytes]] = [{}]  # index = revision number
        self.touched: list[set[str]] = [set()]

    @property
    def head(self) -> int:
        return len(self.revisions) - 1

    def commit(self, changes: list[tuple[str, bytes | None]]) -> int:
        state = dict(self.revisions[-1])
        for path, content in changes:
            if content is None:
                state.pop(path, None)
            else:
                state[path] = content
        self.revisions.append(state)
        self.touched.append({path for path, _ in changes})
        return self.head

    def get(self, path: str, at: int | None = None) -> bytes | None:
        """Content or None when absent/deleted/out-of-range (reads that raise)."""
        if at is None:
            at = self.head
        if not 1 <= at <= self.head:
            return None
        return self.revisions[at].get(path)

    def history_revisions(self, path: str) -> list[int]:
        return [r for r in range(1, len(self.touched)) if path in self.touched[r]]
