"""Small graph helpers: ordered topological sort and strongly connected components."""

from __future__ import annotations

import heapq
from typing import Hashable, Iterable, Mapping, Sequence


def ordered_toposort(
    nodes: Sequence[Hashable], edges: Iterable[tuple[Hashable, Hashable]]
) -> tuple[list, list]:
    """Kahn's algorithm with ties broken by position in ``nodes``.

    Returns ``(order, leftover)``; ``leftover`` holds nodes that sit on or
    downstream of a cycle and could not be ordered.
    """
    rank = {n: i for i, n in enumerate(nodes)}
    succ: dict = {n: [] for n in nodes}
    indeg = {n: 0 for n in nodes}
    for a, b in edges:
        succ[a].append(b)
        indeg[b] += 1
    ready = [rank[n] for n in nodes if indeg[n] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        n = nodes[heapq.heappop(ready)]
        order.append(n)
        for m in succ[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                heapq.heappush(ready, rank[m])
    placed = set(order)
    return order, [n for n in nodes if n not in placed]


def strongly_connected(
    nodes: Sequence[Hashable], succ: Mapping[Hashable, Iterable[Hashable]]
) -> list[list]:
    """Tarjan's SCC algorithm, iterative. Components come out in reverse
    topological order; members keep ``nodes`` order."""
    index: dict = {}
    low: dict = {}
    on_stack: set = set()
    stack: list = []
    comps: list[list] = []
    counter = 0
    rank = {n: i for i, n in enumerate(nodes)}

    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(succ.get(root, ())))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(succ.get(w, ()))))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                comps.append(sorted(comp, key=rank.__getitem__))
    return comps


def cycles(nodes: Sequence[Hashable], edges: Iterable[tuple[Hashable, Hashable]]) -> list[list]:
    """Every strongly connected component that contains a cycle (including self-loops)."""
    succ: dict = {n: [] for n in nodes}
    selfloop = set()
    for a, b in edges:
        succ[a].append(b)
        if a == b:
            selfloop.add(a)
    rank = {n: i for i, n in enumerate(nodes)}
    found = [c for c in strongly_connected(nodes, succ) if len(c) > 1 or c[0] in selfloop]
    return sorted(found, key=lambda c: rank[c[0]])
