"""The landscape graph over minima: best-known connections, minimum spanning
tree, minimax (ultrametric) bounds and the worst-edge replacement heuristic."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autoneb import AutoNebSchedule, auto_neb
from .chain import Chain
from .errors import ConfigError, DisconnectedGraph, GraphError
from .landscape import Landscape
from .params import as_params


@dataclass
class GraphNode:
    id: int
    params: np.ndarray | None
    min_loss: float


@dataclass
class GraphEdge:
    id: int
    u: int
    v: int
    saddle_loss: float
    chain: Chain | None = None

    @property
    def pair(self) -> frozenset:
        return frozenset((self.u, self.v))


@dataclass
class LandscapeGraph:
    """Minima plus the best known connection per pair.

    At most one edge is stored per unordered pair: a new connection replaces
    the old one only when its saddle loss is strictly lower. Edge ids are
    assigned in insertion order and stay stable, so ``ignored_edges`` can
    exclude edges from the worst-edge search permanently.
    """

    nodes: list[GraphNode] = field(default_factory=list)
    ignored_edges: set[int] = field(default_factory=set)
    mst_max_history: list[float] = field(default_factory=list)

    def __post_init__(self):
        self._edges: dict[int, GraphEdge] = {}
        self._by_pair: dict[frozenset, int] = {}
        self._next_edge_id = 0

    def add_node(self, params, min_loss: float) -> int:
        node = GraphNode(len(self.nodes), None if params is None else np.asarray(params, dtype=np.float64), float(min_loss))
        self.nodes.append(node)
        return node.id

    def add_edge(self, u: int, v: int, saddle_loss: float, chain: Chain | None = None) -> GraphEdge:
        """Record a connection, keeping only the best edge per pair."""
        if u == v:
            raise GraphError("self edges are not allowed")
        for node_id in (u, v):
            if not (0 <= node_id < len(self.nodes)):
                raise GraphError(f"unknown node id {node_id}")
        saddle_loss = float(saddle_loss)
        floor = max(self.nodes[u].min_loss, self.nodes[v].min_loss)
        if saddle_loss < floor - 1e-9:
            raise GraphError(
                f"edge saddle {saddle_loss} is below the endpoint minimum {floor}"
            )
        pair = frozenset((u, v))
        existing = self._by_pair.get(pair)
        if existing is not None and self._edges[existing].saddle_loss <= saddle_loss:
            return self._edges[existing]
        edge = GraphEdge(self._next_edge_id, u, v, saddle_loss, chain)
        self._next_edge_id += 1
        if existing is not None:
            del self._edges[existing]
            self.ignored_edges.discard(existing)
        self._edges[edge.id] = edge
        self._by_pair[pair] = edge.id
        return edge

    @property
    def edges(self) -> list[GraphEdge]:
        return [self._edges[i] for i in sorted(self._edges)]

    def edge_for(self, u: int, v: int) -> GraphEdge | None:
        edge_id = self._by_pair.get(frozenset((u, v)))
        return None if edge_id is None else self._edges[edge_id]

    def has_pair(self, u: int, v: int) -> bool:
        return frozenset((u, v)) in self._by_pair

    def all_pairs_stored(self) -> bool:
        n = len(self.nodes)
        return len(self._by_pair) == n * (n - 1) // 2


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[rb] = ra
        return True


def _components(n: int, edges) -> list[list[int]]:
    uf = _UnionFind(n)
    for e in edges:
        uf.union(e.u, e.v)
    groups: dict[int, list[int]] = {}
    for node in range(n):
        groups.setdefault(uf.find(node), []).append(node)
    return list(groups.values())


def kruskal_mst(graph: LandscapeGraph) -> list[GraphEdge]:
    """Spanning tree minimizing total saddle loss; ties broken by edge id.

    Raises ``DisconnectedGraph`` (listing the components) when the stored
    edges do not span the nodes.
    """
    n = len(graph.nodes)
    if n == 0:
        raise GraphError("graph has no nodes")
    uf = _UnionFind(n)
    tree: list[GraphEdge] = []
    for edge in sorted(graph.edges, key=lambda e: (e.saddle_loss, e.id)):
        if uf.union(edge.u, edge.v):
            tree.append(edge)
    if len(tree) != n - 1:
        raise DisconnectedGraph(_components(n, tree))
    return tree


def ultrametric_bound(graph: LandscapeGraph, a: int, c: int) -> float:
    """Minimax path value between two minima.

    Equals the maximum edge weight on the unique tree path of the minimum
    spanning tree; for ``a == c`` it degenerates to that node's own loss.
    """
    if not (0 <= a < len(graph.nodes)) or not (0 <= c < len(graph.nodes)):
        raise GraphError("unknown node id")
    if a == c:
        return graph.nodes[a].min_loss
    tree = kruskal_mst(graph)
    adjacency: dict[int, list[tuple[int, float]]] = {}
    for e in tree:
        adjacency.setdefault(e.u, []).append((e.v, e.saddle_loss))
        adjacency.setdefault(e.v, []).append((e.u, e.saddle_loss))
    # DFS from a; tree paths are unique.
    stack = [(a, -np.inf)]
    best = {a: -np.inf}
    while stack:
        node, path_max = stack.pop()
        if node == c:
            return float(path_max)
        for nbr, w in adjacency.get(node, ()):
            if nbr not in best:
                best[nbr] = max(path_max, w)
                stack.append((nbr, best[nbr]))
    raise DisconnectedGraph(_components(len(graph.nodes), tree))


def _mst_spread_ratio(tree) -> float:
    weights = [e.saddle_loss for e in tree]
    top, bottom = max(weights), min(weights)
    scale = max(abs(top), 1e-300)
    return (top - bottom) / scale


def explore(
    minima,
    landscape: Landscape,
    schedule: AutoNebSchedule,
    budget: int,
    stop_ratio: float = 0.1,
    seed: int = 0,
    workers: int = 1,
) -> LandscapeGraph:
    """Build a landscape graph over ``minima`` by repeated path search.

    Phase 1 connects the first minimum to every other one (a star spanning
    tree). Phase 2 repeatedly takes the current MST, removes its worst edge
    and tries a new connection between a random unconnected cross-component
    pair; the better of old and new edge survives. An edge whose removal
    offers no untried pair is ignored from then on. Stops when every pair is
    connected, ``budget`` path searches are spent, or the MST's saddle losses
    agree within ``stop_ratio`` (relative spread).
    """
    points = [as_params(m, landscape.dim) for m in minima]
    if len(points) < 2:
        raise ConfigError("explore needs at least two minima")
    if budget < len(points) - 1:
        raise ConfigError("budget must cover the initial star phase (n - 1 runs)")
    rng = np.random.default_rng(seed)
    graph = LandscapeGraph()
    for p in points:
        graph.add_node(p, landscape.loss(p))

    runs = 0
    for i in range(1, len(points)):
        result = auto_neb(points[0], points[i], landscape, schedule, workers=workers)
        graph.add_edge(0, i, result.saddle.loss, result.chain)
        runs += 1
    graph.mst_max_history.append(max(e.saddle_loss for e in kruskal_mst(graph)))

    while runs < budget and not graph.all_pairs_stored():
        tree = kruskal_mst(graph)
        if _mst_spread_ratio(tree) < stop_ratio:
            break
        candidates = [e for e in tree if e.id not in graph.ignored_edges]
        if not candidates:
            break
        worst = max(candidates, key=lambda e: (e.saddle_loss, -e.id))
        remaining = [e for e in tree if e.id != worst.id]
        comps = _components(len(graph.nodes), remaining)
        side_a = set(min(comps, key=lambda c: (len(c), c)))
        pairs = [
            (a, b)
            for a in sorted(side_a)
            for b in range(len(points))
            if b not in side_a and not graph.has_pair(a, b)
        ]
        if not pairs:
            # No new pair can bypass this edge; never pick it again.
            graph.ignored_edges.add(worst.id)
            continue
        a, b = pairs[int(rng.integers(len(pairs)))]
        result = auto_neb(points[a], points[b], landscape, schedule, workers=workers)
        graph.add_edge(a, b, result.saddle.loss, result.chain)
        runs += 1
        graph.mst_max_history.append(max(e.saddle_loss for e in kruskal_mst(graph)))
    return graph
