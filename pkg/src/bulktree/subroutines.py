"""Approximation subroutines: shortest paths, Steiner tree, facility location,
load-balanced facility location, and single-sink rent-or-buy.

Constant factors certified by the methods used here (not best-known ratios):

  steiner_tree   metric-closure MST, ratio 2
  facility_location  open/close/swap local search, metric ratio <= 3
  lbfl           ball-growing greedy; every opened facility serves at least
                 the requested lower bound L (stronger than the L/3 relaxation
                 callers rely on); falls back to the root when total demand
                 is below L
  rent_or_buy    sample-and-augment with marking probability min(1, d_v/M);
                 expected ratio <= 2 + steiner ratio = 4

All tie-breaking is lexicographic on node ids: Dijkstra orders its heap by
(distance, node), Kruskal sorts edges by (weight, u, v), and every iteration
over node sets is over sorted ids.  Edge weights are treated as an opaque
nonnegative function, so scaling all weights by a positive constant scales
costs and leaves selected edge sets unchanged.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .instance import Edge, Instance, canonical_edge, demand_profile
from .aggregation import RoutedTree, atomic_cost, route_demands


def _weighted_adjacency(inst: Instance, weight) -> dict[str, list[tuple[str, float]]]:
    adj: dict[str, list[tuple[str, float]]] = {v: [] for v in inst.nodes}
    for (u, v) in inst.edges:
        w = float(weight[(u, v)])
        adj[u].append((v, w))
        adj[v].append((u, w))
    for v in adj:
        adj[v].sort()
    return adj


def dijkstra(inst: Instance, source: str, weight=None) -> tuple[dict[str, float], dict[str, str]]:
    """Distances and predecessors from source; ties broken by (distance, node id)."""
    weight = inst.lengths if weight is None else weight
    adj = _weighted_adjacency(inst, weight)
    dist = {source: 0.0}
    pred: dict[str, str] = {}
    done: set[str] = set()
    heap: list[tuple[float, str]] = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for v, w in adj[u]:
            nd = d + w
            if v not in dist or nd < dist[v]:
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))
    return dist, pred


def _walk_path(pred: dict[str, str], source: str, target: str) -> list[str]:
    path = [target]
    while path[-1] != source:
        path.append(pred[path[-1]])
    path.reverse()
    return path


def shortest_path_tree(inst: Instance, sources, sink: str, weight=None) -> RoutedTree:
    """Union of shortest paths from each source into the sink's Dijkstra tree."""
    _, pred = dijkstra(inst, sink, weight)
    edges: set[Edge] = set()
    for s in sorted(sources):
        node = s
        while node != sink:
            nxt = pred[node]
            edges.add(canonical_edge(node, nxt))
            node = nxt
    return route_demands(inst, edges)


@dataclass(frozen=True)
class SteinerSolution:
    tree_edges: tuple[Edge, ...]
    cost: float
    ratio_bound: float


def steiner_tree(inst: Instance, terminals, weight=None) -> SteinerSolution:
    """Metric-closure MST heuristic; cost within 2x of the optimal Steiner tree."""
    weight = inst.lengths if weight is None else weight
    terms = sorted(set(terminals))
    if not terms:
        raise ValueError("terminals must be nonempty")
    dists: dict[str, dict[str, float]] = {}
    preds: dict[str, dict[str, str]] = {}
    for t in terms:
        dists[t], preds[t] = dijkstra(inst, t, weight)
    closure = sorted(
        (dists[a][b], a, b) for i, a in enumerate(terms) for b in terms[i + 1 :]
    )
    parent = {t: t for t in terms}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    edges: set[Edge] = set()
    for _, a, b in closure:
        ra, rb = find(a), find(b)
        if ra == rb:
            continue
        parent[max(ra, rb)] = min(ra, rb)
        path = _walk_path(preds[a], a, b)
        edges.update(canonical_edge(u, v) for u, v in zip(path, path[1:]))
    pruned = tuple(sorted(_prune_to_tree(inst, edges, terms, weight)))
    cost = float(sum(float(weight[e]) for e in pruned))
    return SteinerSolution(tree_edges=pruned, cost=cost, ratio_bound=2.0)


def _prune_to_tree(inst: Instance, edges: set[Edge], terminals, weight) -> set[Edge]:
    """Extract a cycle-free subset spanning the terminals from a path union."""
    if not edges:
        return set()
    start = min(terminals)
    adj: dict[str, list[tuple[str, float]]] = {}
    for (u, v) in sorted(edges):
        w = float(weight[(u, v)])
        adj.setdefault(u, []).append((v, w))
        adj.setdefault(v, []).append((u, w))
    for v in adj:
        adj[v].sort()
    # Dijkstra tree inside the union keeps cost no larger than the union.
    dist = {start: 0.0}
    pred: dict[str, str] = {}
    done: set[str] = set()
    heap = [(0.0, start)]
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for v, w in adj.get(u, ()):
            nd = d + w
            if v not in dist or nd < dist[v]:
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))
    keep: set[Edge] = set()
    for t in sorted(terminals):
        if t == start:
            continue
        node = t
        while node != start:
            e = canonical_edge(node, pred[node])
            if e in keep:
                break
            keep.add(e)
            node = pred[node]
    return keep


@dataclass(frozen=True)
class FacilitySolution:
    open_facilities: tuple[str, ...]
    assignment: dict[str, str]
    cost: float
    min_load_achieved: float
    paths: dict[str, dict[str, str]] = field(default_factory=dict)  # facility -> pred map


def _all_pairs(inst: Instance, weight):
    return {v: dijkstra(inst, v, weight) for v in inst.nodes}


def facility_location(inst: Instance, demands, facility_cost, weight=None) -> FacilitySolution:
    """Uncapacitated facility location by open/close/swap local search (metric ratio <= 3)."""
    weight = inst.lengths if weight is None else weight
    sp = _all_pairs(inst, weight)
    clients = sorted(demands)
    candidates = sorted(inst.nodes)

    def solution_cost(opened):
        # sorted iteration keeps float accumulation order hash-independent
        total = sum(float(facility_cost[f]) for f in sorted(opened))
        for c in clients:
            total += demands[c] * min(sp[c][0][f] for f in opened)
        return total

    opened = {min(candidates, key=lambda f: (float(facility_cost[f]), f))}
    best = solution_cost(opened)
    # Polynomial step cap; each accepted move lowers cost by a fixed factor margin.
    for _ in range(8 * len(candidates) ** 2 + 16):
        improved = None
        for f in candidates:
            trial = set(opened)
            if f in trial:
                if len(trial) > 1:
                    trial.remove(f)
                else:
                    continue
            else:
                trial.add(f)
            c = solution_cost(trial)
            if c < best - 1e-12:
                improved = (c, trial)
                break
        if improved is None:
            for f_out in sorted(opened):
                for f_in in candidates:
                    if f_in in opened:
                        continue
                    trial = (set(opened) - {f_out}) | {f_in}
                    c = solution_cost(trial)
                    if c < best - 1e-12:
                        improved = (c, trial)
                        break
                if improved:
                    break
        if improved is None:
            break
        best, opened = improved[0], improved[1]
    assignment = {
        c: min(sorted(opened), key=lambda f: (sp[c][0][f], f)) for c in clients
    }
    loads = {f: 0.0 for f in opened}
    for c, f in assignment.items():
        loads[f] += demands[c]
    paths = {f: sp[f][1] for f in sorted(opened)}
    return FacilitySolution(
        open_facilities=tuple(sorted(opened)),
        assignment=assignment,
        cost=best,
        min_load_achieved=min(loads.values()),
        paths=paths,
    )


def lbfl(inst: Instance, demands, lower_bound, weight=None) -> FacilitySolution:
    """Load-balanced facility location via ball-growing greedy.

    Opens facilities at demand nodes, each serving >= lower_bound demand;
    leftovers join their nearest open facility.  When total demand is below
    the bound, everything is routed to the root.
    """
    weight = inst.lengths if weight is None else weight
    L = lower_bound
    clients = sorted(demands)
    total = sum(demands.values())
    if total < L:
        dist, pred = dijkstra(inst, inst.root, weight)
        assignment = {c: inst.root for c in clients}
        cost = sum(demands[c] * dist[c] for c in clients)
        return FacilitySolution(
            open_facilities=(inst.root,),
            assignment=assignment,
            cost=float(cost),
            min_load_achieved=float(total),
            paths={inst.root: pred},
        )
    sp = {c: dijkstra(inst, c, weight) for c in clients}
    remaining = set(clients)
    opened: list[str] = []
    assignment: dict[str, str] = {}
    while sum(demands[c] for c in remaining) >= L:
        best = None
        for u in sorted(remaining):
            ball = sorted(remaining, key=lambda v: (sp[u][0][v], v))
            got, members, conn = 0, [], 0.0
            for v in ball:
                members.append(v)
                got += demands[v]
                conn += demands[v] * sp[u][0][v]
                if got >= L:
                    break
            if got < L:
                continue
            cand = (conn, u, tuple(members))
            if best is None or cand < best:
                best = cand
        if best is None:
            break
        _, center, members = best
        opened.append(center)
        for v in members:
            assignment[v] = center
            remaining.discard(v)
    if not opened:
        # Cannot happen when total >= L, but keep the fallback explicit.
        return lbfl(inst, demands, total + 1, weight)
    for v in sorted(remaining):
        assignment[v] = min(opened, key=lambda f: (sp[v][0][f], f))
    loads = {f: 0 for f in opened}
    cost = 0.0
    for c, f in assignment.items():
        loads[f] += demands[c]
        cost += demands[c] * sp[c][0][f]
    paths = {f: dijkstra(inst, f, weight)[1] for f in sorted(opened)}
    return FacilitySolution(
        open_facilities=tuple(sorted(opened)),
        assignment=assignment,
        cost=float(cost),
        min_load_achieved=float(min(loads.values())),
        paths=paths,
    )


@dataclass(frozen=True)
class RoBSolution:
    tree: RoutedTree
    cost_under_f: float


def rent_or_buy(inst: Instance, M, seed: int) -> RoBSolution:
    """Sample-and-augment for the two-pipe cost min(x, M) per unit length.

    Marks each demand independently with probability min(1, d_v/M), buys a
    Steiner tree on the marked set plus the root, and rents shortest paths
    from the remaining demands into the bought structure.
    """
    if M <= 0:
        raise ValueError("M must be positive")
    rng = np.random.default_rng([int(seed), 0x726F62])
    clients = sorted(inst.demands)
    draws = rng.random(len(clients))
    marked = [c for c, r in zip(clients, draws) if r < min(1.0, inst.demands[c] / float(M))]
    bought = steiner_tree(inst, set(marked) | {inst.root})
    edges: set[Edge] = set(bought.tree_edges)
    nodes = {inst.root}
    for u, v in edges:
        nodes.add(u)
        nodes.add(v)
    for c in clients:
        if c in nodes:
            continue
        dist, pred = dijkstra(inst, c)
        target = min(nodes, key=lambda v: (dist.get(v, math.inf), v))
        path = _walk_path(pred, c, target)
        for u, v in zip(path, path[1:]):
            edges.add(canonical_edge(u, v))
            nodes.add(u)
            if v in nodes:
                break  # reached the bought structure; renting stops here
            nodes.add(v)
    tree = route_demands(inst, _prune_to_tree(inst, edges, sorted(set(clients)) + [inst.root], inst.lengths))
    cost = sum(inst.lengths[e] * min(x, float(M)) for e, x in tree.flow.items())
    return RoBSolution(tree=tree, cost_under_f=float(cost))


def rob_lower_bounds(inst: Instance, seed: int) -> list[tuple[int, float, RoutedTree]]:
    """Per level i, the atomic cost of a rent-or-buy tree with M = 2^i.

    The values upper-bound each level's optimum within the rent-or-buy
    method's expected constant and feed the dual constraint of the solver.
    """
    from .instance import demand_profile
    from .aggregation import atomic_cost

    profile = demand_profile(inst)
    out = []
    for i in range(profile.levels):
        sol = rent_or_buy(inst, 1 << i, seed=_mix_seed(seed, i))
        out.append((i, atomic_cost(sol.tree, i, inst.lengths), sol.tree))
    return out


def _mix_seed(seed: int, tag: int) -> int:
    return (int(seed) * 0x9E3779B97F4A7C15 + tag * 0xBF58476D1CE4E5B9 + 1) % (1 << 63)
