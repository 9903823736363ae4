"""Randomized stage-wise tree construction: the separation-oracle subroutine.

Given a gamma-regular weight vector, converts it to pipes and lays pipe type
k at stage k:

  1. Steiner step: build a Steiner tree over the live demand nodes and the
     root, route toward the root, and repeatedly cut the farthest-upstream
     edge carrying more than the pipe capacity sigma_k/delta_k, leaving a
     forest whose non-root components each gathered at least that much flow.
  2. Consolidation: each non-root component sends all its live demand to one
     of its demand nodes, chosen with probability proportional to live
     demand.  Demand reaching the root component is delivered and parks at
     the root.
  3. Facility step: a load-balanced facility location on the ORIGINAL
     demands with lower bound at the significance point b_k and per-unit
     cost delta_k; when total demand is below b_k everything routes to the
     root and the remaining stages are skipped.
  4. Consolidation: within each facility cluster, the live demand moves to
     one original demand node chosen with probability proportional to
     original demand.

The final stage's pipe is flat, so its Steiner step has unbounded capacity
and delivers everything to the root.  Consolidations are unbiased: the
expected live demand at any original node equals its original demand after
every consolidation step.

Determinism: one named random stream per (stage, step) derived from the
master seed, components processed in cut-creation order (root first),
"farthest upstream" resolved by post-order depth-first traversal with
lexicographic children.
Per-stage cost accounting records the fixed cost of Steiner-step pipes and
the incremental cost of facility-step pipes; the returned tree is a
deterministic shortest-path extraction inside the union of all edges that
carried live demand, re-flowed from scratch.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .aggregation import RoutedTree, route_demands
from .instance import Edge, Instance, canonical_edge
from .pipes import AlphaVector, alpha_to_pipes, as_fraction, is_gamma_regular, thresholds
from .regularize import regularize
from .subroutines import dijkstra, lbfl, steiner_tree

__all__ = ["StageCosts", "GmmTrace", "gmm_tree", "oracle_tree"]


@dataclass(frozen=True)
class StageCosts:
    stage: int
    steiner_cost: float   # fixed cost of pipes laid in the Steiner step
    facility_cost: float  # incremental cost of pipes laid in the facility step


@dataclass
class GmmTrace:
    """Optional observation hook: live-demand snapshots after each consolidation.

    delivered is the demand already absorbed at the root when the snapshot was
    taken; consolidation unbiasedness (expected live demand at a node equals
    its original demand) is a statement about events with nothing absorbed yet.
    """

    consolidations: list = field(default_factory=list)  # (stage, step, snapshot, delivered)
    fallback_stage: int | None = None

    def record(self, stage: int, step: int, demand: dict, delivered: int) -> None:
        self.consolidations.append((stage, step, dict(sorted(demand.items())), delivered))


def _components(edges: set, roots: list[str]) -> list[tuple[str, dict[str, str]]]:
    """Parent maps of the forest, one per root, in the given root order."""
    adj: dict[str, list[str]] = {}
    for u, v in sorted(edges):
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)
    out = []
    seen: set[str] = set()
    for root in roots:
        parent: dict[str, str] = {}
        order = [root]
        seen.add(root)
        for u in order:
            for v in sorted(adj.get(u, ())):
                if v not in seen:
                    seen.add(v)
                    parent[v] = u
                    order.append(v)
        out.append((root, parent))
    return out


def _postorder(parent: dict[str, str], root: str) -> list[str]:
    children: dict[str, list[str]] = {}
    for v, p in parent.items():
        children.setdefault(p, []).append(v)
    for p in children:
        children[p].sort()
    out: list[str] = []

    def visit(u: str) -> None:
        for ch in children.get(u, ()):
            visit(ch)
        out.append(u)

    visit(root)
    return out


def _subtree_demand(parent: dict[str, str], root: str, cur: dict[str, int]) -> dict[str, int]:
    post = _postorder(parent, root)
    total = {v: cur.get(v, 0) for v in post}
    for v in post:
        if v != root:
            total[parent[v]] = total.get(parent[v], 0) + total[v]
    return total


def _cut_forest(tree_edges, root: str, cur: dict[str, int], capacity):
    """Cut the farthest-upstream over-capacity edge until none remains.

    capacity None means unbounded (the flat pipe): no cutting.  Returns the
    component list (root, parent map) with the true root's component first.
    """
    edges = set(tree_edges)
    roots = [root]
    while True:
        comps = _components(edges, roots)
        if capacity is None:
            return comps
        cut = None
        for comp_root, parent in comps:
            sub = _subtree_demand(parent, comp_root, cur)
            for v in _postorder(parent, comp_root):
                if v != comp_root and Fraction(sub[v]) > capacity:
                    cut = (v, parent[v])
                    break
            if cut:
                break
        if cut is None:
            return comps
        edges.discard(canonical_edge(*cut))
        roots.append(cut[0])


def _path_to_ancestor(parent: dict[str, str], node: str, stop: set[str]) -> list[str]:
    path = [node]
    while path[-1] not in stop:
        path.append(parent[path[-1]])
    return path


def _tree_path(parent: dict[str, str], root: str, u: str, v: str) -> list[str]:
    """Unique path between u and v in the tree given by the parent map."""
    anc_u = {u}
    x = u
    while x != root:
        x = parent[x]
        anc_u.add(x)
    up_v = _path_to_ancestor(parent, v, anc_u)
    junction = up_v[-1]
    up_u = _path_to_ancestor(parent, u, {junction})
    return up_u + list(reversed(up_v[:-1]))


def _move_demand(cur, holders, target, parent, comp_root, edge_flow, used):
    for h in holders:
        if h == target:
            continue
        amount = cur[h]
        path = _tree_path(parent, comp_root, h, target)
        for a, b in zip(path, path[1:]):
            e = canonical_edge(a, b)
            edge_flow[e] = edge_flow.get(e, 0) + amount
            used.add(e)
        cur[target] = cur.get(target, 0) + amount
        cur[h] = 0


def gmm_tree(
    inst: Instance,
    alpha: AlphaVector,
    gamma,
    seed: int,
    trace: GmmTrace | None = None,
) -> tuple[RoutedTree, list[StageCosts]]:
    """Run the staged construction; requires a gamma-regular weight vector."""
    check = is_gamma_regular(alpha, gamma)
    if not check:
        raise ValueError(f"weight vector is not gamma-regular: {check}")
    pipes = alpha_to_pipes(alpha)
    th = thresholds(pipes, gamma)
    total_original = inst.total_demand()
    hop_weight = {e: 1.0 for e in inst.edges}
    cur: dict[str, int] = dict(inst.demands)
    used: set[Edge] = set()
    costs: list[StageCosts] = []
    last = len(pipes) - 1  # flat pipe index
    for k in range(last + 1):
        sigma_k, delta_k = pipes.pipes[k].fixed, pipes.pipes[k].rate
        active = sorted(v for v, d in cur.items() if d > 0 and v != inst.root)
        if not active:
            break
        # Steiner step: cheap fixed-cost aggregation, cut at capacity.
        weight = inst.lengths if sigma_k > 0 else hop_weight
        st = steiner_tree(inst, set(active) | {inst.root}, weight)
        comps = _cut_forest(st.tree_edges, inst.root, cur, th.capacities[k])
        rng_steiner = np.random.default_rng([int(seed), k, 2])
        stage_sigma_edges: set[Edge] = set()
        for comp_root, parent in comps:
            members = {comp_root} | set(parent)
            holders = sorted(v for v in members if cur.get(v, 0) > 0 and v != inst.root)
            if not holders:
                continue
            if comp_root == inst.root:
                target = inst.root
            elif len(holders) == 1:
                target = holders[0]
            else:
                probs = np.array([cur[v] for v in holders], dtype=float)
                target = holders[int(rng_steiner.choice(len(holders), p=probs / probs.sum()))]
            stage_flow: dict[Edge, int] = {}
            _move_demand(cur, holders, target, parent, comp_root, stage_flow, used)
            stage_sigma_edges.update(stage_flow)
        steiner_cost = float(sigma_k) * sum(inst.lengths[e] for e in sorted(stage_sigma_edges))
        if trace is not None:
            trace.record(k, 2, {v: cur.get(v, 0) for v in inst.demands},
                         cur.get(inst.root, 0) - inst.demands.get(inst.root, 0))
        if k == last:
            costs.append(StageCosts(stage=k, steiner_cost=steiner_cost, facility_cost=0.0))
            break
        # Facility step on original demands with lower bound b_k.
        bound = th.significance[k]
        facility_flow: dict[Edge, int] = {}
        if Fraction(total_original) < bound:
            holders = sorted(v for v, d in cur.items() if d > 0 and v != inst.root)
            if holders:
                _, pred = dijkstra(inst, inst.root)
                _move_demand(cur, holders, inst.root, pred, inst.root, facility_flow, used)
            facility_cost = float(delta_k) * sum(
                inst.lengths[e] * f for e, f in facility_flow.items()
            )
            costs.append(StageCosts(stage=k, steiner_cost=steiner_cost, facility_cost=facility_cost))
            if trace is not None:
                trace.fallback_stage = k
            break
        fl = lbfl(inst, inst.demands, bound, inst.lengths)
        rng_facility = np.random.default_rng([int(seed), k, 4])
        clusters: dict[str, list[str]] = {}
        for v, f in sorted(fl.assignment.items()):
            clusters.setdefault(f, []).append(v)
        for f in sorted(clusters):
            group = sorted(clusters[f])
            holders = [v for v in group if cur.get(v, 0) > 0]
            if not holders:
                continue
            probs = np.array([inst.demands[v] for v in group], dtype=float)
            target = group[int(rng_facility.choice(len(group), p=probs / probs.sum()))]
            # paths[f] is the facility's shortest-path predecessor map, a tree
            # rooted at f, so consolidation follows the forest's own edges.
            _move_demand(cur, holders, target, fl.paths[f], f, facility_flow, used)
        facility_cost = float(delta_k) * sum(
            inst.lengths[e] * f for e, f in facility_flow.items()
        )
        if trace is not None:
            trace.record(k, 4, {v: cur.get(v, 0) for v in inst.demands},
                         cur.get(inst.root, 0) - inst.demands.get(inst.root, 0))
        costs.append(StageCosts(stage=k, steiner_cost=steiner_cost, facility_cost=facility_cost))
    parked = {v: d for v, d in cur.items() if d > 0}
    assert sum(cur.values()) == total_original, "consolidation must conserve demand"
    assert set(parked) <= {inst.root}, f"live demand left outside the root: {parked}"
    return _extract_tree(inst, used), costs


def _extract_tree(inst: Instance, used: set[Edge]) -> RoutedTree:
    if not used:
        return route_demands(inst, set())
    sub_lengths = {e: inst.lengths[e] for e in used}
    adj: dict[str, list[tuple[str, float]]] = {}
    for (u, v), w in sorted(sub_lengths.items()):
        adj.setdefault(u, []).append((v, w))
        adj.setdefault(v, []).append((u, w))
    dist = {inst.root: 0.0}
    pred: dict[str, str] = {}
    done: set[str] = set()
    heap = [(0.0, inst.root)]
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for v, w in sorted(adj.get(u, ())):
            nd = d + w
            if v not in dist or nd < dist[v]:
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))
    keep: set[Edge] = set()
    for t in sorted(inst.demands):
        node = t
        while node != inst.root:
            e = canonical_edge(node, pred[node])
            if e in keep:
                break
            keep.add(e)
            node = pred[node]
    return route_demands(inst, keep)


def oracle_tree(inst: Instance, alpha: AlphaVector, gamma, seed: int) -> RoutedTree:
    """Regularize an arbitrary weight vector, then run the staged construction.

    The returned tree is meant to be evaluated under the ORIGINAL weights;
    the regularization's bounded distortion carries the cost guarantee over.
    """
    regular, _ = regularize(alpha, as_fraction(gamma))
    tree, _ = gmm_tree(inst, regular, gamma, seed)
    return tree
