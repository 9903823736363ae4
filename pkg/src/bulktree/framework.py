"""End-to-end solver: ellipsoid feasibility over the dual, constraint
harvesting, small primal solve, and the search for the tightest refutable
objective level.

The dual polytope at level beta asks for level weights alpha >= 0 with
sum_i alpha_i * tilde_i <= 1 (tilde_i: the rent-or-buy upper bound on the
level-i optimum) such that every spanning tree T has
sum_i alpha_i * A_i(T) >= beta.  The ellipsoid runs in scaled coordinates
y_i = alpha_i * tilde_i, so the polytope provably sits inside the unit box
regardless of instance scale, and the unit box is the initial ellipsoid.

Each query point is refuted either by the budget constraint, a box
constraint, or a tree found by the randomized oracle whose cost under alpha
is below beta.  Harvested trees accumulate into a constraint set; by LP
duality, the moment the small primal over the harvested trees has optimum
theta* < beta, the set proves the dual polytope empty, so the run stops with
a certificate (the volume and iteration budgets remain as fallbacks, but a
run that exhausts them is reported unresolved rather than infeasible).  The
driver doubles beta from its initial guess until a run certifies
infeasibility, then binary-searches below it; the distribution extracted
from the final certificate is a vertex LP solution, hence supported on at
most 1 + log2(D) trees.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import simplex
from .aggregation import RoutedTree, TreeDistribution, atomic_cost
from .gmm import oracle_tree
from .instance import Instance, demand_profile
from .pipes import AlphaVector
from .subroutines import rob_lower_bounds, _mix_seed

__all__ = [
    "SolveConfig",
    "DualPoint",
    "TreeConstraint",
    "ConstraintSet",
    "OracleResult",
    "EllipsoidResult",
    "separation_oracle",
    "ellipsoid_feasibility",
    "solve_small_primal",
    "solve_oblivious",
]


@dataclass(frozen=True)
class SolveConfig:
    seed: int
    gamma: float = 0.25
    beta_init: float = 2.0
    beta_steps: int = 6
    bit_budget: int = 64
    node_cap: int = 8
    rmax: int | None = None

    def __post_init__(self):
        if not (0 < self.gamma < 0.5):
            raise ValueError("gamma must lie in (0, 1/2)")
        if self.beta_init <= 0 or self.beta_steps < 0 or self.bit_budget < 1:
            raise ValueError("invalid search parameters")


def default_rmax(inst: Instance) -> int:
    return 16 * math.ceil(math.log2(len(inst.nodes) + 2))


@dataclass(frozen=True)
class DualPoint:
    """A dual query point in scaled coordinates y_i = alpha_i * tilde_i (unit box)."""

    alpha: tuple[float, ...]
    beta: float


@dataclass(frozen=True)
class TreeConstraint:
    tree: RoutedTree
    level_costs: tuple[float, ...]


@dataclass
class ConstraintSet:
    tilde: tuple[float, ...]
    tree_constraints: list[TreeConstraint]
    beta: float

    def add(self, tc: TreeConstraint) -> bool:
        key = tc.tree.sorted_edges()
        if any(t.tree.sorted_edges() == key for t in self.tree_constraints):
            return False
        self.tree_constraints.append(tc)
        return True


@dataclass(frozen=True)
class OracleResult:
    kind: str  # "rob_cut" | "tree_cut" | "feasible" | "feasible_at_zero"
    tree: RoutedTree | None = None
    level_costs: tuple[float, ...] | None = None
    cost: float | None = None
    attempts: int = 0
    threshold_met: bool = False


def separation_oracle(
    point: DualPoint,
    tilde,
    c_target: float,
    inst: Instance,
    gamma,
    seed: int,
    rmax: int | None = None,
    break_on_violation: bool = True,
) -> OracleResult:
    """Refute the dual point or declare it feasible.

    Checks the budget constraint first; otherwise repeatedly asks the
    randomized construction for a tree whose cost under alpha is below
    2 * c_target * sum(alpha * tilde), capped at rmax attempts, and returns
    the best tree found as a violated constraint when its cost is below
    beta.  With break_on_violation, the retry loop also stops as soon as
    a tree already violates beta (the cut is valid regardless of the
    threshold).
    """
    scaled = np.asarray(point.alpha, dtype=float)
    budget = float(scaled.sum())
    if budget > 1.0 + 1e-12:
        return OracleResult(kind="rob_cut")
    if budget <= 1e-15:
        return OracleResult(kind="feasible_at_zero")
    levels = len(tilde)
    profile = demand_profile(inst)
    alpha_raw = {
        i: Fraction(float(scaled[i])) / Fraction(float(tilde[i]))
        for i in range(levels)
        if scaled[i] > 0
    }
    vec = AlphaVector(alpha=alpha_raw, D=profile.D)
    threshold = 2.0 * c_target * budget
    cap = rmax if rmax is not None else default_rmax(inst)
    best: tuple[float, RoutedTree, tuple[float, ...]] | None = None
    attempts = 0
    threshold_met = False
    for attempt in range(cap):
        attempts += 1
        tree = oracle_tree(inst, vec, gamma, _mix_seed(seed, attempt))
        costs = tuple(atomic_cost(tree, i, inst.lengths) for i in range(levels))
        value = float(sum(float(a) * costs[i] for i, a in alpha_raw.items()))
        if best is None or value < best[0]:
            best = (value, tree, costs)
        if value < threshold:
            threshold_met = True
            break
        if break_on_violation and value < point.beta:
            break
    value, tree, costs = best
    if value < point.beta:
        return OracleResult(
            kind="tree_cut",
            tree=tree,
            level_costs=costs,
            cost=value,
            attempts=attempts,
            threshold_met=threshold_met,
        )
    return OracleResult(kind="feasible", cost=value, attempts=attempts, threshold_met=threshold_met)


@dataclass
class EllipsoidResult:
    status: str  # "infeasible" | "feasible" | "unresolved"
    beta: float
    constraint_set: ConstraintSet
    theta: float | None = None
    point: tuple[float, ...] | None = None
    iterations: int = 0
    oracle_calls: int = 0
    distribution: TreeDistribution | None = None


def ellipsoid_feasibility(
    inst: Instance,
    beta: float,
    c: float | None,
    gamma,
    seed: int,
    tilde=None,
    bit_budget: int = 64,
    rmax: int | None = None,
) -> EllipsoidResult:
    """Central-cut ellipsoid over the scaled unit box with the randomized oracle.

    Infeasibility is declared only with a duality certificate: the small
    primal over the harvested trees must reach theta* < beta.  Runs that
    exhaust the volume or iteration budget without a certificate or a
    feasible point come back "unresolved".
    """
    if beta < 0:
        raise ValueError("beta must be >= 0")
    if tilde is None:
        tilde = tuple(v for _, v, _ in rob_lower_bounds(inst, _mix_seed(seed, 0xAB)))
    tilde = tuple(float(t) for t in tilde)
    if any(t <= 0 for t in tilde):
        raise ValueError("level bound of zero; instance has a zero-cost level")
    m = len(tilde)
    c_target = beta / 2.0 if c is None else c
    cs = ConstraintSet(tilde=tilde, tree_constraints=[], beta=beta)
    center = np.full(m, 0.5)
    P = np.eye(m) * (m / 4.0)
    max_iter = min(10 * m * m * bit_budget, int(2 * (m + 1) * m * m * bit_budget * math.log(2)) + 1)
    oracle_calls = 0
    for iteration in range(max_iter):
        cut = None  # gradient of a violated "<=" constraint at the center
        for i in range(m):  # box constraints are structural, never harvested
            if center[i] < 0:
                g = np.zeros(m)
                g[i] = -1.0
                cut = g
                break
            if center[i] > 1:
                g = np.zeros(m)
                g[i] = 1.0
                cut = g
                break
        if cut is None:
            point = DualPoint(alpha=tuple(float(x) for x in center), beta=beta)
            res = separation_oracle(
                point, tilde, c_target, inst, gamma, _mix_seed(seed, 7919 + iteration), rmax
            )
            oracle_calls += 1
            if res.kind == "rob_cut":
                cut = np.ones(m)
            elif res.kind == "tree_cut":
                grad = np.array([res.level_costs[i] / tilde[i] for i in range(m)])
                if not grad.any():
                    # Degenerate zero-cost tree: no weight vector can reach
                    # beta > 0 against it, so the polytope itself is empty.
                    cs.add(TreeConstraint(tree=res.tree, level_costs=res.level_costs))
                    dist = solve_small_primal(cs)
                    return EllipsoidResult(
                        status="infeasible", beta=beta, constraint_set=cs,
                        theta=dist.theta, iterations=iteration + 1,
                        oracle_calls=oracle_calls, distribution=dist,
                    )
                if cs.add(TreeConstraint(tree=res.tree, level_costs=res.level_costs)):
                    dist = solve_small_primal(cs)
                    if dist.theta < beta - 1e-9:
                        return EllipsoidResult(
                            status="infeasible", beta=beta, constraint_set=cs,
                            theta=dist.theta, iterations=iteration + 1,
                            oracle_calls=oracle_calls, distribution=dist,
                        )
                cut = -grad
            else:
                return EllipsoidResult(
                    status="feasible", beta=beta, constraint_set=cs,
                    point=tuple(float(x) for x in center),
                    iterations=iteration + 1, oracle_calls=oracle_calls,
                )
        norm = float(np.linalg.norm(cut))
        cut = cut / norm
        Pg = P @ cut
        quad = float(cut @ Pg)
        if quad <= 1e-300:
            break  # numerically collapsed
        if m == 1:
            r = math.sqrt(float(P[0, 0]))
            step = math.copysign(r / 2.0, float(cut[0]))
            center = center - np.array([step])
            P = np.array([[(r / 2.0) ** 2]])
        else:
            b = Pg / math.sqrt(quad)
            center = center - b / (m + 1)
            P = (m * m / (m * m - 1.0)) * (P - (2.0 / (m + 1)) * np.outer(b, b))
            P = (P + P.T) / 2.0
    return EllipsoidResult(
        status="unresolved", beta=beta, constraint_set=cs,
        iterations=max_iter, oracle_calls=oracle_calls,
    )


def solve_small_primal(cs: ConstraintSet) -> TreeDistribution:
    """Vertex optimum of the restricted distribution LP over harvested trees.

    Returns a distribution supported on at most 1 + log2(D) trees whose
    worst level ratio against the tilde bounds equals theta*.
    """
    if not cs.tree_constraints:
        raise ValueError("constraint set has no tree constraints")
    trees = cs.tree_constraints
    levels = len(cs.tilde)
    n = len(trees)
    A = np.zeros((1 + levels, 1 + n))
    b = np.zeros(1 + levels)
    A[0, 1:] = 1.0
    b[0] = 1.0
    for i in range(levels):
        A[1 + i, 0] = cs.tilde[i]
        for j, tc in enumerate(trees):
            A[1 + i, 1 + j] = -tc.level_costs[i]
    c = np.zeros(1 + n)
    c[0] = 1.0
    z, theta = simplex.solve_min_ge(c, A, b)
    weights = [(float(z[1 + j]), j) for j in range(n) if z[1 + j] > 1e-9]
    # Fold the sum-above-one slack into the largest weights: shrinking weights
    # only lowers every level cost, so theta* remains valid.
    weights.sort(reverse=True)
    excess = sum(w for w, _ in weights) - 1.0
    folded = []
    for w, j in weights:
        if excess > 0:
            take = min(excess, w - 1e-12)
            w -= take
            excess -= take
        folded.append((w, j))
    support = tuple((trees[j].tree, w) for w, j in folded if w > 1e-12)
    return TreeDistribution(support=support, theta=float(theta))


@dataclass
class SolveReport:
    beta_final: float
    theta: float
    tilde: tuple[float, ...]
    support_size: int
    levels: list
    runs: list
    exact: dict | None = None


def solve_oblivious(inst: Instance, config: SolveConfig) -> tuple[TreeDistribution, SolveReport]:
    """Compute the level bounds, search for the smallest refutable beta, and
    extract the tree distribution from the final infeasibility certificate."""
    profile = demand_profile(inst)
    bounds = rob_lower_bounds(inst, _mix_seed(config.seed, 0xAB))
    tilde = tuple(v for _, v, _ in bounds)
    if any(t <= 0 for t in tilde):
        raise ValueError("level bound of zero; cannot form ratios on this instance")
    runs = []
    run_idx = 0

    def run(beta: float) -> EllipsoidResult:
        nonlocal run_idx
        res = ellipsoid_feasibility(
            inst, beta, None, config.gamma,
            _mix_seed(config.seed, 100 + run_idx), tilde=tilde,
            bit_budget=config.bit_budget, rmax=config.rmax,
        )
        runs.append({
            "beta": beta, "status": res.status, "iterations": res.iterations,
            "oracle_calls": res.oracle_calls, "theta": res.theta,
            "harvested": len(res.constraint_set.tree_constraints),
        })
        run_idx += 1
        return res

    beta = float(config.beta_init)
    lo = 0.0
    best: EllipsoidResult | None = None
    for _ in range(60):
        res = run(beta)
        if res.status == "infeasible":
            best = res
            break
        lo = beta
        beta *= 2.0
    if best is None:
        raise RuntimeError("no refutable beta found while doubling; oracle never certified")
    hi = beta
    for _ in range(config.beta_steps):
        mid = (lo + hi) / 2.0
        res = run(mid)
        if res.status == "infeasible":
            hi, best = mid, res
        else:
            lo = mid
    dist = solve_small_primal(best.constraint_set)
    assert len(dist.support) <= 1 + int(math.log2(profile.D)), "support bound violated"
    level_rows = []
    for i in range(profile.levels):
        expected = sum(w * atomic_cost(t, i, inst.lengths) for t, w in dist.support)
        level_rows.append(
            {"i": i, "expected_cost": expected, "lower_bound": tilde[i], "ratio": expected / tilde[i]}
        )
    report = SolveReport(
        beta_final=hi,
        theta=dist.theta,
        tilde=tilde,
        support_size=len(dist.support),
        levels=level_rows,
        runs=runs,
    )
    if len(inst.nodes) <= config.node_cap:
        from .exact import exact_optima

        opt = exact_optima(inst, config.node_cap)
        report.exact = {
            "per_level_optimum": [opt.value(i) for i in range(profile.levels)],
            "ratios_vs_exact": [
                level_rows[i]["expected_cost"] / opt.value(i) if opt.value(i) > 0 else None
                for i in range(profile.levels)
            ],
            "tilde_over_exact": [
                tilde[i] / opt.value(i) if opt.value(i) > 0 else None
                for i in range(profile.levels)
            ],
        }
    return dist, report
