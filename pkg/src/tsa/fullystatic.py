"""Constant-factor approximation for the fully static MNL problem.

Edges are partitioned by weight level at a threshold alpha: high supplier
weight, high customer weight, and low-low.  The low-low block is handled by an
LP relaxation plus randomized rounding (independent, or dependent with degree
caps under budgets); the high blocks by a single-assignment subproblem with a
concave per-agent objective.  The returned solution is the best realized
candidate, re-valued exactly.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from .errors import SizeRefusalError, UnsupportedOracleError
from .instances import UNBOUNDED, Instance
from .lp import LpProblem, solve_lp
from .policies import exact_value_edges

# Threshold minimizing the combined regime loss, ~0.7574.
DEFAULT_ALPHA = 0.7574


def _require_mnl(instance: Instance):
    mw = instance.mnl_weights()
    if mw is None:
        raise UnsupportedOracleError("fully static approximation requires MNL models on both sides")
    return mw


@dataclass
class FsSolution:
    edges: frozenset
    value: float
    regime: str
    branch_values: dict = field(default_factory=dict)


def partition_edges(instance: Instance, alpha: float = DEFAULT_ALPHA):
    """(E1, E2, E3): w_ji >= alpha; v_ij >= alpha and w_ji < alpha; the rest."""
    v, w = _require_mnl(instance)
    e1, e2, e3 = [], [], []
    for i in range(instance.n):
        for j in range(instance.m):
            if w[j, i] >= alpha:
                e1.append((i, j))
            elif v[i, j] >= alpha:
                e2.append((i, j))
            else:
                e3.append((i, j))
    return e1, e2, e3


# ---------------------------------------------------------------------------
# Low-low LP and rounding


def lowlow_lp(instance: Instance, edges: Optional[Iterable[Tuple[int, int]]] = None,
              constrained: bool = False):
    """LP relaxation max sum v_ij w_ji y_ij with per-pair load constraints (and
    per-agent budget rows when constrained); returns (dense y, z_LP)."""
    v, w = _require_mnl(instance)
    n, m = instance.n, instance.m
    edge_list = sorted(edges) if edges is not None else [(i, j) for i in range(n) for j in range(m)]
    idx = {e: k for k, e in enumerate(edge_list)}
    ne = len(edge_list)
    if ne == 0:
        return np.zeros((n, m)), 0.0

    c = np.array([v[i, j] * w[j, i] for (i, j) in edge_list])
    rows, rhs = [], []
    for (i, j) in edge_list:
        row = np.zeros(ne)
        for (i2, l) in edge_list:
            if i2 == i:
                row[idx[(i2, l)]] += v[i, l]
        row[idx[(i, j)]] += 1.0
        rows.append(row)
        rhs.append(1.0)
        row = np.zeros(ne)
        for (k, j2) in edge_list:
            if j2 == j:
                row[idx[(k, j2)]] += w[j, k]
        row[idx[(i, j)]] += 1.0
        rows.append(row)
        rhs.append(1.0)
    if constrained:
        for i in range(n):
            k = instance.k_customer[i]
            if k is not UNBOUNDED:
                row = np.zeros(ne)
                for (i2, l) in edge_list:
                    if i2 == i:
                        row[idx[(i2, l)]] = 1.0
                rows.append(row)
                rhs.append(float(k))
        for j in range(m):
            k = instance.k_supplier[j]
            if k is not UNBOUNDED:
                row = np.zeros(ne)
                for (k2, j2) in edge_list:
                    if j2 == j:
                        row[idx[(k2, j2)]] = 1.0
                rows.append(row)
                rhs.append(float(k))

    sol = solve_lp(LpProblem(c, np.array(rows), np.array(rhs)))
    if sol.status != "optimal":
        raise RuntimeError(f"low-low LP came back {sol.status}")
    y = np.zeros((n, m))
    for (i, j), k in idx.items():
        y[i, j] = min(max(sol.x[k], 0.0), 1.0)
    return y, float(sol.value)


def independent_rounding(y: np.ndarray, rng) -> frozenset:
    """x_ij ~ Bernoulli(y_ij), independently."""
    n, m = y.shape
    draws = rng.random((n, m))
    return frozenset((i, j) for i in range(n) for j in range(m) if draws[i, j] < y[i, j])


def mnl_static_values(instance: Instance, xs: np.ndarray) -> np.ndarray:
    """Exact static objective for a batch of 0/1 edge matrices, shape (T, n, m)."""
    v, w = _require_mnl(instance)
    xs = np.asarray(xs, dtype=float)
    V = 1.0 + (xs * v[None, :, :]).sum(axis=2)
    W = 1.0 + (xs * w.T[None, :, :]).sum(axis=1)
    num = xs * (v * w.T)[None, :, :]
    return (num / (V[:, :, None] * W[:, None, :])).sum(axis=(1, 2))


def dependent_rounding(y: np.ndarray, rng, row_caps: Optional[Sequence] = None,
                       col_caps: Optional[Sequence] = None) -> frozenset:
    """Bipartite dependent rounding: marginals preserved exactly, per-vertex
    degrees never exceed the ceiling of their fractional degree (hence caps
    with feasible fractional input are hard), negatively correlated within
    each row and column."""
    y = np.array(y, dtype=float)
    n, m = y.shape
    eps = 1e-12
    if row_caps is not None:
        for i in range(n):
            if row_caps[i] is not UNBOUNDED and y[i].sum() > row_caps[i] + 1e-9:
                raise ValueError(f"fractional row {i} exceeds its cap")
    if col_caps is not None:
        for j in range(m):
            if col_caps[j] is not UNBOUNDED and y[:, j].sum() > col_caps[j] + 1e-9:
                raise ValueError(f"fractional column {j} exceeds its cap")

    def fractional_edges():
        return [(i, j) for i in range(n) for j in range(m) if eps < y[i, j] < 1.0 - eps]

    while True:
        frac = fractional_edges()
        if not frac:
            break
        adj = {}
        for (i, j) in frac:
            adj.setdefault(("r", i), []).append(("c", j))
            adj.setdefault(("c", j), []).append(("r", i))
        start = None
        for vtx, nbrs in sorted(adj.items()):
            if len(nbrs) == 1:
                start = vtx
                break
        if start is None:
            start = sorted(adj)[0]
        # Walk without reusing edges until stuck (maximal path) or a vertex repeats (cycle).
        path_vertices = [start]
        path_edges = []
        used = set()
        seen_at = {start: 0}
        cycle = None
        cur = start
        while True:
            nxt = None
            for cand in adj.get(cur, []):
                e = (cur, cand) if cur[0] == "r" else (cand, cur)
                key = (e[0][1], e[1][1])
                if key not in used:
                    nxt = cand
                    used.add(key)
                    break
            if nxt is None:
                break
            path_edges.append((cur, nxt))
            if nxt in seen_at:
                k = seen_at[nxt]
                cycle = path_edges[k:]
                break
            path_vertices.append(nxt)
            seen_at[nxt] = len(path_vertices) - 1
            cur = nxt
        chain = cycle if cycle is not None else path_edges
        eidx = []
        for (a, b) in chain:
            (i, j) = (a[1], b[1]) if a[0] == "r" else (b[1], a[1])
            eidx.append((i, j))
        A = eidx[0::2]
        B = eidx[1::2]
        up = min(min(1.0 - y[i, j] for (i, j) in A), min((y[i, j] for (i, j) in B), default=np.inf))
        down = min(min(y[i, j] for (i, j) in A), min((1.0 - y[i, j] for (i, j) in B), default=np.inf))
        if up <= eps and down <= eps:
            break
        if rng.random() < down / (up + down):
            delta_a, delta_b = up, -up
        else:
            delta_a, delta_b = -down, down
        for (i, j) in A:
            y[i, j] += delta_a
        for (i, j) in B:
            y[i, j] += delta_b
        y = np.clip(y, 0.0, 1.0)
        y[np.abs(y) < eps] = 0.0
        y[np.abs(y - 1.0) < eps] = 1.0

    return frozenset((i, j) for i in range(n) for j in range(m) if y[i, j] > 0.5)


# ---------------------------------------------------------------------------
# High-value subproblem


def highvalue_subproblem(instance: Instance, edges: Iterable[Tuple[int, int]],
                         side: str = "C", constrained: bool = False,
                         mode: str = "greedy"):
    """Maximize sum over ``side`` agents of F(total attached weight), F(z) =
    z/(1+z), where each opposite agent is assigned to at most one ``side``
    agent (and side budgets bind when constrained).  Returns (edges, value).

    side="C": objective over customers with weights v_ij (high-w regime);
    side="S": objective over suppliers with weights w_ji (high-v regime).
    """
    v, w = _require_mnl(instance)
    edge_list = sorted(set(edges))
    if not edge_list:
        return frozenset(), 0.0

    if side == "C":
        agent_of = {e: e[0] for e in edge_list}
        resource_of = {e: e[1] for e in edge_list}
        weight = {e: v[e[0], e[1]] for e in edge_list}
        caps = instance.k_customer
    else:
        agent_of = {e: e[1] for e in edge_list}
        resource_of = {e: e[0] for e in edge_list}
        weight = {e: w[e[1], e[0]] for e in edge_list}
        caps = instance.k_supplier

    def objective(chosen) -> float:
        load = {}
        for e in chosen:
            load[agent_of[e]] = load.get(agent_of[e], 0.0) + weight[e]
        return sum(z / (1.0 + z) for z in load.values())

    if mode == "exact":
        if len(edge_list) > 20:
            raise SizeRefusalError("exact subproblem mode refuses more than 20 edges")
        resources = sorted({resource_of[e] for e in edge_list})
        by_resource = {r: [e for e in edge_list if resource_of[e] == r] for r in resources}
        best = (0.0, frozenset())

        def recurse(pos: int, chosen: tuple, counts: dict):
            nonlocal best
            if pos == len(resources):
                val = objective(chosen)
                if val > best[0] + 1e-12:
                    best = (val, frozenset(chosen))
                return
            recurse(pos + 1, chosen, counts)
            for e in by_resource[resources[pos]]:
                a = agent_of[e]
                cap = caps[a] if constrained else UNBOUNDED
                if cap is not UNBOUNDED and counts.get(a, 0) >= cap:
                    continue
                counts[a] = counts.get(a, 0) + 1
                recurse(pos + 1, chosen + (e,), counts)
                counts[a] -= 1

        recurse(0, (), {})
        return best[1], best[0]

    # Lazy greedy over edges; matroid feasibility is checked on pop.
    load = {}
    counts = {}
    used_resources = set()
    chosen = set()
    heap = []
    for e in edge_list:
        gain = weight[e] / (1.0 + weight[e])
        heapq.heappush(heap, (-gain, e, 0))
    version = 0
    while heap:
        neg_gain, e, stamp = heapq.heappop(heap)
        if resource_of[e] in used_resources:
            continue
        a = agent_of[e]
        cap = caps[a] if constrained else UNBOUNDED
        if cap is not UNBOUNDED and counts.get(a, 0) >= cap:
            continue
        z = load.get(a, 0.0)
        gain = (z + weight[e]) / (1.0 + z + weight[e]) - z / (1.0 + z)
        if stamp < version and -neg_gain > gain + 1e-15:
            heapq.heappush(heap, (-gain, e, version))
            continue
        if gain <= 1e-15:
            continue
        chosen.add(e)
        used_resources.add(resource_of[e])
        counts[a] = counts.get(a, 0) + 1
        load[a] = z + weight[e]
        version += 1
    return frozenset(chosen), objective(chosen)


# ---------------------------------------------------------------------------
# Combined algorithm


def approx_fully_static(instance: Instance, alpha: float = DEFAULT_ALPHA,
                        trials: int = 16, rng=None,
                        subproblem_mode: str = "greedy") -> FsSolution:
    """Partition-based approximation: solve each regime, keep the candidate with
    the highest realized exact value (edges outside the chosen regime are off)."""
    rng = rng if rng is not None else np.random.default_rng(0)
    e1, e2, e3 = partition_edges(instance, alpha)
    constrained = instance.constrained
    candidates = []

    if e1:
        edges, _ = highvalue_subproblem(instance, e1, side="C", constrained=constrained,
                                        mode=subproblem_mode)
        candidates.append(("high-w", edges))
    if e2:
        edges, _ = highvalue_subproblem(instance, e2, side="S", constrained=constrained,
                                        mode=subproblem_mode)
        candidates.append(("high-v", edges))
    if e3:
        y, _ = lowlow_lp(instance, e3, constrained=constrained)
        best_edges, best_val = frozenset(), -1.0
        for _ in range(max(trials, 1)):
            if constrained:
                x = dependent_rounding(y, rng, instance.k_customer, instance.k_supplier)
            else:
                x = independent_rounding(y, rng)
            val = exact_value_edges(instance, x)
            if val > best_val:
                best_edges, best_val = x, val
        candidates.append(("low-low", best_edges))

    if not candidates:
        return FsSolution(frozenset(), 0.0, "empty")

    branch_values = {}
    best = None
    for regime, edges in candidates:
        val = exact_value_edges(instance, edges)
        branch_values[regime] = val
        if best is None or val > best.value:
            best = FsSolution(frozenset(edges), val, regime)
    best.branch_values = branch_values
    return best


# ---------------------------------------------------------------------------
# Bilinear alternating heuristic


def bilinear_alternation(instance: Instance, starts: int = 8, rng=None,
                         max_rounds: int = 200):
    """Alternating LP ascent on the disjoint bilinear reformulation; extracts an
    integral edge set from the vertex structure.  Returns (FsSolution, z_B)
    where z_B is the best bilinear objective reached (a lower bound on the
    fully static optimum)."""
    v, w = _require_mnl(instance)
    n, m = instance.n, instance.m
    rng = rng if rng is not None else np.random.default_rng(0)
    if n == 0 or m == 0:
        return FsSolution(frozenset(), 0.0, "bilinear"), 0.0

    def y_step(z):
        y = np.zeros((n, m))
        for i in range(n):
            c = z[i]
            A = np.zeros((m, m))
            for j in range(m):
                A[j] = v[i]
                A[j, j] += 1.0
            sol = solve_lp(LpProblem(c, A, v[i].copy()))
            y[i] = np.clip(sol.x, 0.0, None)
        return y

    def z_step(y):
        z = np.zeros((n, m))
        for j in range(m):
            c = y[:, j]
            A = np.zeros((n, n))
            for k in range(n):
                A[k] = w[j]
                A[k, k] += 1.0
            sol = solve_lp(LpProblem(c, A, w[j].copy()))
            z[:, j] = np.clip(sol.x, 0.0, None)
        return z

    best_sol = FsSolution(frozenset(), -1.0, "bilinear")
    best_zb = 0.0
    for s in range(max(starts, 1)):
        x0 = rng.random((n, m)) < 0.5
        denom = 1.0 + (x0 * w.T).sum(axis=0)
        z = np.where(x0, w.T, 0.0) / denom[None, :]
        obj = -1.0
        history = []
        for _ in range(max_rounds):
            y = y_step(z)
            z = z_step(y)
            new_obj = float((y * z).sum())
            history.append(new_obj)
            if new_obj <= obj + 1e-8:
                obj = new_obj
                break
            obj = new_obj
        edges = frozenset((i, j) for i in range(n) for j in range(m)
                          if y[i, j] > 1e-9 and z[i, j] > 1e-9)
        val = exact_value_edges(instance, edges)
        best_zb = max(best_zb, obj)
        if val > best_sol.value:
            best_sol = FsSolution(edges, val, "bilinear",
                                  branch_values={"objective_history": history})
    return best_sol, best_zb
