"""Exact optimal values for the four policy classes on small instances.

Fully adaptive and one-sided adaptive optima come from dynamic programs over
backlog profiles (states packed into integers).  One-sided static and fully
static optima come from exhaustive, vectorized enumeration.  Every solver
refuses instances above its size cap instead of approximating.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Optional, Tuple

import numpy as np

from .errors import SizeRefusalError
from .instances import (UNBOUNDED, Instance, demand_table, is_mnl, mask_of,
                        prob_table)
from .oracles import best_weighted_assortment
from .policies import PolicyAction


@dataclass(frozen=True)
class SolveCaps:
    """Hard size caps for the exact solvers (configurable, safe defaults)."""

    fa_max_agents: int = 8
    oa_max_side: int = 8
    os_max_side: int = 4
    fs_max_edges: int = 20


DEFAULT_CAPS = SolveCaps()


@dataclass
class DpValue:
    value: float
    states_expanded: int
    optimal_first_action: Optional[PolicyAction]


_THETA_TOL = 1e-12


def _mnl_prefix_value(items) -> float:
    """Best sum theta_j*phi(j, prefix) over theta-descending prefixes; items are
    (theta, weight) pairs already sorted by theta descending."""
    num, den, best = 0.0, 1.0, 0.0
    for theta, w in items:
        num += theta * w
        den += w
        val = num / den
        if val > best:
            best = val
    return best


def _budget_masks(count: int, budget) -> list:
    """All assortment bitmasks over ``count`` options with |S| <= budget, ordered
    by cardinality then lexicographically by option ids."""
    kmax = count if budget is UNBOUNDED else min(budget, count)
    masks = [0]
    for k in range(1, kmax + 1):
        for combo in combinations(range(count), k):
            masks.append(mask_of(combo))
    return masks


def _enumeration_oracle(phi: np.ndarray, masks, theta) -> Tuple[float, int]:
    """Max over assortment masks of sum_j phi[mask, j] * theta_j."""
    best_val, best_mask = 0.0, 0
    for mask in masks:
        row = phi[mask]
        val = 0.0
        mm = mask
        while mm:
            low = mm & -mm
            j = low.bit_length() - 1
            val += row[j] * theta[j]
            mm ^= low
        if val > best_val + _THETA_TOL:
            best_val, best_mask = val, mask
    return best_val, best_mask


# ---------------------------------------------------------------------------
# Fully adaptive DP


def opt_fully_adaptive(instance: Instance, caps: SolveCaps = DEFAULT_CAPS,
                       deadline=None) -> DpValue:
    """Exact OPT over fully adaptive policies via the value-to-go recursion on
    (remaining agents, backlog profile) states."""
    n, m = instance.n, instance.m
    total = n + m
    if total > caps.fa_max_agents:
        raise SizeRefusalError(f"fully adaptive DP refuses n+m={total} > {caps.fa_max_agents}")
    if n == 0 or m == 0:
        return DpValue(0.0, 0, None)

    # Agent layout: 0..n-1 customers, n..n+m-1 suppliers.  Each agent owns a
    # slot of (opp+1) bits: opp backlog bits plus a done flag on top.
    opp_count = [m] * n + [n] * m
    offsets, pos = [], 0
    for a in range(total):
        offsets.append(pos)
        pos += opp_count[a] + 1
    done_bit = [offsets[a] + opp_count[a] for a in range(total)]
    slot_mask = [((1 << (opp_count[a] + 1)) - 1) << offsets[a] for a in range(total)]
    opp_global = [[n + l for l in range(m)] if a < n else list(range(n)) for a in range(total)]
    local_id = [a if a < n else a - n for a in range(total)]  # index within own side

    models = [instance.customer_models[i] for i in range(n)] + \
             [instance.supplier_models[j] for j in range(m)]
    budgets = [instance.k_customer[i] for i in range(n)] + \
              [instance.k_supplier[j] for j in range(m)]
    mnl_w = [mod.weights if is_mnl(mod) else None for mod in models]
    phi = [None if mnl_w[a] is not None else prob_table(models[a], opp_count[a]) for a in range(total)]
    masks = [None if mnl_w[a] is not None else _budget_masks(opp_count[a], budgets[a])
             for a in range(total)]

    memo = {}
    counter = [0]

    def agent_value(key: int, a: int) -> float:
        base = (key & ~slot_mask[a]) | (1 << done_bit[a])
        v_out = value(base)
        backlog = (key >> offsets[a]) & ((1 << opp_count[a]) - 1)
        if mnl_w[a] is not None:
            w = mnl_w[a]
            items = []
            for l in range(opp_count[a]):
                if w[l] <= 0.0:
                    continue
                o = opp_global[a][l]
                if backlog >> l & 1:
                    items.append((1.0, w[l]))
                elif key >> done_bit[o] & 1:
                    continue
                else:
                    child = base | (1 << (offsets[o] + local_id[a]))
                    th = value(child) - v_out
                    if th > _THETA_TOL:
                        items.append((th, w[l]))
            if not items:
                return v_out
            items.sort(key=lambda t: -t[0])
            k = budgets[a]
            if k is not UNBOUNDED and k < len(items):
                return v_out + _budgeted_mnl_value(items, k)
            return v_out + _mnl_prefix_value(items)
        theta = [0.0] * opp_count[a]
        for l in range(opp_count[a]):
            o = opp_global[a][l]
            if backlog >> l & 1:
                theta[l] = 1.0
            elif key >> done_bit[o] & 1:
                continue
            else:
                child = base | (1 << (offsets[o] + local_id[a]))
                th = value(child) - v_out
                if th > _THETA_TOL:
                    theta[l] = th
        val, _ = _enumeration_oracle(phi[a], masks[a], theta)
        return v_out + val

    def value(key: int) -> float:
        v = memo.get(key)
        if v is not None:
            return v
        counter[0] += 1
        if deadline is not None and counter[0] % 4096 == 0:
            deadline.check()
        best = 0.0
        for a in range(total):
            if key >> done_bit[a] & 1:
                continue
            cand = agent_value(key, a)
            if cand > best:
                best = cand
        memo[key] = best
        return best

    opt = value(0)
    action = _fa_first_action(instance, opt, memo, offsets, done_bit, slot_mask,
                              opp_count, opp_global, local_id, models, budgets,
                              mnl_w, phi, masks)
    return DpValue(opt, len(memo), action)


def _budgeted_mnl_value(items, budget: int) -> float:
    """Exact budgeted weighted-MNL value on (theta, weight) pairs via the
    candidate-intersection sweep."""
    thetas = [t for t, _ in items]
    ws = [w for _, w in items]
    lams = {0.0}
    lams.update(thetas)
    for a, b in combinations(range(len(items)), 2):
        if abs(ws[a] - ws[b]) > 1e-15:
            lams.add((ws[a] * thetas[a] - ws[b] * thetas[b]) / (ws[a] - ws[b]))
    points = sorted(lams)
    probes = list(points) + [(x + y) / 2 for x, y in zip(points, points[1:])]
    best = 0.0
    for lam in probes:
        order = sorted(range(len(items)), key=lambda idx: -(ws[idx] * (thetas[idx] - lam)))
        num, den = 0.0, 1.0
        for idx in order[:budget]:
            num += thetas[idx] * ws[idx]
            den += ws[idx]
            if num / den > best:
                best = num / den
    return best


def _fa_first_action(instance, opt, memo, offsets, done_bit, slot_mask, opp_count,
                     opp_global, local_id, models, budgets, mnl_w, phi, masks):
    """Recover an optimal (agent, assortment) at the root from the filled memo."""
    n, m = instance.n, instance.m
    total = n + m
    best = None
    for a in range(total):
        base = 1 << done_bit[a]
        v_out = memo.get(base, 0.0)
        theta = [0.0] * opp_count[a]
        for l in range(opp_count[a]):
            o = opp_global[a][l]
            child = base | (1 << (offsets[o] + local_id[a]))
            if child in memo:
                theta[l] = max(memo[child] - v_out, 0.0)
        res = best_weighted_assortment(models[a], theta, budgets[a],
                                       ground=range(opp_count[a]))
        cand = v_out + res.value
        if best is None or cand > best[0] + 1e-12:
            agent = ("C", a) if a < n else ("S", a - n)
            best = (cand, PolicyAction(agent, res.assortment))
    return best[1] if best else None


# ---------------------------------------------------------------------------
# One-sided adaptive DP


def opt_one_sided_adaptive(instance: Instance, side: str,
                           caps: SolveCaps = DEFAULT_CAPS, deadline=None) -> DpValue:
    """Exact OPT over policies that adaptively process ``side`` first; each
    responder then sees its backlog (budget-constrained best subset if capped)."""
    ninit = instance.side_size(side)
    resp_side = "S" if side == "C" else "C"
    nresp = instance.side_size(resp_side)
    if ninit > caps.oa_max_side:
        raise SizeRefusalError(f"one-sided adaptive DP refuses side size {ninit} > {caps.oa_max_side}")
    if ninit == 0 or nresp == 0:
        return DpValue(0.0, 0, None)

    radix = nresp + 2  # digit: 0 unprocessed, 1 outside, 2+j chose responder j
    mult = [radix ** i for i in range(ninit)]
    F = [demand_table(instance.model(resp_side, j), ninit, instance.budget(resp_side, j))
         for j in range(nresp)]
    models = [instance.model(side, i) for i in range(ninit)]
    budgets = [instance.budget(side, i) for i in range(ninit)]
    mnl_w = [mod.weights if is_mnl(mod) else None for mod in models]
    need_enum = any(w is None for w in mnl_w)
    if need_enum and nresp > 16:
        raise SizeRefusalError("assortment enumeration refuses responding side > 16 for non-MNL models")
    phi = [None if mnl_w[i] is not None else prob_table(models[i], nresp) for i in range(ninit)]
    masks = [None if mnl_w[i] is not None else _budget_masks(nresp, budgets[i]) for i in range(ninit)]

    memo = {}
    counter = [0]

    def terminal(key: int) -> float:
        val = 0.0
        rmask = [0] * nresp
        for i in range(ninit):
            d = (key // mult[i]) % radix
            if d >= 2:
                rmask[d - 2] |= 1 << i
        for j in range(nresp):
            val += F[j][rmask[j]]
        return val

    def value(key: int, processed: int) -> float:
        if processed == ninit:
            return terminal(key)
        v = memo.get(key)
        if v is not None:
            return v
        counter[0] += 1
        if deadline is not None and counter[0] % 4096 == 0:
            deadline.check()
        best = 0.0
        for i in range(ninit):
            if (key // mult[i]) % radix != 0:
                continue
            base = key + mult[i]
            v_out = value(base, processed + 1)
            if mnl_w[i] is not None:
                w = mnl_w[i]
                items = []
                for j in range(nresp):
                    if w[j] <= 0.0:
                        continue
                    th = value(key + (2 + j) * mult[i], processed + 1) - v_out
                    if th > _THETA_TOL:
                        items.append((th, w[j]))
                if items:
                    items.sort(key=lambda t: -t[0])
                    k = budgets[i]
                    if k is not UNBOUNDED and k < len(items):
                        cand = v_out + _budgeted_mnl_value(items, k)
                    else:
                        cand = v_out + _mnl_prefix_value(items)
                else:
                    cand = v_out
            else:
                theta = [0.0] * nresp
                for j in range(nresp):
                    th = value(key + (2 + j) * mult[i], processed + 1) - v_out
                    if th > _THETA_TOL:
                        theta[j] = th
                val, _ = _enumeration_oracle(phi[i], masks[i], theta)
                cand = v_out + val
            if cand > best:
                best = cand
        memo[key] = best
        return best

    opt = value(0, 0)
    # First action: best initiating agent and assortment at the root.
    best_action = None
    best_val = -1.0
    for i in range(ninit):
        v_out = value(mult[i], 1)
        theta = [max(value((2 + j) * mult[i], 1) - v_out, 0.0) for j in range(nresp)]
        res = best_weighted_assortment(models[i], theta, budgets[i], ground=range(nresp))
        cand = v_out + res.value
        if cand > best_val + 1e-12:
            best_val = cand
            best_action = PolicyAction((side, i), res.assortment)
    return DpValue(opt, len(memo), best_action)


# ---------------------------------------------------------------------------
# One-sided static enumeration


def opt_one_sided_static(instance: Instance, side: str,
                         caps: SolveCaps = DEFAULT_CAPS) -> float:
    """Exact OPT over one-sided static policies initiating on ``side``: brute
    force over all assortment families, with exact backlog expectations."""
    ninit = instance.side_size(side)
    resp_side = "S" if side == "C" else "C"
    nresp = instance.side_size(resp_side)
    if max(instance.n, instance.m) > caps.os_max_side:
        raise SizeRefusalError(
            f"one-sided static enumeration refuses sides ({instance.n},{instance.m}) > {caps.os_max_side}")
    if ninit == 0 or nresp == 0:
        return 0.0

    mask_lists = [_budget_masks(nresp, instance.budget(side, i)) for i in range(ninit)]
    P = [prob_table(instance.model(side, i), nresp) for i in range(ninit)]
    F = [demand_table(instance.model(resp_side, j), ninit, instance.budget(resp_side, j))
         for j in range(nresp)]

    counts = [len(ml) for ml in mask_lists]
    total = int(np.prod(counts))
    idx = np.arange(total)
    sel = []
    stride = 1
    for i in range(ninit):
        sel.append((idx // stride) % counts[i])
        stride *= counts[i]

    value = np.zeros(total)
    for j in range(nresp):
        # p[i] = probability initiating agent i picks j under its family choice
        p = [P[i][np.asarray(mask_lists[i])[sel[i]], j] for i in range(ninit)]
        dist = np.ones((total, 1))
        for i in range(ninit):
            pi = p[i][:, None]
            dist = np.hstack([dist * (1.0 - pi), dist * pi])
        value += dist @ F[j]
    return float(value.max())


# ---------------------------------------------------------------------------
# Fully static enumeration


def opt_fully_static(instance: Instance, caps: SolveCaps = DEFAULT_CAPS):
    """Exact OPT over mutual-display edge sets; returns (value, edge list)."""
    n, m = instance.n, instance.m
    nm = n * m
    if nm > caps.fs_max_edges:
        raise SizeRefusalError(f"fully static brute force refuses n*m={nm} > {caps.fs_max_edges}")
    if nm == 0:
        return 0.0, []

    patterns = 1 << nm
    bits = ((np.arange(patterns)[:, None] >> np.arange(nm)[None, :]) & 1).astype(float)
    grid = bits.reshape(patterns, n, m)

    feasible = np.ones(patterns, dtype=bool)
    for i in range(n):
        k = instance.k_customer[i]
        if k is not UNBOUNDED:
            feasible &= grid[:, i, :].sum(axis=1) <= k
    for j in range(m):
        k = instance.k_supplier[j]
        if k is not UNBOUNDED:
            feasible &= grid[:, :, j].sum(axis=1) <= k

    mw = instance.mnl_weights()
    if mw is not None:
        v, w = mw
        V = 1.0 + (grid * v[None, :, :]).sum(axis=2)          # (P, n)
        W = 1.0 + (grid * w.T[None, :, :]).sum(axis=1)        # (P, m)
        num = grid * (v * w.T)[None, :, :]
        vals = (num / (V[:, :, None] * W[:, None, :])).sum(axis=(1, 2))
    else:
        phi_c = [prob_table(instance.customer_models[i], m) for i in range(n)]
        phi_s = [prob_table(instance.supplier_models[j], n) for j in range(m)]
        vals = np.zeros(patterns)
        for x in range(patterns):
            if not feasible[x]:
                continue
            smask = [0] * n
            cmask = [0] * m
            for e in range(nm):
                if x >> e & 1:
                    i, j = divmod(e, m)
                    smask[i] |= 1 << j
                    cmask[j] |= 1 << i
            val = 0.0
            for e in range(nm):
                if x >> e & 1:
                    i, j = divmod(e, m)
                    val += phi_c[i][smask[i], j] * phi_s[j][cmask[j], i]
            vals[x] = val

    vals = np.where(feasible, vals, -np.inf)
    best = int(vals.argmax())
    edges = [(e // m, e % m) for e in range(nm) if best >> e & 1]
    return float(vals[best]), edges
