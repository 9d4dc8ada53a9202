"""Single-agent weighted assortment oracles and constrained demand functions.

The weighted problem is max over S (|S| <= budget) of sum_{j in S} theta_j *
phi(j, S).  MNL admits exact fast paths: theta-ordered prefixes when
unconstrained, and an O(n^2) candidate-value sweep under a cardinality budget.
Every other model is solved by exhaustive enumeration up to universe size 20;
beyond that the oracle refuses rather than approximate silently.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Iterable, Optional, Sequence

from .errors import UnsupportedOracleError
from .instances import UNBOUNDED, ChoiceSpec, is_mnl

ENUMERATION_LIMIT = 20
_TOL = 1e-12


@dataclass(frozen=True)
class OracleResult:
    assortment: frozenset
    value: float


def _weighted_value(model: ChoiceSpec, theta: Sequence[float], s: frozenset) -> float:
    return sum(theta[j] * model.prob(j, s) for j in s)


def _enumerate_best(model: ChoiceSpec, theta, candidates, budget) -> OracleResult:
    """Exhaustive search; ties broken by smallest cardinality then lexicographic."""
    best_set, best_val = frozenset(), 0.0
    kmax = len(candidates) if budget is UNBOUNDED else min(budget, len(candidates))
    for k in range(1, kmax + 1):
        for combo in combinations(candidates, k):
            s = frozenset(combo)
            val = _weighted_value(model, theta, s)
            if val > best_val + _TOL:
                best_set, best_val = s, val
    return OracleResult(best_set, best_val)


def _mnl_prefix_best(weights, theta, order, kmax) -> OracleResult:
    best_set, best_val = frozenset(), 0.0
    num = 0.0
    den = 1.0
    for rank, j in enumerate(order[:kmax], start=1):
        num += theta[j] * weights[j]
        den += weights[j]
        val = num / den
        if val > best_val + _TOL:
            best_set, best_val = frozenset(order[:rank]), val
    return best_set, best_val


def best_weighted_assortment(model: ChoiceSpec, theta: Sequence[float],
                             budget=UNBOUNDED, ground: Optional[Iterable[int]] = None) -> OracleResult:
    """Maximize sum_{j in S} theta_j * phi(j, S) over S subseteq ground, |S| <= budget."""
    ground = sorted(ground) if ground is not None else list(range(model.num_options))
    if any(theta[j] < -_TOL for j in ground):
        raise ValueError("theta must be componentwise nonnegative")
    if not is_mnl(model):
        if len(ground) > ENUMERATION_LIMIT:
            raise UnsupportedOracleError(
                f"no exact oracle for {type(model).__name__} with {len(ground)} options")
        return _enumerate_best(model, theta, ground, budget)

    w = model.weights
    candidates = [j for j in ground if w[j] > 0 and theta[j] > 0]
    if not candidates:
        return OracleResult(frozenset(), 0.0)
    if budget is UNBOUNDED or budget >= len(candidates):
        # Theta-ordered prefixes contain an optimum for unconstrained MNL.
        order = sorted(candidates, key=lambda j: (-theta[j], j))
        best_set, best_val = _mnl_prefix_best(w, theta, order, len(order))
        return OracleResult(best_set, best_val)

    # Budgeted MNL: the optimum is a top-K set of the line family
    # l_j(lam) = w_j * (theta_j - lam) for some candidate lam (pairwise
    # intersections plus zero crossings).
    lams = {0.0}
    for j in candidates:
        lams.add(theta[j])
    for a, b in combinations(candidates, 2):
        if abs(w[a] - w[b]) > _TOL:
            lams.add((w[a] * theta[a] - w[b] * theta[b]) / (w[a] - w[b]))
    points = sorted(lams)
    probes = list(points)
    probes += [(x + y) / 2.0 for x, y in zip(points, points[1:])]
    best = OracleResult(frozenset(), 0.0)
    for lam in probes:
        order = sorted(candidates, key=lambda j: (-(w[j] * (theta[j] - lam)), j))
        s, val = _mnl_prefix_best(w, theta, order, budget)
        if val > best.value + _TOL or (abs(val - best.value) <= _TOL and s and _tie_before(s, best.assortment)):
            best = OracleResult(s, val)
    return best


def _tie_before(a: frozenset, b: frozenset) -> bool:
    if not b:
        return False
    return (len(a), sorted(a)) < (len(b), sorted(b))


def constrained_demand(model: ChoiceSpec, ground: Iterable[int], budget=UNBOUNDED) -> OracleResult:
    """f^K(ground): best demand over sub-assortments of ``ground`` of size <= K."""
    ground = frozenset(ground)
    if budget is not UNBOUNDED and budget < 1:
        raise ValueError("budget must be >= 1 or unbounded")
    if budget is UNBOUNDED:
        return OracleResult(ground, model.demand(ground))
    if is_mnl(model):
        # Optimal set keeps the K largest positive weights (Lemma: f^K = W/(1+W)).
        ranked = sorted((j for j in ground if model.weights[j] > 0),
                        key=lambda j: (-model.weights[j], j))[:budget]
        s = frozenset(ranked)
        w = sum(model.weights[j] for j in s)
        return OracleResult(s, w / (1.0 + w))
    if len(ground) > ENUMERATION_LIMIT:
        raise UnsupportedOracleError(
            f"no exact constrained demand for {type(model).__name__} with {len(ground)} options")
    theta = [1.0] * model.num_options
    return _enumerate_best(model, theta, sorted(ground), budget)


def is_submodular(values: Callable[[frozenset], float], universe: Iterable[int],
                  tol: float = 1e-12, rng=None, samples: int = 2000):
    """Check marginal-decrease inequalities for a set function on a small universe.

    Exhaustive for universes of size <= 12; sampled pair checks up to size 20.
    Returns (True, None) or (False, (element, smaller_set, larger_set)).
    """
    elems = sorted(universe)
    n = len(elems)
    if n > 20:
        raise ValueError("is_submodular limited to universes of size <= 20")

    def marginal(e, s: frozenset) -> float:
        return values(s | {e}) - values(s)

    if n <= 12:
        size = 1 << n
        cache = [values(frozenset(elems[i] for i in range(n) if mask >> i & 1))
                 for mask in range(size)]
        for small in range(size):
            comp = (size - 1) ^ small
            extra = 0
            while True:  # extra runs over subsets of the complement, ascending
                big = small | extra
                for i in range(n):
                    bit = 1 << i
                    if big & bit:
                        continue
                    d_small = cache[small | bit] - cache[small]
                    d_big = cache[big | bit] - cache[big]
                    if d_big > d_small + tol:
                        e = elems[i]
                        s_small = frozenset(elems[k] for k in range(n) if small >> k & 1)
                        s_big = frozenset(elems[k] for k in range(n) if big >> k & 1)
                        return False, (e, s_small, s_big)
                extra = (extra - comp) & comp
                if extra == 0:
                    break
        return True, None

    import random

    r = rng if rng is not None else random.Random(0)
    for _ in range(samples):
        small = frozenset(e for e in elems if r.random() < 0.5)
        big = small | frozenset(e for e in elems if r.random() < 0.5)
        rest = [e for e in elems if e not in big]
        if not rest:
            continue
        e = r.choice(rest)
        if marginal(e, big) > marginal(e, small) + tol:
            return False, (e, small, big)
    return True, None
