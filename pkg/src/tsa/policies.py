"""Policy abstraction, stochastic simulation, and exact expected-match evaluation.

A policy is a deterministic map from the visible state to the next action
(agent to process, assortment to display); randomized behaviour is realized by
policies that consumed auxiliary randomness at construction time.  A match is
a mutual selection: i chose j and j chose i, in either processing order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Tuple

import numpy as np

from .errors import ContractViolationError, SizeRefusalError
from .instances import UNBOUNDED, Instance, demand_table
from .oracles import constrained_demand

Agent = Tuple[str, int]  # ("C", i) or ("S", j)


@dataclass
class PolicyAction:
    agent: Agent
    assortment: frozenset


@dataclass
class PolicyState:
    instance: Instance
    processed: set = field(default_factory=set)
    supplier_backlogs: list = field(default_factory=list)  # per supplier: customers who chose them
    customer_backlogs: list = field(default_factory=list)  # per customer: suppliers who chose them
    matches: int = 0
    chosen: dict = field(default_factory=dict)

    @classmethod
    def initial(cls, instance: Instance) -> "PolicyState":
        return cls(instance,
                   processed=set(),
                   supplier_backlogs=[set() for _ in range(instance.m)],
                   customer_backlogs=[set() for _ in range(instance.n)])

    def backlog(self, agent: Agent) -> set:
        side, idx = agent
        return self.supplier_backlogs[idx] if side == "S" else self.customer_backlogs[idx]

    def done(self) -> bool:
        return len(self.processed) == self.instance.n + self.instance.m


@dataclass
class SimulationResult:
    mean: float
    half_width: float
    runs: int
    seed: int


def _sample_choice(model, assortment: frozenset, rng) -> Optional[int]:
    """Draw one choice from S u {outside}; options scanned in ascending id order."""
    u = rng.random()
    acc = 0.0
    for j in sorted(assortment):
        acc += model.prob(j, assortment)
        if u < acc:
            return j
    return None


def _apply_choice(state: PolicyState, agent: Agent, choice: Optional[int]) -> None:
    state.processed.add(agent)
    state.chosen[agent] = choice
    if choice is None:
        return
    side, idx = agent
    other: Agent = ("S" if side == "C" else "C", choice)
    if state.chosen.get(other) == idx:
        state.matches += 1
    if side == "C":
        state.supplier_backlogs[choice].add(idx)
    else:
        state.customer_backlogs[choice].add(idx)


def _validate_action(state: PolicyState, action: PolicyAction, tag: str = "FA") -> None:
    agent, s = action.agent, action.assortment
    side, idx = agent
    inst = state.instance
    if side not in ("C", "S") or not (0 <= idx < inst.side_size(side)):
        raise ContractViolationError(f"unknown agent {agent}")
    if agent in state.processed:
        raise ContractViolationError(f"agent {agent} already processed")
    opposite = inst.m if side == "C" else inst.n
    if any(not (0 <= j < opposite) for j in s):
        raise ContractViolationError(f"assortment {sorted(s)} outside opposite side")
    k = inst.budget(side, idx)
    if k is not UNBOUNDED and len(s) > k:
        raise ContractViolationError(f"assortment of size {len(s)} exceeds budget {k} for {agent}")
    if tag and tag[0] in ("C", "S") and tag[1] == "-":
        first = tag[0]
        if side != first:
            done_first = sum(1 for a in state.processed if a[0] == first)
            if done_first < inst.side_size(first):
                raise ContractViolationError(
                    f"{tag} policy processed {agent} before finishing side {first}")


def simulate_once(instance: Instance, policy, rng) -> Tuple[int, list]:
    """Run the policy once; returns (matches, trace records)."""
    state = PolicyState.initial(instance)
    trace = []
    step = 0
    tag = getattr(policy, "tag", "FA")
    while not state.done():
        action = policy.action(state)
        _validate_action(state, action, tag)
        side, idx = action.agent
        model = instance.model(side, idx)
        choice = _sample_choice(model, action.assortment, rng)
        _apply_choice(state, action.agent, choice)
        trace.append({"step": step, "agent": list(action.agent),
                      "assortment": sorted(action.assortment),
                      "choice": choice})
        step += 1
    return state.matches, trace


def dump_trace(trace: list, fh) -> None:
    """One JSON record per action, newline separated."""
    for rec in trace:
        fh.write(json.dumps(rec, sort_keys=True))
        fh.write("\n")


def monte_carlo(instance: Instance, policy, runs: int, seed: int) -> SimulationResult:
    """Mean matches with a normal-approximation 95% CI; run r uses stream (seed, r)."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    total = 0.0
    total_sq = 0.0
    for r in range(runs):
        rng = np.random.default_rng([seed, r])
        matches, _ = simulate_once(instance, policy, rng)
        total += matches
        total_sq += matches * matches
    mean = total / runs
    var = max(total_sq / runs - mean * mean, 0.0)
    half = 1.96 * math.sqrt(var / runs) if runs > 1 else 0.0
    return SimulationResult(mean, half, runs, seed)


# ---------------------------------------------------------------------------
# Exact evaluators


def exact_value_static(instance: Instance, customer_assortments, supplier_assortments) -> float:
    """Expected matches of a fully static display; choices are independent so
    only mutually displayed pairs can match."""
    s_list = [frozenset(s) for s in customer_assortments]
    c_list = [frozenset(c) for c in supplier_assortments]
    for i, s in enumerate(s_list):
        k = instance.k_customer[i]
        if k is not UNBOUNDED and len(s) > k:
            raise ContractViolationError(f"customer {i} assortment exceeds budget")
    for j, c in enumerate(c_list):
        k = instance.k_supplier[j]
        if k is not UNBOUNDED and len(c) > k:
            raise ContractViolationError(f"supplier {j} assortment exceeds budget")
    value = 0.0
    for i in range(instance.n):
        mi = instance.customer_models[i]
        for j in s_list[i]:
            if i in c_list[j]:
                value += mi.prob(j, s_list[i]) * instance.supplier_models[j].prob(i, c_list[j])
    return value


def exact_value_edges(instance: Instance, edges: Iterable[Tuple[int, int]]) -> float:
    """Static value of a mutual edge set: each endpoint displays the other."""
    edges = set(edges)
    s_list = [frozenset(j for (i2, j) in edges if i2 == i) for i in range(instance.n)]
    c_list = [frozenset(i for (i, j2) in edges if j2 == j) for j in range(instance.m)]
    return exact_value_static(instance, s_list, c_list)


def exact_value_one_sided_static(instance: Instance, side: str, assortments,
                                 max_initiating: int = 18) -> float:
    """Exact expectation when ``side`` is shown static assortments first and each
    responder is then shown its backlog (its budget-constrained best subset when
    constrained)."""
    init_n = instance.side_size(side)
    resp_side = "S" if side == "C" else "C"
    resp_n = instance.side_size(resp_side)
    if init_n > max_initiating:
        raise SizeRefusalError(f"one-sided static evaluation refuses initiating side {init_n} > {max_initiating}")
    assortments = [frozenset(s) for s in assortments]
    if len(assortments) != init_n:
        raise ValueError("need one assortment per initiating agent")
    for a, s in enumerate(assortments):
        k = instance.budget(side, a)
        if k is not UNBOUNDED and len(s) > k:
            raise ContractViolationError(f"initiating agent {a} assortment exceeds budget")
    value = 0.0
    for j in range(resp_n):
        p = np.array([instance.model(side, i).prob(j, assortments[i]) for i in range(init_n)])
        f = demand_table(instance.model(resp_side, j), init_n, instance.budget(resp_side, j))
        dist = np.array([1.0])
        for i in range(init_n):
            dist = np.concatenate([dist * (1.0 - p[i]), dist * p[i]])
        value += float(dist @ f)
    return value


def exact_value_deterministic_adaptive(instance: Instance, policy, max_agents: int = 8) -> float:
    """Exact expected matches of a deterministic policy by expanding the full
    choice tree; refuses instances with more than ``max_agents`` agents."""
    if instance.n + instance.m > max_agents:
        raise SizeRefusalError(f"exact adaptive evaluation refuses n+m > {max_agents}")

    tag = getattr(policy, "tag", "FA")

    def recurse(state: PolicyState, prob: float) -> float:
        if state.done():
            return prob * state.matches
        action = policy.action(state)
        _validate_action(state, action, tag)
        side, idx = action.agent
        model = instance.model(side, idx)
        total = 0.0
        options = sorted(action.assortment) + [None]
        for choice in options:
            p = model.prob(choice, action.assortment)
            if p <= 0.0:
                continue
            child = PolicyState(
                instance,
                processed=set(state.processed),
                supplier_backlogs=[set(b) for b in state.supplier_backlogs],
                customer_backlogs=[set(b) for b in state.customer_backlogs],
                matches=state.matches,
                chosen=dict(state.chosen),
            )
            _apply_choice(child, action.agent, choice)
            total += recurse(child, prob * p)
        return total

    return recurse(PolicyState.initial(instance), 1.0)


# ---------------------------------------------------------------------------
# Ready-made policies


class StaticPolicy:
    """Fully static policy: fixed assortments, processed in lexicographic order."""

    tag = "FS"

    def __init__(self, instance: Instance, customer_assortments, supplier_assortments):
        self.customer_assortments = [frozenset(s) for s in customer_assortments]
        self.supplier_assortments = [frozenset(c) for c in supplier_assortments]

    def action(self, state: PolicyState) -> PolicyAction:
        for i in range(state.instance.n):
            if ("C", i) not in state.processed:
                return PolicyAction(("C", i), self.customer_assortments[i])
        for j in range(state.instance.m):
            if ("S", j) not in state.processed:
                return PolicyAction(("S", j), self.supplier_assortments[j])
        raise ContractViolationError("all agents processed")


class OneSidedStaticPolicy:
    """Show fixed assortments to one side, then each responder its backlog
    (or the best budget-feasible subset of it)."""

    def __init__(self, instance: Instance, side: str, assortments):
        self.side = side
        self.assortments = [frozenset(s) for s in assortments]
        self.tag = "C-OS" if side == "C" else "S-OS"

    def action(self, state: PolicyState) -> PolicyAction:
        inst = state.instance
        init_n = inst.side_size(self.side)
        for a in range(init_n):
            if (self.side, a) not in state.processed:
                return PolicyAction((self.side, a), self.assortments[a])
        resp = "S" if self.side == "C" else "C"
        for b in range(inst.side_size(resp)):
            if (resp, b) not in state.processed:
                return PolicyAction((resp, b), respond_with_backlog(state, resp, b))
        raise ContractViolationError("all agents processed")


def respond_with_backlog(state: PolicyState, side: str, idx: int) -> frozenset:
    """Backlog display rule for responding agents: the whole backlog, or its
    constrained-demand argmax when the agent carries a budget."""
    inst = state.instance
    backlog = frozenset(state.backlog((side, idx)))
    k = inst.budget(side, idx)
    if k is UNBOUNDED or len(backlog) <= k:
        return backlog
    return constrained_demand(inst.model(side, idx), backlog, k).assortment
