"""Bounded optimal search for conjunctive goal formulas.

Goal formulas are existentially quantified conjunctions over typed
variables, e.g.

    (exists (?key1 - key) (and (pickedup-by robot ?key1)
                               (has human ?key1)
                               (iscolor ?key1 blue)))

Satisfaction depends on the state plus the history of pickup events, so
the search runs over (state, picked-events) nodes. Plans are optimal for
the joint cost (the idle agent's wait is charged every step).
"""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass

from clips.world import (
    HELD_BY_HUMAN, HELD_BY_ROBOT, HUMAN, ROBOT, WAIT, joint_cost,
)

MODES = ("joint", "robot-only", "human-only-moves")


@dataclass(frozen=True)
class GoalFormula:
    """Existential conjunction; vars are ("?name", type) pairs."""
    vars: tuple = ()
    conjuncts: tuple = ()

    def mentions_pickup(self):
        return any(c[0] == "pickedup-by" for c in self.conjuncts)

    def __str__(self):
        parts = " ".join("(" + " ".join(c) + ")" for c in self.conjuncts)
        body = parts if len(self.conjuncts) == 1 else f"(and {parts})"
        if not self.vars:
            return body
        quant = " ".join(f"({v} - {t})" for v, t in self.vars)
        return f"(exists ({quant}) {body})"


def gem_goal(gem_id):
    return GoalFormula(conjuncts=(("collected", gem_id),))


def _atom_true(scenario, state, picked, atom):
    head = atom[0]
    if head == "pickedup-by":
        return (atom[1], atom[2]) in picked
    if head == "has":
        it = scenario.by_id.get(atom[2])
        if it is None or it.kind != "key":
            return False
        holder = HELD_BY_HUMAN if atom[1] == HUMAN else HELD_BY_ROBOT
        return state.keys[scenario.key_index[atom[2]]] == holder
    if head == "unlocked":
        return not state.doors[scenario.door_index[atom[1]]]
    if head == "collected":
        return state.gems[scenario.gem_index[atom[1]]]
    if head == "iscolor":
        it = scenario.by_id.get(atom[1])
        return it is not None and it.color == atom[2]
    raise ValueError(f"unknown predicate {head!r}")


def satisfies(scenario, state, picked, formula):
    """Existential satisfaction; distinct variables bind distinct objects."""
    if not formula.vars:
        return all(_atom_true(scenario, state, picked, a) for a in formula.conjuncts)
    domains = []
    for var, typ in formula.vars:
        ids = [it.id for it in scenario.items if it.kind == typ]
        # narrow by color constraints on this variable
        for atom in formula.conjuncts:
            if atom[0] == "iscolor" and atom[1] == var:
                ids = [i for i in ids if scenario.by_id[i].color == atom[2]]
        domains.append(ids)
    names = [v for v, _ in formula.vars]
    for combo in itertools.product(*domains):
        if len(set(combo)) != len(combo):
            continue
        binding = dict(zip(names, combo))
        ground = tuple(tuple(binding.get(x, x) for x in atom)
                       for atom in formula.conjuncts)
        if all(_atom_true(scenario, state, picked, a) for a in ground):
            return True
    return False


def groundings(scenario, formula):
    """All injective variable bindings honoring the color constraints."""
    if not formula.vars:
        return [{}]
    domains = []
    for var, typ in formula.vars:
        ids = [it.id for it in scenario.items if it.kind == typ]
        for atom in formula.conjuncts:
            if atom[0] == "iscolor" and atom[1] == var:
                ids = [i for i in ids if scenario.by_id[i].color == atom[2]]
        domains.append(ids)
    names = [v for v, _ in formula.vars]
    out = []
    for combo in itertools.product(*domains):
        if len(set(combo)) == len(combo):
            out.append(dict(zip(names, combo)))
    return out


def ground_formula(formula, binding):
    conj = tuple(tuple(binding.get(x, x) for x in atom) for atom in formula.conjuncts)
    return GoalFormula(vars=(), conjuncts=conj)


@dataclass
class PlanResult:
    status: str                  # found | unsat | budget
    plan: list                   # [(agent, Action)] including forced waits
    cost: float
    expansions: int
    final_state: object = None

    @property
    def found(self):
        return self.status == "found"


def initial_picked(scenario, state):
    """Seed pickup history with keys already in hand."""
    picked = set()
    for i, loc in enumerate(state.keys):
        if loc == HELD_BY_HUMAN:
            picked.add((HUMAN, scenario.keys[i].id))
        elif loc == HELD_BY_ROBOT:
            picked.add((ROBOT, scenario.keys[i].id))
    return frozenset(picked)


def optimal_plan(scenario, state, formula, mode="joint", budget=1 << 16,
                 profile=0, heuristic=None):
    """Uniform-cost search to a formula-satisfying state.

    mode restricts who may act: "joint" (both), "robot-only" (the human
    waits out its turns), "human-only-moves" (the robot waits). Returns a
    PlanResult whose status distinguishes a proven-unsatisfiable goal
    ("unsat", search space exhausted) from a budget exhaustion ("budget").
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    track_picked = formula.mentions_pickup()
    picked0 = initial_picked(scenario, state) if track_picked else frozenset()

    def node_key(s, picked):
        return (s.fingerprint(), picked)

    h = heuristic or (lambda s: 0.0)
    start = state
    key0 = node_key(start, picked0)
    if satisfies(scenario, start, picked0, formula):
        return PlanResult("found", [], 0.0, 0, start)

    counter = itertools.count()
    g_map = {key0: 0.0}
    parent = {}
    heap = [(h(start), next(counter), 0.0, start, picked0)]
    expansions = 0
    best = None  # (cost, node key, state); termination is delayed so the
                 # result stays optimal even under an inconsistent heuristic

    def extract(best):
        g, key, s = best
        plan = []
        k = key
        while k != key0:
            pk, agent, action = parent[k]
            plan.append((agent, action))
            k = pk
        plan.reverse()
        return PlanResult("found", plan, g, expansions, s)

    while heap:
        f, _, g, s, picked = heapq.heappop(heap)
        key = node_key(s, picked)
        if g > g_map.get(key, math.inf):
            continue
        if best is not None and f >= best[0] - 1e-9:
            return extract(best)
        if satisfies(scenario, s, picked, formula):
            if best is None or g < best[0]:
                best = (g, key, s)
            continue
        if expansions >= budget:
            return extract(best) if best else PlanResult("budget", [], math.inf, expansions)
        expansions += 1

        actor = s.turn
        if mode == "robot-only" and actor == HUMAN:
            acts = [WAIT]
        elif mode == "human-only-moves" and actor == ROBOT:
            acts = [WAIT]
        else:
            acts = scenario.legal_actions(s, actor)
        for a in acts:
            a_h, a_r = (a, WAIT) if actor == HUMAN else (WAIT, a)
            succ = scenario.transition(s, a_h, a_r)
            np_ = picked
            if track_picked and a[0] == "pickup" \
                    and scenario.by_id[a[1]].kind == "key":
                np_ = picked | {(actor, a[1])}
            nk = node_key(succ, np_)
            ng = g + joint_cost(profile, a_h, a_r)
            if ng < g_map.get(nk, math.inf) - 1e-12:
                g_map[nk] = ng
                parent[nk] = (node_key(s, picked), actor, a)
                heapq.heappush(heap, (ng + h(succ), next(counter), ng, succ, np_))

    if best is not None:
        return extract(best)
    return PlanResult("unsat", [], math.inf, expansions)


def replay_plan(scenario, state, plan):
    """Apply a [(agent, action)] plan, returning the visited states."""
    states = [state]
    for agent, action in plan:
        a_h, a_r = (action, WAIT) if agent == HUMAN else (WAIT, action)
        state = scenario.transition(state, a_h, a_r)
        states.append(state)
    return states
