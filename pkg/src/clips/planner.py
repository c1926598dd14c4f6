"""Real-time heuristic search over joint actions.

Each goal hypothesis owns a PolicyHandle: a table of admissible cost-to-go
estimates refined in real time. An update at state s launches a bounded
A* search from every joint-action successor of s, then applies the
real-time update V(s_i) <- f_used - g(s_i) to every expanded state, where
f_used is the cheapest proven route through the search frontier. Searches
that prove an optimal path cache exact cost-to-go values along it; later
searches terminate as soon as they reconnect with a cached path.

Q(s, a_h, a_r) combines the one-step joint cost with the successor's
estimate, falling back to a lazily evaluated heuristic for unseen states.
"""
from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from clips.heuristic import GoalHeuristic
from clips.world import COST_PROFILES, HUMAN, ROBOT, WAIT, joint_cost


@dataclass
class PlannerConfig:
    node_budget: int = 1 << 18          # max expansions per search
    time_limit: float | None = 10.0     # wall-clock cap per search, seconds
    prune_irrelevant: bool = True


@dataclass
class PlannerStats:
    searches: int = 0
    expansions: int = 0
    cache_hits: int = 0
    dead_ends: int = 0
    updates: int = 0

    def as_dict(self):
        return {"searches": self.searches, "expansions": self.expansions,
                "cache_hits": self.cache_hits, "dead_ends": self.dead_ends,
                "updates": self.updates}


class PolicyHandle:
    """Search state for one goal hypothesis.

    Not safe for concurrent updates; callers own one handle per hypothesis.
    """

    def __init__(self, scenario, goal, config=None):
        self.scenario = scenario
        self.goal = goal
        self.config = config or PlannerConfig()
        self.profile = COST_PROFILES[goal.cost_profile]
        self.heuristic = GoalHeuristic(scenario, goal)
        self.values = {}      # fingerprint -> admissible estimate (>= heuristic)
        self.plan_cache = {}  # fingerprint -> (exact cost-to-go, joint action or None)
        self.stats = PlannerStats()

    # -- values ------------------------------------------------------------

    def value(self, state):
        """Current cost-to-go estimate. Exact where a cached plan exists."""
        if self.scenario.is_goal(state, self.goal):
            return 0.0
        fp = state.fingerprint()
        hit = self.plan_cache.get(fp)
        if hit is not None:
            return hit[0]
        stored = self.values.get(fp)
        if stored is not None:
            return stored
        return self.heuristic(state)

    def q_value(self, state, a_h, a_r):
        succ = self.scenario.transition(state, a_h, a_r)
        return joint_cost(self.profile, a_h, a_r) + self.value(succ)

    def action_values(self, state):
        """All legal joint actions for the acting agent with their Q values."""
        actor = state.turn
        acts = self.scenario.legal_actions(state, actor)
        joint = [(a, WAIT) if actor == HUMAN else (WAIT, a) for a in acts]
        q = np.array([self.q_value(state, ah, ar) for ah, ar in joint])
        return joint, q

    def boltzmann(self, state, beta):
        """Soft-min action distribution at inverse temperature beta."""
        joint, q = self.action_values(state)
        finite = np.isfinite(q)
        if not finite.any():
            p = np.full(len(joint), 1.0 / len(joint))
            return joint, p
        z = np.where(finite, -beta * (q - q[finite].min()), -np.inf)
        p = np.exp(z)
        p /= p.sum()
        return joint, p

    def greedy(self, state):
        """Deterministic argmin joint action (stable order tie-break)."""
        joint, q = self.action_values(state)
        best = int(np.argmin(q))  # argmin returns the first minimum
        return joint[best]

    # -- pruning -----------------------------------------------------------

    def _relevant(self, state, action):
        kind = action[0]
        if kind == "pickup":
            it = self.scenario.by_id[action[1]]
            if it.kind == "gem":
                return action[1] == self.goal.gem
            locked_colors = {self.scenario.doors[i].color
                             for i in range(len(state.doors)) if state.doors[i]}
            return it.color in locked_colors
        if kind == "handover":
            locked_colors = {self.scenario.doors[i].color
                             for i in range(len(state.doors)) if state.doors[i]}
            return self.scenario.by_id[action[3]].color in locked_colors
        return True

    def _expand(self, state):
        actor = state.turn
        acts = self.scenario.legal_actions(state, actor)
        if self.config.prune_irrelevant:
            acts = [a for a in acts if self._relevant(state, a)]
        for a in acts:
            a_h, a_r = (a, WAIT) if actor == HUMAN else (WAIT, a)
            succ = self.scenario.transition(state, a_h, a_r)
            yield (a_h, a_r), succ, joint_cost(self.profile, a_h, a_r)

    # -- search ------------------------------------------------------------

    def _search_value(self, state, fp):
        stored = self.values.get(fp)
        if stored is not None:
            return stored
        return self.heuristic(state)

    def _search(self, root):
        """Bounded A* from root; returns nothing, applies updates in place.

        Termination is delayed until the best goal (or cached-path) cost is
        no worse than the open list, which makes proven paths optimal and
        their cached cost-to-go values exact even though the heuristic is
        not consistent. Expanded nodes get the real-time update, clamped to
        keep stored values monotone.
        """
        sc = self.scenario
        self.stats.searches += 1
        root_fp = root.fingerprint()
        if sc.is_goal(root, self.goal):
            self.plan_cache.setdefault(root_fp, (0.0, None))
            return
        if root_fp in self.plan_cache:
            self.stats.cache_hits += 1
            return

        deadline = None
        if self.config.time_limit is not None:
            deadline = time.monotonic() + self.config.time_limit

        counter = itertools.count()
        g_map = {root_fp: 0.0}
        parent = {}                  # fp -> (parent fp, joint action, parent state)
        expanded = {}                # fp -> (g at expansion, state)
        h0 = self._search_value(root, root_fp)
        if math.isinf(h0):
            self.values[root_fp] = math.inf
            self.stats.dead_ends += 1
            return
        heap = [(h0, next(counter), 0.0, root)]
        best = None                  # (total cost, terminal fp)
        budget = self.config.node_budget
        spent = 0
        truncated = False

        while heap:
            f, _, g, state = heap[0]
            fp = state.fingerprint()
            if g > g_map.get(fp, math.inf):
                heapq.heappop(heap)  # stale entry
                continue
            if best is not None and f >= best[0] - 1e-9:
                break                # optimality proven
            if spent >= budget or (deadline is not None
                                   and spent and spent % 256 == 0
                                   and time.monotonic() > deadline):
                truncated = True
                break
            heapq.heappop(heap)

            if sc.is_goal(state, self.goal):
                if best is None or g < best[0]:
                    best = (g, fp)
                continue
            hit = self.plan_cache.get(fp)
            if hit is not None:
                self.stats.cache_hits += 1
                if best is None or g + hit[0] < best[0]:
                    best = (g + hit[0], fp)
                continue

            spent += 1
            expanded[fp] = (g, state)
            for joint, succ, cost in self._expand(state):
                succ_fp = succ.fingerprint()
                ng = g + cost
                if ng < g_map.get(succ_fp, math.inf) - 1e-12:
                    g_map[succ_fp] = ng
                    parent[succ_fp] = (fp, joint, state)
                    if sc.is_goal(succ, self.goal):
                        nh = 0.0
                    else:
                        nh = self.plan_cache.get(succ_fp, (None,))[0]
                        if nh is None:
                            nh = self._search_value(succ, succ_fp)
                    if not math.isinf(nh):
                        heapq.heappush(heap, (ng + nh, next(counter), ng, succ))

        self.stats.expansions += spent

        # cheapest f still open (skipping stale entries)
        while heap:
            f, _, g, state = heap[0]
            if g > g_map.get(state.fingerprint(), math.inf):
                heapq.heappop(heap)
            else:
                break
        f_open = heap[0][0] if heap else math.inf
        f_used = min(best[0] if best else math.inf, f_open)

        if math.isinf(f_used):
            # exhausted the reachable space without a route: dead end
            self.stats.dead_ends += 1
            self.values[root_fp] = math.inf
            for fp in expanded:
                self.values[fp] = math.inf
            return

        for fp, (g, state) in expanded.items():
            new = f_used - g
            old = self.values.get(fp, -math.inf)
            floor = self.heuristic(state)
            if new > old or floor > old:
                self.values[fp] = max(new, floor, old)

        proven = best is not None and (not heap or heap[0][0] >= best[0] - 1e-9) \
            and not truncated
        if proven:
            total, terminal = best
            if terminal not in self.plan_cache:
                self.plan_cache[terminal] = (total - g_map[terminal], None)
            fp = terminal
            while fp != root_fp:
                pfp, joint, _pstate = parent[fp]
                self.plan_cache[pfp] = (total - g_map[pfp], joint)
                fp = pfp

    def update(self, state):
        """One real-time planning round at `state` (spec: rths-policy-update).

        Searches from every joint-action successor so Q is defined for all
        legal actions afterwards. Returns self.
        """
        self.stats.updates += 1
        sc = self.scenario
        if sc.is_goal(state, self.goal):
            self.plan_cache.setdefault(state.fingerprint(), (0.0, None))
            return self
        actor = state.turn
        for a in sc.legal_actions(state, actor):
            a_h, a_r = (a, WAIT) if actor == HUMAN else (WAIT, a)
            succ = sc.transition(state, a_h, a_r)
            self._search(succ)
        return self

    # -- rollouts ----------------------------------------------------------

    def rollout(self, state, horizon=50):
        """Greedy alternating rollout; stops at the goal or the horizon."""
        out = []
        for _ in range(max(0, horizon)):
            if self.scenario.is_goal(state, self.goal):
                break
            self.update(state)
            joint, q = self.action_values(state)
            if not np.isfinite(q).any():
                break  # dead end, nothing sensible to roll out
            a_h, a_r = joint[int(np.argmin(q))]
            actor = state.turn
            out.append((actor, a_h if actor == HUMAN else a_r))
            state = self.scenario.transition(state, a_h, a_r)
        return out


# spec operation surface ----------------------------------------------------

def rths_policy_update(handle, state):
    return handle.update(state)


def q_value(handle, state, a_h, a_r):
    return handle.q_value(state, a_h, a_r)


def boltzmann_dist(handle, state, beta):
    return handle.boltzmann(state, beta)


def rollout_policy(handle, state, horizon=50):
    return handle.rollout(state, horizon)
