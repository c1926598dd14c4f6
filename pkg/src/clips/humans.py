"""Simulated human principal.

The principal follows a precomputed ground-truth plan while the world
cooperates, replans jointly the moment that plan becomes illegal (the
assistant changed the world), and abandons the collaboration for a solo
plan once the assistant's behavior looks more like noise than help. The
helpfulness check is a cumulative likelihood ratio over the assistant's
actions: a Boltzmann (beta = 1) joint policy for the true goal against a
uniform-random robot. When random is ratio_threshold times more likely,
the principal stops counting on the assistant.
"""
from __future__ import annotations

import math

from clips.heuristic import GoalHeuristic
from clips.planner import PlannerConfig, PolicyHandle
from clips.search import gem_goal, optimal_plan
from clips.world import HUMAN, GoalSpec

RATIO_THRESHOLD = 10.0


class SimulatedHuman:
    """Principal for one episode. Modes move one way: scripted, joint, fallback."""

    def __init__(self, scenario, goal=None, plan=None, planner_config=None,
                 ratio_threshold=RATIO_THRESHOLD, budget=1 << 16):
        if goal is None:
            if scenario.true_goal is None:
                raise ValueError("scenario has no true goal; pass one explicitly")
            goal = GoalSpec(scenario.true_goal, scenario.true_profile)
        self.scenario = scenario
        self.goal = goal
        self.budget = budget
        self.ratio_threshold = float(ratio_threshold)
        cfg = planner_config or PlannerConfig(node_budget=budget, time_limit=None)
        self.policy = PolicyHandle(scenario, goal, cfg)
        self.mode = "scripted"
        self.log_ratio = 0.0  # log P(history | random robot) - log P(history | joint policy)
        self._seen = 0
        self._queue = list(plan) if plan is not None else None
        self._solo = []

    # -- assistant monitoring ------------------------------------------------

    def observe(self, history):
        """Fold unseen (state, robot_action) pairs into the likelihood ratio."""
        for state, action in history[self._seen:]:
            self._score(state, action)
        self._seen = max(self._seen, len(history))
        if self.log_ratio >= math.log(self.ratio_threshold):
            self.mode = "fallback"

    def _score(self, state, action):
        self.policy.update(state)
        joint, p = self.policy.boltzmann(state, 1.0)
        idx = [a_r for _, a_r in joint].index(action)
        p_joint = max(float(p[idx]), 1e-300)  # a zero reads as maximal evidence
        p_random = 1.0 / len(joint)
        self.log_ratio += math.log(p_random) - math.log(p_joint)

    # -- acting ----------------------------------------------------------------

    def step(self, state, assistant_history=()):
        """The principal's action for this turn."""
        if state.turn != HUMAN:
            raise ValueError("the simulated human acts only on the human's turn")
        self.observe(assistant_history)
        if self.mode == "fallback":
            return self._solo_step(state)
        if self.mode == "scripted":
            action = self._scripted_step(state)
            if action is not None:
                return action
            self.mode = "joint"
        self.policy.update(state)
        a_h, _ = self.policy.greedy(state)
        return a_h

    def _scripted_step(self, state):
        if self._queue is None:
            self._queue = self._ground_truth_plan(state)
        legal = self.scenario.legal_actions(state, HUMAN)
        return self._pop_human(self._queue, legal)

    def _ground_truth_plan(self, state):
        res = optimal_plan(self.scenario, state, gem_goal(self.goal.gem),
                           mode="joint", budget=self.budget,
                           profile=self.goal.cost_profile,
                           heuristic=GoalHeuristic(self.scenario, self.goal))
        return list(res.plan) if res.status == "found" else []

    def _solo_step(self, state):
        legal = self.scenario.legal_actions(state, HUMAN)
        action = self._pop_human(self._solo, legal)
        if action is not None:
            return action
        res = optimal_plan(self.scenario, state, gem_goal(self.goal.gem),
                           mode="human-only-moves", budget=self.budget,
                           profile=self.goal.cost_profile,
                           heuristic=GoalHeuristic(self.scenario, self.goal))
        if res.status != "found":
            return ("wait",)  # stuck without help; run out the clock
        self._solo = list(res.plan)
        action = self._pop_human(self._solo, legal)
        return action if action is not None else ("wait",)

    @staticmethod
    def _pop_human(queue, legal):
        while queue:
            agent, action = queue.pop(0)
            if agent != HUMAN:
                continue
            if action in legal:
                return action
            queue.clear()  # stale plan
            return None
        return None


def simulated_human_step(human, state, assistant_history=()):
    return human.step(state, assistant_history)
