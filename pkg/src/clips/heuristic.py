"""Admissible cost-to-go heuristic for goal gems.

The estimate is built from a minimum spanning tree over the cells that any
successful plan must touch: the human, the goal gem, doors that provably
block every human route to the gem, and floor keys that are all needed to
open those doors. Distances treat every locked door that could still be
opened (a live key of its color exists) as passable, so the tree never
overestimates a plan that opens a convenient extra door.

Keys fetched by the robot reach the rest of the structure through a
handover or an unlock performed from an adjacent cell, so one grid step of
slack is subtracted per necessary floor key. The movement bound is scaled
by the cheapest move cost plus the idle agent's wait cost; unavoidable
pickup/unlock steps are added on top with the cheaper agent's price.
"""
from __future__ import annotations

import math
from collections import deque

from clips.world import COST_PROFILES, HELD_BY_HUMAN, HELD_BY_ROBOT, HUMAN, ROBOT


class GoalHeuristic:
    """Memoizing heuristic for one (scenario, goal gem) pair.

    Values depend on the human position, door locks, and key locations
    only, so the cache key drops the robot position and the clock.
    """

    def __init__(self, scenario, goal):
        self.scenario = scenario
        self.gem = goal.gem if hasattr(goal, "gem") else goal
        self.profile = COST_PROFILES[goal.cost_profile] if hasattr(goal, "cost_profile") \
            else COST_PROFILES[0]
        self.gem_index = scenario.gem_index[self.gem]
        self.gem_cell = scenario.by_id[self.gem].cell
        self._struct = {}
        self._fields = {}
        # profile-derived scale factors
        self.step_cost = min(self.profile.human["move"], self.profile.robot["move"]) \
            + self.profile.human["wait"]
        self.pick_gem = self.profile.human["pickup"] + self.profile.robot["wait"]
        self.pick_key = min(self.profile.human["pickup"], self.profile.robot["pickup"]) \
            + self.profile.human["wait"]
        self.unlock = min(self.profile.human["unlock"], self.profile.robot["unlock"]) \
            + self.profile.human["wait"]

    # -- grid metric -------------------------------------------------------

    def _field(self, source, blocked):
        """BFS distance field from a cell, with `blocked` door cells solid."""
        key = (source, blocked)
        field = self._fields.get(key)
        if field is not None:
            return field
        sc = self.scenario
        field = {source: 0}
        q = deque([source])
        while q:
            x, y = q.popleft()
            d = field[(x, y)] + 1
            for nxt in ((x, y - 1), (x, y + 1), (x - 1, y), (x + 1, y)):
                if nxt in field or not sc.in_bounds(nxt):
                    continue
                if nxt in sc.walls or nxt in blocked:
                    continue
                field[nxt] = d
                q.append(nxt)
        self._fields[key] = field
        return field

    # -- structure analysis ------------------------------------------------

    def _structure(self, state):
        """(mst_steps, slack, floor_keys_needed, doors_needed) or None if infeasible."""
        sc = self.scenario
        live_colors = set()
        for i, loc in enumerate(state.keys):
            if loc != "used":
                live_colors.add(sc.keys[i].color)
        locked = [sc.doors[i] for i in range(len(sc.doors)) if state.doors[i]]
        # doors that can never open again are permanent walls
        dead_cells = frozenset(d.cell for d in locked if d.color not in live_colors)

        gem_field = self._field(self.gem_cell, dead_cells)
        if state.human not in gem_field:
            return None

        # a door is necessary when it alone separates the human from the gem
        necessary = []
        for d in locked:
            solo = self._field(self.gem_cell, frozenset((d.cell,)))
            if state.human not in solo:
                necessary.append(d)

        need = {}
        for d in necessary:
            need[d.color] = need.get(d.color, 0) + 1
        held = {}
        floor = {}
        floor_cells = {}
        for i, loc in enumerate(state.keys):
            c = sc.keys[i].color
            if loc in (HELD_BY_HUMAN, HELD_BY_ROBOT):
                held[c] = held.get(c, 0) + 1
            elif loc != "used":
                floor[c] = floor.get(c, 0) + 1
                floor_cells.setdefault(c, []).append(loc)

        nodes = [state.human, self.gem_cell] + [d.cell for d in necessary]
        floor_needed = 0
        key_nodes = 0
        for c, n in need.items():
            short = max(0, n - held.get(c, 0))
            if short > floor.get(c, 0):
                return None  # not enough keys left for the doors that must open
            floor_needed += short
            if short and short == floor.get(c, 0):
                # every remaining key of this color must be fetched
                nodes.extend(floor_cells[c])
                key_nodes += short

        mst = self._mst(nodes, dead_cells)
        if mst is None:
            return None
        return mst, key_nodes, floor_needed, len(necessary)

    def _mst(self, nodes, blocked):
        """Prim over BFS distances; None when the node set is disconnected."""
        fields = [self._field(c, blocked) for c in nodes]
        n = len(nodes)
        in_tree = [False] * n
        best = [math.inf] * n
        best[0] = 0
        total = 0
        for _ in range(n):
            i = min((j for j in range(n) if not in_tree[j]),
                    key=lambda j: best[j], default=None)
            if i is None or best[i] is math.inf:
                return None
            total += best[i]
            in_tree[i] = True
            for j in range(n):
                if not in_tree[j]:
                    d = fields[i].get(nodes[j], math.inf)
                    if d < best[j]:
                        best[j] = d
        return total

    def __call__(self, state):
        if state.gems[self.gem_index]:
            return 0.0
        key = (state.human, state.doors, state.keys)
        cached = self._struct.get(key)
        if cached is None and key not in self._struct:
            cached = self._structure(state)
            self._struct[key] = cached
        if cached is None:
            return math.inf
        mst, slack, floor_keys, doors = cached
        moves = max(0, mst - slack)
        return (moves * self.step_cost
                + self.pick_gem
                + floor_keys * self.pick_key
                + doors * self.unlock)


def mst_heuristic(scenario, state, goal):
    """One-shot heuristic evaluation (no cache reuse across calls)."""
    return GoalHeuristic(scenario, goal)(state)
