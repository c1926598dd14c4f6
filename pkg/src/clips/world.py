"""Multi-agent Doors, Keys and Gems gridworld.

Two embodied agents (a human principal and a robot assistant) act in
alternation on a 2D grid containing walls, colored keys, colored locked
doors, and gems. Keys are single-use and disappear when a door is
unlocked. Agents may occupy the same cell and pass through each other.
The robot cannot pick up gems; only the human can complete a goal.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import NamedTuple, Optional

HUMAN = "human"
ROBOT = "robot"
AGENTS = (HUMAN, ROBOT)

COLORS = ("red", "blue", "green", "yellow")
KINDS = ("key", "door", "gem")

MOVES = {
    "up": (0, -1),
    "down": (0, 1),
    "left": (-1, 0),
    "right": (1, 0),
}

WAIT = ("wait",)

# stable action ordering used for tie-breaking everywhere
_ACTION_ORDER = {
    "up": 0, "down": 1, "left": 2, "right": 3,
    "pickup": 4, "unlock": 5, "handover": 6, "wait": 7,
}

# key location codes besides a grid cell
HELD_BY_HUMAN = "human"
HELD_BY_ROBOT = "robot"
CONSUMED = "used"


def action_sort_key(action):
    return (_ACTION_ORDER[action[0]],) + tuple(action[1:])


class ScenarioError(ValueError):
    """Raised on malformed scenario files, with location info where possible."""


class IllegalActionError(ValueError):
    """Raised by transition() when an action fails its preconditions."""


@dataclass(frozen=True)
class Item:
    id: str
    kind: str      # key | door | gem
    color: str
    cell: tuple[int, int]


class GoalSpec(NamedTuple):
    gem: str
    cost_profile: int


class State(NamedTuple):
    """Immutable world state.

    keys[i] is either a grid cell, "human", "robot", or "used".
    doors[i] is True while door i is still locked. gems[i] is True once
    gem i has been collected. Index order follows Scenario.keys/doors/gems.
    """
    t: int
    turn: str
    human: tuple[int, int]
    robot: tuple[int, int]
    doors: tuple
    keys: tuple
    gems: tuple

    def fingerprint(self):
        # everything except the clock
        return self[1:]


class CostProfile(NamedTuple):
    id: int
    human: dict
    robot: dict

    def cost(self, agent, action):
        cls = action[0]
        if cls in MOVES:
            cls = "move"
        table = self.human if agent == HUMAN else self.robot
        return table[cls]


def _profile(pid, human_other, robot_unlock):
    human = {"move": human_other, "pickup": 5.0, "unlock": human_other,
             "handover": human_other, "wait": 0.6}
    robot = {"move": 1.0, "pickup": 1.0, "unlock": robot_unlock,
             "handover": 1.0, "wait": 0.6}
    return CostProfile(pid, human, robot)


# Profile 0: human pickup is expensive (5), robot pickup cheap (1), wait 0.6,
# everything else 1. Profiles 1/3 raise the human's non-pickup costs to 2;
# profiles 2/3 raise the robot's unlock cost to 5.
COST_PROFILES = (
    _profile(0, 1.0, 1.0),
    _profile(1, 2.0, 1.0),
    _profile(2, 1.0, 5.0),
    _profile(3, 2.0, 5.0),
)


def action_cost(profile, agent, action):
    """Cost of a single agent action under a CostProfile (or profile id)."""
    if isinstance(profile, int):
        profile = COST_PROFILES[profile]
    return profile.cost(agent, action)


def joint_cost(profile, a_h, a_r):
    if isinstance(profile, int):
        profile = COST_PROFILES[profile]
    return profile.cost(HUMAN, a_h) + profile.cost(ROBOT, a_r)


class Scenario:
    """Static scenario description plus derived index maps.

    Instances are treated as immutable. States refer to items by index;
    the scenario owns the id <-> index mappings.
    """

    def __init__(self, name, width, height, walls, human_start, robot_start,
                 items, goals, true_goal, cost_profiles, max_steps=100,
                 script=(), true_profile=None, annotations=None):
        self.name = name
        self.width = width
        self.height = height
        self.walls = frozenset(walls)
        self.human_start = human_start
        self.robot_start = robot_start
        self.items = tuple(items)
        self.goals = tuple(goals)
        self.true_goal = true_goal
        self.cost_profiles = tuple(cost_profiles)
        self.max_steps = max_steps
        self.script = tuple(script)
        self.true_profile = self.cost_profiles[0] if true_profile is None else true_profile
        self.annotations = annotations or {}

        self.by_id = {it.id: it for it in self.items}
        self.keys = tuple(it for it in self.items if it.kind == "key")
        self.doors = tuple(it for it in self.items if it.kind == "door")
        self.gems = tuple(it for it in self.items if it.kind == "gem")
        self.key_index = {it.id: i for i, it in enumerate(self.keys)}
        self.door_index = {it.id: i for i, it in enumerate(self.doors)}
        self.gem_index = {it.id: i for i, it in enumerate(self.gems)}
        self.door_cells = {it.cell: it.id for it in self.doors}
        self._validate()

    def _validate(self):
        seen = set()
        for it in self.items:
            if it.id in seen:
                raise ScenarioError(f"duplicate item id {it.id!r}")
            seen.add(it.id)
            if it.kind not in KINDS:
                raise ScenarioError(f"item {it.id!r}: unknown kind {it.kind!r}")
            if it.color not in COLORS:
                raise ScenarioError(f"item {it.id!r}: unknown color {it.color!r}")
            if not self.in_bounds(it.cell):
                raise ScenarioError(f"item {it.id!r} at {it.cell} is out of bounds")
            if it.cell in self.walls:
                raise ScenarioError(f"item {it.id!r} at {it.cell} is inside a wall")
        for g in self.goals:
            if g not in self.gem_index:
                raise ScenarioError(f"goal {g!r} is not a gem id")
        if self.true_goal is not None and self.true_goal not in self.goals:
            raise ScenarioError(f"true_goal {self.true_goal!r} is not in goals")
        for p in self.cost_profiles:
            if not 0 <= p < len(COST_PROFILES):
                raise ScenarioError(f"unknown cost profile {p}")
        for pos, who in ((self.human_start, "human"), (self.robot_start, "robot")):
            if pos is None:
                raise ScenarioError(f"missing {who} start position")
            if not self.in_bounds(pos) or pos in self.walls:
                raise ScenarioError(f"{who} start {pos} is blocked or out of bounds")

    # -- geometry ----------------------------------------------------------

    def in_bounds(self, cell):
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def passable(self, state, cell):
        """A cell an agent may move onto: in bounds, not a wall, not a locked door."""
        if not self.in_bounds(cell) or cell in self.walls:
            return False
        door_id = self.door_cells.get(cell)
        if door_id is not None and state.doors[self.door_index[door_id]]:
            return False
        return True

    def initial_state(self):
        return State(
            t=1, turn=HUMAN,
            human=self.human_start, robot=self.robot_start,
            doors=tuple(True for _ in self.doors),
            keys=tuple(it.cell for it in self.keys),
            gems=tuple(False for _ in self.gems),
        )

    # -- dynamics ----------------------------------------------------------

    def agent_pos(self, state, agent):
        return state.human if agent == HUMAN else state.robot

    def keys_held(self, state, agent):
        code = HELD_BY_HUMAN if agent == HUMAN else HELD_BY_ROBOT
        return [self.keys[i].id for i, loc in enumerate(state.keys) if loc == code]

    def items_at(self, state, cell):
        """Pickupable item ids sitting on a cell in the given state."""
        out = []
        for i, loc in enumerate(state.keys):
            if loc == cell:
                out.append(self.keys[i].id)
        for i, gem in enumerate(self.gems):
            if gem.cell == cell and not state.gems[i]:
                out.append(gem.id)
        return out

    def legal_actions(self, state, agent):
        """All actions available to `agent` in `state`, in stable order.

        Legality ignores whose turn it is; turn enforcement happens in
        transition(). Wait is always legal.
        """
        pos = self.agent_pos(state, agent)
        out = []
        for name, (dx, dy) in MOVES.items():
            if self.passable(state, (pos[0] + dx, pos[1] + dy)):
                out.append((name,))
        for item_id in self.items_at(state, pos):
            it = self.by_id[item_id]
            if it.kind == "gem" and (agent == ROBOT or item_id not in self.goals):
                continue  # robot never picks gems; off-goal gems are inert
            out.append(("pickup", item_id))
        held = self.keys_held(state, agent)
        for door in self.doors:
            if not state.doors[self.door_index[door.id]]:
                continue
            if abs(door.cell[0] - pos[0]) + abs(door.cell[1] - pos[1]) != 1:
                continue
            for kid in held:
                if self.by_id[kid].color == door.color:
                    out.append(("unlock", door.id, kid))
        other = ROBOT if agent == HUMAN else HUMAN
        other_pos = self.agent_pos(state, other)
        if abs(other_pos[0] - pos[0]) + abs(other_pos[1] - pos[1]) <= 1:
            for kid in held:
                out.append(("handover", agent, other, kid))
        out.append(WAIT)
        out.sort(key=action_sort_key)
        return out

    def transition(self, state, a_h, a_r):
        """Apply a joint action. The off-turn agent must pass Wait.

        Raises IllegalActionError naming the violated precondition.
        """
        if state.turn == HUMAN:
            if a_r != WAIT:
                raise IllegalActionError("robot must wait on the human's turn")
            state = self._apply(state, HUMAN, a_h)
        else:
            if a_h != WAIT:
                raise IllegalActionError("human must wait on the robot's turn")
            state = self._apply(state, ROBOT, a_r)
        return state._replace(
            t=state.t + 1,
            turn=ROBOT if state.turn == HUMAN else HUMAN,
        )

    def _apply(self, state, agent, action):
        kind = action[0]
        pos = self.agent_pos(state, agent)
        if kind in MOVES:
            dx, dy = MOVES[kind]
            dest = (pos[0] + dx, pos[1] + dy)
            if not self.passable(state, dest):
                raise IllegalActionError(f"{agent} cannot move {kind} into {dest}")
            return state._replace(**{agent: dest})
        if kind == "wait":
            return state
        if kind == "pickup":
            item_id = action[1]
            it = self.by_id.get(item_id)
            if it is None:
                raise IllegalActionError(f"unknown item {item_id!r}")
            if it.kind == "key":
                ki = self.key_index[item_id]
                if state.keys[ki] != pos:
                    raise IllegalActionError(f"{agent} is not on key {item_id}")
                keys = list(state.keys)
                keys[ki] = HELD_BY_HUMAN if agent == HUMAN else HELD_BY_ROBOT
                return state._replace(keys=tuple(keys))
            if it.kind == "gem":
                if agent == ROBOT:
                    raise IllegalActionError("the robot cannot pick up gems")
                gi = self.gem_index[item_id]
                if state.gems[gi] or it.cell != pos:
                    raise IllegalActionError(f"gem {item_id} is not available here")
                gems = list(state.gems)
                gems[gi] = True
                return state._replace(gems=tuple(gems))
            raise IllegalActionError(f"cannot pick up {it.kind} {item_id}")
        if kind == "unlock":
            door_id, key_id = action[1], action[2]
            if door_id not in self.door_index or key_id not in self.key_index:
                raise IllegalActionError(f"unknown door/key in {action!r}")
            di = self.door_index[door_id]
            ki = self.key_index[key_id]
            door = self.doors[di]
            if not state.doors[di]:
                raise IllegalActionError(f"door {door_id} is already unlocked")
            holder = HELD_BY_HUMAN if agent == HUMAN else HELD_BY_ROBOT
            if state.keys[ki] != holder:
                raise IllegalActionError(f"{agent} does not hold key {key_id}")
            if self.keys[ki].color != door.color:
                raise IllegalActionError(f"key {key_id} does not fit door {door_id}")
            if abs(door.cell[0] - pos[0]) + abs(door.cell[1] - pos[1]) != 1:
                raise IllegalActionError(f"{agent} is not adjacent to door {door_id}")
            doors = list(state.doors)
            doors[di] = False
            keys = list(state.keys)
            keys[ki] = CONSUMED  # keys are single use
            return state._replace(doors=tuple(doors), keys=tuple(keys))
        if kind == "handover":
            giver, receiver, key_id = action[1], action[2], action[3]
            if giver != agent:
                raise IllegalActionError("only the acting agent may hand over a key")
            if receiver == agent or receiver not in AGENTS:
                raise IllegalActionError(f"bad handover receiver {receiver!r}")
            if key_id not in self.key_index:
                raise IllegalActionError(f"unknown key {key_id!r}")
            ki = self.key_index[key_id]
            holder = HELD_BY_HUMAN if agent == HUMAN else HELD_BY_ROBOT
            if state.keys[ki] != holder:
                raise IllegalActionError(f"{agent} does not hold key {key_id}")
            other_pos = self.agent_pos(state, receiver)
            if abs(other_pos[0] - pos[0]) + abs(other_pos[1] - pos[1]) > 1:
                raise IllegalActionError("agents must be adjacent to hand over")
            keys = list(state.keys)
            keys[ki] = HELD_BY_HUMAN if receiver == HUMAN else HELD_BY_ROBOT
            return state._replace(keys=tuple(keys))
        raise IllegalActionError(f"unknown action {action!r}")

    def is_goal(self, state, goal):
        """True once the goal gem has been collected. Profile-independent."""
        gem = goal.gem if isinstance(goal, GoalSpec) else goal
        return state.gems[self.gem_index[gem]]

    # -- wire encoding -----------------------------------------------------

    def state_to_wire(self, state):
        keys = {}
        for i, loc in enumerate(state.keys):
            keys[self.keys[i].id] = list(loc) if isinstance(loc, tuple) else loc
        return {
            "type": "state",
            "t": state.t,
            "human": list(state.human),
            "robot": list(state.robot),
            "doors": {d.id: bool(state.doors[i]) for i, d in enumerate(self.doors)},
            "keys": keys,
            "gems": [g.id for i, g in enumerate(self.gems) if state.gems[i]],
        }

    def to_dict(self):
        """Items-map encoding; parse_scenario(json.dumps(to_dict())) round-trips."""
        rows = []
        for y in range(self.height):
            row = []
            for x in range(self.width):
                if (x, y) in self.walls:
                    row.append("#")
                elif (x, y) == self.human_start:
                    row.append("h")
                elif (x, y) == self.robot_start:
                    row.append("r")
                else:
                    row.append(".")
            rows.append("".join(row))
        out = {
            "name": self.name,
            "grid": rows,
            "legend": {it.id: [it.kind, it.color] for it in self.items},
            "items": {it.id: list(it.cell) for it in self.items},
            "goals": list(self.goals),
            "true_goal": self.true_goal,
            "cost_profiles": list(self.cost_profiles),
            "max_steps": self.max_steps,
        }
        if self.script:
            out["script"] = [dict(ev) for ev in self.script]
        if self.true_profile != self.cost_profiles[0]:
            out["true_profile"] = self.true_profile
        if self.annotations:
            out["annotations"] = dict(self.annotations)
        return out


def _tokenize_row(row, y, legend):
    """Greedy longest-match scan of one grid row into cell tokens."""
    tokens = sorted(legend, key=len, reverse=True)
    out = []
    i = 0
    while i < len(row):
        for tok in tokens:
            if row.startswith(tok, i):
                out.append(tok)
                i += len(tok)
                break
        else:
            ch = row[i]
            if ch in "#.hr":
                out.append(ch)
                i += 1
            else:
                raise ScenarioError(f"row {y}, col {i}: unknown token {ch!r}")
    return out


def parse_scenario(text):
    """Parse the JSON scenario format into a Scenario.

    Grid rows use '#' walls, '.' floor, 'h'/'r' agent starts, and legend
    tokens placed either inline (greedy longest-match scan, one cell per
    token) or through the optional "items" map of id -> [x, y].
    """
    try:
        doc = json.loads(text) if isinstance(text, str) else dict(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"not valid JSON: {e}") from None
    for field in ("name", "grid", "legend", "goals"):
        if field not in doc:
            raise ScenarioError(f"missing required field {field!r}")
    legend = {}
    for tok, spec in doc["legend"].items():
        if not isinstance(spec, (list, tuple)) or len(spec) != 2:
            raise ScenarioError(f"legend entry {tok!r} must be [kind, color]")
        legend[tok] = (spec[0], spec[1])

    walls = set()
    placed = {}
    human = robot = None
    width = None
    for y, row in enumerate(doc["grid"]):
        toks = _tokenize_row(row, y, legend)
        if width is None:
            width = len(toks)
        elif len(toks) != width:
            raise ScenarioError(f"row {y}: expected {width} cells, got {len(toks)}")
        for x, tok in enumerate(toks):
            if tok == "#":
                walls.add((x, y))
            elif tok == "h":
                if human is not None:
                    raise ScenarioError(f"row {y}, col {x}: second human start")
                human = (x, y)
            elif tok == "r":
                if robot is not None:
                    raise ScenarioError(f"row {y}, col {x}: second robot start")
                robot = (x, y)
            elif tok == ".":
                pass
            else:
                if tok in placed:
                    raise ScenarioError(f"row {y}, col {x}: item {tok!r} placed twice")
                placed[tok] = (x, y)
    height = len(doc["grid"])

    for tok, cell in doc.get("items", {}).items():
        if tok not in legend:
            raise ScenarioError(f"items entry {tok!r} has no legend")
        if tok in placed:
            raise ScenarioError(f"item {tok!r} placed both inline and via items map")
        placed[tok] = tuple(cell)

    items = []
    for tok in legend:
        if tok not in placed:
            raise ScenarioError(f"legend token {tok!r} never placed on the grid")
        kind, color = legend[tok]
        items.append(Item(tok, kind, color, placed[tok]))

    return Scenario(
        name=doc["name"],
        width=width, height=height, walls=walls,
        human_start=human, robot_start=robot,
        items=items,
        goals=doc["goals"],
        true_goal=doc.get("true_goal"),
        cost_profiles=doc.get("cost_profiles", [0]),
        max_steps=doc.get("max_steps", 100),
        script=doc.get("script", ()),
        true_profile=doc.get("true_profile"),
        annotations=doc.get("annotations"),
    )


def all_hypotheses(scenario):
    """The hypothesis lattice: every (goal gem, cost profile) pair."""
    return [GoalSpec(g, p) for g, p in
            itertools.product(scenario.goals, scenario.cost_profiles)]


def action_to_wire(action):
    return {"action": action[0], "args": list(action[1:])}


def action_from_wire(doc):
    name = doc["action"]
    args = doc.get("args", [])
    if name not in _ACTION_ORDER:
        raise IllegalActionError(f"unknown action name {name!r}")
    return (name, *args)
