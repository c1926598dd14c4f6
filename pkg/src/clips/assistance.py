"""Assistant action selection and the episode driver.

Q_MDP assistance picks the robot action minimizing the posterior-expected
cost-to-go across the surviving goal hypotheses; the offline variant
freezes the posterior once the scripted instruction prefix ends, the
online variant keeps updating it. The Thompson variant samples a single
hypothesis after the prefix and follows that hypothesis' policy for the
rest of the episode. The literal baselines skip goal inference entirely:
they read the latest utterance as a distribution over assistant-directed
commands, draw systematic samples from it, and plan to each commanded
goal directly, in two phases (help with the command, then leave the
principal to finish alone).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from clips.beliefs import (BeliefConfig, Observation, belief_init,
                           belief_to_wire, belief_update, goal_posterior)
from clips.commands import UtteranceConfig, command_to_goal_formula, \
    enumerate_commands
from clips.heuristic import GoalHeuristic
from clips.humans import SimulatedHuman
from clips.scoring import TemplateScorer
from clips.search import gem_goal, optimal_plan
from clips.world import (CONSUMED, HUMAN, MOVES, ROBOT, WAIT, GoalSpec,
                         action_cost, action_from_wire, action_to_wire,
                         joint_cost)

ASSIST_MODES = ("qmdp-offline", "qmdp-online", "pibar",
                "literal-naive", "literal-efficient")


@dataclass
class AssistConfig:
    mode: str = "qmdp-offline"
    weight_threshold: float = 0.02  # hypotheses below this are not replanned
    planner_budget: int = 1 << 16
    sample_count: int = 10          # systematic samples per utterance
    seed: int | None = None

    def __post_init__(self):
        if self.mode not in ASSIST_MODES:
            raise ValueError(f"mode must be one of {ASSIST_MODES}")
        if not 0.0 <= self.weight_threshold < 1.0:
            raise ValueError("weight_threshold must lie in [0, 1)")
        if self.sample_count < 1:
            raise ValueError("sample_count must be at least 1")


# -- Q_MDP -------------------------------------------------------------------

def surviving_hypotheses(belief, threshold):
    """Hypotheses worth replanning for, with renormalized weights.

    Zero-weight hypotheses are always dropped (they contribute nothing but
    poison expected values wherever a dead hypothesis has an infinite Q).
    If the threshold eats everything, the single likeliest hypothesis
    survives.
    """
    w = belief.weights()
    keep = np.flatnonzero((w >= threshold) & (w > 0.0))
    if keep.size == 0:
        keep = np.array([int(np.argmax(w))])
    kept = w[keep]
    return [belief.hypotheses[i] for i in keep], kept / kept.sum()


def qmdp_scores(belief, state, cfg=None):
    """Legal robot actions and their posterior-expected Q values at state."""
    cfg = cfg or AssistConfig()
    if state.turn != ROBOT:
        raise ValueError("assistance runs on the robot's turn")
    hyps, w = surviving_hypotheses(belief, cfg.weight_threshold)
    acts = belief.scenario.legal_actions(state, ROBOT)
    q = np.empty((len(hyps), len(acts)))
    for i, h in enumerate(hyps):
        h.policy.update(state)
        q[i] = [h.policy.q_value(state, WAIT, a) for a in acts]
    return acts, w @ q


def qmdp_action(belief, state, a_h=None, cfg=None):
    """Expected-cost-minimizing robot action (ties break by action order).

    a_h is the human action that produced `state`; in this turn-based game
    it is already part of the state, so it does not enter the expectation.
    """
    acts, scores = qmdp_scores(belief, state, cfg)
    return acts[int(np.argmin(scores))]


def sample_hypothesis(belief, rng):
    """One hypothesis drawn with probability proportional to its weight."""
    w = belief.weights()
    idx = int(rng.choice(len(w), p=w / w.sum()))
    return belief.hypotheses[idx]


def pibar_action(belief, state, a_h=None, cfg=None, rng=None, held=None):
    """Thompson assistance: follow one posterior-sampled hypothesis.

    Callers running an episode sample once and pass the same `held`
    hypothesis every turn; resampling per step would be a different
    policy.
    """
    if state.turn != ROBOT:
        raise ValueError("assistance runs on the robot's turn")
    if held is None:
        if rng is None:
            rng = np.random.default_rng(cfg.seed if cfg else None)
        held = sample_hypothesis(belief, rng)
    held.policy.update(state)
    _, a_r = held.policy.greedy(state)
    return a_r


# -- literal listener ----------------------------------------------------------

def _reachable_cells(scenario, state, agent):
    """Optimistic reachability: a locked door does not block while some key
    of its color is still in play (on the floor or held)."""
    live_colors = {key.color for i, key in enumerate(scenario.keys)
                   if state.keys[i] != CONSUMED}
    start = scenario.agent_pos(state, agent)
    seen = {start}
    frontier = [start]
    while frontier:
        x, y = frontier.pop()
        for dx, dy in MOVES.values():
            cell = (x + dx, y + dy)
            if cell in seen or not scenario.in_bounds(cell) \
                    or cell in scenario.walls:
                continue
            door_id = scenario.door_cells.get(cell)
            if door_id is not None:
                i = scenario.door_index[door_id]
                if state.doors[i] and scenario.doors[i].color not in live_colors:
                    continue
            seen.add(cell)
            frontier.append(cell)
    return seen


def salient_robot_actions(scenario, state):
    """Assistant actions a command could plausibly refer to in this state,
    in stable scenario-index order."""
    reach = _reachable_cells(scenario, state, ROBOT)
    obtainable = list(scenario.keys_held(state, ROBOT))
    floor = []
    for i, key in enumerate(scenario.keys):
        loc = state.keys[i]
        if isinstance(loc, tuple) and loc in reach:
            floor.append(key.id)
            obtainable.append(key.id)
    out = [("pickup", ROBOT, kid) for kid in floor]
    for i, door in enumerate(scenario.doors):
        if not state.doors[i]:
            continue
        x, y = door.cell
        if not any((x + dx, y + dy) in reach for dx, dy in MOVES.values()):
            continue
        for key in scenario.keys:
            if key.id in obtainable and key.color == door.color:
                out.append(("unlock", ROBOT, key.id, door.id))
    out.extend(("handover", ROBOT, HUMAN, key.id)
               for key in scenario.keys if key.id in obtainable)
    return out


def literal_infer_commands(scenario, utterance, state, cfg=None, backend=None):
    """Posterior over assistant-directed commands given only the utterance.

    No goal or policy enters: candidate actions come from optimistic
    reachability and the prior over commands is uniform, so the posterior
    is just the normalized backend likelihood.
    """
    cfg = cfg or UtteranceConfig()
    backend = backend or TemplateScorer(eps=cfg.eps, floor=cfg.floor)
    salient = salient_robot_actions(scenario, state)
    commands = enumerate_commands(scenario, salient, cfg)
    if not commands:
        return {}
    logs = np.array(backend.score_commands(scenario, utterance, commands))
    p = np.exp(logs - logs.max())
    p /= p.sum()
    return dict(zip(commands, p))


def systematic_sample(dist, m, rng):
    """m draws with a single uniform offset; every count stays within one
    of m times the probability."""
    if m < 1:
        raise ValueError("m must be at least 1")
    if not dist:
        raise ValueError("cannot sample from an empty distribution")
    items = sorted(dist.items(), key=lambda kv: -kv[1])  # stable for ties
    cum = np.cumsum([p for _, p in items])
    points = rng.uniform(0.0, 1.0 / m) + np.arange(m) / m
    idx = np.minimum(np.searchsorted(cum, points, side="right"), len(items) - 1)
    return [items[int(j)][0] for j in idx]


def plan_costs(profile, plan):
    """(joint, human) cost of a [(agent, action)] plan, idle waits included."""
    total = 0.0
    human = 0.0
    for agent, action in plan:
        a_h, a_r = (action, WAIT) if agent == HUMAN else (WAIT, action)
        total += joint_cost(profile, a_h, a_r)
        human += action_cost(profile, HUMAN, a_h)
    return total, human


@dataclass
class LiteralEpisode:
    """One synthesized assistance episode for a command grounding."""
    command: object
    formula: object = None        # goal formula planned to, None without a command
    phase1: object = None         # PlanResult toward the commanded goal
    phase1_mode: str | None = None  # "joint" or "robot-only"
    phase2: object = None         # PlanResult for the principal's true goal
    command_status: str = "ok"    # ok | none | unsat | budget
    succeeded: bool = False
    plan: list = field(default_factory=list)
    final_state: object = None
    joint_cost: float = math.inf
    human_cost: float = math.inf


def _literal_episode(scenario, command, formula, state, g_true, cfg):
    plan = []
    mid = state
    phase1 = None
    mode1 = None
    status = "ok" if formula is not None else "none"
    if formula is not None:
        phase1 = optimal_plan(scenario, state, formula, mode="joint",
                              budget=cfg.planner_budget, profile=0)
        mode1 = "joint"
        if phase1.status != "found":
            fallback = optimal_plan(scenario, state, formula, mode="robot-only",
                                    budget=cfg.planner_budget, profile=0)
            # a proven-unsat joint search settles it; a budgeted one only
            # falls back when the restricted search actually finds a plan
            if fallback.status == "found" or phase1.status == "unsat":
                phase1, mode1 = fallback, "robot-only"
        if phase1.status == "found":
            plan = list(phase1.plan)
            mid = phase1.final_state
        else:
            status = "unsat" if phase1.status == "unsat" else "budget"
            mode1 = None
    phase2 = optimal_plan(scenario, mid, gem_goal(g_true.gem),
                          mode="human-only-moves", budget=cfg.planner_budget,
                          profile=g_true.cost_profile,
                          heuristic=GoalHeuristic(scenario, g_true))
    succeeded = phase2.status == "found"
    final = mid
    if succeeded:
        plan = plan + list(phase2.plan)
        final = phase2.final_state
        jc, hc = plan_costs(g_true.cost_profile, plan)
    else:
        jc = hc = math.inf
    return LiteralEpisode(command=command, formula=formula, phase1=phase1,
                          phase1_mode=mode1, phase2=phase2,
                          command_status=status, succeeded=succeeded,
                          plan=plan, final_state=final,
                          joint_cost=jc, human_cost=hc)


def literal_assist_plan(scenario, command, state, g_true, variant="efficient",
                        cfg=None):
    """Two-phase literal assistance for one command.

    Phase 1 plans jointly to the commanded goal (robot-only on failure),
    phase 2 lets only the principal move to the true goal. The naive
    variant returns one episode per concrete grounding of the command;
    the efficient variant plans once for the existential formula.
    """
    cfg = cfg or AssistConfig()
    if variant not in ("naive", "efficient"):
        raise ValueError("variant must be 'naive' or 'efficient'")
    if command is None:
        formulas = [None]
    elif variant == "naive":
        formulas = list(command_to_goal_formula(scenario, command,
                                                "naive-ground")) or [None]
    else:
        formulas = [command_to_goal_formula(scenario, command, "lifted")]
    return [_literal_episode(scenario, command, f, state, g_true, cfg)
            for f in formulas]


# -- episode driver ------------------------------------------------------------

@dataclass
class EpisodeResult:
    events: list
    final_state: object
    final_belief: object
    status: str                 # goal | truncated | failed
    steps: int
    joint_cost: float
    human_cost: float
    samples: list | None = None  # literal modes: episodes per sampled command
    held: object = None          # pibar: the hypothesis it committed to


def _ev(doc, **extra):
    out = {"v": 1}
    out.update(doc)
    out.update(extra)
    return out


def _action_event(kind, t, action):
    return _ev({"type": kind, "t": t}, **action_to_wire(action))


def parse_script_entry(entry):
    """Script entries are {"action": wire action, "utterance": optional}."""
    action = action_from_wire(entry["action"])
    return action, entry.get("utterance")


def run_assistant(scenario, cfg=None, belief_cfg=None, human=None, rng=None,
                  backend=None):
    """Play one episode of the configured assistant on a scenario.

    The scenario's script is the instruction prefix: the principal's
    scripted actions and utterances with the assistant waiting and
    observing. After the prefix a simulated human takes over the
    principal and the assistant acts per cfg.mode. Costs are reported
    under the scenario's true profile.
    """
    cfg = cfg or AssistConfig()
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    if scenario.true_goal is None:
        raise ValueError("run_assistant needs a scenario with a true goal")
    g_true = GoalSpec(scenario.true_goal, scenario.true_profile)
    literal = cfg.mode.startswith("literal")
    belief = None if literal else belief_init(scenario,
                                              belief_cfg or BeliefConfig())

    state = scenario.initial_state()
    events = [_ev(scenario.state_to_wire(state))]
    joint_total = 0.0
    human_total = 0.0
    last_utterance = None

    def advance(a_h, a_r):
        nonlocal state, joint_total, human_total
        nxt = scenario.transition(state, a_h, a_r)
        joint_total += joint_cost(scenario.true_profile, a_h, a_r)
        human_total += action_cost(scenario.true_profile, HUMAN, a_h)
        state = nxt
        events.append(_ev(scenario.state_to_wire(state)))
        return nxt

    def observe(prev, nxt, a_h=None, a_r=None, utterance=None):
        nonlocal belief
        obs = Observation(t=prev.t, state_prev=prev, state_next=nxt,
                          human_action=a_h, robot_action=a_r,
                          utterance=utterance)
        belief = belief_update(belief, obs)
        if a_h is not None:
            events.append(_ev(belief_to_wire(belief, prev.t)))

    # -- scripted prefix ---------------------------------------------------
    for entry in scenario.script:
        a_h, utterance = parse_script_entry(entry)
        if utterance is not None:
            last_utterance = utterance
        prev = state
        events.append(_action_event("human_action", prev.t, a_h))
        if utterance is not None:
            events.append(_ev({"type": "utterance", "t": prev.t,
                               "text": utterance}))
        nxt = advance(a_h, WAIT)
        if belief is not None:
            observe(prev, nxt, a_h=a_h, utterance=utterance)
        prev = state
        events.append(_action_event("robot_action", prev.t, WAIT))
        nxt = advance(WAIT, WAIT)
        if belief is not None:
            observe(prev, nxt, a_r=WAIT)

    if literal:
        return _run_literal(scenario, cfg, rng, backend, g_true, state,
                            events, joint_total, human_total,
                            last_utterance)

    # -- assistance --------------------------------------------------------
    held = sample_hypothesis(belief, rng) if cfg.mode == "pibar" else None
    online = cfg.mode == "qmdp-online"
    if human is None:
        human = SimulatedHuman(scenario, goal=g_true, budget=cfg.planner_budget)
    history = []
    status = "truncated"
    while state.t <= scenario.max_steps:
        if scenario.is_goal(state, g_true):
            status = "goal"
            break
        prev = state
        if state.turn == HUMAN:
            a_h = human.step(state, history)
            events.append(_action_event("human_action", prev.t, a_h))
            nxt = advance(a_h, WAIT)
            if online:
                observe(prev, nxt, a_h=a_h)
        else:
            if cfg.mode == "pibar":
                a_r = pibar_action(belief, state, cfg=cfg, held=held)
                ties = []
            else:
                acts, scores = qmdp_scores(belief, state, cfg)
                k = int(np.argmin(scores))
                a_r = acts[k]
                ties = [acts[i] for i in np.flatnonzero(scores == scores[k])
                        if i != k]
            ev = _action_event("robot_action", prev.t, a_r)
            if ties:
                ev["ties"] = [action_to_wire(a) for a in ties]
            events.append(ev)
            history.append((prev, a_r))
            nxt = advance(WAIT, a_r)
            if online:
                observe(prev, nxt, a_r=a_r)
    else:
        if scenario.is_goal(state, g_true):
            status = "goal"

    p_true = goal_posterior(belief).get(g_true.gem)
    events.append(_ev({"type": "metric", "t": state.t, "values": {
        "status": status, "steps": state.t - 1,
        "joint_cost": round(joint_total, 6),
        "human_cost": round(human_total, 6),
        "p_true_goal": round(p_true, 6),
    }}))
    return EpisodeResult(events=events, final_state=state,
                         final_belief=belief, status=status,
                         steps=state.t - 1, joint_cost=joint_total,
                         human_cost=human_total, held=held)


def _run_literal(scenario, cfg, rng, backend, g_true, state, events,
                 joint_prefix, human_prefix, utterance):
    """Synthesize literal episodes from the post-prefix state.

    The first sampled command's first grounding is replayed into the
    trace; metrics average over the samples-by-groundings grid.
    """
    variant = "naive" if cfg.mode == "literal-naive" else "efficient"
    if utterance is None:
        sampled = [None]
    else:
        dist = literal_infer_commands(scenario, utterance, state,
                                      backend=backend)
        sampled = systematic_sample(dist, cfg.sample_count, rng) \
            if dist else [None]
    samples = [literal_assist_plan(scenario, c, state, g_true, variant, cfg)
               for c in sampled]

    first = samples[0][0]
    for agent, action in first.plan:
        kind = "human_action" if agent == HUMAN else "robot_action"
        events.append(_action_event(kind, state.t, action))
        a_h, a_r = (action, WAIT) if agent == HUMAN else (WAIT, action)
        state = scenario.transition(state, a_h, a_r)
        events.append(_ev(scenario.state_to_wire(state)))

    # per sample: success fraction and cost means over its groundings
    succ = np.array([np.mean([e.succeeded for e in eps]) for eps in samples])
    jc = np.array([np.mean([e.joint_cost for e in eps if e.succeeded])
                   if any(e.succeeded for e in eps) else np.nan
                   for eps in samples])
    hc = np.array([np.mean([e.human_cost for e in eps if e.succeeded])
                   if any(e.succeeded for e in eps) else np.nan
                   for eps in samples])
    m = len(samples)

    def _stats(x):
        if np.isnan(x).all():
            return None, None
        mean = float(np.nanmean(x))
        n = int(np.sum(~np.isnan(x)))
        err = float(np.nanstd(x, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return round(mean, 6), round(err, 6)

    jc_mean, jc_err = _stats(jc)
    hc_mean, hc_err = _stats(hc)
    status = "goal" if first.succeeded else "failed"
    joint_total = joint_prefix + first.joint_cost
    human_total = human_prefix + first.human_cost
    events.append(_ev({"type": "metric", "t": state.t, "values": {
        "status": status, "steps": state.t - 1, "samples": m,
        "success_rate": round(float(succ.mean()), 6),
        "joint_cost_mean": jc_mean, "joint_cost_stderr": jc_err,
        "human_cost_mean": hc_mean, "human_cost_stderr": hc_err,
    }}))
    return EpisodeResult(events=events, final_state=state, final_belief=None,
                         status=status, steps=state.t - 1,
                         joint_cost=joint_total, human_cost=human_total,
                         samples=samples)
