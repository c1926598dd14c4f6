"""Commands: schematic requests lifted from planned actions.

A command bundles up to K salient actions with color constraints over
typed variables, using indexicals for the agents ("me" = the human
speaker, "you" = the robot). Example serialization:

    (handover you me ?key1) where (iscolor ?key1 blue)

which converts to the goal formula

    (exists ((?key1 - key)) (and (pickedup-by robot ?key1)
                                 (has human ?key1)
                                 (iscolor ?key1 blue)))
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from clips.search import GoalFormula, ground_formula, groundings
from clips.world import HUMAN, ROBOT

ME, YOU = "me", "you"
_INDEXICAL = {HUMAN: ME, ROBOT: YOU}
_AGENT = {ME: HUMAN, YOU: ROBOT}

SALIENT_VERBS = ("pickup", "unlock", "handover")


@dataclass(frozen=True)
class Command:
    """actions use indexical agents and ?-variables; predicates constrain colors."""
    actions: tuple
    predicates: tuple = ()
    vars: tuple = ()

    def serialize(self):
        parts = ["(" + " ".join(a) + ")" for a in self.actions]
        s = " ".join(parts)
        if self.predicates:
            s += " where " + " ".join("(" + " ".join(p) + ")" for p in self.predicates)
        return s

    def __str__(self):
        return self.serialize()


@dataclass
class UtteranceConfig:
    p_speak: float = 0.05
    rollout_horizon: int = 50
    max_actions: int = 3
    eps: float = 0.01       # template miss mass
    floor: float = 1e-6     # likelihood for unmatched utterances / empty support


def extract_salient_actions(scenario, rollout):
    """Pickup, unlock and handover events from a rollout, in order, deduped.

    Returns ground tuples: (verb, agent, object ids...) with the unlock
    arguments ordered (key, door).
    """
    seen = []
    for agent, action in rollout:
        verb = action[0]
        if verb == "pickup":
            sal = ("pickup", agent, action[1])
        elif verb == "unlock":
            sal = ("unlock", agent, action[2], action[1])
        elif verb == "handover":
            sal = ("handover", action[1], action[2], action[3])
        else:
            continue
        if sal not in seen:
            seen.append(sal)
    return seen


def _keys_mentioned(action):
    verb = action[0]
    if verb == "pickup":
        return {action[2]}
    if verb == "unlock":
        return {action[2]}
    if verb == "handover":
        return {action[3]}
    return set()


def lift_command(scenario, actions):
    """Replace agents with indexicals and objects with typed variables."""
    var_of = {}
    counters = {}
    preds = []
    vars_ = []

    def var_for(obj_id):
        if obj_id in var_of:
            return var_of[obj_id]
        it = scenario.by_id[obj_id]
        counters[it.kind] = counters.get(it.kind, 0) + 1
        v = f"?{it.kind}{counters[it.kind]}"
        var_of[obj_id] = v
        vars_.append((v, it.kind))
        preds.append(("iscolor", v, it.color))
        return v

    lifted = []
    for a in actions:
        verb = a[0]
        if verb == "pickup":
            lifted.append(("pickup", _INDEXICAL[a[1]], var_for(a[2])))
        elif verb == "unlock":
            lifted.append(("unlock", _INDEXICAL[a[1]], var_for(a[2]), var_for(a[3])))
        elif verb == "handover":
            lifted.append(("handover", _INDEXICAL[a[1]], _INDEXICAL[a[2]], var_for(a[3])))
        else:
            raise ValueError(f"not a salient action: {a!r}")
    return Command(actions=tuple(lifted), predicates=tuple(preds), vars=tuple(vars_))


def enumerate_commands(scenario, salient, cfg=None):
    """All lifted commands over subsets of the salient actions.

    Pruned: subsets larger than max_actions, subsets with more than two
    distinct verbs, subsets where every action belongs to the speaker
    (nothing is asked of the assistant), and dependent chains (two actions
    touching the same key).
    """
    cfg = cfg or UtteranceConfig()
    out = {}
    n = len(salient)
    for size in range(1, min(cfg.max_actions, n) + 1):
        for combo in itertools.combinations(range(n), size):
            acts = [salient[i] for i in combo]
            if all(_speaker_only(a) for a in acts):
                continue
            if len({a[0] for a in acts}) > 2:
                continue
            keys = [k for a in acts for k in _keys_mentioned(a)
                    if scenario.by_id[k].kind == "key"]
            if len(keys) != len(set(keys)):
                continue  # dependent chain, e.g. pickup then hand over the same key
            cmd = lift_command(scenario, acts)
            out.setdefault(cmd, None)
    return list(out)


def _speaker_only(action):
    # the acting agent (giver, for handovers) is slot 1
    return action[1] == HUMAN


def command_to_goal_formula(scenario, command, grounding="lifted"):
    """Goal formula capturing a command's intended effects.

    pickup(a, x)      -> pickedup-by(a, x)
    handover(a, b, x) -> pickedup-by(a, x) and has(b, x)
    unlock(a, k, d)   -> unlocked(d)

    plus the command's color constraints. grounding="lifted" returns one
    existential formula; "naive-ground" returns the tuple of its ground
    instantiations (distinct objects per variable).
    """
    conj = []
    for a in command.actions:
        verb = a[0]
        if verb == "pickup":
            conj.append(("pickedup-by", _resolve(a[1]), a[2]))
        elif verb == "handover":
            conj.append(("pickedup-by", _resolve(a[1]), a[3]))
            conj.append(("has", _resolve(a[2]), a[3]))
        elif verb == "unlock":
            conj.append(("unlocked", a[3]))
        else:
            raise ValueError(f"unknown command verb {verb!r}")
    conj.extend(command.predicates)
    lifted = GoalFormula(vars=tuple(command.vars), conjuncts=tuple(conj))
    if grounding == "lifted":
        return lifted
    if grounding == "naive-ground":
        return tuple(ground_formula(lifted, b) for b in groundings(scenario, lifted))
    raise ValueError(f"grounding must be 'lifted' or 'naive-ground', got {grounding!r}")


def _resolve(agent):
    return _AGENT.get(agent, agent)


# -- canonical surface forms -------------------------------------------------

def _descriptor(scenario, command, term):
    """Natural-language description of a variable or ground item."""
    if term.startswith("?"):
        kind = next((t for v, t in command.vars if v == term), "thing")
        color = next((p[2] for p in command.predicates
                      if p[0] == "iscolor" and p[1] == term), None)
    else:
        it = scenario.by_id[term]
        kind, color = it.kind, it.color
    return f"{color} {kind}" if color else kind


# Surface verbs accepted per command verb; the first form is canonical.
_PICKUP_FORMS = ("pick up", "get", "grab")
_UNLOCK_FORMS = ("unlock", "open")
_HANDOVER_FORMS = ("hand", "give", "pass")


def render_clause_variants(scenario, command, action):
    """All accepted surface forms for one clause, canonical phrasing first."""
    verb = action[0]
    if verb == "pickup":
        desc = _descriptor(scenario, command, action[2])
        head = "can you" if action[1] == YOU else "i will"
        return [f"{head} {v} the {desc}" for v in _PICKUP_FORMS]
    if verb == "unlock":
        desc = _descriptor(scenario, command, action[3])
        head = "can you" if action[1] == YOU else "i will"
        return [f"{head} {v} the {desc}" for v in _UNLOCK_FORMS]
    if verb == "handover":
        desc = _descriptor(scenario, command, action[3])
        if action[1] == YOU:
            return [f"can you {v} me the {desc}" for v in _HANDOVER_FORMS]
        return [f"i will {v} you the {desc}" for v in _HANDOVER_FORMS]
    raise ValueError(f"unknown verb {verb!r}")


def render_clause(scenario, command, action):
    return render_clause_variants(scenario, command, action)[0]


def render_command(scenario, command):
    """The canonical utterance for a command; clauses joined with ', and '."""
    return ", and ".join(render_clause(scenario, command, a)
                         for a in command.actions)


def normalize_utterance(text):
    out = []
    for ch in text.lower():
        if ch.isalnum() or ch.isspace():
            out.append(ch)
        elif ch in "'’":
            continue
        else:
            out.append(" ")
    return " ".join("".join(out).split())
