"""Bayesian goal inference over joint hypotheses (goal gem, cost profile).

Each hypothesis carries its own real-time planner and a discretized
posterior over the human's rationality beta, updated analytically
(Rao-Blackwellized) instead of sampled. Observed human actions are scored
against the hypothesis's soft-min policy marginalized over beta; observed
utterances are scored through the command mixture. The assistant's own
actions enter only through the state they produce: an intervention, not
evidence. external_posterior_update is the observer's version that does
condition on them.

Weights are kept in log space and normalized once per update. A Belief is
never mutated after it is returned; updates produce a new Belief that
shares the (stateful) planner handles.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.special import logsumexp

from clips.commands import UtteranceConfig
from clips.planner import PlannerConfig, PolicyHandle
from clips.scoring import TemplateScorer, utterance_likelihood
from clips.world import HUMAN, WAIT, GoalSpec, IllegalActionError, all_hypotheses

MODES = ("multimodal", "action-only", "language-only")


class DegenerateBeliefError(RuntimeError):
    """Every hypothesis has zero posterior mass."""


class BetaGrid:
    """Discrete grid over the rationality parameter with a fixed prior."""

    def __init__(self, values, log_prior=None):
        self.values = np.asarray(values, dtype=float)
        if log_prior is None:
            # Gamma(0.5, scale 1) density at the grid points, normalized
            dens = stats.gamma.pdf(self.values, a=0.5, scale=1.0)
            log_prior = np.log(dens)
        log_prior = np.asarray(log_prior, dtype=float)
        self.log_prior = log_prior - logsumexp(log_prior)

    @classmethod
    def default(cls):
        # 33 log-spaced values, 2^-3 through 2^5
        return cls(np.exp2(-3.0 + 0.25 * np.arange(33)))

    def __len__(self):
        return len(self.values)


@dataclass
class Hypothesis:
    goal: GoalSpec
    policy: PolicyHandle
    grid: BetaGrid
    log_weight: float
    beta_log_post: np.ndarray

    @property
    def weight(self):
        return math.exp(self.log_weight)

    @property
    def beta_posterior(self):
        return np.exp(self.beta_log_post)

    @property
    def beta_mean(self):
        return float(self.beta_posterior @ self.grid.values)


@dataclass
class Observation:
    """One turn's evidence: the state it happened in and what was seen."""
    t: int
    state_prev: object
    state_next: object
    human_action: tuple | None = None
    robot_action: tuple | None = None
    utterance: str | None = None
    spoke: bool = None

    def __post_init__(self):
        if self.spoke is None:
            self.spoke = self.utterance is not None
        if self.spoke != (self.utterance is not None):
            raise ValueError("utterance must be present iff spoke")


@dataclass
class BeliefConfig:
    mode: str = "multimodal"
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    utterance: UtteranceConfig = field(default_factory=UtteranceConfig)
    beta_grid: BetaGrid = field(default_factory=BetaGrid.default)
    scorer: object = None  # utterance backend; template by default

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.scorer is None:
            self.scorer = TemplateScorer(self.utterance.eps, self.utterance.floor)


@dataclass
class Belief:
    scenario: object
    hypotheses: list
    cfg: BeliefConfig
    last_factors: list = None  # per-hypothesis log factors of the update that produced this belief

    @property
    def mode(self):
        return self.cfg.mode

    def weights(self):
        w = np.array([h.log_weight for h in self.hypotheses])
        return np.exp(w)


def belief_init(scenario, cfg=None):
    """Uniform prior over (goal gem, cost profile); one planner per hypothesis.

    Each planner gets one real-time update at the initial state so the
    first observation can be scored from refined values.
    """
    cfg = cfg or BeliefConfig()
    goals = all_hypotheses(scenario)
    n = len(goals)
    if n == 0:
        raise ValueError("scenario declares no goals")
    s1 = scenario.initial_state()
    hyps = []
    for g in goals:
        policy = PolicyHandle(scenario, g, cfg.planner)
        policy.update(s1)
        hyps.append(Hypothesis(
            goal=g,
            policy=policy,
            grid=cfg.beta_grid,
            log_weight=-math.log(n),
            beta_log_post=cfg.beta_grid.log_prior.copy(),
        ))
    return Belief(scenario=scenario, hypotheses=hyps, cfg=cfg)


def _action_probs_by_beta(policy, state, betas):
    """Matrix P[j, i] = soft-min probability of joint action i at beta_j."""
    joint, q = policy.action_values(state)
    q = np.asarray(q, dtype=float)
    finite = np.isfinite(q)
    n = len(joint)
    if not finite.any():
        return joint, np.full((len(betas), n), 1.0 / n)
    qmin = q[finite].min()
    logits = -np.outer(betas, np.where(finite, q - qmin, 0.0))
    logits[:, ~finite] = -np.inf
    p = np.exp(logits)
    p /= p.sum(axis=1, keepdims=True)
    return joint, p


def _marginal_joint_likelihood(policy, beta_log_post, state, joint_action, grid):
    """Likelihood of one joint action, marginalized over the beta grid.

    Returns (likelihood, updated beta log posterior). Zero-probability
    actions leave the posterior untouched; the caller zeroes the weight.
    """
    joint, p = _action_probs_by_beta(policy, state, grid.values)
    try:
        idx = joint.index(joint_action)
    except ValueError:
        raise IllegalActionError(f"action {joint_action} is not legal here")
    per_beta = p[:, idx]
    like = float(np.exp(beta_log_post) @ per_beta)
    if like <= 0.0:
        return 0.0, beta_log_post
    with np.errstate(divide="ignore"):
        new_log = beta_log_post + np.log(per_beta)
    return like, new_log - logsumexp(new_log)


def marginal_action_likelihood(hypothesis, state, a_h):
    """P(aH | s, policy) marginalized over beta, plus the beta update.

    The hypothesis's policy must already be updated at `state` (the belief
    update protocol guarantees this); it must be the human's turn.
    """
    if state.turn != HUMAN:
        raise ValueError("marginal_action_likelihood scores human actions")
    return _marginal_joint_likelihood(hypothesis.policy, hypothesis.beta_log_post,
                                      state, (a_h, WAIT), hypothesis.grid)


def _hypothesis_factors(hypothesis, obs, cfg, scenario, include_robot_action):
    """Log factors for one hypothesis on one observation.

    Returns (factors dict, beta posterior or None). The transition factor
    is 0/1; speak is constant across hypotheses (kept so the update stays
    line-for-line traceable); utterance and action carry the evidence.
    """
    factors = {"transition": 0.0, "speak": 0.0, "utterance": 0.0, "action": 0.0}
    beta_update = None
    s = obs.state_prev
    a_h = obs.human_action if obs.human_action is not None else WAIT
    a_r = obs.robot_action if obs.robot_action is not None else WAIT
    try:
        predicted = scenario.transition(s, a_h, a_r)
        consistent = predicted.fingerprint() == obs.state_next.fingerprint()
    except IllegalActionError:
        consistent = False
    if not consistent:
        factors["transition"] = -math.inf
        return factors, beta_update

    p = cfg.utterance.p_speak
    factors["speak"] = math.log(p if obs.spoke else 1.0 - p)

    if obs.spoke and cfg.mode != "action-only":
        like = utterance_likelihood(obs.utterance, s, hypothesis.policy,
                                    cfg.utterance, cfg.scorer)
        factors["utterance"] = math.log(like) if like > 0 else -math.inf

    if cfg.mode != "language-only":
        if obs.human_action is not None:
            like, beta_update = marginal_action_likelihood(hypothesis, s,
                                                           obs.human_action)
            factors["action"] = math.log(like) if like > 0 else -math.inf
        elif include_robot_action and obs.robot_action is not None:
            like, beta_update = _marginal_joint_likelihood(
                hypothesis.policy, hypothesis.beta_log_post, s,
                (WAIT, obs.robot_action), hypothesis.grid)
            factors["action"] = math.log(like) if like > 0 else -math.inf
    return factors, beta_update


def _apply_update(belief, obs, include_robot_action):
    cfg = belief.cfg
    scenario = belief.scenario
    new_hyps = []
    all_factors = []
    for h in belief.hypotheses:
        h.policy.update(obs.state_next)
        factors, beta_update = _hypothesis_factors(h, obs, cfg, scenario,
                                                   include_robot_action)
        all_factors.append(factors)
        lw = h.log_weight + sum(factors.values())
        beta = h.beta_log_post if beta_update is None or not math.isfinite(lw) \
            else beta_update
        new_hyps.append(Hypothesis(goal=h.goal, policy=h.policy, grid=h.grid,
                                   log_weight=lw, beta_log_post=beta))
    logs = np.array([h.log_weight for h in new_hyps])
    if not np.isfinite(logs).any():
        raise DegenerateBeliefError(
            "no hypothesis is consistent with the observation")
    z = logsumexp(logs[np.isfinite(logs)])
    for h in new_hyps:
        if math.isfinite(h.log_weight):
            h.log_weight -= z
    return Belief(scenario=scenario, hypotheses=new_hyps, cfg=cfg,
                  last_factors=all_factors)


def belief_update(belief, obs, cfg=None):
    """Assistant's internal update: own actions are interventions.

    The robot's action shapes the next state (and must be consistent with
    it) but contributes no likelihood factor.
    """
    if cfg is not None:
        belief = Belief(belief.scenario, belief.hypotheses, cfg)
    return _apply_update(belief, obs, include_robot_action=False)


def external_posterior_update(belief, obs, cfg=None):
    """Observer's update: robot actions are evidence like any other."""
    if cfg is not None:
        belief = Belief(belief.scenario, belief.hypotheses, cfg)
    return _apply_update(belief, obs, include_robot_action=True)


def goal_posterior(belief):
    """Marginal over goal gems."""
    out = {}
    for h in belief.hypotheses:
        out[h.goal.gem] = out.get(h.goal.gem, 0.0) + h.weight
    return out


def belief_to_wire(belief, t):
    goals = goal_posterior(belief)
    hyps = [{
        "goal": h.goal.gem,
        "profile": h.goal.cost_profile,
        "w": round(h.weight, 6),
        "beta_mean": round(h.beta_mean, 4),
    } for h in belief.hypotheses]
    return {
        "type": "belief",
        "t": t,
        "goals": {g: round(v, 6) for g, v in sorted(goals.items())},
        "hypotheses": hyps,
    }
