"""Cooperative language-guided inverse plan search (CLIPS) for gridworld assistance."""

from clips.assistance import (
    ASSIST_MODES,
    AssistConfig,
    EpisodeResult,
    LiteralEpisode,
    literal_assist_plan,
    literal_infer_commands,
    pibar_action,
    qmdp_action,
    run_assistant,
    sample_hypothesis,
    systematic_sample,
)
from clips.beliefs import (
    Belief,
    BeliefConfig,
    BetaGrid,
    DegenerateBeliefError,
    Hypothesis,
    Observation,
    belief_init,
    belief_update,
    external_posterior_update,
    goal_posterior,
)
from clips.humans import SimulatedHuman, simulated_human_step
from clips.world import (
    COST_PROFILES,
    GoalSpec,
    IllegalActionError,
    Item,
    Scenario,
    ScenarioError,
    State,
    action_cost,
    parse_scenario,
)

__all__ = [
    "ASSIST_MODES",
    "AssistConfig",
    "Belief",
    "BeliefConfig",
    "EpisodeResult",
    "LiteralEpisode",
    "SimulatedHuman",
    "literal_assist_plan",
    "literal_infer_commands",
    "pibar_action",
    "qmdp_action",
    "run_assistant",
    "sample_hypothesis",
    "simulated_human_step",
    "systematic_sample",
    "BetaGrid",
    "COST_PROFILES",
    "DegenerateBeliefError",
    "Hypothesis",
    "Observation",
    "belief_init",
    "belief_update",
    "external_posterior_update",
    "goal_posterior",
    "GoalSpec",
    "IllegalActionError",
    "Item",
    "Scenario",
    "ScenarioError",
    "State",
    "action_cost",
    "parse_scenario",
]
