import json
import math

import httpx
import pytest

from clips.commands import UtteranceConfig, lift_command
from clips.planner import PlannerConfig, PolicyHandle
from clips.scoring import (
    LlmProtocolError, LlmScorer, LlmUnavailableError, TemplateScorer,
    build_prompt, load_examples, utterance_likelihood,
)
from clips.world import HUMAN, ROBOT, GoalSpec
from conftest import make_scenario
from test_commands import lang_scenario


def test_template_exact_match_score():
    sc = lang_scenario()
    cmd = lift_command(sc, [("handover", ROBOT, HUMAN, "a")])
    scorer = TemplateScorer()
    [score] = scorer.score_commands(sc, "Can you hand me the red key?", [cmd])
    # hand/give/pass variants split the matched mass three ways
    assert score == pytest.approx(math.log(0.99 / 3))
    [giv] = scorer.score_commands(sc, "can you give me the red key", [cmd])
    assert giv == score
    [miss] = scorer.score_commands(sc, "bring me a sandwich", [cmd])
    assert miss == pytest.approx(math.log(1e-6))


def test_template_match_outweighs_floor_mass():
    # one matched command dominates 10^4 floor-scored ones
    assert 0.99 > 1e4 * 1e-6


def test_matching_commands_score_equally():
    sc = lang_scenario()
    a = lift_command(sc, [("pickup", ROBOT, "a")])
    b = lift_command(sc, [("pickup", ROBOT, "b")])   # same surface form
    c = lift_command(sc, [("pickup", ROBOT, "c")])   # blue, different surface
    scorer = TemplateScorer()
    sa, sb, sc_ = scorer.score_commands(sc, "can you pick up the red key", [a, b, c])
    assert sa == sb > sc_


def test_load_examples_bundled():
    pairs = load_examples()
    assert len(pairs) == 18
    assert all(cmd.startswith("(") and utt for cmd, utt in pairs)


def test_build_prompt_shape():
    prompt = build_prompt([("(pickup you ?key1)", "get the key")], "(unlock you ?key1 ?door1)")
    assert prompt.endswith("Command: (unlock you ?key1 ?door1)\nUtterance:")
    assert "Utterance: get the key" in prompt


def _mock_llm(handler):
    return httpx.MockTransport(handler)


def test_llm_scorer_scores_and_caches():
    calls = []

    def handler(request):
        body = json.loads(request.content)
        calls.append(body)
        assert request.url.path == "/v1/score"
        assert request.headers["authorization"] == "Bearer sekrit"
        n = len(body["continuation"].split())
        return httpx.Response(200, json={"token_logprobs": [-0.5] * n})

    sc = lang_scenario()
    scorer = LlmScorer(base_url="http://llm.test", api_key="sekrit",
                       examples=[("(pickup you ?key1)", "get it")],
                       transport=_mock_llm(handler))
    cmd = lift_command(sc, [("pickup", ROBOT, "a")])
    [s1] = scorer.score_commands(sc, "can you pick up the red key", [cmd])
    assert s1 == pytest.approx(-0.5 * 7)
    [s2] = scorer.score_commands(sc, "can you pick up the red key", [cmd])
    assert s2 == s1
    assert len(calls) == 1  # cached


def test_llm_scorer_retries_then_raises():
    attempts = []

    def handler(request):
        attempts.append(1)
        return httpx.Response(503, text="overloaded")

    scorer = LlmScorer(base_url="http://llm.test", retries=2,
                       examples=[], transport=_mock_llm(handler))
    sc = lang_scenario()
    cmd = lift_command(sc, [("pickup", ROBOT, "a")])
    with pytest.raises(LlmUnavailableError):
        scorer.score_commands(sc, "hello", [cmd])
    assert len(attempts) == 3


def test_llm_scorer_protocol_error_not_retried():
    attempts = []

    def handler(request):
        attempts.append(1)
        return httpx.Response(200, json={"nope": []})

    scorer = LlmScorer(base_url="http://llm.test", examples=[],
                       transport=_mock_llm(handler))
    sc = lang_scenario()
    cmd = lift_command(sc, [("pickup", ROBOT, "a")])
    with pytest.raises(LlmProtocolError):
        scorer.score_commands(sc, "hello", [cmd])
    assert len(attempts) == 1


def test_llm_scorer_falls_back_to_template():
    def handler(request):
        raise httpx.ConnectError("no route")

    scorer = LlmScorer(base_url="http://llm.test", retries=1,
                       examples=[], fallback_to_template=True,
                       transport=_mock_llm(handler))
    sc = lang_scenario()
    cmd = lift_command(sc, [("handover", ROBOT, HUMAN, "a")])
    [s] = scorer.score_commands(sc, "can you hand me the red key", [cmd])
    assert s == pytest.approx(math.log(0.99 / 3))


def test_utterance_likelihood_mixture(corridor):
    goal = GoalSpec("g", 0)
    handle = PolicyHandle(corridor, goal, PlannerConfig(time_limit=None))
    s = corridor.initial_state()
    cfg = UtteranceConfig()
    like = utterance_likelihood("can you pick up the red key", s, handle, cfg)
    # the optimal plan has the robot fetch the key, so some enumerated
    # command matches the canonical surface exactly (one of three variants)
    assert like > 0.99 / 3 / 20
    off = utterance_likelihood("paint the town green", s, handle, cfg)
    assert off == pytest.approx(1e-6, rel=0.5)
    assert like > off


def test_utterance_likelihood_empty_support_floor():
    # human is boxed in with the gem: rollout has pickup by human only,
    # every subset is speaker-only, so support is empty
    sc = make_scenario(
        grid=["####", "#hg#", "#r.#", "####"],
        legend={"g": ["gem", "red"]},
        goals=["g"],
    )
    handle = PolicyHandle(sc, GoalSpec("g", 0), PlannerConfig(time_limit=None))
    like = utterance_likelihood("anything at all", sc.initial_state(), handle)
    assert like == pytest.approx(1e-6)
