"""Utterance likelihood backends.

The template backend matches normalized utterances against each command's
surface forms (the cross product of per-clause verb variants, e.g. "pick
up"/"get"/"grab"): a hit scores log((1 - eps) / n_templates), a miss
scores log(floor). The LLM backend scores the utterance as a continuation
of a few-shot prompt via an HTTP scoring endpoint; responses are cached
per (prompt, continuation) and transport failures can fall back to the
template backend.
"""
from __future__ import annotations

import itertools
import math
import os
import time
from importlib import resources

import httpx
import numpy as np

from clips.commands import (
    UtteranceConfig, enumerate_commands, extract_salient_actions,
    normalize_utterance, render_clause_variants,
)

ENV_BASE_URL = "CLIPS_LLM_BASE_URL"
ENV_API_KEY = "CLIPS_LLM_API_KEY"


class ScorerError(RuntimeError):
    pass


class LlmUnavailableError(ScorerError):
    """Transient transport trouble: connection, timeout, 429, 5xx."""


class LlmProtocolError(ScorerError):
    """The endpoint answered with something other than the scoring schema."""


class TemplateScorer:
    def __init__(self, eps=0.01, floor=1e-6):
        self.eps = eps
        self.floor = floor

    def templates(self, scenario, command):
        per_clause = [render_clause_variants(scenario, command, a)
                      for a in command.actions]
        return {normalize_utterance(", and ".join(parts))
                for parts in itertools.product(*per_clause)}

    def score_commands(self, scenario, utterance, commands):
        """log P(u | c) for each command."""
        u = normalize_utterance(utterance)
        out = []
        for c in commands:
            ts = self.templates(scenario, c)
            if u in ts:
                out.append(math.log((1.0 - self.eps) / len(ts)))
            else:
                out.append(math.log(self.floor))
        return out


def load_examples(path=None):
    """(command, utterance) pairs for few-shot prompting."""
    if path is None:
        text = resources.files("clips").joinpath("data/fewshot_examples.txt").read_text()
    else:
        with open(path) as f:
            text = f.read()
    pairs = []
    cmd = None
    for line in text.splitlines():
        line = line.strip()
        if line.startswith("Command:"):
            cmd = line[len("Command:"):].strip()
        elif line.startswith("Utterance:") and cmd is not None:
            pairs.append((cmd, line[len("Utterance:"):].strip()))
            cmd = None
    return pairs


def build_prompt(examples, command_str):
    lines = []
    for c, u in examples:
        lines.append(f"Command: {c}")
        lines.append(f"Utterance: {u}")
        lines.append("")
    lines.append(f"Command: {command_str}")
    lines.append("Utterance:")
    return "\n".join(lines)


class LlmScorer:
    """Scores utterances with a remote likelihood endpoint.

    POST {base}/v1/score with {"prompt": str, "continuation": str} and get
    {"token_logprobs": [float, ...]} back; the utterance score is the sum.
    """

    def __init__(self, base_url=None, api_key=None, examples=None,
                 timeout=30.0, retries=2, fallback_to_template=False,
                 transport=None, eps=0.01, floor=1e-6):
        self.base_url = (base_url or os.environ.get(ENV_BASE_URL) or "").rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(ENV_API_KEY)
        self.examples = examples if examples is not None else load_examples()
        self.retries = retries
        self.fallback = TemplateScorer(eps, floor) if fallback_to_template else None
        if not self.base_url and self.fallback is None:
            raise ScorerError(f"no {ENV_BASE_URL} configured and no template fallback")
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        self._client = httpx.Client(timeout=timeout, headers=headers,
                                    transport=transport)
        self._cache = {}

    def close(self):
        self._client.close()

    def _score_one(self, prompt, continuation):
        key = (prompt, continuation)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        body = {"prompt": prompt, "continuation": continuation}
        last = None
        for attempt in range(self.retries + 1):
            try:
                resp = self._client.post(self.base_url + "/v1/score", json=body)
            except httpx.TransportError as e:
                last = LlmUnavailableError(str(e))
            else:
                if resp.status_code == 429 or resp.status_code >= 500:
                    last = LlmUnavailableError(f"status {resp.status_code}")
                elif resp.status_code != 200:
                    raise LlmProtocolError(f"status {resp.status_code}: {resp.text[:200]}")
                else:
                    try:
                        data = resp.json()
                        lps = data["token_logprobs"]
                        score = float(sum(lps))
                    except (ValueError, KeyError, TypeError) as e:
                        raise LlmProtocolError(f"bad response body: {e}") from None
                    self._cache[key] = score
                    return score
            if attempt < self.retries:
                time.sleep(0.05 * (attempt + 1))
        raise last

    def score_commands(self, scenario, utterance, commands):
        continuation = " " + utterance.strip()
        out = []
        try:
            for c in commands:
                prompt = build_prompt(self.examples, c.serialize())
                out.append(self._score_one(prompt, continuation))
        except LlmUnavailableError:
            if self.fallback is None:
                raise
            return self.fallback.score_commands(scenario, utterance, commands)
        return out


def utterance_likelihood(utterance, state, handle, cfg=None, backend=None):
    """Mixture likelihood P(u | s, policy) under a uniform command prior.

    Empty command support returns the configured floor so language alone
    never annihilates a hypothesis.
    """
    cfg = cfg or UtteranceConfig()
    backend = backend or TemplateScorer(cfg.eps, cfg.floor)
    scenario = handle.scenario
    roll = handle.rollout(state, cfg.rollout_horizon)
    salient = extract_salient_actions(scenario, roll)
    commands = enumerate_commands(scenario, salient, cfg)
    if not commands:
        return cfg.floor
    logs = np.array(backend.score_commands(scenario, utterance, commands))
    m = logs.max()
    return float(np.exp(m) * np.exp(logs - m).sum() / len(commands))


def command_prior(state, handle, cfg=None):
    """Uniform prior support: the commands a hypothesis could be voicing."""
    cfg = cfg or UtteranceConfig()
    roll = handle.rollout(state, cfg.rollout_horizon)
    salient = extract_salient_actions(handle.scenario, roll)
    return enumerate_commands(handle.scenario, salient, cfg)
