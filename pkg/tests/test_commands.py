from clips.commands import (
    Command, UtteranceConfig, command_to_goal_formula, enumerate_commands,
    extract_salient_actions, lift_command, normalize_utterance, render_command,
)
from clips.world import HUMAN, ROBOT
from conftest import make_scenario


def lang_scenario():
    return make_scenario(
        grid=[
            "##########",
            "#h.a..D..#",
            "#..b...g1.#",
            "#r.c..E.g2#",
            "##########",
        ],
        legend={
            "a": ["key", "red"], "b": ["key", "red"], "c": ["key", "blue"],
            "D": ["door", "red"], "E": ["door", "blue"],
            "g1": ["gem", "yellow"], "g2": ["gem", "green"],
        },
        goals=["g1", "g2"],
    )


def test_extract_salient_from_rollout():
    sc = lang_scenario()
    roll = [
        (ROBOT, ("left",)),
        (ROBOT, ("pickup", "a")),
        (HUMAN, ("up",)),
        (ROBOT, ("unlock", "D", "a")),
        (HUMAN, ("pickup", "g1")),
        (ROBOT, ("wait",)),
        (ROBOT, ("pickup", "a")),  # duplicate is dropped
    ]
    sal = extract_salient_actions(sc, roll)
    assert sal == [
        ("pickup", ROBOT, "a"),
        ("unlock", ROBOT, "a", "D"),
        ("pickup", HUMAN, "g1"),
    ]


def test_lift_uses_indexicals_and_typed_vars():
    sc = lang_scenario()
    cmd = lift_command(sc, [("handover", ROBOT, HUMAN, "c")])
    assert cmd.actions == (("handover", "you", "me", "?key1"),)
    assert cmd.predicates == (("iscolor", "?key1", "blue"),)
    assert cmd.vars == (("?key1", "key"),)
    assert cmd.serialize() == "(handover you me ?key1) where (iscolor ?key1 blue)"


def test_lift_shares_vars_per_object():
    sc = lang_scenario()
    cmd = lift_command(sc, [("pickup", ROBOT, "a"), ("unlock", ROBOT, "b", "D")])
    assert cmd.actions == (("pickup", "you", "?key1"),
                           ("unlock", "you", "?key2", "?door1"))
    assert ("iscolor", "?door1", "red") in cmd.predicates


def test_enumerate_prunes_speaker_only_subsets():
    sc = lang_scenario()
    sal = [("pickup", HUMAN, "g1")]
    assert enumerate_commands(sc, sal) == []
    # but a mixed subset survives
    sal = [("pickup", HUMAN, "g1"), ("unlock", ROBOT, "a", "D")]
    cmds = enumerate_commands(sc, sal)
    assert len(cmds) == 2  # the unlock alone, and gem+unlock jointly
    texts = {c.serialize() for c in cmds}
    assert "(unlock you ?key1 ?door1) where (iscolor ?key1 red) (iscolor ?door1 red)" in texts


def test_enumerate_prunes_dependent_chains():
    sc = lang_scenario()
    sal = [("pickup", ROBOT, "a"), ("handover", ROBOT, HUMAN, "a")]
    cmds = enumerate_commands(sc, sal)
    # singles survive; the pair shares key "a" and is dropped
    assert len(cmds) == 2
    assert all(len(c.actions) == 1 for c in cmds)


def test_enumerate_prunes_three_verbs_and_dedupes():
    sc = lang_scenario()
    sal = [("pickup", ROBOT, "a"), ("pickup", ROBOT, "b"),
           ("unlock", ROBOT, "c", "E"), ("handover", ROBOT, HUMAN, "b")]
    cmds = enumerate_commands(sc, sal, UtteranceConfig(max_actions=3))
    for c in cmds:
        assert len({a[0] for a in c.actions}) <= 2
    # pickup a and pickup b lift to the same schematic command: deduped
    singles = [c for c in cmds if c.actions == (("pickup", "you", "?key1"),)
               and c.predicates == (("iscolor", "?key1", "red"),)]
    assert len(singles) == 1


def test_command_to_goal_formula_handover():
    sc = lang_scenario()
    cmd = lift_command(sc, [("handover", ROBOT, HUMAN, "c")])
    f = command_to_goal_formula(sc, cmd, "lifted")
    assert f.vars == (("?key1", "key"),)
    assert ("pickedup-by", "robot", "?key1") in f.conjuncts
    assert ("has", "human", "?key1") in f.conjuncts
    assert ("iscolor", "?key1", "blue") in f.conjuncts


def test_command_to_goal_formula_naive_ground():
    sc = lang_scenario()
    cmd = lift_command(sc, [("pickup", ROBOT, "a")])
    grounds = command_to_goal_formula(sc, cmd, "naive-ground")
    targets = {g.conjuncts[0][2] for g in grounds}
    assert targets == {"a", "b"}  # both red keys
    assert all(not g.vars for g in grounds)


def test_unlock_formula_ignores_key_identity():
    sc = lang_scenario()
    cmd = lift_command(sc, [("unlock", ROBOT, "a", "D")])
    f = command_to_goal_formula(sc, cmd, "lifted")
    heads = [c[0] for c in f.conjuncts]
    assert "unlocked" in heads and "pickedup-by" not in heads


def test_render_command_surfaces():
    sc = lang_scenario()
    cases = [
        ([("pickup", ROBOT, "a")], "can you pick up the red key"),
        ([("pickup", HUMAN, "g1")], "i will pick up the yellow gem"),
        (
            [("handover", ROBOT, HUMAN, "c")],
            "can you hand me the blue key",
        ),
        ([("unlock", ROBOT, "a", "D")], "can you unlock the red door"),
        (
            [("pickup", HUMAN, "c"), ("unlock", ROBOT, "a", "D")],
            "i will pick up the blue key, and can you unlock the red door",
        ),
    ]
    for actions, expected in cases:
        assert render_command(sc, lift_command(sc, actions)) == expected


def test_normalize_utterance():
    assert normalize_utterance("Can you   hand me the RED key?!") == \
        "can you hand me the red key"
    assert normalize_utterance("i'll do it") == "ill do it"
