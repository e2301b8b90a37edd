import itertools
import json

import pytest

from bilogic.semantics import (
    Countermodel,
    EnumerationBudgetExceeded,
    Frame,
    Model,
    PCM,
    check_frame,
    check_model,
    check_pcm,
    countermodel,
    enumerate_models,
    enumerate_pcms,
    is_bifunctorial,
    model_from_dict,
    model_to_dict,
    pcm_to_frame,
    refuting_world,
    satisfies,
    satisfies_bunch,
    valid_in,
)
from bilogic.syntax import (
    ADD_UNIT,
    Atom,
    Comma,
    Leaf,
    Semi,
    Star,
    And,
    TOP,
    BOTTOM,
    parse_formula,
    parse_sequent,
    sequent_formulas,
)

from corpus import NONTHEOREM_TEXTS


def one_element_pcm() -> PCM:
    return PCM(("w0",), "w0", "w0", (("w0",),), frozenset({("w0", "w0")}))


def test_degenerate_frame_checks():
    fr = pcm_to_frame(one_element_pcm())
    ok, bad = check_frame(fr)
    assert ok, bad
    assert fr.rel == frozenset({("w0", "w0", "w0")})


def test_missing_unitality_detected():
    fr = pcm_to_frame(one_element_pcm())
    broken = Frame(fr.worlds, fr.e, fr.pi, fr.leq, frozenset())
    ok, bad = check_frame(broken)
    assert not ok and any("unitality" in b for b in bad)


def test_pcm_frames_pass_checker():
    for pcm in itertools.islice(enumerate_pcms(3), 40):
        ok, bad = check_frame(pcm_to_frame(pcm))
        assert ok, bad


def test_satisfaction_clauses():
    m = Model(pcm_to_frame(one_element_pcm()), {"w0": frozenset({"p"})})
    assert satisfies(m, "w0", TOP)
    assert satisfies(m, m.frame.pi, BOTTOM)
    assert satisfies(m, "w0", Star(Atom("p"), Atom("p")))  # via R(e,e,e)


def test_satisfies_bunch_compacts():
    m = Model(pcm_to_frame(one_element_pcm()), {"w0": frozenset({"p", "q"})})
    assert satisfies_bunch(m, "w0", ADD_UNIT)
    p, q = Leaf(Atom("p")), Leaf(Atom("q"))
    assert satisfies_bunch(m, "w0", Comma(p, q)) == satisfies(m, "w0", Star(Atom("p"), Atom("q")))
    assert satisfies_bunch(m, "w0", Semi(p, q)) == (
        satisfies(m, "w0", Atom("p")) and satisfies(m, "w0", Atom("q")))


def test_check_model_degenerate():
    m = Model(pcm_to_frame(one_element_pcm()), {"w0": frozenset({"p", "q"})})
    ok, bad = check_model(m, {parse_formula("p /\\ q")})
    assert ok, bad


def test_check_model_catches_non_persistent_atom():
    # two worlds e <= pi plus an extra a with e <= a; p holds at e only
    worlds = ("w0", "w1", "w2")
    leq = frozenset({(w, w) for w in worlds} | {(w, "w2") for w in worlds} | {("w0", "w1")})
    rel = frozenset({(w, w, "w0") for w in worlds} | {(w, "w0", w) for w in worlds}
                    | {("w2", "w2", "w2"), ("w2", "w1", "w1"), ("w2", "w1", "w2"), ("w2", "w2", "w1")})
    fr = Frame(worlds, "w0", "w2", leq, rel)
    m = Model(fr, {"w0": frozenset({"p"}), "w2": frozenset({"p"})})
    ok, bad = check_model(m, {Atom("p")})
    assert not ok and any("persistence" in b for b in bad)


def test_valid_in_examples():
    m = Model(pcm_to_frame(one_element_pcm()), {"w0": frozenset({"p"})})
    assert valid_in(m, parse_sequent("p |- p"))
    assert valid_in(m, parse_sequent("p , p |- T"))
    cm = countermodel(parse_sequent("p /\\ q |- p * q"), 4)
    assert cm is not None
    assert not valid_in(cm.model, parse_sequent("p /\\ q |- p * q"))
    assert refuting_world(cm.model, parse_sequent("p /\\ q |- p * q")) == cm.world


def test_countermodel_examples():
    assert countermodel(parse_sequent("p |- p"), 3) is None
    cm = countermodel(parse_sequent("@m |- p \\/ (p -> F)"), 4)
    assert cm is not None
    assert len(cm.model.frame.worlds) <= 4


def test_countermodels_pass_model_checker():
    for text in NONTHEOREM_TEXTS:
        s = parse_sequent(text)
        cm = countermodel(s, 4)
        assert cm is not None, text
        ok, bad = check_model(cm.model, sequent_formulas(s))
        assert ok, (text, bad)


def test_budget_cap():
    with pytest.raises(EnumerationBudgetExceeded):
        countermodel(parse_sequent("p |- q"), 9)


def test_pcm_laws_checked():
    bad = PCM(("w0", "w1"), "w0", "w1", (("w0", "w1"), ("w1", "w0")),
              frozenset({("w0", "w0"), ("w1", "w1"), ("w0", "w1")}))
    ok, msgs = check_pcm(bad)
    assert ok  # this one is the two-element group with absorbing top removed
    worse = PCM(("w0", "w1"), "w0", "w1", (("w0", "w1"), ("w1", "w1")),
                frozenset({("w0", "w0"), ("w1", "w1")}))
    ok, msgs = check_pcm(worse)
    assert not ok and any("dominated" in m for m in msgs)


def test_bifunctoriality_filter():
    seen = False
    for pcm in itertools.islice(enumerate_pcms(3), 25):
        assert is_bifunctorial(pcm)
        seen = True
    assert seen


def test_model_file_roundtrip(tmp_path):
    cm = countermodel(parse_sequent("p /\\ q |- p * q"), 3)
    d = model_to_dict(cm.model)
    again = model_from_dict(json.loads(json.dumps(d)))
    assert again.frame == cm.model.frame
    assert again.interp == {w: frozenset(v) for w, v in cm.model.interp.items()}
    # product-table form loads too
    table = {u: {v: next(w for (w, a, b) in cm.model.frame.rel if a == u and b == v)
                 for v in cm.model.frame.worlds} for u in cm.model.frame.worlds}
    d2 = {k: v for k, v in d.items() if k != "R"}
    d2["product"] = table
    again2 = model_from_dict(d2)
    assert again2.frame.rel == cm.model.frame.rel


def test_enumerate_models_respects_check():
    fs = sequent_formulas(parse_sequent("p |- p * p"))
    for m in itertools.islice(enumerate_models(["p"], 3, check_formulas=fs), 30):
        ok, bad = check_model(m, fs)
        assert ok, bad


def test_pcm_to_frame_three_element_table():
    # {e, a, pi} with a*a = pi, pi absorbing, discrete order plus the top
    worlds = ("w0", "w1", "w2")
    leq = frozenset({(w, w) for w in worlds} | {(w, "w2") for w in worlds})
    rows = (("w0", "w1", "w2"), ("w1", "w2", "w2"), ("w2", "w2", "w2"))
    pcm = PCM(worlds, "w0", "w2", rows, leq)
    fr = pcm_to_frame(pcm)
    ok, bad = check_frame(fr)
    assert ok, bad
    assert len(fr.worlds) == 3
    assert ("w2", "w1", "w1") in fr.rel


def test_pcm_to_frame_truncated_free_monoid():
    # one generator truncated at four elements; the top absorbs overflow
    worlds = ("w0", "w1", "w2", "w3")
    leq = frozenset({(w, w) for w in worlds} | {(w, "w3") for w in worlds})

    def mul(i, j):
        return min(i + j, 3)

    rows = tuple(tuple(f"w{mul(i, j)}" for j in range(4)) for i in range(4))
    pcm = PCM(worlds, "w0", "w3", rows, leq)
    fr = pcm_to_frame(pcm)
    ok, bad = check_frame(fr)
    assert ok, bad
    assert len(fr.worlds) == 4


def test_countermodel_witness_properties():
    s = parse_sequent("p /\\ q |- p * q")
    cm = countermodel(s, 4)
    m, w = cm.model, cm.world
    assert satisfies(m, w, Atom("p")) and satisfies(m, w, Atom("q"))
    assert not satisfies(m, w, Star(Atom("p"), Atom("q")))
    # no decomposition of the witness satisfies the parts separately
    for (x, u, v) in m.frame.rel:
        if x == w:
            assert not (satisfies(m, u, Atom("p")) and satisfies(m, v, Atom("q")))
