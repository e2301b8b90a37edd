"""Provability and the model enumeration must never contradict each other."""

import random

from bilogic.calculus import SearchPolicy
from bilogic.search import SearchBudgetExceeded, Unproven, prove
from bilogic.semantics import countermodel
from bilogic.syntax import (
    ADD_UNIT,
    MULT_UNIT,
    And,
    Atom,
    Comma,
    Imp,
    Leaf,
    Or,
    Semi,
    Sequent,
    Star,
    Wand,
)


def rand_formula(rng, n):
    if n <= 1:
        return rng.choice([Atom("p"), Atom("q")])
    k = rng.randint(1, n - 1)
    return rng.choice([And, Or, Imp, Star, Wand])(rand_formula(rng, k), rand_formula(rng, n - k))


def rand_bunch(rng, n):
    if n <= 1:
        return rng.choice([Leaf(rand_formula(rng, rng.randint(1, 2))), ADD_UNIT, MULT_UNIT])
    k = rng.randint(1, n - 1)
    return rng.choice([Semi, Comma])(rand_bunch(rng, k), rand_bunch(rng, n - k))


def test_proofs_and_countermodels_never_coexist():
    rng = random.Random(4242)
    policy = SearchPolicy(depth=7, node_cap=200000)
    contradictions = []
    for _ in range(120):
        s = Sequent(rand_bunch(rng, rng.randint(1, 3)), rand_formula(rng, rng.randint(1, 3)))
        try:
            proved = not isinstance(prove(s, policy), Unproven)
        except SearchBudgetExceeded:
            continue
        if proved:
            cm = countermodel(s, 3)
            if cm is not None:
                contradictions.append(str(s))
    assert not contradictions, contradictions
