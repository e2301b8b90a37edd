"""Shared sequent corpus for the test suite."""

from bilogic.syntax import parse_sequent

# Provable at depth <= 8 under the default policy.
THEOREM_TEXTS = [
    "p ; p -> q |- q",
    "p , p -* q |- q",
    "p * q |- q * p",
    "p * (q * r) |- (p * q) * r",
    "(p * q) * r |- p * (q * r)",
    "(p * q) -* r |- p -* q -* r",
    "p -* q -* r |- (p * q) -* r",
    "p |- p * I",
    "p * I |- p",
    "p |- p /\\ T",
    "p /\\ T |- p",
    "p * (q \\/ r) |- p * q \\/ p * r",
    "p * q \\/ p * r |- p * (q \\/ r)",
    "p ; @a ; p -> q |- q",
    "p , q |- p * q",
    "p ; q |- p /\\ q",
    "@m |- I",
    "@a |- T",
    # compacting tautologies for sample bunches
    "p ; q ; r |- p /\\ q /\\ r",
    "p , (q , r) |- p * (q * r)",
    "(p ; q) , r |- (p /\\ q) * r",
    "p /\\ q |- q /\\ p",
    "p |- q -> p",
    "p -> q ; q -> r ; p |- r",
    "p -> (p -> q) ; p |- q",
    "(p -* q) , (q -* r) |- p -* r",
    "F |- p",
    "p * F |- q",
    "q |- p -* p * q",
    "p \\/ q |- q \\/ p",
    # rule applications below the root position
    "p * (q /\\ (q -> r)) |- p * r",
    "p , (q ; q -> r) |- p * r",
    "p , (q \\/ r) |- p * q \\/ p * r",
    "s ; (p ; p -> q) ; r |- q",
    "(q ; q -> r) , ((q /\\ (q -> r)) -* s) |- s",
]

# Unproven at depth 12; all but the last have a countermodel of size <= 4.
NONTHEOREM_TEXTS = [
    "@m |- p \\/ (p -> F)",
    "p /\\ q |- p * q",
    "p * q |- p /\\ q",
    "p |- p * p",
    "q |- p -* q",
    "T |- I",
    "p \\/ q |- p",
    "p -> q |- p -* q",
]

# The consistency-semantics fixture with phi = T and psi = T -* T; see the
# acceptance suite for its actual status in this calculus.
FIXTURE_TEXT = "(T -* F) -> F ; ((T -* T) -* F) -> F |- ((T * (T -* T)) -* F) -> F"
FIXTURE_PART_TEXTS = ["@a |- T", "@a |- T -* T", "@a |- T * (T -* T)"]


def theorems():
    return [parse_sequent(t) for t in THEOREM_TEXTS]


def nontheorems():
    return [parse_sequent(t) for t in NONTHEOREM_TEXTS]
