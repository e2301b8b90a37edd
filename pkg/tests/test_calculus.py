import itertools
import json
import random

import pytest

from bilogic.calculus import (
    DEFAULT_POLICY,
    Proof,
    RuleId,
    RuleInstance,
    RuleNotApplicable,
    SearchPolicy,
    admissible_demo,
    apply,
    axiom_node,
    check_proof,
    fill_holes,
    instances,
    proof_from_dict,
    proof_to_dict,
    taut_proof,
)
from bilogic import search
from bilogic.syntax import (
    ADD_UNIT,
    MULT_UNIT,
    Atom,
    And,
    Comma,
    Imp,
    Leaf,
    Or,
    Semi,
    Sequent,
    Star,
    Wand,
    Bottom,
    compact,
    parse_bunch,
    parse_formula,
    parse_sequent,
    section,
    section_prune,
    subbunch_positions,
)

P, Q, R = Leaf(Atom("p")), Leaf(Atom("q")), Leaf(Atom("r"))


def rand_formula(rng, n):
    if n <= 1:
        return rng.choice([Atom("p"), Atom("q")])
    k = rng.randint(1, n - 1)
    op = rng.choice([And, Or, Imp, Star, Wand])
    return op(rand_formula(rng, k), rand_formula(rng, n - k))


def rand_bunch(rng, n):
    if n <= 1:
        return rng.choice([Leaf(rand_formula(rng, rng.randint(1, 3))), ADD_UNIT, MULT_UNIT])
    k = rng.randint(1, n - 1)
    return rng.choice([Semi, Comma])(rand_bunch(rng, k), rand_bunch(rng, n - k))


def test_apply_and_r():
    s = parse_sequent("p ; q |- p /\\ q")
    prems = apply(RuleInstance(RuleId.AND_R), s)
    assert prems == (parse_sequent("p ; q |- p"), parse_sequent("p ; q |- q"))


def test_apply_id_closes():
    s = parse_sequent("q ; p |- p")
    assert apply(RuleInstance(RuleId.ID, (), (1,)), s) == ()
    with pytest.raises(RuleNotApplicable):
        apply(RuleInstance(RuleId.ID, (), (0,)), s)


def test_apply_star_r_split():
    s = parse_sequent("r ; (p , q) |- p * q")
    inst = RuleInstance(RuleId.STAR_R, (), (1, (0,)))
    assert apply(inst, s) == (parse_sequent("p |- p"), parse_sequent("q |- q"))
    # the empty side of a split is the multiplicative unit
    s2 = parse_sequent("p |- p * I")
    inst2 = RuleInstance(RuleId.STAR_R, (), (0, (0,)))
    assert apply(inst2, s2) == (parse_sequent("p |- p"), parse_sequent("@m |- I"))


def test_apply_imp_l_drops_and_keeps():
    s = parse_sequent("p ; @a ; p -> q |- q")
    drop = RuleInstance(RuleId.IMP_L, (), (2, (0,)))
    assert apply(drop, s) == (parse_sequent("p |- p"), parse_sequent("@a ; q |- q"))
    keep = RuleInstance(RuleId.IMP_L, (), (2, (0,), True))
    assert apply(keep, s) == (parse_sequent("p |- p"), parse_sequent("(p ; @a) ; q |- q"))


def test_instances_examples():
    insts = instances(parse_sequent("p ; p -> q |- q"))
    assert RuleInstance(RuleId.IMP_L, (), (1, (0,))) in insts
    assert any(i.rule is RuleId.TOP_R for i in instances(parse_sequent("@m |- T")))
    assert not any(i.rule is RuleId.ID for i in instances(parse_sequent("p |- q")))
    assert any(i.rule is RuleId.ID for i in instances(parse_sequent("p |- p")))


def test_instances_deterministic_and_unique():
    rng = random.Random(13)
    for _ in range(50):
        s = Sequent(rand_bunch(rng, rng.randint(1, 6)), rand_formula(rng, rng.randint(1, 4)))
        a = instances(s)
        b = instances(s)
        assert a == b
        assert len(set(a)) == len(a)


def test_every_instance_applies():
    rng = random.Random(17)
    for _ in range(80):
        s = Sequent(rand_bunch(rng, rng.randint(1, 6)), rand_formula(rng, rng.randint(1, 4)))
        for inst in instances(s, SearchPolicy(full_structural=True)):
            apply(inst, s)  # must not raise


# --- brute-force matcher: an independent enumeration over all paths and
# binary splits, used to check completeness of the production enumerator.

def brute_instances(s: Sequent) -> set[RuleInstance]:
    out = set()
    ctx, ext = s.context, s.extract
    semi_elems = section(ctx, Semi)
    for i, e in enumerate(semi_elems):
        if isinstance(e, Leaf) and e.formula == ext:
            out.add(RuleInstance(RuleId.ID, (), (i,)))
    if isinstance(ext, And):
        out.add(RuleInstance(RuleId.AND_R))
    if isinstance(ext, Or):
        out.add(RuleInstance(RuleId.OR_R1))
        out.add(RuleInstance(RuleId.OR_R2))
    if isinstance(ext, Imp):
        out.add(RuleInstance(RuleId.IMP_R))
    if isinstance(ext, Wand):
        out.add(RuleInstance(RuleId.WAND_R))
    if isinstance(ext, Star):
        for i, e in enumerate(semi_elems):
            parts = section(e, Comma)
            for bits in range(1 << len(parts)):
                mask = tuple(k for k in range(len(parts)) if bits >> k & 1)
                out.add(RuleInstance(RuleId.STAR_R, (), (i, mask)))
    for path, node in subbunch_positions(ctx):
        if isinstance(node, Leaf):
            f = node.formula
            if isinstance(f, And):
                out.add(RuleInstance(RuleId.AND_L, path))
            if isinstance(f, Or):
                out.add(RuleInstance(RuleId.OR_L, path))
            if isinstance(f, Star):
                out.add(RuleInstance(RuleId.STAR_L, path))
            if isinstance(f, Bottom):
                out.add(RuleInstance(RuleId.BOT_AX, path))
            from bilogic.syntax import MultTop

            if isinstance(f, MultTop):
                out.add(RuleInstance(RuleId.MULT_TOP_L3, path))

    def parent_former(path):
        if not path:
            return None
        from bilogic.syntax import subbunch

        return type(subbunch(ctx, path[:-1]))

    for path, node in subbunch_positions(ctx):
        if parent_former(path) is not Semi:
            elems = section(node, Semi)
            for i, e in enumerate(elems):
                if isinstance(e, Leaf) and isinstance(e.formula, Imp):
                    others = [j for j in range(len(elems)) if j != i]
                    for bits in range(1 << len(others)):
                        mask = tuple(others[k] for k in range(len(others)) if bits >> k & 1)
                        out.add(RuleInstance(RuleId.IMP_L, path, (i, mask)))
                        if mask:
                            out.add(RuleInstance(RuleId.IMP_L, path, (i, mask, True)))
            if len(elems) > 1:
                for i in range(len(elems)):
                    out.add(RuleInstance(RuleId.W, path, ((i,),)))
        if parent_former(path) is not Comma:
            elems = section(node, Comma)
            for i, e in enumerate(elems):
                if isinstance(e, Leaf) and isinstance(e.formula, Wand):
                    others = [j for j in range(len(elems)) if j != i]
                    for bits in range(1 << len(others)):
                        mask = tuple(others[k] for k in range(len(others)) if bits >> k & 1)
                        out.add(RuleInstance(RuleId.WAND_L, path, (i, mask)))
            if len(elems) > 1:
                for i, e in enumerate(elems):
                    if isinstance(e, MULT_UNIT.__class__):
                        out.add(RuleInstance(RuleId.MULT_TOP_L1, path, (i,)))
    return out


def test_enumeration_matches_brute_force():
    rng = random.Random(23)
    logical = {RuleId.ID, RuleId.AND_R, RuleId.OR_R1, RuleId.OR_R2, RuleId.IMP_R,
               RuleId.WAND_R, RuleId.STAR_R, RuleId.AND_L, RuleId.OR_L, RuleId.STAR_L,
               RuleId.MULT_TOP_L3, RuleId.IMP_L, RuleId.WAND_L, RuleId.W,
               RuleId.MULT_TOP_L1, RuleId.BOT_AX}
    for _ in range(100):
        s = Sequent(rand_bunch(rng, rng.randint(1, 5)), rand_formula(rng, rng.randint(1, 4)))
        mine = {i for i in instances(s) if i.rule in logical}
        brute = brute_instances(s)
        assert mine == brute, (str(s), mine ^ brute)


def test_check_proof_accepts_search_output():
    pf = search.prove(parse_sequent("p , p -* q |- q"), SearchPolicy(depth=8))
    assert check_proof(pf).ok


def test_check_proof_single_box():
    from bilogic.calculus import BOX

    assert check_proof(BOX).ok


def test_check_proof_rejects_wrong_disjunct():
    s = parse_sequent("p |- p \\/ q")
    bad = Proof(s, RuleInstance(RuleId.OR_R1), (axiom_node(parse_sequent("p |- q"),
                                                           RuleInstance(RuleId.ID, (), (0,))),))
    res = check_proof(bad)
    assert not res.ok and "mismatch" in res.reason


def test_mutating_a_node_flips_acceptance():
    rng = random.Random(31)
    pf = search.prove(parse_sequent("p -> q ; q -> r ; p |- r"), SearchPolicy(depth=8))
    assert check_proof(pf).ok

    def mutate(node, depth=0):
        if node.rule is None:
            return node
        kids = tuple(mutate(c, depth + 1) for c in node.children)
        if depth == 1 and not isinstance(node.sequent, type(None)) and node.rule is not None \
                and not node.sequent == parse_sequent("p |- p"):
            return Proof(parse_sequent("q ; q |- q"), node.rule, kids)
        return Proof(node.sequent, node.rule, kids)

    assert not check_proof(mutate(pf)).ok


def test_taut_examples():
    pf = taut_proof(Comma(P, Q))
    assert pf.sequent == parse_sequent("p , q |- p * q")
    assert check_proof(pf).ok
    pf = taut_proof(P)
    assert pf.rule.rule is RuleId.ID and check_proof(pf).ok
    pf = taut_proof(ADD_UNIT)
    assert pf.rule.rule is RuleId.TOP_R and check_proof(pf).ok
    pf = taut_proof(MULT_UNIT)
    assert pf.rule.rule is RuleId.MULT_TOP_R and check_proof(pf).ok


def test_taut_random():
    rng = random.Random(37)
    for _ in range(120):
        g = rand_bunch(rng, rng.randint(1, 12))
        assert check_proof(taut_proof(g)).ok


def test_admissible_demo_taut_rule():
    d = admissible_demo("taut-rule", gamma=parse_bunch("q ; r"), phi=parse_formula("p"))
    rules = {d.rule.rule}
    assert RuleId.W in rules
    assert check_proof(d).ok


def test_admissible_demo_wstar():
    d = admissible_demo("wstar", gamma=parse_bunch("s"), d1=parse_bunch("p"), d2=parse_bunch("q"),
                        phi=parse_formula("p"), psi=parse_formula("q"))
    filled = fill_holes(d, [taut_proof(P), taut_proof(Q)])
    assert check_proof(filled).ok
    assert d.rule.rule is RuleId.W


def test_admissible_demo_botfromcut():
    d = admissible_demo("botfromcut", context=parse_bunch("p , F"), position=("R",),
                        chi=parse_formula("q"), phi=parse_formula("p -* q"))
    assert d.rule.rule is RuleId.CUT
    sub = search.prove(parse_sequent("p , p -* q |- q"), SearchPolicy(depth=8))
    assert check_proof(fill_holes(d, [sub])).ok


def test_derived_rule_names_check_but_are_not_searched():
    s = parse_sequent("q ; p |- p")
    taut = Proof(s, RuleInstance(RuleId.TAUT, (), (1,)), (Proof(parse_sequent("|-"), None),))
    assert check_proof(taut).ok
    assert not any(i.rule in (RuleId.TAUT, RuleId.W_STAR_R) for i in instances(s))


def test_proof_serialization_roundtrip(tmp_path):
    pf = search.prove(parse_sequent("p * (q \\/ r) |- p * q \\/ p * r"), SearchPolicy(depth=8))
    d = proof_to_dict(pf)
    again = proof_from_dict(json.loads(json.dumps(d)))
    assert again == pf
    path = tmp_path / "x.biproof.json"
    from bilogic.calculus import load_proof, save_proof

    save_proof(pf, str(path))
    assert load_proof(str(path)) == pf


def test_cut_is_checkable():
    s = parse_sequent("p , p -* q |- q")
    cut = RuleInstance(RuleId.CUT, (), (parse_formula("q"),))
    prems = apply(cut, s)
    assert prems[0] == s and prems[1] == parse_sequent("q |- q")


def test_serialization_covers_keep_and_mask_params(tmp_path):
    from bilogic.calculus import load_proof, save_proof

    pf = search.prove(parse_sequent("p -> (p -> q) ; p |- q"), SearchPolicy(depth=8))
    assert any(n.rule and n.rule.rule is RuleId.IMP_L and len(n.rule.params) == 3
               for n in _walk(pf))
    path = tmp_path / "keep.biproof.json"
    save_proof(pf, str(path))
    assert load_proof(str(path)) == pf
    pf2 = taut_proof(parse_bunch("(p ; q) ; r"))
    path2 = tmp_path / "mask.biproof.json"
    save_proof(pf2, str(path2))
    assert load_proof(str(path2)) == pf2


def _walk(t):
    yield t
    for c in t.children:
        yield from _walk(c)
