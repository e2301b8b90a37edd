"""The validity calculus over basic-validity-sequent states.

The rules are the provability schemas decorated with a generic world, so
both calculi share one schema table; the bisimulation harness walks the
two reduction operators in lockstep and additionally cross-checks five
rules against independent re-implementations of their printed shapes, so
agreement is not vacuous.  Every application can be certified by a
meta-logic derivation fragment; a whole proof's fragments concatenate
into one derivation of the embedded sequent.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .calculus import (
    DEFAULT_POLICY,
    RuleId,
    RuleInstance,
    SearchPolicy,
    apply as rule_apply,
    instances,
)
from . import search as _search
from .certify import certify_instance, embed_cert
from .metalogic import (
    MetaDerivation,
    MetaError,
    MetaSequent,
    WTerm,
    WVar,
)
from .search import PremissSet, Unproven, _Prover
from .syntax import (
    And,
    AnySequent,
    Bunch,
    Comma,
    EmptySequent,
    Formula,
    Imp,
    Leaf,
    Or,
    Semi,
    Sequent,
    Star,
    Wand,
    sequent_key,
    sequent_str,
    replace,
)


@dataclass(frozen=True)
class VState:
    """The state of a basic validity sequent: a generic world together
    with the context and extract it is asserted to relate.

    The world is presentational (certification re-derives the actual
    world terms from the fragments), so two states with the same
    sequent compare equal; that keeps the validity search in lockstep
    with the provability search."""

    world: str = field(compare=False)
    context: Bunch = None
    extract: Formula = None

    def sequent(self) -> Sequent:
        return Sequent(self.context, self.extract)

    def __str__(self) -> str:
        return f"{self.world} |= {sequent_str(Sequent(self.context, self.extract))}"


def state_of(v: VState) -> Sequent:
    return Sequent(v.context, v.extract)


def embed_state(s: AnySequent, world: str = "w0") -> VState:
    if isinstance(s, EmptySequent):
        raise MetaError("the empty sequent has no state")
    return VState(world, s.context, s.extract)


def _windex(name: str) -> int:
    m = re.fullmatch(r"w(\d+)", name)
    return int(m.group(1)) if m else -1


def _premiss_worlds(inst: RuleInstance, v: VState, n: int) -> list[str]:
    """Display worlds for the premisses; implication-right rules move to a
    fresh world, unit-sides of splits live at the unit world."""
    base = _windex(v.world) + 1
    fresh = [f"w{base}", f"w{base + 1}"]
    r = inst.rule
    if r is RuleId.IMP_R:
        return [fresh[0]]
    if r is RuleId.WAND_R:
        return [fresh[1]]
    if r in (RuleId.STAR_R, RuleId.W_STAR_R):
        return [fresh[0], fresh[1]]
    if r is RuleId.WAND_L:
        return [fresh[0], v.world]
    if r is RuleId.IMP_L:
        return [fresh[0] if inst.position else v.world, v.world]
    return [v.world] * n


def vbi_apply(inst: RuleInstance, v: VState) -> tuple[VState, ...]:
    prems = rule_apply(inst, Sequent(v.context, v.extract))
    worlds = _premiss_worlds(inst, v, len(prems))
    return tuple(VState(w, p.context, p.extract) for w, p in zip(worlds, prems))


def vbi_instances(v: VState, policy: SearchPolicy = DEFAULT_POLICY) -> list[RuleInstance]:
    return instances(Sequent(v.context, v.extract), policy)


@dataclass(frozen=True)
class VPremissSet:
    instance: RuleInstance
    premisses: tuple[VState, ...]

    def key(self):
        return tuple(sorted(sequent_key(state_of(p)) for p in self.premisses))


def vbi_reduce(v: VState, policy: SearchPolicy = DEFAULT_POLICY) -> list[VPremissSet]:
    out: list[VPremissSet] = []
    seen = set()
    for inst in vbi_instances(v, policy):
        ps = VPremissSet(inst, vbi_apply(inst, v))
        k = ps.key()
        if k not in seen:
            seen.add(k)
            out.append(ps)
    return out


# ---------------------------------------------------------------------------
# Proof search over states
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VProof:
    state: VState
    rule: RuleInstance
    children: tuple["VProof", ...] = ()

    def size(self) -> int:
        return 1 + sum(c.size() for c in self.children)


def _vtree_to_proof(tree) -> VProof:
    state, inst, subs = tree
    return VProof(state, inst, tuple(_vtree_to_proof(t) for t in subs))


def vbi_prove(s: AnySequent, policy: SearchPolicy = DEFAULT_POLICY,
              world: str = "w0") -> VProof | Unproven:
    if isinstance(s, EmptySequent):
        raise MetaError("the empty sequent has no validity search")
    root = embed_state(s, world)

    def expand(v):
        return [(ps.instance, ps.premisses) for ps in vbi_reduce(v, policy)]

    engine = _Prover(expand, policy.node_cap, policy.loop_check)
    result = engine.prove(root, policy.depth)
    if isinstance(result, Unproven):
        return result
    return _vtree_to_proof(result)


def isomorphic(p, q) -> bool:
    """Same rule names, positions, params, and branching, node for node;
    the closing boxes of proof trees are not part of the comparison."""

    def kids(t):
        return [c for c in t.children if getattr(c, "rule", None) is not None]

    if p.rule != q.rule:
        return False
    pk, qk = kids(p), kids(q)
    if len(pk) != len(qk):
        return False
    return all(isomorphic(a, b) for a, b in zip(pk, qk))


# ---------------------------------------------------------------------------
# Certification
# ---------------------------------------------------------------------------

def _graft(root: MetaDerivation, subs: list[MetaDerivation]) -> MetaDerivation:
    """Replace the open leaves of a derivation, left to right."""
    pos = [0]
    done: dict[int, MetaDerivation] = {}
    stack: list[tuple[MetaDerivation, bool]] = [(root, False)]
    order: list[MetaDerivation] = []
    while stack:
        node, processed = stack.pop()
        if processed:
            done[id(node)] = MetaDerivation(
                node.sequent, node.rule, node.payload,
                tuple(done[id(c)] for c in node.children))
            continue
        if node.is_open():
            sub = subs[pos[0]]
            pos[0] += 1
            if sub.sequent != node.sequent:
                raise MetaError(f"graft mismatch:\n  leaf {node.sequent}\n  cert {sub.sequent}")
            done[id(node)] = sub
            continue
        if not node.children:
            done[id(node)] = node
            continue
        stack.append((node, True))
        for c in reversed(node.children):
            stack.append((c, False))
    if pos[0] != len(subs):
        raise MetaError("left-over certificates while grafting")
    return done[id(root)]


def certify_vproof(vp: VProof, world: str | WTerm = "w0") -> MetaDerivation:
    """Concatenate the fragments of a validity proof into one derivation
    of the embedded root, with every leaf closed."""
    w = WVar(world) if isinstance(world, str) else world

    def walk(node: VProof, wterm: WTerm) -> MetaDerivation:
        seq = state_of(node.state)
        step = certify_instance(node.rule, seq, wterm)
        if step.derivation is None:
            # the embeddings coincide; pass straight through
            assert len(node.children) == 1
            return walk(node.children[0], wterm)
        subs = []
        for child, iface in zip(node.children, step.interfaces):
            child_world = iface.context[-1].world
            sub = walk(child, child_world)
            if sub.sequent != iface:
                raise MetaError("certificate interface mismatch")
            subs.append(sub)
        return _graft(step.derivation, subs)

    return walk(vp, w)


def proof_root_sequent(vp: VProof, world: str = "w0") -> MetaSequent:
    return embed_cert(state_of(vp.state), WVar(world))


# ---------------------------------------------------------------------------
# Bisimulation harness
# ---------------------------------------------------------------------------

@dataclass
class NodeReport:
    state: str
    matched: int
    unmatched_provability: list[str] = field(default_factory=list)
    unmatched_validity: list[str] = field(default_factory=list)
    spot_check_failures: list[str] = field(default_factory=list)


@dataclass
class BisimResult:
    sequents_checked: int
    reports: list[NodeReport]

    @property
    def bisimilar(self) -> bool:
        return all(not r.unmatched_provability and not r.unmatched_validity
                   and not r.spot_check_failures for r in self.reports)

    def summary(self) -> str:
        bad = [r for r in self.reports
               if r.unmatched_provability or r.unmatched_validity or r.spot_check_failures]
        lines = [f"checked {self.sequents_checked} related pairs: "
                 f"{'bisimilar' if self.bisimilar else 'MISMATCH'}"]
        for r in bad:
            lines.append(f"  at {r.state}:")
            for m in r.unmatched_provability:
                lines.append(f"    provability-only reduction: {m}")
            for m in r.unmatched_validity:
                lines.append(f"    validity-only reduction: {m}")
            for m in r.spot_check_failures:
                lines.append(f"    spot check: {m}")
        return "\n".join(lines)


# Independent re-implementations of five printed rule shapes, used to
# guard the shared-table symmetry against vacuity.

def _indep_and_r(state: Sequent) -> list[tuple[Sequent, ...]] | None:
    if not isinstance(state.extract, And):
        return None
    return [(Sequent(state.context, state.extract.left),
             Sequent(state.context, state.extract.right))]


def _indep_imp_r(state: Sequent) -> list[tuple[Sequent, ...]] | None:
    if not isinstance(state.extract, Imp):
        return None
    return [(Sequent(Semi(state.context, Leaf(state.extract.left)), state.extract.right),)]


def _indep_wand_r(state: Sequent) -> list[tuple[Sequent, ...]] | None:
    if not isinstance(state.extract, Wand):
        return None
    return [(Sequent(Comma(state.context, Leaf(state.extract.left)), state.extract.right),)]


def _indep_or_l(state: Sequent) -> list[tuple[tuple, tuple[Sequent, ...]]]:
    out = []

    def walk(node: Bunch, path: tuple):
        if isinstance(node, Leaf) and isinstance(node.formula, Or):
            f = node.formula
            out.append((path, (Sequent(replace(state.context, path, Leaf(f.left)), state.extract),
                               Sequent(replace(state.context, path, Leaf(f.right)), state.extract))))
        if isinstance(node, (Semi, Comma)):
            walk(node.left, path + ("L",))
            walk(node.right, path + ("R",))

    walk(state.context, ())
    return out


def _indep_star_l(state: Sequent) -> list[tuple[tuple, tuple[Sequent, ...]]]:
    out = []

    def walk(node: Bunch, path: tuple):
        if isinstance(node, Leaf) and isinstance(node.formula, Star):
            f = node.formula
            new = Comma(Leaf(f.left), Leaf(f.right))
            out.append((path, (Sequent(replace(state.context, path, new), state.extract),)))
        if isinstance(node, (Semi, Comma)):
            walk(node.left, path + ("L",))
            walk(node.right, path + ("R",))

    walk(state.context, ())
    return out


def _spot_check(seq: Sequent, vsets: list[VPremissSet]) -> list[str]:
    bad = []
    table = {}
    for ps in vsets:
        table.setdefault(ps.instance.rule, []).append(ps)

    def states(ps: VPremissSet):
        return tuple(Sequent(p.context, p.extract) for p in ps.premisses)

    for rule, indep in ((RuleId.AND_R, _indep_and_r), (RuleId.IMP_R, _indep_imp_r),
                        (RuleId.WAND_R, _indep_wand_r)):
        want = indep(seq)
        got = [states(ps) for ps in table.get(rule, [])]
        if want is None:
            if got:
                bad.append(f"{rule.value} fires but the printed shape does not match")
        elif sorted(map(str, want)) != sorted(map(str, got)):
            bad.append(f"{rule.value}: table {got} vs printed shape {want}")
    for rule, indep in ((RuleId.OR_L, _indep_or_l), (RuleId.STAR_L, _indep_star_l)):
        want = {(pos, tuple(map(str, prems))) for pos, prems in indep(seq)}
        got = {(ps.instance.position, tuple(map(str, states(ps)))) for ps in table.get(rule, [])}
        if want != got:
            bad.append(f"{rule.value}: table {sorted(got)} vs printed shape {sorted(want)}")
    return bad


def bisim_check(s: AnySequent, depth: int = 4,
                policy: SearchPolicy | None = None) -> BisimResult:
    """Walk the provability and validity reductions in lockstep, matching
    premiss-sets in both directions at every related pair."""
    if isinstance(s, EmptySequent):
        return BisimResult(0, [])
    policy = policy or SearchPolicy(depth=depth)
    reports: list[NodeReport] = []
    seen: set = set()
    count = [0]

    def walk(seq: Sequent, v: VState, d: int) -> None:
        key = (sequent_key(seq), d)
        if key in seen:
            return
        seen.add(key)
        count[0] += 1
        rsets = _search.reduce(seq, policy)
        vsets = vbi_reduce(v, policy)
        rmap = {(ps.instance, ps.key()): ps for ps in rsets}
        vmap = {(ps.instance, ps.key()): ps for ps in vsets}
        rep = NodeReport(str(seq), matched=len(rmap.keys() & vmap.keys()))
        for k in rmap.keys() - vmap.keys():
            rep.unmatched_provability.append(str(rmap[k].instance))
        for k in vmap.keys() - rmap.keys():
            rep.unmatched_validity.append(str(vmap[k].instance))
        rep.spot_check_failures = _spot_check(seq, vsets)
        reports.append(rep)
        if d <= 1:
            return
        for k in rmap.keys() & vmap.keys():
            for prem_seq, prem_state in zip(rmap[k].premisses, vmap[k].premisses):
                if isinstance(prem_seq, EmptySequent):
                    continue
                if prem_seq != Sequent(prem_state.context, prem_state.extract):
                    rep.unmatched_validity.append(
                        f"{vmap[k].instance}: premiss state {prem_state} is not {prem_seq}")
                    continue
                walk(prem_seq, prem_state, d - 1)

    walk(s, embed_state(s), depth)
    return BisimResult(count[0], reports)
