"""The reductive engine: reduction operator, bounded search spaces, prover.

The search space is the and/or tree generated by the reduction operator,
materialized to a finite depth.  A branch that revisits a sequent already
on it is marked looped rather than expanded again; growth is otherwise
bounded by the depth and a node cap.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterator

from .calculus import (
    DEFAULT_POLICY,
    Proof,
    BOX,
    RuleInstance,
    SearchPolicy,
    apply,
    instances,
)
from .syntax import (
    AnySequent,
    EmptySequent,
    sequent_key,
    sequent_str,
)


class SearchBudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class PremissSet:
    """One or-node: an instance together with its raw premiss list."""

    instance: RuleInstance
    premisses: tuple[AnySequent, ...]

    def key(self):
        return tuple(sorted(sequent_key(p) for p in self.premisses))


def reduce(s: AnySequent, policy: SearchPolicy = DEFAULT_POLICY) -> list[PremissSet]:
    """The reduction operator, deduplicated modulo coherent equivalence."""
    out: list[PremissSet] = []
    seen = set()
    for inst in instances(s, policy):
        ps = PremissSet(inst, apply(inst, s))
        k = ps.key()
        if k not in seen:
            seen.add(k)
            out.append(ps)
    return out


# ---------------------------------------------------------------------------
# Materialized search spaces
# ---------------------------------------------------------------------------

@dataclass
class OrNode:
    instance: RuleInstance
    children: list["SeqNode"]


@dataclass
class SeqNode:
    sequent: AnySequent
    status: str  # expanded | truncated | looped | box
    or_nodes: list[OrNode] = field(default_factory=list)


@dataclass
class SearchSpace:
    root: SeqNode
    depth: int
    nodes: int


def space(s: AnySequent, policy: SearchPolicy = DEFAULT_POLICY) -> SearchSpace:
    """The and/or tree truncated at policy.depth."""
    count = [0]

    def build(seq: AnySequent, depth_left: int, ancestors: frozenset) -> SeqNode:
        count[0] += 1
        if count[0] > policy.node_cap:
            raise SearchBudgetExceeded(f"space exceeds {policy.node_cap} nodes")
        if isinstance(seq, EmptySequent):
            return SeqNode(seq, "box")
        if policy.loop_check and seq in ancestors:
            return SeqNode(seq, "looped")
        if depth_left == 0:
            return SeqNode(seq, "truncated")
        node = SeqNode(seq, "expanded")
        below = ancestors | {seq}
        for ps in reduce(seq, policy):
            node.or_nodes.append(
                OrNode(ps.instance, [build(p, depth_left - 1, below) for p in ps.premisses]))
        return node

    root = build(s, policy.depth, frozenset())
    return SearchSpace(root, policy.depth, count[0])


@dataclass
class Reduction:
    """A subtree choosing one or-node under every expanded sequent node."""

    sequent: AnySequent
    choice: RuleInstance | None  # None at non-expandable leaves
    children: tuple["Reduction", ...] = ()
    closed: bool = False  # leaf reached the empty premiss set

    def successful(self) -> bool:
        if not self.children:
            return self.closed or isinstance(self.sequent, EmptySequent)
        return all(c.successful() for c in self.children)

    def to_proof(self) -> Proof:
        if isinstance(self.sequent, EmptySequent):
            return BOX
        if self.choice is None:
            return Proof(self.sequent, None)  # open: not a successful leaf
        if not self.children:
            return Proof(self.sequent, self.choice, (BOX,))
        return Proof(self.sequent, self.choice, tuple(c.to_proof() for c in self.children))


def extract_reductions(sp: SearchSpace) -> Iterator[Reduction]:
    """Enumerate reductions of the space in a deterministic order."""

    def options(node: SeqNode) -> Iterator[Reduction]:
        if node.status == "box":
            yield Reduction(node.sequent, None, (), closed=True)
            return
        if node.status in ("looped", "truncated") or not node.or_nodes:
            yield Reduction(node.sequent, None, (), closed=False)
            return
        for orn in node.or_nodes:
            if not orn.children:
                yield Reduction(node.sequent, orn.instance, (), closed=True)
                continue
            for combo in itertools.product(*(options(c) for c in orn.children)):
                yield Reduction(node.sequent, orn.instance, tuple(combo))

    return options(sp.root)


# ---------------------------------------------------------------------------
# The bounded prover
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Unproven:
    reason: str  # depth-exhausted | exhausted-space

    def __bool__(self) -> bool:
        return False


# Generic node expansion, shared with the validity calculus.
ExpandFn = Callable[[object], list[tuple[RuleInstance, tuple]]]


_INF = 10 ** 9


class _Prover:
    def __init__(self, expand: ExpandFn, node_cap: int, loop_check: bool):
        self.expand = expand
        self.node_cap = node_cap
        self.loop_check = loop_check
        self.visited = 0
        # node -> (max depth known to fail, whether the depth bound was hit);
        # only failures untouched by loop pruning are recorded
        self.fail_depth: dict[object, tuple[int, bool]] = {}
        self.proved: dict[object, tuple[object, int]] = {}  # node -> (tree, height)
        self.expansions: dict[object, list] = {}

    def prove(self, root, depth: int):
        for d in range(1, depth + 1):
            found, _, hit = self.search(root, d, frozenset())
            if found is not None:
                return found
            if not hit:
                # every branch ended before the bound, so no deeper proof exists
                return Unproven("exhausted-space")
        return Unproven("depth-exhausted")

    def search(self, node, depth_left: int, ancestors: frozenset):
        """Returns (tree | None, clean, hit): clean failures are memoizable,
        hit records whether the depth bound cut anything off."""
        self.visited += 1
        if self.visited > self.node_cap:
            raise SearchBudgetExceeded(f"search exceeds {self.node_cap} nodes")
        if self.loop_check and node in ancestors:
            return None, False, False
        won = self.proved.get(node)
        if won is not None and won[1] <= depth_left:
            return won[0], True, False
        memo = self.fail_depth.get(node)
        if memo is not None and depth_left <= memo[0]:
            return None, True, memo[1]
        if depth_left == 0:
            return None, True, True
        clean = True
        hit = False
        below = ancestors | {node}
        expansion = self.expansions.get(node)
        if expansion is None:
            expansion = self.expansions[node] = self.expand(node)
        for inst, premisses in expansion:
            subs = []
            ok = True
            for p in premisses:
                sub, sub_clean, sub_hit = self.search(p, depth_left - 1, below)
                clean = clean and sub_clean
                hit = hit or sub_hit
                if sub is None:
                    ok = False
                    break
                subs.append(sub)
            if ok:
                tree = (node, inst, tuple(subs))
                height = _tree_height(tree)
                old = self.proved.get(node)
                if old is None or height < old[1]:
                    self.proved[node] = (tree, height)
                return tree, True, hit
        if clean:
            record = (depth_left if hit else _INF, hit)
            old = self.fail_depth.get(node)
            if old is None or record[0] > old[0]:
                self.fail_depth[node] = record
        return None, clean, hit


def _tree_height(tree) -> int:
    _, _, subs = tree
    return 1 + max((_tree_height(t) for t in subs), default=0)


def _tree_to_proof(tree) -> Proof:
    seq, inst, subs = tree
    if not subs:
        return Proof(seq, inst, (BOX,))
    return Proof(seq, inst, tuple(_tree_to_proof(t) for t in subs))


def prove(s: AnySequent, policy: SearchPolicy = DEFAULT_POLICY) -> Proof | Unproven:
    """Iterative-deepening search for a successful reduction."""
    if isinstance(s, EmptySequent):
        return BOX

    def expand(seq):
        return [(ps.instance, ps.premisses) for ps in reduce(seq, policy)]

    engine = _Prover(expand, policy.node_cap, policy.loop_check)
    result = engine.prove(s, policy.depth)
    if isinstance(result, Unproven):
        return result
    return _tree_to_proof(result)


# ---------------------------------------------------------------------------
# DOT / figure export
# ---------------------------------------------------------------------------

def space_to_dot(sp: SearchSpace) -> str:
    lines = ["digraph searchspace {", '  node [fontname="monospace"];']
    counter = itertools.count()

    def emit(node: SeqNode) -> str:
        nid = f"s{next(counter)}"
        label = sequent_str(node.sequent).replace("\\", "\\\\").replace('"', '\\"')
        style = ', style=dashed' if node.status == "looped" else ""
        if node.status == "truncated":
            style = ', style=dotted'
        lines.append(f'  {nid} [shape=box, label="{label}"{style}];')
        for orn in node.or_nodes:
            oid = f"o{next(counter)}"
            lines.append(f'  {oid} [shape=point];')
            rule = orn.instance.rule.value
            lines.append(f'  {nid} -> {oid} [label="{rule}"];')
            for child in orn.children:
                lines.append(f"  {oid} -> {emit(child)};")
        return nid

    emit(sp.root)
    lines.append("}")
    return "\n".join(lines)


def render_space_png(sp: SearchSpace, path: str) -> None:
    """Draw the and/or tree to a PNG next to the DOT output."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    # (x, y, kind, label) nodes and parent links from a simple tidy layout
    nodes: list[tuple[float, int, str, str]] = []
    edges: list[tuple[float, int, float, int, str]] = []
    next_x = itertools.count()

    def layout(node: SeqNode, depth: int) -> float:
        kids = []
        for orn in node.or_nodes:
            ys = [layout(c, depth + 2) for c in orn.children]
            x = sum(ys) / len(ys) if ys else float(next(next_x))
            nodes.append((x, depth + 1, "or", ""))
            kids.append((x, orn.instance.rule.value))
            for cx in ys:
                edges.append((x, depth + 1, cx, depth + 2, ""))
        my_x = sum(k[0] for k in kids) / len(kids) if kids else float(next(next_x))
        nodes.append((my_x, depth, node.status, sequent_str(node.sequent)))
        for x, rule in kids:
            edges.append((my_x, depth, x, depth + 1, rule))
        return my_x

    layout(sp.root, 0)
    fig, ax = plt.subplots(figsize=(max(6, len(nodes) * 0.5), max(4, sp.depth * 1.2)))
    for x0, y0, x1, y1, label in edges:
        ax.plot([x0, x1], [-y0, -y1], color="gray", lw=0.8, zorder=1)
        if label:
            ax.annotate(label, ((x0 + x1) / 2, -(y0 + y1) / 2), fontsize=6, color="darkblue")
    for x, y, kind, label in nodes:
        if kind == "or":
            ax.scatter([x], [-y], s=12, color="black", zorder=2)
        else:
            color = {"looped": "orange", "truncated": "lightgray", "box": "lightgreen"}.get(kind, "lightsteelblue")
            ax.scatter([x], [-y], s=160, marker="s", color=color, zorder=2)
            ax.annotate(label, (x, -y), fontsize=6, ha="center", va="bottom",
                        xytext=(0, 6), textcoords="offset points")
    ax.axis("off")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
