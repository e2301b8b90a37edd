"""Syntax of BI: formulas, bunches, sequents, and coherent equivalence.

Grammar (ASCII):
    atoms      [a-z][a-zA-Z0-9_]*
    constants  T (truth), F (falsity), I (multiplicative truth)
    binary     /\\  \\/  ->  *  -*
    precedence (high to low):  *  /\\  (left) | \\/ (left) | -> -* (right)
    bunches    formulas, units @a (additive) and @m (multiplicative),
               joined by ; or , -- one former per list, parenthesize to mix
    sequents   BUNCH |- FORMULA, or a bare |- for the empty sequent
"""

from __future__ import annotations

import re
from dataclasses import dataclass


class BiSyntaxError(ValueError):
    """Parse failure, carrying a 1-based line/column position."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


# ---------------------------------------------------------------------------
# Formulas
# ---------------------------------------------------------------------------

class Formula:
    __slots__ = ()

    def __str__(self) -> str:
        return formula_str(self)


@dataclass(frozen=True)
class Atom(Formula):
    name: str


@dataclass(frozen=True)
class Top(Formula):
    pass


@dataclass(frozen=True)
class Bottom(Formula):
    pass


@dataclass(frozen=True)
class MultTop(Formula):
    pass


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Imp(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Star(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Wand(Formula):
    left: Formula
    right: Formula


TOP = Top()
BOTTOM = Bottom()
MULT_TOP = MultTop()

_BINARY = (And, Or, Imp, Star, Wand)


def subformulas(f: Formula) -> set[Formula]:
    out = {f}
    if isinstance(f, _BINARY):
        out |= subformulas(f.left)
        out |= subformulas(f.right)
    return out


def atoms_of(f: Formula) -> set[str]:
    return {g.name for g in subformulas(f) if isinstance(g, Atom)}


# ---------------------------------------------------------------------------
# Bunches
# ---------------------------------------------------------------------------

class Bunch:
    __slots__ = ()

    def __str__(self) -> str:
        return bunch_str(self)


@dataclass(frozen=True)
class Leaf(Bunch):
    formula: Formula


@dataclass(frozen=True)
class AddUnit(Bunch):
    pass


@dataclass(frozen=True)
class MultUnit(Bunch):
    pass


@dataclass(frozen=True)
class Semi(Bunch):
    left: Bunch
    right: Bunch


@dataclass(frozen=True)
class Comma(Bunch):
    left: Bunch
    right: Bunch


ADD_UNIT = AddUnit()
MULT_UNIT = MultUnit()

# A path selects a node of a bunch by descending left/right from the root.
BunchPath = tuple[str, ...]


def subbunch(b: Bunch, path: BunchPath) -> Bunch:
    node = b
    for step in path:
        if not isinstance(node, (Semi, Comma)):
            raise KeyError(f"path {''.join(path) or 'eps'} leaves the bunch")
        node = node.left if step == "L" else node.right
    return node


def replace(b: Bunch, path: BunchPath, new: Bunch) -> Bunch:
    """The substitution written Gamma[Delta -> Delta']."""
    if not path:
        return new
    if not isinstance(b, (Semi, Comma)):
        raise KeyError(f"path {''.join(path)} leaves the bunch")
    step, rest = path[0], path[1:]
    if step == "L":
        return type(b)(replace(b.left, rest, new), b.right)
    return type(b)(b.left, replace(b.right, rest, new))


def subbunch_positions(b: Bunch) -> list[tuple[BunchPath, Bunch]]:
    """Every node of the bunch, root first, in pre-order."""
    out: list[tuple[BunchPath, Bunch]] = []

    def walk(node: Bunch, path: BunchPath) -> None:
        out.append((path, node))
        if isinstance(node, (Semi, Comma)):
            walk(node.left, path + ("L",))
            walk(node.right, path + ("R",))

    walk(b, ())
    return out


def bunch_formulas(b: Bunch) -> set[Formula]:
    return {n.formula for _, n in subbunch_positions(b) if isinstance(n, Leaf)}


def bunch_atoms(b: Bunch) -> set[str]:
    out: set[str] = set()
    for f in bunch_formulas(b):
        out |= atoms_of(f)
    return out


def bunch_size(b: Bunch) -> int:
    return len(subbunch_positions(b))


# --- sections: maximal same-former flattenings -----------------------------

def section(b: Bunch, former: type) -> list[Bunch]:
    """Flatten nested nodes of one context-former into their element list."""
    if isinstance(b, former):
        return section(b.left, former) + section(b.right, former)
    return [b]


def section_pack(parts: list[Bunch], former: type) -> Bunch:
    if not parts:
        return ADD_UNIT if former is Semi else MULT_UNIT
    out = parts[0]
    for p in parts[1:]:
        out = former(out, p)
    return out


def section_prune(b: Bunch, former: type, keep: set[int]) -> Bunch | None:
    """Drop section elements not in `keep`, preserving the tree shape.

    Returns None when nothing is kept. Indices refer to section(b, former).
    """
    counter = [0]

    def walk(node: Bunch) -> Bunch | None:
        if isinstance(node, former):
            left = walk(node.left)
            right = walk(node.right)
            if left is None:
                return right
            if right is None:
                return left
            return former(left, right)
        idx = counter[0]
        counter[0] += 1
        return node if idx in keep else None

    return walk(b)


# ---------------------------------------------------------------------------
# Sequents
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Sequent:
    context: Bunch
    extract: Formula

    def __str__(self) -> str:
        return f"{bunch_str(self.context)} |- {formula_str(self.extract)}"


@dataclass(frozen=True)
class EmptySequent:
    """The distinguished empty sequent (the box)."""

    def __str__(self) -> str:
        return "|-"


EMPTY_SEQUENT = EmptySequent()
AnySequent = Sequent | EmptySequent


def sequent_formulas(s: AnySequent) -> set[Formula]:
    if isinstance(s, EmptySequent):
        return set()
    return bunch_formulas(s.context) | {s.extract}


def sequent_atoms(s: AnySequent) -> set[str]:
    out: set[str] = set()
    for f in sequent_formulas(s):
        out |= atoms_of(f)
    return out


# ---------------------------------------------------------------------------
# Coherent equivalence via canonical normalization
# ---------------------------------------------------------------------------

_FORMULA_TAGS = {Atom: 0, Top: 1, Bottom: 2, MultTop: 3, And: 4, Or: 5,
                 Imp: 6, Star: 7, Wand: 8}


def formula_key(f: Formula):
    tag = _FORMULA_TAGS[type(f)]
    if isinstance(f, Atom):
        return (tag, f.name)
    if isinstance(f, _BINARY):
        return (tag, formula_key(f.left), formula_key(f.right))
    return (tag,)


def bunch_key(b: Bunch):
    # units < leaves (by formula order) < Semi < Comma
    if isinstance(b, AddUnit):
        return (0,)
    if isinstance(b, MultUnit):
        return (1,)
    if isinstance(b, Leaf):
        return (2, formula_key(b.formula))
    if isinstance(b, Semi):
        return (3, bunch_key(b.left), bunch_key(b.right))
    return (4, bunch_key(b.left), bunch_key(b.right))


def normalize(b: Bunch) -> Bunch:
    """Canonical representative of the coherent-equivalence class.

    Associativity is flattened per former, unit children absorbed, children
    sorted by the fixed node order, and the list re-binarized left to right.
    """
    if isinstance(b, (Leaf, AddUnit, MultUnit)):
        return b
    former = type(b)
    unit = AddUnit if former is Semi else MultUnit
    # normalizing a child may surface nested same-former structure
    parts = [q for p in section(b, former)
             for q in section(normalize(p), former)]
    parts = [p for p in parts if not isinstance(p, unit)]
    if not parts:
        return ADD_UNIT if former is Semi else MULT_UNIT
    if len(parts) == 1:
        return parts[0]
    parts.sort(key=bunch_key)
    return section_pack(parts, former)


def equiv(a: Bunch, b: Bunch) -> bool:
    return normalize(a) == normalize(b)


def sequent_key(s: AnySequent):
    if isinstance(s, EmptySequent):
        return ("box",)
    return (bunch_key(normalize(s.context)), formula_key(s.extract))


# ---------------------------------------------------------------------------
# Compacting
# ---------------------------------------------------------------------------

def compact(b: Bunch) -> Formula:
    """The translation sending ; to /\\, , to *, and units to their tops."""
    if isinstance(b, Leaf):
        return b.formula
    if isinstance(b, AddUnit):
        return TOP
    if isinstance(b, MultUnit):
        return MULT_TOP
    if isinstance(b, Semi):
        return And(compact(b.left), compact(b.right))
    return Star(compact(b.left), compact(b.right))


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

# binding strength of each binary connective; unary/nullary never need parens
_PREC = {Star: 3, And: 3, Or: 2, Imp: 1, Wand: 1}
_OPS = {Star: "*", And: "/\\", Or: "\\/", Imp: "->", Wand: "-*"}


def formula_str(f: Formula, parent: int = 0, right: bool = False) -> str:
    if isinstance(f, Atom):
        return f.name
    if isinstance(f, Top):
        return "T"
    if isinstance(f, Bottom):
        return "F"
    if isinstance(f, MultTop):
        return "I"
    prec = _PREC[type(f)]
    if prec == 1:  # right associative
        body = (f"{formula_str(f.left, prec, False)} {_OPS[type(f)]} "
                f"{formula_str(f.right, prec - 1, True)}")
    else:  # left associative
        body = (f"{formula_str(f.left, prec - 1, False)} {_OPS[type(f)]} "
                f"{formula_str(f.right, prec, False)}")
    needs = parent > prec or (parent == prec and not right)
    # parent == prec on the recursive calls above encodes associativity
    return f"({body})" if needs else body


def bunch_str(b: Bunch) -> str:
    if isinstance(b, Leaf):
        return formula_str(b.formula)
    if isinstance(b, AddUnit):
        return "@a"
    if isinstance(b, MultUnit):
        return "@m"
    former = type(b)
    sep = " ; " if former is Semi else " , "

    def elem(e: Bunch) -> str:
        if isinstance(e, (Semi, Comma)):
            return f"({bunch_str(e)})"
        return bunch_str(e)

    # only the left spine prints flat; it re-parses left-associatively
    spine: list[Bunch] = []
    node: Bunch = b
    while isinstance(node, former):
        spine.append(node.right)
        node = node.left
    spine.append(node)
    return sep.join(elem(e) for e in reversed(spine))


def sequent_str(s: AnySequent) -> str:
    return str(s)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"""(?P<ws>\s+)
      | (?P<op>\|-|->|-\*|/\\|\\/|[*;,()])
      | (?P<unit>@[am])
      | (?P<const>[TFI]\b)
      | (?P<atom>[a-z][a-zA-Z0-9_]*)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos = 0
    line, col = 1, 1
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise BiSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup or ""
        lexeme = m.group()
        if kind != "ws":
            toks.append(_Tok(kind, lexeme, line, col))
        for ch in lexeme:
            if ch == "\n":
                line += 1
                col = 1
            else:
                col += 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> _Tok:
        t = self.peek()
        if t.text != text:
            shown = t.text or "end of input"
            raise BiSyntaxError(f"expected {text!r}, found {shown!r}", t.line, t.col)
        return self.next()

    def error(self, msg: str):
        t = self.peek()
        raise BiSyntaxError(msg, t.line, t.col)

    # formulas: precedence climbing over three levels
    def formula(self) -> Formula:
        return self._imp()

    def _imp(self) -> Formula:
        left = self._or()
        t = self.peek()
        if t.text == "->":
            self.next()
            return Imp(left, self._imp())
        if t.text == "-*":
            self.next()
            return Wand(left, self._imp())
        return left

    def _or(self) -> Formula:
        left = self._star()
        while self.peek().text == "\\/":
            self.next()
            left = Or(left, self._star())
        return left

    def _star(self) -> Formula:
        left = self._primary()
        while self.peek().text in ("*", "/\\"):
            op = self.next().text
            right = self._primary()
            left = Star(left, right) if op == "*" else And(left, right)
        return left

    def _primary(self) -> Formula:
        t = self.peek()
        if t.text == "(":
            self.next()
            f = self.formula()
            self.expect(")")
            return f
        if t.kind == "atom":
            self.next()
            return Atom(t.text)
        if t.kind == "const":
            self.next()
            return {"T": TOP, "F": BOTTOM, "I": MULT_TOP}[t.text]
        self.error("expected a formula")

    # bunches: one former per list, desugared left-associatively
    def bunch(self) -> Bunch:
        first = self._bunch_elem()
        sep = self.peek().text
        if sep not in (";", ","):
            return first
        former = Semi if sep == ";" else Comma
        out = first
        while self.peek().text == sep:
            self.next()
            out = former(out, self._bunch_elem())
        nxt = self.peek().text
        if nxt in (";", ","):
            self.error("mixed bunch formers need parentheses")
        return out

    def _bunch_elem(self) -> Bunch:
        t = self.peek()
        if t.kind == "unit":
            self.next()
            return ADD_UNIT if t.text == "@a" else MULT_UNIT
        if t.text == "(":
            # a leading paren may open a formula or a nested bunch
            save = self.i
            try:
                return Leaf(self.formula())
            except BiSyntaxError:
                self.i = save
            self.expect("(")
            inner = self.bunch()
            self.expect(")")
            return inner
        return Leaf(self.formula())


def parse_formula(text: str) -> Formula:
    p = _Parser(text)
    if p.peek().kind == "eof":
        p.error("empty input")
    f = p.formula()
    if p.peek().kind != "eof":
        p.error(f"trailing input {p.peek().text!r}")
    return f


def parse_bunch(text: str) -> Bunch:
    p = _Parser(text)
    if p.peek().kind == "eof":
        p.error("empty input")
    b = p.bunch()
    if p.peek().kind != "eof":
        p.error(f"trailing input {p.peek().text!r}")
    return b


def parse_sequent(text: str) -> AnySequent:
    p = _Parser(text)
    if p.peek().kind == "eof":
        p.error("empty input")
    if p.peek().text == "|-":
        p.next()
        if p.peek().kind != "eof":
            p.error("the empty sequent takes no extract")
        return EMPTY_SEQUENT
    ctx = p.bunch()
    p.expect("|-")
    ext = p.formula()
    if p.peek().kind != "eof":
        p.error(f"trailing input {p.peek().text!r}")
    return Sequent(ctx, ext)
