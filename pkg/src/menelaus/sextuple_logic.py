"""Atomic sextuple formulas, the octahedral group action, and sequents.

Atomic formulas are sextuples of pairwise distinct letters from a countable
universe.  Compound formulas use two connectives: ``*`` (rendered for the
diamond, conjunction/disjunction by polarity) and ``<->`` (classical
equivalence).  A sequent is a finite multiset of formulas kept in a canonical
sorted representation.

The group G of order 24 generated by the position permutations
s = (123)(456) and t = (26)(35) acts on sextuples; its orbits are the
sextuples naming the same Menelaus configuration.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Optional, Union

from . import complex_core
from .complex_core import DeltaComplex, MComplexCert, complex_from_triangle_rows


class LogicError(Exception):
    pass


class RepeatedLetter(LogicError):
    def __init__(self, positions):
        super().__init__(f"repeated letter at positions {positions}")
        self.positions = positions


class NameCollision(LogicError):
    pass


class NotInGroup(LogicError):
    pass


LETTER_RE = re.compile(r"[A-Za-z0-9_]+\Z")


# -- formulas ----------------------------------------------------------------


@dataclass(frozen=True, order=True)
class AtomicFormula:
    entries: tuple

    def letters(self) -> frozenset:
        return frozenset(self.entries)

    def render(self) -> str:
        return "(" + ",".join(self.entries) + ")"

    def __repr__(self):
        return f"AtomicFormula{self.entries}"


@dataclass(frozen=True)
class Diskon:
    left: "Formula"
    right: "Formula"

    def letters(self) -> frozenset:
        return self.left.letters() | self.right.letters()

    def render(self) -> str:
        return f"({self.left.render()} * {self.right.render()})"


@dataclass(frozen=True)
class Equiv:
    left: "Formula"
    right: "Formula"

    def letters(self) -> frozenset:
        return self.left.letters() | self.right.letters()

    def render(self) -> str:
        return f"({self.left.render()} <-> {self.right.render()})"


Formula = Union[AtomicFormula, Diskon, Equiv]


def make_atomic(letters: Iterable[str]) -> AtomicFormula:
    """A sextuple formula; raises RepeatedLetter unless all six are distinct."""
    entries = tuple(letters)
    if len(entries) != 6:
        raise LogicError(f"need exactly 6 letters, got {len(entries)}")
    for x in entries:
        if not LETTER_RE.match(x):
            raise LogicError(f"bad letter {x!r}")
    repeats = [
        (i, j)
        for i in range(6)
        for j in range(i + 1, 6)
        if entries[i] == entries[j]
    ]
    if repeats:
        raise RepeatedLetter(repeats)
    return AtomicFormula(entries)


def formula_key(f: Formula) -> tuple:
    """Total order used for the canonical sequent form."""
    return (f.render(),)


def is_atomic(f: Formula) -> bool:
    return isinstance(f, AtomicFormula)


def subformulas(f: Formula) -> set:
    out = {f}
    if isinstance(f, (Diskon, Equiv)):
        out |= subformulas(f.left)
        out |= subformulas(f.right)
    return out


# -- sequents ----------------------------------------------------------------


@dataclass(frozen=True)
class Sequent:
    """A finite multiset of formulas, stored sorted (canonical form)."""

    formulas: tuple

    @staticmethod
    def of(formulas: Iterable[Formula]) -> "Sequent":
        return Sequent(tuple(sorted(formulas, key=formula_key)))

    def __len__(self):
        return len(self.formulas)

    def is_atomic(self) -> bool:
        return all(is_atomic(f) for f in self.formulas)

    def letters(self) -> frozenset:
        out: frozenset = frozenset()
        for f in self.formulas:
            out |= f.letters()
        return out

    def remove_one(self, f: Formula) -> "Sequent":
        items = list(self.formulas)
        items.remove(f)
        return Sequent.of(items)

    def add(self, *fs: Formula) -> "Sequent":
        return Sequent.of(self.formulas + tuple(fs))

    def union(self, other: "Sequent") -> "Sequent":
        return Sequent.of(self.formulas + other.formulas)

    def contains(self, f: Formula) -> bool:
        return f in self.formulas

    def render(self) -> str:
        return "|- " + ", ".join(f.render() for f in self.formulas)

    def __repr__(self):
        return f"<{self.render()}>"


def letters(s: Sequent) -> frozenset:
    return s.letters()


def size(s: Sequent) -> int:
    return len(s)


# -- the octahedral group ----------------------------------------------------


def _perm_from_cycles(cycles, n=6) -> tuple:
    img = list(range(n))
    for cyc in cycles:
        for a, b in zip(cyc, cyc[1:] + cyc[:1]):
            img[a - 1] = b - 1
    return tuple(img)


S_PERM = _perm_from_cycles([(1, 2, 3), (4, 5, 6)])
T_PERM = _perm_from_cycles([(2, 6), (3, 5)])
IDENTITY_PERM = tuple(range(6))


def _compose(g: tuple, h: tuple) -> tuple:
    # apply(compose(g, h), a) == apply(g, apply(h, a))
    return tuple(h[g[i]] for i in range(6))


def _closure():
    words = {IDENTITY_PERM: ""}
    frontier = [IDENTITY_PERM]
    while frontier:
        nxt = []
        for g in frontier:
            for name, gen in (("s", S_PERM), ("t", T_PERM)):
                h = _compose(gen, g)
                if h not in words:
                    words[h] = words[g] + name
                    nxt.append(h)
        frontier = nxt
    return words


# Each group element mapped to a shortest generator word, read left to right:
# "st" is the element acting as "apply s, then t".
GROUP_WORDS = _closure()
GROUP = frozenset(GROUP_WORDS)
assert len(GROUP) == 24


@dataclass(frozen=True)
class GroupElement:
    perm: tuple

    def __post_init__(self):
        if self.perm not in GROUP:
            raise NotInGroup(f"{self.perm} is not in the octahedral group")

    @staticmethod
    def s() -> "GroupElement":
        return GroupElement(S_PERM)

    @staticmethod
    def t() -> "GroupElement":
        return GroupElement(T_PERM)

    @staticmethod
    def identity() -> "GroupElement":
        return GroupElement(IDENTITY_PERM)

    def compose(self, other: "GroupElement") -> "GroupElement":
        return GroupElement(_compose(self.perm, other.perm))

    def word(self) -> str:
        return GROUP_WORDS[self.perm]


def group_elements() -> list:
    return [GroupElement(p) for p in sorted(GROUP)]


def apply_group(g: GroupElement, a: AtomicFormula) -> AtomicFormula:
    """Position action: entry i of the result is entry g(i) of ``a``."""
    return AtomicFormula(tuple(a.entries[g.perm[i]] for i in range(6)))


def orbit(a: AtomicFormula) -> frozenset:
    return frozenset(apply_group(GroupElement(p), a) for p in GROUP)


def same_orbit(a: AtomicFormula, b: AtomicFormula) -> bool:
    return b in orbit(a)


def orbit_canonical(a: AtomicFormula) -> AtomicFormula:
    """The least orbit member; a normalization helper, not the primary syntax."""
    return min(orbit(a), key=lambda f: f.entries)


def orbit_element_between(a: AtomicFormula, b: AtomicFormula) -> Optional[GroupElement]:
    """Some g with apply_group(g, a) == b, or None."""
    for p in sorted(GROUP):
        g = GroupElement(p)
        if apply_group(g, a) == b:
            return g
    return None


# -- the triangle-to-formula operator ----------------------------------------


def nu(cert_or_complex, x: str) -> AtomicFormula:
    """The sextuple (v0, v1, v2, d0 x, d1 x, d2 x) of a 2-cell.

    Raises NameCollision when a vertex letter equals an edge letter of the
    same triangle, which would leave the sextuple with a repeated entry.
    """
    K = cert_or_complex.complex if isinstance(cert_or_complex, MComplexCert) else cert_or_complex
    if x not in K.triangle_faces:
        raise complex_core.UnknownCell(f"2-cell {x!r} not in complex")
    v0, v1, v2 = K.triangle_vertices(x)
    e0, e1, e2 = K.triangle_faces[x]
    entries = (v0, v1, v2, e0, e1, e2)
    if len(set(entries)) != 6:
        raise NameCollision(f"cells of {x!r} do not form six distinct letters: {entries}")
    return AtomicFormula(entries)


def axiomatic_sequent(cert: MComplexCert) -> Sequent:
    """The multiset of nu-images of all 2-cells of a certified complex."""
    return Sequent.of(nu(cert, x) for x in cert.complex.triangles)


# -- recognizing axiomatic sequents ------------------------------------------


@dataclass(frozen=True)
class SchemaInstance:
    """An instance of the identity pair or of the two permutation/switching
    axiom schemata."""

    kind: str   # "id" | "perm" | "switch"
    base: AtomicFormula

    def sequent(self) -> Sequent:
        if self.kind == "id":
            other = self.base
        elif self.kind == "perm":
            other = apply_group(GroupElement.s(), self.base)
        elif self.kind == "switch":
            other = apply_group(GroupElement.t(), self.base)
        else:
            raise LogicError(f"unknown schema kind {self.kind!r}")
        return Sequent.of([self.base, other])


def reconstruct_complex(s: Sequent, cell_prefix: str = "c"):
    """The unique candidate complex of an atomic sequent.

    Each formula occurrence becomes a fresh 2-cell; 1-cells are identified by
    letter with vertex pairs forced by the triangle incidences; 0-cells are
    identified by letter.  Returns the DeltaComplex or None when the
    incidences conflict (or a letter is used both as vertex and edge).
    """
    rows = []
    for n, f in enumerate(s.formulas):
        if not is_atomic(f):
            return None
        v0, v1, v2, e0, e1, e2 = f.entries
        rows.append((f"{cell_prefix}{n + 1}", v0, v1, v2, e0, e1, e2))
    vertex_letters = {v for _, v0, v1, v2, _e0, _e1, _e2 in rows for v in (v0, v1, v2)}
    edge_letters = {e for _, _v0, _v1, _v2, e0, e1, e2 in rows for e in (e0, e1, e2)}
    if vertex_letters & edge_letters:
        return None
    try:
        return complex_from_triangle_rows(rows)
    except complex_core.ComplexError:
        return None


def is_axiomatic(s: Sequent):
    """MComplexCert or SchemaInstance for an axiomatic sequent, else None.

    Reconstruction treats every formula occurrence as a distinct 2-cell, so
    the identity pair comes back as the two-triangle sphere; the schema check
    covers exactly the permutation and switching axioms.
    """
    if not s.is_atomic():
        raise LogicError("is_axiomatic expects a purely atomic sequent")
    K = reconstruct_complex(s)
    if K is not None:
        cert = complex_core.validate_mcomplex(K)
        if cert:
            return cert
    if len(s) == 2:
        a, b = s.formulas
        for base, other in ((a, b), (b, a)):
            if apply_group(GroupElement.s(), base) == other:
                return SchemaInstance("perm", base)
            if apply_group(GroupElement.t(), base) == other:
                return SchemaInstance("switch", base)
    return None


# -- text format ---------------------------------------------------------------


class ParseError(LogicError):
    def __init__(self, text, pos, message):
        super().__init__(f"at {pos}: {message}")
        self.text = text
        self.pos = pos


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, message):
        raise ParseError(self.text, self.pos, message)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def expect(self, token: str):
        self.skip_ws()
        if not self.text.startswith(token, self.pos):
            self.error(f"expected {token!r}")
        self.pos += len(token)

    def peek(self, token: str) -> bool:
        self.skip_ws()
        return self.text.startswith(token, self.pos)

    def letter(self) -> str:
        self.skip_ws()
        m = re.match(r"[A-Za-z0-9_]+", self.text[self.pos:])
        if not m:
            self.error("expected a letter")
        self.pos += m.end()
        return m.group(0)

    def formula(self) -> Formula:
        self.expect("(")
        self.skip_ws()
        if self.peek("("):
            left = self.formula()
            self.skip_ws()
            if self.peek("*"):
                self.expect("*")
                op = "diskon"
            elif self.peek("<->"):
                self.expect("<->")
                op = "equiv"
            else:
                self.error("expected '*' or '<->'")
            right = self.formula()
            self.expect(")")
            return Diskon(left, right) if op == "diskon" else Equiv(left, right)
        entries = [self.letter()]
        while self.peek(","):
            self.expect(",")
            entries.append(self.letter())
        self.expect(")")
        if len(entries) != 6:
            self.error(f"atomic formula needs 6 letters, got {len(entries)}")
        return make_atomic(entries)

    def sequent(self) -> Sequent:
        self.expect("|-")
        formulas = [self.formula()]
        while self.peek(","):
            self.expect(",")
            formulas.append(self.formula())
        self.skip_ws()
        if self.pos != len(self.text):
            self.error("trailing input")
        return Sequent.of(formulas)


def parse_formula(text: str) -> Formula:
    p = _Parser(text)
    f = p.formula()
    p.skip_ws()
    if p.pos != len(text):
        p.error("trailing input")
    return f


def parse_sequent(text: str) -> Sequent:
    return _Parser(text).sequent()


def render_formula(f: Formula) -> str:
    return f.render()


def render_sequent(s: Sequent) -> str:
    return s.render()
