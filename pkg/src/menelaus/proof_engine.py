"""Derivations, rule checking, normalization, and the decision procedure.

Rules: two cut rules (one consuming a shared formula occurrence from each
premise, one with empty cut formula that just merges), diamond-introduction
(same context in both premises) and equivalence-introduction.  A derivation
is *normal* when no introduction occurs above any cut; normalization rewrites
offending cuts with a lexicographic (degree, rank) measure that strictly
decreases (as a multiset over all offending cuts) at every step.

The decision procedure reduces a sequent to the atomic system (normal
derivations of atomic sequents use only cuts over axiomatic sequents) and
searches backwards over last-rule splits, working in the quotient of atomic
formulas by the octahedral group; schema axioms re-enter as explicit bridges
when the found plan is assembled into a checkable derivation.  Budgets are
mandatory and any truncated search reports ResourceExceeded rather than
Underivable.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import perm as _perm_count
from typing import Optional, Union

from . import complex_core, sextuple_logic
from .complex_core import MComplexCert, validate_mcomplex
from .sextuple_logic import (
    AtomicFormula,
    Diskon,
    Equiv,
    Formula,
    GroupElement,
    SchemaInstance,
    Sequent,
    apply_group,
    formula_key,
    is_atomic,
    orbit_canonical,
    orbit_element_between,
    reconstruct_complex,
    same_orbit,
    subformulas,
)

letters = sextuple_logic.letters
size = sextuple_logic.size


class ProofError(Exception):
    pass


# -- derivation objects -------------------------------------------------------


@dataclass(frozen=True)
class Axiom:
    conclusion: Sequent
    source: object                  # MComplexCert | SchemaInstance
    name: Optional[str] = None

    premises = ()


@dataclass(frozen=True)
class Cut:
    conclusion: Sequent
    left: "Derivation"
    right: "Derivation"
    cut_formula: Formula

    @property
    def premises(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class EmptyCut:
    conclusion: Sequent
    left: "Derivation"
    right: "Derivation"

    @property
    def premises(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class DiskonIntro:
    conclusion: Sequent
    left: "Derivation"
    right: "Derivation"
    principal: tuple                # (phi, psi)

    @property
    def premises(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class EquivIntro:
    conclusion: Sequent
    left: "Derivation"
    right: "Derivation"
    principal: tuple

    @property
    def premises(self):
        return (self.left, self.right)


Derivation = Union[Axiom, Cut, EmptyCut, DiskonIntro, EquivIntro]


def mk_axiom(source, name: Optional[str] = None) -> Axiom:
    if isinstance(source, MComplexCert):
        conclusion = sextuple_logic.axiomatic_sequent(source)
    elif isinstance(source, SchemaInstance):
        conclusion = source.sequent()
    else:
        raise ProofError(f"bad axiom source {source!r}")
    return Axiom(conclusion, source, name)


def mk_cut(left: Derivation, right: Derivation, cut_formula: Formula) -> Cut:
    if not left.conclusion.contains(cut_formula) or not right.conclusion.contains(cut_formula):
        raise ProofError("cut formula missing from a premise")
    conclusion = left.conclusion.remove_one(cut_formula).union(
        right.conclusion.remove_one(cut_formula))
    return Cut(conclusion, left, right, cut_formula)


def mk_empty_cut(left: Derivation, right: Derivation) -> EmptyCut:
    return EmptyCut(left.conclusion.union(right.conclusion), left, right)


def mk_diskon(left: Derivation, right: Derivation, phi: Formula, psi: Formula) -> DiskonIntro:
    if not left.conclusion.contains(phi) or not right.conclusion.contains(psi):
        raise ProofError("diskon premises lack the introduced parts")
    gamma_l = left.conclusion.remove_one(phi)
    gamma_r = right.conclusion.remove_one(psi)
    if gamma_l != gamma_r:
        raise ProofError("diskon premises have different contexts")
    return DiskonIntro(gamma_l.add(Diskon(phi, psi)), left, right, (phi, psi))


def mk_equiv(left: Derivation, right: Derivation, phi: Formula, psi: Formula) -> EquivIntro:
    if not left.conclusion.contains(phi) or not right.conclusion.contains(psi):
        raise ProofError("equiv premises lack the introduced parts")
    conclusion = left.conclusion.remove_one(phi).union(
        right.conclusion.remove_one(psi)).add(Equiv(phi, psi))
    return EquivIntro(conclusion, left, right, (phi, psi))


# -- rule checking -------------------------------------------------------------


@dataclass(frozen=True)
class Verdict:
    ok: bool
    node: Optional[Derivation] = None
    reason: str = ""

    def __bool__(self):
        return self.ok


def check_derivation(d: Derivation) -> Verdict:
    """Validate every node against its rule; report the first invalid one
    (post-order, premises first)."""
    for node in _postorder(d):
        bad = _check_node(node)
        if bad:
            return Verdict(False, node, bad)
    return Verdict(True)


def _postorder(d: Derivation):
    for p in d.premises:
        yield from _postorder(p)
    yield d


def _check_node(node: Derivation) -> str:
    if isinstance(node, Axiom):
        if isinstance(node.source, MComplexCert):
            want = sextuple_logic.axiomatic_sequent(node.source)
            if node.conclusion != want:
                return "axiom conclusion differs from the complex's sequent"
            return ""
        if isinstance(node.source, SchemaInstance):
            if node.conclusion != node.source.sequent():
                return "axiom conclusion differs from the schema instance"
            return ""
        return "unknown axiom source"
    if isinstance(node, Cut):
        phi = node.cut_formula
        if not node.left.conclusion.contains(phi):
            return "cut formula missing from left premise"
        if not node.right.conclusion.contains(phi):
            return "cut formula missing from right premise"
        want = node.left.conclusion.remove_one(phi).union(
            node.right.conclusion.remove_one(phi))
        if node.conclusion != want:
            return "cut conclusion is not the merged multiset"
        return ""
    if isinstance(node, EmptyCut):
        if node.conclusion != node.left.conclusion.union(node.right.conclusion):
            return "empty-cut conclusion is not the merged multiset"
        return ""
    if isinstance(node, DiskonIntro):
        phi, psi = node.principal
        compound = Diskon(phi, psi)
        if not node.conclusion.contains(compound):
            return "principal diskon formula missing from conclusion"
        if not node.left.conclusion.contains(phi) or not node.right.conclusion.contains(psi):
            return "diskon premises lack the introduced parts"
        gamma_l = node.left.conclusion.remove_one(phi)
        gamma_r = node.right.conclusion.remove_one(psi)
        if gamma_l != gamma_r:
            return "diskon premises have different contexts"
        if node.conclusion != gamma_l.add(compound):
            return "diskon conclusion differs from context plus principal"
        return ""
    if isinstance(node, EquivIntro):
        phi, psi = node.principal
        compound = Equiv(phi, psi)
        if not node.conclusion.contains(compound):
            return "principal equiv formula missing from conclusion"
        if not node.left.conclusion.contains(phi) or not node.right.conclusion.contains(psi):
            return "equiv premises lack the introduced parts"
        want = node.left.conclusion.remove_one(phi).union(
            node.right.conclusion.remove_one(psi)).add(compound)
        if node.conclusion != want:
            return "equiv conclusion differs from merged contexts plus principal"
        return ""
    return "unknown node kind"


# -- degrees, ranks, normal form -----------------------------------------------


def degree(f: Formula) -> int:
    """Number of connectives in a formula."""
    if isinstance(f, AtomicFormula):
        return 0
    return 1 + degree(f.left) + degree(f.right)


@dataclass(frozen=True)
class CutMeasure:
    degree: int
    rank: int


def _count(seq: Sequent, f: Formula) -> int:
    return seq.formulas.count(f)


def _rank(node: Derivation, f: Formula, occ: int, memo: dict) -> int:
    """Rank of occurrence ``occ`` of ``f`` (canonical order) in the node's
    conclusion: the size of the upward closure of the successor relation.

    Introduced/principal formulas occupy the LAST index among equal formulas;
    cut formulas are consumed at index 0 (leftmost), matching the occurrence
    the normalizer cuts.
    """
    key = (id(node), f, occ)
    if key in memo:
        return memo[key]
    result = 1
    if isinstance(node, Cut):
        phi = node.cut_formula
        in_left = _count(node.left.conclusion, f) - (1 if f == phi else 0)
        if occ < in_left:
            result = 1 + _rank(node.left, f, occ + (1 if f == phi else 0), memo)
        else:
            result = 1 + _rank(node.right, f, occ - in_left + (1 if f == phi else 0), memo)
    elif isinstance(node, EmptyCut):
        in_left = _count(node.left.conclusion, f)
        if occ < in_left:
            result = 1 + _rank(node.left, f, occ, memo)
        else:
            result = 1 + _rank(node.right, f, occ - in_left, memo)
    elif isinstance(node, DiskonIntro):
        phi, psi = node.principal
        compound = Diskon(phi, psi)
        if f == compound and occ == _count(node.conclusion, f) - 1:
            result = 1   # principal: no successors
        else:
            result = 1 + _rank(node.left, f, occ, memo) + _rank(node.right, f, occ, memo)
    elif isinstance(node, EquivIntro):
        phi, psi = node.principal
        compound = Equiv(phi, psi)
        if f == compound and occ == _count(node.conclusion, f) - 1:
            result = 1
        else:
            gamma = node.left.conclusion.remove_one(phi)
            in_left = _count(gamma, f)
            if occ < in_left:
                result = 1 + _rank(node.left, f, occ, memo)
            else:
                result = 1 + _rank(node.right, f, occ - in_left, memo)
    memo[key] = result
    return result


def cut_measure(node: Derivation) -> CutMeasure:
    """(degree, rank) of a cut node; empty cuts get degree 0 and the number
    of introductions above them plus two as a rank stand-in."""
    if isinstance(node, Cut):
        memo: dict = {}
        r = _rank(node.left, node.cut_formula, 0, memo) + _rank(
            node.right, node.cut_formula, 0, memo)
        return CutMeasure(degree(node.cut_formula), r)
    if isinstance(node, EmptyCut):
        return CutMeasure(0, _intro_count(node) + 2)
    raise ProofError("cut_measure applies to cut nodes only")


def _intro_count(d: Derivation) -> int:
    n = 1 if isinstance(d, (DiskonIntro, EquivIntro)) else 0
    return n + sum(_intro_count(p) for p in d.premises)


def _has_intro_above(d: Derivation) -> bool:
    return any(_intro_count(p) > 0 for p in d.premises)


def is_normal(d: Derivation) -> bool:
    """No introduction above any cut."""
    for node in _postorder(d):
        if isinstance(node, (Cut, EmptyCut)) and _has_intro_above(node):
            return False
    return True


def offending_cut_measures(d: Derivation) -> list:
    out = []
    for node in _postorder(d):
        if isinstance(node, (Cut, EmptyCut)) and _has_intro_above(node):
            m = cut_measure(node)
            out.append((m.degree, m.rank))
    return sorted(out, reverse=True)


def _multiset_less(a: list, b: list) -> bool:
    """Dershowitz-Manna comparison of measure multisets over the lex order,
    given as descending sorted lists."""
    if a == b:
        return False
    for x, y in zip(a, b):
        if x != y:
            return x < y
    return len(a) < len(b)


def normalize(d: Derivation, on_step=None) -> Derivation:
    """Rewrite until no introduction precedes a cut.

    Each step rewrites one innermost offending cut (first in post-order);
    the multiset of (degree, rank) measures of offending cuts strictly
    decreases, which is asserted.  ``on_step(before, after)`` is called with
    the measure multisets after every rewrite.
    """
    verdict = check_derivation(d)
    if not verdict:
        raise ProofError(f"normalize needs a valid derivation: {verdict.reason}")
    while True:
        target = _first_innermost_offender(d)
        if target is None:
            return d
        before = offending_cut_measures(d)
        d = _rewrite_at(d, target)
        after = offending_cut_measures(d)
        if not _multiset_less(after, before):
            raise ProofError(f"normalization measure did not decrease: {before} -> {after}")
        if on_step is not None:
            on_step(before, after)


def _first_innermost_offender(d: Derivation):
    for node in _postorder(d):
        if isinstance(node, (Cut, EmptyCut)) and _has_intro_above(node):
            return node
    return None


def _rewrite_at(d: Derivation, target: Derivation) -> Derivation:
    if d is target:
        return _rewrite_offender(d)
    if isinstance(d, Axiom):
        return d
    new_left = _rewrite_at(d.left, target)
    new_right = _rewrite_at(d.right, target)
    if new_left is d.left and new_right is d.right:
        return d
    if isinstance(d, Cut):
        return mk_cut(new_left, new_right, d.cut_formula)
    if isinstance(d, EmptyCut):
        return mk_empty_cut(new_left, new_right)
    if isinstance(d, DiskonIntro):
        return mk_diskon(new_left, new_right, *d.principal)
    if isinstance(d, EquivIntro):
        return mk_equiv(new_left, new_right, *d.principal)
    raise ProofError("unknown node kind")


def _rewrite_offender(node: Derivation) -> Derivation:
    left, right = node.left, node.right

    if isinstance(node, EmptyCut):
        # Push the merge above the introduction (both orientations).
        if isinstance(left, DiskonIntro):
            phi, psi = left.principal
            return mk_diskon(mk_empty_cut(left.left, right),
                             mk_empty_cut(left.right, right), phi, psi)
        if isinstance(left, EquivIntro):
            phi, psi = left.principal
            return mk_equiv(mk_empty_cut(left.left, right), left.right, phi, psi)
        if isinstance(right, DiskonIntro):
            phi, psi = right.principal
            return mk_diskon(mk_empty_cut(left, right.left),
                             mk_empty_cut(left, right.right), phi, psi)
        if isinstance(right, EquivIntro):
            phi, psi = right.principal
            return mk_equiv(mk_empty_cut(left, right.left), right.right, phi, psi)
        raise ProofError("offending empty cut with no introduction premise")

    assert isinstance(node, Cut)
    phi = node.cut_formula

    def principal_on(premise):
        if isinstance(premise, DiskonIntro):
            a, b = premise.principal
            return premise.conclusion.contains(phi) and Diskon(a, b) == phi and \
                _count(premise.conclusion, phi) == 1
        if isinstance(premise, EquivIntro):
            a, b = premise.principal
            return premise.conclusion.contains(phi) and Equiv(a, b) == phi and \
                _count(premise.conclusion, phi) == 1
        return False

    if degree(phi) > 0 and principal_on(left) and principal_on(right):
        if isinstance(left, DiskonIntro) and isinstance(right, DiskonIntro):
            a, b = left.principal
            return mk_cut(left.left, right.left, a)
        if isinstance(left, EquivIntro) and isinstance(right, EquivIntro):
            a, b = left.principal
            return mk_empty_cut(mk_cut(left.left, right.left, a),
                                mk_cut(left.right, right.right, b))
        raise ProofError("principal connectives disagree on a cut formula")

    # Rank reduction: push the cut into an introduction where the cut formula
    # is not principal.
    for premise, other, orient in ((left, right, "L"), (right, left, "R")):
        if isinstance(premise, DiskonIntro) and not principal_on(premise):
            a, b = premise.principal
            if premise.left.conclusion.contains(phi) and premise.right.conclusion.contains(phi):
                if orient == "L":
                    return mk_diskon(mk_cut(premise.left, other, phi),
                                     mk_cut(premise.right, other, phi), a, b)
                return mk_diskon(mk_cut(other, premise.left, phi),
                                 mk_cut(other, premise.right, phi), a, b)
        if isinstance(premise, EquivIntro) and not principal_on(premise):
            a, b = premise.principal
            if premise.left.conclusion.contains(phi):
                inner = mk_cut(premise.left, other, phi) if orient == "L" else \
                    mk_cut(other, premise.left, phi)
                return mk_equiv(inner, premise.right, a, b)
            if premise.right.conclusion.contains(phi):
                inner = mk_cut(premise.right, other, phi) if orient == "L" else \
                    mk_cut(other, premise.right, phi)
                return mk_equiv(premise.left, inner, a, b)
    raise ProofError("offending cut with no reducible premise")


# -- decision procedure ---------------------------------------------------------


@dataclass(frozen=True)
class Budget:
    max_candidate_complex_cells: int = 6
    max_saturation_rounds: int = 8
    max_generated_sequents: int = 100_000

    def __post_init__(self):
        if min(self.max_candidate_complex_cells, self.max_saturation_rounds,
               self.max_generated_sequents) <= 0:
            raise ValueError("budget fields must be positive")


@dataclass(frozen=True)
class RefutationCertificate:
    reason: str     # OddLength | OrbitMismatch | NotAxiomaticUpToReconstruction
                    # | SaturationExhausted
    details: dict


@dataclass(frozen=True)
class Derivable:
    derivation: Derivation

    kind = "derivable"


@dataclass(frozen=True)
class Underivable:
    certificate: RefutationCertificate

    kind = "underivable"


@dataclass(frozen=True)
class ResourceExceeded:
    trace: dict

    kind = "resource-exceeded"


def quick_refute(s: Sequent) -> Optional[RefutationCertificate]:
    """Fast sound refutations for atomic sequents.

    In order: odd length; the two-element orbit check; a counting exhaustion
    of the ways an atomic derivation could exist (axiomatic sequents have
    evenly many formulas; letter counts of a candidate reconstruction must
    match the even Euler characteristic; surviving same-orbit pairs are
    peeled off first).  Returns None when no check fires; never fires on a
    derivable sequent.
    """
    if not s.is_atomic():
        raise ProofError("quick_refute expects an atomic sequent")
    n = len(s)
    if n % 2 == 1:
        return RefutationCertificate("OddLength", {"size": n})
    if n == 2:
        a, b = s.formulas
        if not same_orbit(a, b):
            return RefutationCertificate(
                "OrbitMismatch", {"formulas": [a.render(), b.render()]})
        return None
    if n < 4:
        return None
    return _shape_refutation(s)


def _shape_refutation(s: Sequent) -> Optional[RefutationCertificate]:
    """Exhaust the possible leaf shapes of an atomic derivation.

    Any atomic derivation is a forest of axiomatic sequents joined by cuts;
    folding schema/identity axioms into the group action leaves M-complex
    leaves with at least four cells, plus possibly surviving same-orbit
    pairs.  If for every way of peeling such pairs every remaining shape is
    impossible by counting (letter parity of a single-leaf reconstruction;
    a three-letter common core forcing a three-vertex leaf with odd Euler
    characteristic), the sequent is underivable.
    """
    classes: dict = {}
    for f in s.formulas:
        classes.setdefault(orbit_canonical(f), []).append(f)
    class_items = sorted(classes.items(), key=lambda kv: kv[0].entries)
    peel_ranges = [range(len(members) // 2 + 1) for _, members in class_items]

    analyses = []
    for peels in itertools.product(*peel_ranges):
        remainder = []
        for (canon, members), k in zip(class_items, peels):
            remainder.extend(members[: len(members) - 2 * k])
        if not remainder:
            return None     # all formulas pair up inside orbits: derivable
        analysis = _shapes_all_die(remainder)
        if analysis is None:
            return None
        analyses.append({"peeled_pairs": sum(peels), "analysis": analysis})
    return RefutationCertificate(
        "NotAxiomaticUpToReconstruction",
        {
            "size": len(s),
            "letters": len(s.letters()),
            "branches": analyses,
        },
    )


def _forest_degree_sequences(p: int, total: int):
    """Degree sequences (sorted desc) of simple forests on p labelled nodes
    with total degree ``total``, found by brute force over edge sets."""
    if total % 2:
        return set()
    q = total // 2
    out = set()
    nodes = range(p)
    for edges in itertools.combinations(itertools.combinations(nodes, 2), q):
        # forest check: q edges, no cycles
        parent = list(nodes)

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        ok = True
        for a, b in edges:
            ra, rb = find(a), find(b)
            if ra == rb:
                ok = False
                break
            parent[ra] = rb
        if not ok:
            continue
        deg = [0] * p
        for a, b in edges:
            deg[a] += 1
            deg[b] += 1
        out.add(tuple(sorted(deg, reverse=True)))
    return out


def _shapes_all_die(remainder: list) -> Optional[dict]:
    """None when some leaf shape might realize the remainder; otherwise a
    summary of why every shape dies."""
    n = len(remainder)
    if n % 2:
        return {"reason": "odd remainder"}
    m = len(frozenset().union(*[f.letters() for f in remainder]))
    core = remainder[0].letters()
    for f in remainder[1:]:
        core &= f.letters()

    def leaf_dies(n_i: int, c_i: int) -> bool:
        s_i = n_i - c_i
        if s_i < 3:
            return False
        if len(core) > 3:
            return True
        if len(core) == 3 and c_i <= 1 and n_i % 4 == 0:
            return True
        return False

    # Leaf multisets: n_i >= 4 even, sum (n_i - 2) <= n - 2.
    shapes = []

    def leaf_multisets(budget, minimum):
        yield ()
        k = max(4, minimum)
        while k - 2 <= budget:
            for rest in leaf_multisets(budget - (k - 2), k):
                yield (k,) + rest
            k += 2

    for ns in leaf_multisets(n - 2, 4):
        if not ns:
            continue
        p = len(ns)
        total_consumed = sum(ns) - n
        if total_consumed < 0:
            continue
        for degs in _forest_degree_sequences(p, total_consumed):
            for assign in set(itertools.permutations(degs)):
                if any(assign[i] > ns[i] for i in range(p)):
                    continue
                shapes.append((ns, assign))

    surviving = []
    for ns, cs in shapes:
        if len(ns) == 1:
            if (n + m) % 2 == 1:
                continue    # single-leaf reconstruction has odd letter parity
            if leaf_dies(ns[0], cs[0]):
                continue
            surviving.append((ns, cs))
        else:
            if any(leaf_dies(ns[i], cs[i]) for i in range(len(ns))):
                continue
            surviving.append((ns, cs))
    if surviving:
        return None
    return {
        "remainder_size": n,
        "remainder_letters": m,
        "core": sorted(core),
        "shapes_checked": len(shapes),
    }


# -- axiomatic reconstruction up to the group action ----------------------------


def _vertex_edge_splits(formulas: list):
    """Assignments of the letters to vertices/edges consistent with counts:
    an edge letter occurs exactly twice overall and each formula carries
    exactly three letters of each kind."""
    counts: dict = {}
    for f in formulas:
        for x in f.entries:
            counts[x] = counts.get(x, 0) + 1
    forced_v = {x for x, c in counts.items() if c != 2}
    loose = sorted(x for x, c in counts.items() if c == 2)

    def consistent(vset):
        for f in formulas:
            if len([x for x in f.entries if x in vset]) != 3:
                return False
        return True

    def refine(vset, eset, remaining):
        # propagate per-formula 3/3 constraints
        changed = True
        vset, eset, remaining = set(vset), set(eset), set(remaining)
        while changed:
            changed = False
            for f in formulas:
                fl = set(f.entries)
                v_have = fl & vset
                e_have = fl & eset
                if len(v_have) > 3 or len(e_have) > 3:
                    return None
                open_ = fl & remaining
                if len(v_have) == 3 and open_:
                    eset |= open_
                    remaining -= open_
                    changed = True
                elif len(e_have) == 3 and open_:
                    vset |= open_
                    remaining -= open_
                    changed = True
        return vset, eset, remaining

    def search(vset, eset, remaining):
        state = refine(vset, eset, remaining)
        if state is None:
            return
        vset, eset, remaining = state
        if not remaining:
            if consistent(vset):
                yield frozenset(vset)
            return
        x = min(remaining)
        yield from search(vset | {x}, eset, remaining - {x})
        yield from search(vset, eset | {x}, remaining - {x})

    yield from search(set(forced_v), set(), set(loose))


def reconstruct_up_to_orbit(s: Sequent, counter=None) -> Optional[tuple]:
    """Find per-formula orbit representatives making ``s`` an axiomatic
    sequent, or None.

    Returns (cert, replacements) where replacements[i] is the representative
    used for the i-th canonical formula of ``s``.
    """
    formulas = list(s.formulas)
    for f in formulas:
        if not is_atomic(f):
            return None
    for vset in _vertex_edge_splits(formulas):
        reps = []
        for f in formulas:
            members = [g for g in sextuple_logic.orbit(f)
                       if set(g.entries[:3]) <= vset and set(g.entries[3:]).isdisjoint(vset)]
            if not members:
                reps = None
                break
            reps.append(sorted(members, key=lambda g: g.entries))
        if reps is None:
            continue
        found = _assemble_reps(formulas, reps, counter)
        if found is not None:
            return found
    return None


def _assemble_reps(formulas, reps, counter):
    n = len(formulas)
    order = sorted(range(n), key=lambda i: len(reps[i]))

    def backtrack(pos, edge_pairs, chosen):
        if counter is not None and not counter.spend():
            return None
        if pos == n:
            rows = [(f"c{i + 1}",) + chosen[i].entries for i in range(n)]
            try:
                K = complex_core.complex_from_triangle_rows(rows)
            except complex_core.ComplexError:
                return None
            cert = validate_mcomplex(K)
            if not cert:
                return None
            return (cert, list(chosen))
        i = order[pos]
        for g in reps[i]:
            v0, v1, v2, e0, e1, e2 = g.entries
            new_pairs = dict(edge_pairs)
            ok = True
            for e, pair in ((e0, (v2, v1)), (e1, (v2, v0)), (e2, (v1, v0))):
                if new_pairs.setdefault(e, pair) != pair:
                    ok = False
                    break
            if not ok:
                continue
            chosen[i] = g
            found = backtrack(pos + 1, new_pairs, chosen)
            if found is not None:
                return found
            chosen[i] = None
        return None

    return backtrack(0, {}, [None] * n)


# -- backward search in the quotient system -------------------------------------


class _Counter:
    def __init__(self, limit):
        self.limit = limit
        self.used = 0
        self.truncated = False

    def spend(self, k: int = 1) -> bool:
        self.used += k
        if self.used > self.limit:
            self.truncated = True
            return False
        return True


class _AtomicSearch:
    """Backward derivability search for atomic sequents in the quotient by
    the group action; plans record how to assemble a real derivation."""

    def __init__(self, budget: Budget):
        self.budget = budget
        self.counter = _Counter(budget.max_generated_sequents)
        self.memo: dict = {}
        self.depth_hit = False

    def canonical(self, formulas) -> tuple:
        return tuple(sorted((orbit_canonical(f) for f in formulas),
                            key=lambda f: f.entries))

    def search(self, formulas: tuple, depth: int = 0):
        """Return a plan or None; plans are over orbit-canonical formulas."""
        key = self.canonical(formulas)
        if key in self.memo:
            return self.memo[key]
        if depth > self.budget.max_saturation_rounds:
            self.depth_hit = True
            return None
        plan = self._search_raw(key, depth)
        self.memo[key] = plan
        return plan

    def _search_raw(self, key: tuple, depth: int):
        n = len(key)
        if n == 0 or n % 2 == 1:
            return None
        if n == 2:
            return ("pair", key[0]) if key[0] == key[1] else None
        if not self.counter.spend():
            return None

        if n <= self.budget.max_candidate_complex_cells:
            found = reconstruct_up_to_orbit(Sequent.of(key), self.counter)
            if found is not None:
                cert, replacements = found
                return ("axiom", cert, tuple(replacements))
        else:
            self.counter.truncated = True    # reconstruction skipped

        # letters of a derivable sequent each occur in at least two formulas
        letter_count: dict = {}
        for f in key:
            for x in f.entries:
                letter_count[x] = letter_count.get(x, 0) + 1
        if any(c < 2 for c in letter_count.values()):
            return None

        indices = range(n)
        # empty cut: unordered bipartitions with even parts
        for r in range(2, n - 1, 2):
            for part in itertools.combinations(indices, r):
                if 0 not in part:
                    continue    # fix index 0 on the left to halve the work
                left = [key[i] for i in part]
                right = [key[i] for i in indices if i not in part]
                pl = self.search(tuple(left), depth + 1)
                if pl is None:
                    continue
                pr = self.search(tuple(right), depth + 1)
                if pr is not None:
                    return ("ecut", pl, pr)

        # cut with a fresh formula over the shared letters of the two sides
        splits = []
        for r in range(3, n - 2, 2):
            for part in itertools.combinations(indices, r):
                left = [key[i] for i in part]
                right = [key[i] for i in indices if i not in part]
                shared = frozenset.intersection(
                    frozenset().union(*[f.letters() for f in left]),
                    frozenset().union(*[f.letters() for f in right]))
                if len(shared) >= 6:
                    splits.append((len(shared), part, left, right, shared))
        splits.sort(key=lambda t: (t[0], t[1]))
        seen_parts = set()
        for _, part, left, right, shared in splits:
            other = tuple(sorted(set(indices) - set(part)))
            if (other, part) in seen_parts:
                continue
            seen_parts.add((part, other))
            for phi in self._cut_candidates(shared):
                pl = self.search(tuple(left) + (phi,), depth + 1)
                if pl is None:
                    continue
                pr = self.search(tuple(right) + (phi,), depth + 1)
                if pr is not None:
                    return ("cut", phi, pl, pr)
        return None

    def _cut_candidates(self, shared: frozenset):
        letters_ = sorted(shared)
        total = _perm_count(len(letters_), 6) // 24
        if not self.counter.spend(total):
            return
        seen = set()
        for combo in itertools.permutations(letters_, 6):
            f = AtomicFormula(combo)
            c = orbit_canonical(f)
            if c not in seen:
                seen.add(c)
                yield c


# -- assembling real derivations from plans -------------------------------------


def _schema_step(base: AtomicFormula, gen: str) -> Axiom:
    kind = "perm" if gen == "s" else "switch"
    return mk_axiom(SchemaInstance(kind, base))


def derive_orbit_pair(a: AtomicFormula, b: AtomicFormula) -> Derivation:
    """A derivation of |- a, b for two formulas of one orbit."""
    if a == b:
        cert = sextuple_logic.is_axiomatic(Sequent.of([a, a]))
        if not isinstance(cert, MComplexCert):
            raise ProofError(f"identity pair for {a.render()} did not reconstruct")
        return mk_axiom(cert)
    g = orbit_element_between(a, b)
    if g is None:
        raise ProofError("formulas are not in the same orbit")
    word = g.word()
    current = a
    deriv: Optional[Derivation] = None
    for ch in word:
        nxt = apply_group(GroupElement.s() if ch == "s" else GroupElement.t(), current)
        axiom = _schema_step(current, ch)
        deriv = axiom if deriv is None else mk_cut(deriv, axiom, current)
        current = nxt
    assert current == b and deriv is not None
    return deriv


def _bridge_to(deriv: Derivation, target: Sequent) -> Derivation:
    """Cut with schema chains until the conclusion equals ``target`` (which
    must match the current conclusion formula-wise up to the group action)."""
    current = list(deriv.conclusion.formulas)
    want = list(target.formulas)
    for f in list(current):
        if f in want:
            want.remove(f)
            current.remove(f)
    for f in list(current):
        match = next((w for w in want if same_orbit(f, w)), None)
        if match is None:
            raise ProofError("bridge targets do not match up to the group action")
        want.remove(match)
        if match != f:
            deriv = mk_cut(deriv, derive_orbit_pair(f, match), f)
    if deriv.conclusion != target:
        raise ProofError("bridging failed to reach the target sequent")
    return deriv


def _assemble(plan, target: Sequent) -> Derivation:
    kind = plan[0]
    if kind == "pair":
        a, b = target.formulas
        return _bridge_to(derive_orbit_pair(a, b), target)
    if kind == "axiom":
        _, cert, _replacements = plan
        return _bridge_to(mk_axiom(cert), target)
    if kind == "ecut":
        _, pl, pr = plan
        left_canon = _plan_conclusion(pl)
        # partition the target formulas between the two plans by orbit class
        left_target, right_target = _split_target(target.formulas, left_canon)
        dl = _assemble(pl, Sequent.of(left_target))
        dr = _assemble(pr, Sequent.of(right_target))
        return mk_empty_cut(dl, dr)
    if kind == "cut":
        _, phi, pl, pr = plan
        left_canon = [f for f in _plan_conclusion(pl)]
        left_canon.remove(phi)
        left_target, right_target = _split_target(target.formulas, tuple(left_canon))
        dl = _assemble(pl, Sequent.of(list(left_target) + [phi]))
        dr = _assemble(pr, Sequent.of(list(right_target) + [phi]))
        return mk_cut(dl, dr, phi)
    raise ProofError(f"unknown plan {kind!r}")


def _plan_conclusion(plan) -> tuple:
    kind = plan[0]
    if kind == "pair":
        return (plan[1], plan[1])
    if kind == "axiom":
        cert = plan[1]
        return tuple(sorted(
            (orbit_canonical(f) for f in sextuple_logic.axiomatic_sequent(cert).formulas),
            key=lambda f: f.entries))
    if kind == "ecut":
        return tuple(sorted(_plan_conclusion(plan[1]) + _plan_conclusion(plan[2]),
                            key=lambda f: f.entries))
    if kind == "cut":
        phi = plan[1]
        left = list(_plan_conclusion(plan[2]))
        right = list(_plan_conclusion(plan[3]))
        left.remove(phi)
        right.remove(phi)
        return tuple(sorted(left + right, key=lambda f: f.entries))
    raise ProofError(f"unknown plan {kind!r}")


def _split_target(formulas: tuple, left_canon: tuple):
    remaining = list(formulas)
    left = []
    for c in left_canon:
        match = next(f for f in remaining if orbit_canonical(f) == c)
        remaining.remove(match)
        left.append(match)
    return left, remaining


# -- the decision procedures -----------------------------------------------------


def decide_atomic(s: Sequent, budget: Optional[Budget] = None):
    """Decide an atomic sequent; Derivable carries a checkable derivation,
    Underivable a machine-checkable certificate, and any truncation of the
    search yields ResourceExceeded."""
    if not s.is_atomic():
        raise ProofError("decide_atomic expects an atomic sequent")
    budget = budget or Budget()
    if len(s) == 0:
        return Underivable(RefutationCertificate("SaturationExhausted",
                                                 {"size": 0, "note": "no axioms are empty"}))
    refutation = quick_refute(s)
    if refutation is not None:
        return Underivable(refutation)

    engine = _AtomicSearch(budget)
    plan = engine.search(tuple(s.formulas))
    trace = {
        "visited": len(engine.memo),
        "generated": engine.counter.used,
        "truncated": engine.counter.truncated or engine.depth_hit,
    }
    if plan is not None:
        deriv = _bridge_to(_assemble(plan, _canonical_target(s, plan)), s) \
            if False else _assemble(plan, s)
        verdict = check_derivation(deriv)
        if not verdict:
            raise ProofError(f"assembled derivation failed the checker: {verdict.reason}")
        if deriv.conclusion != s:
            raise ProofError("assembled derivation concludes the wrong sequent")
        return Derivable(deriv)
    if trace["truncated"]:
        return ResourceExceeded(trace)
    return Underivable(RefutationCertificate("SaturationExhausted", trace))


def _canonical_target(s, plan):    # pragma: no cover - retained for clarity
    return s


def decide(s: Sequent, budget: Optional[Budget] = None):
    """Decide a sequent of the full system.

    Normal derivations split into an atomic phase (cuts over axiomatic
    sequents) and an introduction phase over subformulas of the goal, so the
    procedure saturates the multisets of subformulas of ``s`` of size at
    most len(s) under the two introduction rules, starting from the
    atomic-system-derivable members (decide_atomic runs over its own
    letter-bounded domain).
    """
    budget = budget or Budget()
    if s.is_atomic():
        return decide_atomic(s, budget)

    subf = set()
    for f in s.formulas:
        subf |= subformulas(f)
    atoms = sorted([f for f in subf if is_atomic(f)], key=formula_key)
    kappa = len(s)

    derived: dict = {}
    unknown = False
    counter = _Counter(budget.max_generated_sequents)

    for r in range(2, kappa + 1):
        for combo in itertools.combinations_with_replacement(atoms, r):
            if not counter.spend():
                break
            candidate = Sequent.of(combo)
            outcome = decide_atomic(candidate, budget)
            if isinstance(outcome, Derivable):
                derived[candidate] = outcome.derivation
            elif isinstance(outcome, ResourceExceeded):
                unknown = True
        if counter.truncated:
            break

    rounds = 0
    while s not in derived and rounds < budget.max_saturation_rounds and not counter.truncated:
        rounds += 1
        new: dict = {}
        items = list(derived.items())
        for (sa, da), (sb, db) in itertools.product(items, items):
            if not counter.spend():
                break
            for phi in set(sa.formulas):
                for psi in set(sb.formulas):
                    if Diskon(phi, psi) in subf and sa.remove_one(phi) == sb.remove_one(psi):
                        concl = sa.remove_one(phi).add(Diskon(phi, psi))
                        if len(concl) <= kappa and concl not in derived and concl not in new:
                            new[concl] = mk_diskon(da, db, phi, psi)
                    if Equiv(phi, psi) in subf:
                        concl = sa.remove_one(phi).union(sb.remove_one(psi)).add(Equiv(phi, psi))
                        if len(concl) <= kappa and concl not in derived and concl not in new:
                            new[concl] = mk_equiv(da, db, phi, psi)
        if not new:
            break
        derived.update(new)

    if s in derived:
        deriv = derived[s]
        verdict = check_derivation(deriv)
        if not verdict:
            raise ProofError(f"saturation built an invalid derivation: {verdict.reason}")
        return Derivable(deriv)
    trace = {
        "derived": len(derived),
        "rounds": rounds,
        "generated": counter.used,
        "truncated": counter.truncated,
        "unknown_atomic_members": unknown,
    }
    if counter.truncated or unknown or rounds >= budget.max_saturation_rounds:
        return ResourceExceeded(trace)
    return Underivable(RefutationCertificate("SaturationExhausted", trace))


# -- lemma audits (used by the test suite) ---------------------------------------


def audit_letters(d: Derivation) -> None:
    """Assert the letter/size facts along a derivation: every formula's
    letters recur in the rest of its sequent, letters never exceed the
    conclusion's, and sizes stay in [2, size(conclusion)]."""
    top_letters = d.conclusion.letters()
    top_size = len(d.conclusion)
    for node in _postorder(d):
        seq = node.conclusion
        if not seq.letters() <= top_letters:
            raise ProofError("letters grew past the conclusion")
        if not 2 <= len(seq) <= max(top_size, 2):
            raise ProofError("sequent size out of range")
        for f in seq.formulas:
            if not f.letters() <= seq.remove_one(f).letters():
                raise ProofError("formula letters not covered by the rest")


# -- JSON ------------------------------------------------------------------------


def derivation_to_data(d: Derivation) -> dict:
    if isinstance(d, Axiom):
        if isinstance(d.source, SchemaInstance):
            src = f"schema:{d.source.kind}"
            out = {"rule": "axiom", "axiom_source": src,
                   "conclusion": d.conclusion.render()}
            out["base"] = d.source.base.render()
            return out
        name = d.name or f"anon-{_cert_hash(d.source)}"
        return {
            "rule": "axiom",
            "axiom_source": f"complex:{name}",
            "complex": complex_core.complex_to_data(d.source.complex),
            "conclusion": d.conclusion.render(),
        }
    if isinstance(d, Cut):
        return {"rule": "cut", "cut": d.cut_formula.render(),
                "premises": [derivation_to_data(d.left), derivation_to_data(d.right)],
                "conclusion": d.conclusion.render()}
    if isinstance(d, EmptyCut):
        return {"rule": "ecut",
                "premises": [derivation_to_data(d.left), derivation_to_data(d.right)],
                "conclusion": d.conclusion.render()}
    if isinstance(d, DiskonIntro):
        return {"rule": "diskon",
                "premises": [derivation_to_data(d.left), derivation_to_data(d.right)],
                "conclusion": d.conclusion.render()}
    if isinstance(d, EquivIntro):
        return {"rule": "equiv",
                "premises": [derivation_to_data(d.left), derivation_to_data(d.right)],
                "conclusion": d.conclusion.render()}
    raise ProofError("unknown node kind")


def _cert_hash(cert: MComplexCert) -> str:
    import hashlib
    enc = repr(complex_core.canonical_encoding(cert.complex)).encode()
    return hashlib.sha256(enc).hexdigest()[:8]


def derivation_from_data(data: dict) -> Derivation:
    rule = data.get("rule")
    if rule == "axiom":
        src = data.get("axiom_source", "")
        conclusion = sextuple_logic.parse_sequent(data["conclusion"])
        if src.startswith("schema:"):
            kind = src.split(":", 1)[1]
            base = sextuple_logic.parse_formula(data["base"])
            if not isinstance(base, AtomicFormula):
                raise ProofError("schema base must be atomic")
            return Axiom(conclusion, SchemaInstance(kind, base))
        if src.startswith("complex:"):
            K = complex_core.complex_from_data(data["complex"])
            cert = validate_mcomplex(K)
            if not cert:
                raise ProofError(f"axiom complex fails validation: {cert.code}")
            name = src.split(":", 1)[1]
            return Axiom(conclusion, cert, name)
        raise ProofError(f"bad axiom_source {src!r}")
    premises = [derivation_from_data(p) for p in data.get("premises", ())]
    if len(premises) != 2:
        raise ProofError(f"rule {rule!r} needs two premises")
    left, right = premises
    conclusion = sextuple_logic.parse_sequent(data["conclusion"])
    if rule == "cut":
        return mk_cut(left, right, sextuple_logic.parse_formula(data["cut"]))
    if rule == "ecut":
        return mk_empty_cut(left, right)
    if rule == "diskon":
        phi, psi = _infer_principal(conclusion, left, right, Diskon)
        return mk_diskon(left, right, phi, psi)
    if rule == "equiv":
        phi, psi = _infer_principal(conclusion, left, right, Equiv)
        return mk_equiv(left, right, phi, psi)
    raise ProofError(f"unknown rule {rule!r}")


def _infer_principal(conclusion: Sequent, left: Derivation, right: Derivation, klass):
    for f in conclusion.formulas:
        if isinstance(f, klass):
            phi, psi = f.left, f.right
            if not (left.conclusion.contains(phi) and right.conclusion.contains(psi)):
                continue
            if klass is Diskon:
                if left.conclusion.remove_one(phi) != right.conclusion.remove_one(psi):
                    continue
                want = left.conclusion.remove_one(phi).add(f)
            else:
                want = left.conclusion.remove_one(phi).union(
                    right.conclusion.remove_one(psi)).add(f)
            if want == conclusion:
                return phi, psi
    raise ProofError("could not infer the principal formula")
