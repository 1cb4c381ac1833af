"""Inference rules and the admissible strategy.

Each apply_* function returns every candidate application of one rule on a
sequent, with premises in canonical form.  enumerate_admissible applies the
strategy on top: axiom/anti-axiom blocking, priority between rules and the
don't-care selection.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from .analysis import (
    alloc, entails_pure, entails_pure_atom, is_anti_axiom, is_axiom,
    is_narrow, narrow_vars, path_edges, reachable,
)
from .rules import RuleSet
from .syntax import (
    PointsTo, PredAtom, PureAtom, Sequent, SpatialAtom, SymbolicHeap, Term,
    apply_subst, atom_vars, heap_vars, neq, pure_key, pure_vars, show_spatial, spatial_vars,
)

PRIORITY = ("W", "V", "R", "E", "S", "U", "C", "I")
INVERTIBLE = frozenset("WVREUCI")

Oracle = Callable[[Sequent], bool]


class OracleRequired(RuntimeError):
    """Rule S on a non-narrow sequent needs a validity oracle."""


@dataclass(frozen=True)
class RuleApplication:
    rule: str
    detail: str
    premises: tuple[Sequent, ...]
    rank: int = 0   # first component of the selection order

    @property
    def key(self) -> tuple:
        return (self.rank, self.detail, tuple(str(p) for p in self.premises))

    def __str__(self) -> str:
        return f"{self.rule} [{self.detail}]"


def _seq(lhs_spatial, lhs_pure, vset, rhs: SymbolicHeap) -> Sequent:
    return Sequent(SymbolicHeap(tuple(lhs_spatial), frozenset(lhs_pure)), tuple(vset), rhs)


def _fresh_namer(s: Sequent):
    taken = {t.name for t in s.variables()}
    counter = itertools.count(1)

    def fresh(t: Term) -> Term:
        while True:
            name = f"#{next(counter)}"
            if name not in taken:
                taken.add(name)
                return Term(name, t.sort)
    return fresh


def _single_rhs_atom(s: Sequent) -> Optional[SpatialAtom]:
    if s.rhs.pure or len(s.rhs.spatial) != 1:
        return None
    return s.rhs.spatial[0]


# ---------------------------------------------------------------- the rules

def apply_R(s: Sequent) -> list[RuleApplication]:
    out = []
    for p in sorted(s.lhs.pure, key=pure_key):
        if not p.is_eq:
            continue
        # replace the right-hand term; constants sort first so they survive
        x, t = p.right, p.left
        if x.is_const:
            continue
        out.append(RuleApplication("R", f"{x} <- {t}", (apply_subst({x: t}, s),)))
    return out


def apply_E(s: Sequent) -> list[RuleApplication]:
    drop = frozenset(z for z in s.rhs.pure if entails_pure_atom(s.lhs, s.vset, z))
    if not drop:
        return []
    prem = Sequent(s.lhs, s.vset, SymbolicHeap(s.rhs.spatial, s.rhs.pure - drop))
    return [RuleApplication("E", "drop " + " /\\ ".join(str(z) for z in sorted(drop, key=pure_key)), (prem,))]


def _w_droppable(s: Sequent) -> frozenset[PureAtom]:
    phi = SymbolicHeap(s.lhs.spatial)
    diseqs = [p for p in s.lhs.pure if not p.is_eq]
    drop = {p for p in diseqs if entails_pure_atom(phi, s.vset, p)}
    # condition (ii): a variable whose only occurrences are these disequations
    occurs = spatial_vars(s.lhs.spatial) | heap_vars(s.rhs)
    for x in sorted(pure_vars(diseqs), key=lambda t: t.key):
        mine = [p for p in diseqs if x in p.terms]
        rest = [p for p in s.lhs.pure if p not in mine]
        others = {t for p in mine for t in p.terms if t != x}
        if x in occurs or x in pure_vars(rest) or x in others:
            continue
        drop.update(mine)
    return frozenset(drop)


def apply_W(s: Sequent) -> list[RuleApplication]:
    drop = _w_droppable(s)
    if not drop:
        return []
    prem = Sequent(SymbolicHeap(s.lhs.spatial, s.lhs.pure - drop), s.vset, s.rhs)
    return [RuleApplication("W", "drop " + " /\\ ".join(str(z) for z in sorted(drop, key=pure_key)), (prem,))]


def apply_V(s: Sequent) -> list[RuleApplication]:
    used = heap_vars(s.lhs) | heap_vars(s.rhs)
    out = []
    for x in sorted(set(s.vset), key=lambda t: t.key):
        if x in used:
            continue
        vs = list(s.vset)
        vs.remove(x)
        out.append(RuleApplication("V", f"remove {x}", (Sequent(s.lhs, tuple(vs), s.rhs),)))
    return out


def _split_premises(s: Sequent, side: Sequence[int], psi1, psi2) -> Optional[tuple[Sequent, Sequent]]:
    phi = s.lhs.spatial
    phi1 = [a for a, k in zip(phi, side) if k == 1]
    phi2 = [a for a, k in zip(phi, side) if k == 2]
    if not phi1 or not phi2:
        return None
    v1 = tuple(s.vset) + tuple(a.root for a in phi2)
    v2 = tuple(s.vset) + tuple(a.root for a in phi1)
    left = _seq(phi1, s.lhs.pure, v1, SymbolicHeap((psi1,)))
    right = _seq(phi2, s.lhs.pure, v2, SymbolicHeap(tuple(psi2)))
    return left, right


def _narrow_sides(s: Sequent, psi1: SpatialAtom, psi2: Sequence[SpatialAtom]) -> list[list[int]]:
    """Split candidates for a narrow sequent.

    Roots of the right-hand side are forced, atoms rooted at V-dagger
    variables are chosen freely, every other atom follows the side of the
    atoms mentioning its root.  Every discarded candidate would produce an
    anti-axiom premise.
    """
    phi = s.lhs.spatial
    by_root = {a.root: i for i, a in enumerate(phi)}
    forced: dict[int, int] = {}
    for r, k in [(psi1.root, 1)] + [(a.root, 2) for a in psi2]:
        i = by_root.get(r)
        if i is None or forced.get(i, k) != k:
            return []
        forced[i] = k
    dagger = narrow_vars(s)
    free = sorted(i for r, i in by_root.items() if r in dagger and i not in forced)
    fixed = set(forced) | set(free)
    mentions: list[list[int]] = []
    for a in phi:
        ms = []
        for t in a.args[1:] if isinstance(a, PredAtom) else a.args:
            j = by_root.get(t)
            if j is not None and j not in fixed:
                ms.append(j)
        mentions.append(ms)
    out = []
    for choice in itertools.product((1, 2), repeat=len(free)):
        side = dict(forced)
        side.update(zip(free, choice))
        stack = list(side)
        ok = True
        while stack and ok:
            i = stack.pop()
            for j in mentions[i]:
                if j not in side:
                    side[j] = side[i]
                    stack.append(j)
                elif side[j] != side[i]:
                    ok = False
                    break
        if ok and len(side) == len(phi):
            out.append([side[i] for i in range(len(phi))])
    return out


def _wide_sides(rs: RuleSet, s: Sequent, psi1: SpatialAtom) -> list[list[int]]:
    """Split candidates for a non-narrow sequent (at most 2^k of them)."""
    phi = s.lhs.spatial
    by_root = {a.root: i for i, a in enumerate(phi)}
    y0 = psi1.root
    if y0 not in by_root:
        return []
    v_psi1 = atom_vars(psi1)
    free = sorted(i for r, i in by_root.items() if r in v_psi1 and r != y0)
    edges = path_edges(rs, phi)
    out = []
    for choice in itertools.product((1, 2), repeat=len(free)):
        side = {by_root[y0]: 1}
        side.update(zip(free, choice))
        alloc1 = {phi[i].root for i, k in side.items() if k == 1}
        e = v_psi1 - alloc1
        reach = reachable(edges, [y0], avoid=e) - e
        full = []
        for i, a in enumerate(phi):
            if i in side:
                full.append(side[i])
            else:
                full.append(1 if a.root in reach else 2)
        out.append(full)
    return out


def apply_S(rs: RuleSet, s: Sequent, validity_oracle: Optional[Oracle] = None) -> list[RuleApplication]:
    """Admissible S applications.

    On a narrow sequent every admissible split is returned; otherwise only
    the selected split whose left premise the oracle accepts.
    """
    if s.rhs.pure or len(s.rhs.spatial) < 2 or len(s.lhs.spatial) < 2:
        return []
    psi1, psi2 = s.rhs.spatial[0], s.rhs.spatial[1:]
    narrow = is_narrow(rs, s)
    sides = _narrow_sides(s, psi1, psi2) if narrow else _wide_sides(rs, s, psi1)
    apps = []
    seen = set()
    for side in sides:
        prem = _split_premises(s, side, psi1, psi2)
        if prem is None or prem in seen:
            continue
        seen.add(prem)
        if any(is_anti_axiom(rs, p) is not None for p in prem):
            continue
        phi1 = [a for a, k in zip(s.lhs.spatial, side) if k == 1]
        apps.append(RuleApplication("S", f"{show_spatial(phi1)} |- {psi1}", prem))
    apps.sort(key=lambda a: a.key)
    if narrow:
        return apps
    if apps and validity_oracle is None:
        raise OracleRequired(f"S on non-narrow sequent {s} needs a validity oracle")
    for a in apps:
        if validity_oracle(a.premises[0]):
            return [a]
    return []


def apply_U(rs: RuleSet, s: Sequent) -> list[RuleApplication]:
    target = _single_rhs_atom(s)
    if target is None:
        return []
    hits = [a for a in s.lhs.spatial if isinstance(a, PredAtom) and a.root == target.root]
    out = []
    for a in hits:
        rest = list(s.lhs.spatial)
        rest.remove(a)
        fresh = _fresh_namer(s)
        prems = []
        for r in rs.rules_for(a.pred):
            body = r.instantiate(a.args, {e: fresh(e) for e in r.existentials})
            prems.append(_seq(rest + list(body.spatial), s.lhs.pure | body.pure, s.vset, s.rhs))
        out.append(RuleApplication("U", f"unfold {a}", tuple(prems)))
    return out


def _match_tuple(us: Sequence[Term], ys: Sequence[Term], exist: set[Term]) -> Optional[dict[Term, Term]]:
    if len(us) != len(ys):
        return None
    sigma: dict[Term, Term] = {}
    for u, y in zip(us, ys):
        if u.sort != y.sort:
            return None
        if u in exist:
            if sigma.setdefault(u, y) != y:
                return None
        elif u != y:
            return None
    return sigma


def apply_I(rs: RuleSet, s: Sequent) -> list[RuleApplication]:
    target = _single_rhs_atom(s)
    if not isinstance(target, PredAtom):
        return []
    cells = [a for a in s.lhs.spatial if isinstance(a, PointsTo) and a.root == target.root]
    out = []
    for cell in cells:
        fresh = _fresh_namer(s)
        for k, r in enumerate(rs.rules_for(target.pred)):
            ren = {e: fresh(e) for e in r.existentials}
            body = r.instantiate(target.args, ren)
            pts = [b for b in body.spatial if isinstance(b, PointsTo)]
            if len(pts) != 1:
                continue
            sigma = _match_tuple(pts[0].args, cell.args, set(ren.values()))
            if sigma is None:
                continue
            # every existential is a tuple variable in a P-rule
            if any(v not in sigma for v in ren.values() if v in heap_vars(body)):
                continue
            inst = apply_subst(sigma, body)
            if not entails_pure(s.lhs, s.vset, inst.pure):
                continue
            rhs = SymbolicHeap(inst.spatial)
            prem = Sequent(s.lhs, s.vset, rhs)
            out.append(RuleApplication("I", f"rule {rs.rules.index(r)} of {target.pred}", (prem,)))
    return out


def apply_C(s: Sequent) -> list[RuleApplication]:
    target = _single_rhs_atom(s)
    if not isinstance(target, PredAtom):
        return []
    a_phi = set(alloc(s.lhs))
    vs = set(s.vset)
    ys = sorted((y for y in atom_vars(target) if y.sort.is_loc and y not in a_phi and y not in vs),
                key=lambda t: t.key)
    out = []
    for x in sorted(a_phi, key=lambda t: t.key):
        for y in ys:
            if neq(x, y) in s.lhs.pure:
                continue
            merged = apply_subst({x: y}, s)
            apart = Sequent(SymbolicHeap(s.lhs.spatial, s.lhs.pure | {neq(x, y)}), s.vset, s.rhs)
            # case splits on the right-hand root come last in the selection order
            rank = 1 if x == target.root else 0
            out.append(RuleApplication("C", f"{x} vs {y}", (merged, apart), rank))
    return out


# ---------------------------------------------------------------- strategy

def candidates(rs: RuleSet, s: Sequent, rule_id: str,
               validity_oracle: Optional[Oracle] = None) -> list[RuleApplication]:
    """Applications of one rule satisfying the strategy's side conditions."""
    if rule_id == "R":
        return apply_R(s)
    if rule_id == "E":
        return apply_E(s)
    if rule_id == "W":
        return apply_W(s)
    if rule_id == "V":
        return apply_V(s)
    if rule_id == "S":
        return apply_S(rs, s, validity_oracle)
    if rule_id == "U":
        return apply_U(rs, s)
    if rule_id == "I":
        return apply_I(rs, s)
    if rule_id == "C":
        return apply_C(s)
    raise ValueError(f"unknown rule {rule_id}")


def enumerate_admissible(rs: RuleSet, s: Sequent,
                         validity_oracle: Optional[Oracle] = None) -> list[RuleApplication]:
    if is_axiom(s) is not None or is_anti_axiom(rs, s) is not None:
        return []
    for rid in PRIORITY:
        found = candidates(rs, s, rid, validity_oracle)
        apps = [a for a in found if all(is_anti_axiom(rs, p) is None for p in a.premises)]
        if not apps:
            if found and rid in INVERTIBLE:
                # an invertible rule with a refutable premise: lower rules are blocked
                return []
            continue
        if rid == "S" and is_narrow(rs, s):
            return apps
        return [min(apps, key=lambda a: a.key)]
    return []


def blocking_reason(rs: RuleSet, s: Sequent) -> Optional[str]:
    """Why no rule applies: 'axiom N', 'anti-axiom N', or None."""
    n = is_axiom(s)
    if n is not None:
        return f"axiom {n}"
    n = is_anti_axiom(rs, s)
    if n is not None:
        return f"anti-axiom {n}"
    return None
