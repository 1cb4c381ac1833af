"""Syntactic analyses consulted by the calculus.

alloc multisets, heap-satisfiability, the path relation between loc
variables, the restricted pure entailment, axioms, anti-axioms and the
narrowness measures.
"""

from __future__ import annotations

from collections import Counter
from typing import Iterable, Optional, Union

from .rules import RuleSet
from .syntax import (
    PointsTo, PureAtom, Sequent, SpatialAtom, SymbolicHeap, Term,
    heap_vars, spatial_vars,
)

Spatial = Union[SymbolicHeap, tuple, list]


def _atoms(x: Spatial) -> tuple[SpatialAtom, ...]:
    return x.spatial if isinstance(x, SymbolicHeap) else tuple(x)


def alloc(x: Spatial) -> Counter:
    """Roots of the spatial atoms, with multiplicity."""
    return Counter(a.root for a in _atoms(x))


def heap_satisfiable(x: Spatial) -> bool:
    return all(n == 1 for n in alloc(x).values())


def path_edges(rs: RuleSet, x: Spatial) -> set[tuple[Term, Term]]:
    """The relation x ->_lambda y on loc variables."""
    edges: set[tuple[Term, Term]] = set()
    out = rs.out_params
    for a in _atoms(x):
        if isinstance(a, PointsTo):
            targets = a.args
        else:
            idx = out.get(a.pred, ())
            targets = tuple(a.args[i - 1] for i in sorted(idx) if i - 1 < len(a.args))
        for t in targets:
            if t.is_var and t.sort.is_loc:
                edges.add((a.root, t))
    return edges


def reachable(edges: Iterable[tuple[Term, Term]], sources: Iterable[Term],
              avoid: Iterable[Term] = ()) -> set[Term]:
    """Reflexive-transitive closure from `sources`.

    Variables in `avoid` are reached but not expanded further.
    """
    succ: dict[Term, list[Term]] = {}
    for a, b in edges:
        succ.setdefault(a, []).append(b)
    avoid = set(avoid)
    seen = set(sources)
    stack = [s for s in seen if s not in avoid]
    while stack:
        u = stack.pop()
        for v in succ.get(u, ()):
            if v not in seen:
                seen.add(v)
                if v not in avoid:
                    stack.append(v)
    return seen


def reaches(rs: RuleSet, x: Spatial, a: Term, b: Term) -> bool:
    return b in reachable(path_edges(rs, x), [a])


def entails_pure_atom(lhs: SymbolicHeap, vset: Iterable[Term], z: PureAtom,
                      pool: Optional[Counter] = None) -> bool:
    if z in lhs.pure:
        return True
    if z.is_eq and z.left == z.right:
        return True
    if z.is_eq:
        return False
    if z.left.is_const and z.right.is_const:
        return z.left != z.right
    if z.left.is_var and z.right.is_var:
        pool = pool if pool is not None else alloc(lhs) + Counter(vset)
        need = Counter([z.left, z.right])
        return all(pool[t] >= n for t, n in need.items())
    return False


def entails_pure(lhs: SymbolicHeap, vset: Iterable[Term], xi: Iterable[PureAtom]) -> bool:
    """lhs |>_V xi, atom by atom."""
    pool = alloc(lhs) + Counter(vset)
    return all(entails_pure_atom(lhs, (), z, pool) for z in xi)


def _bottom(pure: Iterable[PureAtom]) -> bool:
    for p in pure:
        if p.is_bottom:
            return True
        # a = b between distinct constants is as false as x != x
        if p.is_eq and p.left.is_const and p.right.is_const and p.left != p.right:
            return True
    return False


def is_axiom(s: Sequent) -> Optional[int]:
    """Form number (1-4) when s is an axiom, else None."""
    if s.lhs.spatial == s.rhs.spatial and s.rhs.pure <= s.lhs.pure:
        return 1
    if _bottom(s.lhs.pure):
        return 2
    if not heap_satisfiable(s.lhs):
        return 3
    vc = Counter(s.vset)
    if any(n > 1 for n in vc.values()) or any(r in vc for r in alloc(s.lhs)):
        return 4
    return None


def has_equality(h: SymbolicHeap) -> bool:
    return any(p.is_eq for p in h.pure)


def is_anti_axiom(rs: RuleSet, s: Sequent) -> Optional[int]:
    """Lowest anti-axiom condition number that holds, else None."""
    if is_axiom(s) is not None or has_equality(s.lhs) or s.rhs.pure:
        return None
    phi, psi = s.lhs.spatial, s.rhs.spatial
    a_phi, a_psi = alloc(phi), alloc(psi)
    if any(t not in a_phi for t in a_psi):
        return 1
    if not psi and phi:
        return 2
    extra = [x for x in a_phi if x not in a_psi]
    if extra:
        reach = reachable(path_edges(rs, phi), list(a_psi))
        if any(x not in reach for x in extra):
            return 3
    v_phi, v_psi = spatial_vars(phi), spatial_vars(psi)
    if any(v in v_phi and v not in v_psi for v in s.vset):
        return 4
    if any(v.sort.is_loc and v not in v_psi and v not in a_phi for v in v_phi):
        return 5
    return None


def narrow_vars(s: Sequent) -> set[Term]:
    """V-dagger: loc variables of the rhs outside V and alloc(rhs)."""
    a_rhs = alloc(s.rhs)
    vs = set(s.vset)
    return {v for v in heap_vars(s.rhs) if v.sort.is_loc and v not in vs and v not in a_rhs}


def equality_free(s: Sequent) -> bool:
    return not has_equality(s.lhs) and not has_equality(s.rhs)


def is_narrow(rs: RuleSet, s: Sequent) -> bool:
    return equality_free(s) and len(narrow_vars(s)) <= rs.width


def spec_vars(s: Sequent) -> set[Term]:
    """V-star: loc variables of the rhs outside V and alloc(lhs)."""
    a_lhs = alloc(s.lhs)
    vs = set(s.vset)
    return {v for v in heap_vars(s.rhs) if v.sort.is_loc and v not in vs and v not in a_lhs}


def root_atoms(x: Spatial) -> dict[Term, list[SpatialAtom]]:
    d: dict[Term, list[SpatialAtom]] = {}
    for a in _atoms(x):
        d.setdefault(a.root, []).append(a)
    return d
