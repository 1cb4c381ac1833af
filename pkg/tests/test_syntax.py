"""Terms, heaps, substitution and the pure satisfiability check."""

import itertools
import random

import pytest

from slentail.syntax import (
    LOC, PointsTo, PredAtom, Sequent, Sort, SortError, SymbolicHeap, apply_subst,
    canonicalize, const, eq, heap, heap_vars, neq, pure_satisfiable, var,
)

D = Sort("d")
x, y, z, u = var("x"), var("y"), var("z"), var("u")


def test_pure_atoms_are_oriented():
    assert eq(y, x) == eq(x, y)
    assert neq(z, x) == neq(x, z)
    assert str(neq(y, x)) == "x != y"


def test_sort_mismatch_rejected():
    with pytest.raises(SortError):
        eq(x, var("v", D))
    with pytest.raises(SortError):
        const("a", LOC)


def test_heap_is_a_multiset():
    h1 = heap(PointsTo(x, (y,)), PredAtom("p", (y,)))
    h2 = heap(PredAtom("p", (y,)), PointsTo(x, (y,)))
    assert h1 == h2
    dup = heap(PointsTo(x, ()), PointsTo(x, ()))
    assert len(dup.spatial) == 2


def test_trivial_equalities_dropped():
    h = heap(PointsTo(x, ()), pure=[eq(x, x), neq(x, y)])
    assert h.pure == frozenset({neq(x, y)})
    assert canonicalize(h) == h


def test_substitution_reaches_everything():
    s = Sequent(heap(PointsTo(x, (y,)), pure=[neq(y, z)]), (u,), heap(PredAtom("p", (x, z))))
    t = apply_subst({x: u, z: y}, s)
    assert str(t) == "u -> (y) /\\ y != y |-{u} p(u,y)"
    assert heap_vars(t.lhs) == {u, y}


def _brute_sat(atoms, terms):
    consts = [t for t in terms if t.is_const]
    vars_ = [t for t in terms if not t.is_const]
    base = {c: ("c", c.name) for c in consts}
    pool = list(base.values()) + [("v", i) for i in range(len(vars_))]
    for vals in itertools.product(pool, repeat=len(vars_)):
        env = {**base, **dict(zip(vars_, vals))}
        if all((env[a.left] == env[a.right]) == a.is_eq for a in atoms):
            return True
    return False


def test_pure_satisfiable_matches_brute_force():
    rng = random.Random(7)
    terms = [var(n, D) for n in "pqrs"] + [const("a", D), const("b", D)]
    for _ in range(400):
        atoms = []
        for _ in range(rng.randint(1, 5)):
            l, r = rng.sample(terms, 2) if rng.random() < 0.9 else [rng.choice(terms)] * 2
            atoms.append(eq(l, r) if rng.random() < 0.5 else neq(l, r))
        used = sorted({t for a in atoms for t in a.terms})
        assert pure_satisfiable(atoms) == _brute_sat(atoms, used), atoms


def test_distinct_constants_clash():
    a, b = const("a", D), const("b", D)
    assert not pure_satisfiable([eq(a, b)])
    assert not pure_satisfiable([eq(var("v", D), a), eq(var("v", D), b)])
    assert pure_satisfiable([neq(a, b)])
    assert not pure_satisfiable([None])


def test_empty_heap_prints_emp():
    assert str(SymbolicHeap()) == "emp"
