"""Satisfaction, bounded model search and model construction."""

import itertools
import random

import pytest

from helpers import ALS, DLL, LISTS, TREE, ruleset, sequent
from slentail.analysis import heap_satisfiable
from slentail.generate import random_ruleset, random_sequent
from slentail.semantics import (
    Structure, all_heaps, construct_model, find_countermodel, has_countermodel,
    is_path_compatible, loc, models, satisfies, satisfying_subheaps,
)
from slentail.syntax import PointsTo, PredAtom, heap, var

x, y, z = var("x"), var("y"), var("z")
l1, l2, l3 = loc(1), loc(2), loc(3)


def test_points_to_needs_exact_heap():
    rs = ruleset(TREE)
    h = heap(PointsTo(x, (y,)))
    assert satisfies(rs, Structure.of({x: l1, y: l2}, {l1: (l2,)}), h)
    assert not satisfies(rs, Structure.of({x: l1, y: l2}, {l1: (l2,), l2: (l2,)}), h)
    assert not satisfies(rs, Structure.of({x: l1, y: l2}, {l1: (l1,)}), h)


def test_tree_membership():
    rs = ruleset(TREE)
    t = heap(PredAtom("tree", (x,)))
    full = {l1: (l2, l3), l2: (), l3: ()}
    assert satisfies(rs, Structure.of({x: l1}, full), t)
    assert not satisfies(rs, Structure.of({x: l1}, {l1: (l2, l2), l2: ()}), t)


def test_intro_list_two_models_on_one_heap():
    rs = ruleset(LISTS)
    a = (PredAtom("ls", (x, y)),)
    store = {x: l1, y: l2}
    hp = {l1: (l2,), l2: (l2,)}
    found = satisfying_subheaps(rs, store, hp, a)
    assert found == sorted([frozenset({l1}), frozenset({l1, l2})], key=sorted)


def test_pure_part_is_checked():
    rs = ruleset(ALS)
    h = heap(PredAtom("als", (x, y)))
    store = {x: l1, y: l3}
    assert satisfies(rs, Structure.of(store, {l1: (l2,), l2: (l3,)}), h)
    # the recursive rule would need z = y here
    assert not satisfies(rs, Structure.of(store, {l1: (l3,), l3: (l3,)}), h)


def test_countermodel_is_smallest():
    rs, s = sequent(ALS, "als(x,y) |- x -> (y)")
    cm = find_countermodel(rs, s)
    assert cm is not None
    assert len(cm.heap) == 2
    assert not satisfies(rs, cm, s.rhs)
    assert satisfies(rs, cm, s.lhs)
    assert cm.to_text().startswith("store:\n  x = ")


def test_valid_entailment_has_no_countermodel():
    rs, s = sequent(ALS, "x -> (y) |- als(x,y)")
    assert not has_countermodel(rs, s)


def test_countermodel_respects_vset():
    # with y in V, y may not be allocated, so p(x,y) cannot put y on the heap
    rs, s = sequent("rule r(x) <= x -> ();", "V: y x -> () |- r(x)")
    assert not has_countermodel(rs, s)


def test_bounds_must_be_positive():
    rs, s = sequent(TREE, "tree(x) |- x -> ()")
    with pytest.raises(ValueError):
        find_countermodel(rs, s, max_cells=0)
    with pytest.raises(ValueError):
        find_countermodel(rs, s, max_locs=0)


def _models_by_brute_force(rs, h, free, max_cells, n_locs):
    locations = [loc(i) for i in range(1, n_locs + 1)]
    arities = {len(pt.args) for r in rs.rules for pt in r.points_to}
    out = set()
    for vals in itertools.product(locations, repeat=len(free)):
        store = dict(zip(free, vals))
        for hp in all_heaps(locations, arities, max_cells):
            if satisfies(rs, Structure.of(store, hp), h):
                out.add(_shape(store, hp, free))
    return out


def _shape(store, hp, free):
    """Canonical form up to renaming of locations."""
    used = sorted({store[t] for t in free} | set(hp) | {v for tup in hp.values() for v in tup})
    best = None
    for perm in itertools.permutations(range(len(used))):
        names = dict(zip(used, perm))
        cand = (tuple(names[store[t]] for t in free),
                tuple(sorted((names[l], tuple(names[v] for v in tup)) for l, tup in hp.items())))
        if best is None or cand < best:
            best = cand
    return best


@pytest.mark.parametrize("text,atom", [
    (ALS, PredAtom("als", (x, y))),
    (DLL, PredAtom("dll", (x, y))),
    (TREE, PredAtom("tree", (x,))),
])
def test_model_enumeration_matches_brute_force(text, atom):
    rs = ruleset(text)
    h = heap(atom)
    free = sorted(atom.terms, key=lambda t: t.key)
    got = {_shape(st, hp, free) for st, hp, _ in models(rs, h, (), 3, 4)}
    assert got == _models_by_brute_force(rs, h, free, 3, 4)


def _random_stores(rng, terms, n):
    for _ in range(n):
        yield {t: loc(rng.randint(1, len(terms))) for t in terms}


def test_construct_model_is_a_model():
    rng = random.Random(3)
    done = 0
    while done < 60:
        rs = random_ruleset(rng)
        s = random_sequent(rng, rs)
        phi = s.lhs.spatial
        if not heap_satisfiable(phi) or s.lhs.pure:
            continue
        free = sorted({t for a in phi for t in a.terms if t.is_var}, key=lambda t: t.key)
        roots = [a.root for a in phi]
        store = {t: (loc(i + 1) if t.sort.is_loc else ("D", t.sort.name, 100 + i))
                 for i, t in enumerate(free)}
        hp = construct_model(rs, phi, store, (loc(i) for i in itertools.count(50)))
        st = Structure.of(store, hp)
        assert satisfies(rs, st, heap(*phi)), (rs.rules, phi)
        assert is_path_compatible(rs, st, heap(*phi))
        assert len(set(store[r] for r in roots)) == len(roots)
        done += 1


def test_construct_model_rejects_overlap():
    rs = ruleset(TREE)
    with pytest.raises(ValueError):
        construct_model(rs, (PointsTo(x, ()), PointsTo(x, ())), {x: l1}, [])
    with pytest.raises(ValueError):
        construct_model(rs, (PredAtom("tree", (x,)), PredAtom("tree", (y,))), {x: l1, y: l1}, [])


def test_path_compatibility_needs_a_model():
    rs = ruleset(TREE)
    with pytest.raises(ValueError):
        is_path_compatible(rs, Structure.of({x: l1}, {}), heap(PredAtom("tree", (x,))))


def test_path_incompatible_model():
    # the heap leads from x to y, the formula only from x to z
    rs = ruleset(TREE)
    h = heap(PointsTo(x, (z,)), PointsTo(y, ()))
    apart = Structure.of({x: l1, y: l2, z: l3}, {l1: (l3,), l2: ()})
    merged = Structure.of({x: l1, y: l2, z: l2}, {l1: (l2,), l2: ()})
    assert is_path_compatible(rs, apart, h)
    assert not is_path_compatible(rs, merged, h)
