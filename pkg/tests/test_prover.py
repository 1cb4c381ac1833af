"""Proof search: normalization, verdicts, and checking the emitted evidence."""

import random

import pytest

from helpers import ALS, ANTI, ANTI_QUERIES, DLL, LISTS, TREE, UNFOLD, load, sequent
from slentail.analysis import is_anti_axiom, is_axiom
from slentail.calculus import candidates
from slentail.generate import chain_problem, random_ruleset, random_sequent
from slentail.prover import (
    InvalidRuleSet, ResourceLimit, explain_invalid, normalize, prove, render_proof,
    render_trace, variant_key,
)
from slentail.semantics import has_countermodel, satisfies
from slentail.syntax import apply_subst, var


def check_proof(rs, root, proof):
    """Replay every step of a proof against the calculus."""
    by_id = {}

    def visit(pn, ancestors):
        by_id[pn.id] = pn
        if pn.axiom is not None:
            assert is_axiom(pn.sequent) == pn.axiom
            return
        if pn.back_edge is not None:
            assert pn.back_edge in ancestors
            assert variant_key(by_id[pn.back_edge].sequent) == variant_key(pn.sequent)
            return
        if pn.ref is not None:
            assert variant_key(by_id[pn.ref].sequent) == variant_key(pn.sequent)
            return
        assert is_anti_axiom(rs, pn.sequent) is None
        apps = [a for a in candidates(rs, pn.sequent, pn.rule, lambda s: True)
                if a.detail == pn.detail]
        kids = [c.sequent for c in pn.children]
        assert any([normalize(root, p) for p in a.premises] == kids for a in apps), pn.sequent
        for c in pn.children:
            visit(c, ancestors | {pn.id})

    visit(proof, frozenset())
    return by_id


def back_edges(proof):
    return [p for p in proof.walk() if p.back_edge is not None]


# ---------------------------------------------------------------- normalization

def test_normalize_keeps_root_names():
    rs, s = sequent(UNFOLD, "p(x,y) |- r(x)")
    t = apply_subst({var("x"): var("q7")}, s)
    n = normalize(s, t)
    assert {v.name for v in n.variables()} == {"_1", "y"}
    assert normalize(s, n) == n


def test_variant_key_ignores_names():
    rs, s = sequent(ALS, "als(x,y) * als(y,z) |- als(x,z)")
    t = apply_subst({var("x"): var("a1"), var("y"): var("b1"), var("z"): var("c1")}, s)
    assert variant_key(s) == variant_key(t)
    _, u = sequent(ALS, "als(x,y) * als(y,z) |- als(x,y)")
    assert variant_key(s) != variant_key(u)


def test_normalize_idempotent_on_random_sequents():
    rng = random.Random(8)
    for _ in range(200):
        rs = random_ruleset(rng)
        s = random_sequent(rng, rs)
        root = random_sequent(rng, rs)
        n = normalize(root, s)
        assert normalize(root, n) == n
        assert variant_key(n) == variant_key(s)


# ---------------------------------------------------------------- verdicts

def test_cyclic_example():
    rs, s = sequent(UNFOLD, "p(x,y) |- r(x)")
    v = prove(rs, s)
    assert v.valid
    assert v.nodes < 100
    assert len(back_edges(v.proof)) == 1
    check_proof(rs, s, v.proof)
    assert v.proof.rule == "U"
    assert v.evidence_kind == "proof"
    assert "[back-edge to (1)]" in render_proof(v.proof)


def test_axiom_root():
    rs, s = sequent(TREE, "tree(x) |- tree(x)")
    v = prove(rs, s)
    assert v.valid and v.evidence_kind == "axiom" and v.nodes == 1


@pytest.mark.parametrize("k", range(5))
def test_anti_axiom_roots(k):
    rs, qs = load(ANTI + "".join(f"entail {q};\n" for q in ANTI_QUERIES))
    v = prove(rs, qs[k])
    assert not v.valid
    assert v.evidence_kind == "anti-axiom"
    assert v.trace[-1].leaf == f"anti-axiom {k + 1}"
    explain_invalid(rs, v, 3, 4)
    assert v.countermodel is not None
    assert not satisfies(rs, v.countermodel, qs[k].rhs)


@pytest.mark.parametrize("query,valid", [
    ("als(x,y) * als(y,z) /\\ x != z |- als(x,z)", False),
    ("x -> (y) * als(y,z) /\\ x != z /\\ y != z |- als(x,z)", True),
    ("x -> (y) * als(y,z) /\\ x != z |- als(x,z)", False),
    ("als(x,y) * y -> (z) /\\ x != y /\\ z != y |- als(x,z)", False),
    ("x -> (y) |- als(x,y)", True),
    ("als(x,y) |- x -> (y)", False),
])
def test_list_segments(query, valid):
    rs, s = sequent(ALS, query)
    v = prove(rs, s)
    assert v.valid == valid
    assert v.valid == (not has_countermodel(rs, s, 4, 5))
    if valid:
        check_proof(rs, s, v.proof)


def test_trace_ends_in_refutable_leaf():
    rs, s = sequent(DLL, "dll(x,y) |- x -> ()")
    v = prove(rs, s)
    assert not v.valid
    steps = v.trace
    assert steps[0].sequent == s
    assert steps[-1].leaf is not None
    assert render_trace(steps).splitlines()[0].startswith(str(s))


def test_proofs_replay_on_random_problems():
    rng = random.Random(21)
    checked = 0
    while checked < 120:
        rs = random_ruleset(rng)
        s = random_sequent(rng, rs)
        v = prove(rs, s)
        if v.valid and v.proof.rule is not None:
            check_proof(rs, s, v.proof)
            checked += 1


def test_invalid_ruleset_rejected():
    rs, s = sequent(LISTS, "ls(x,y) |- ls(x,y)")
    with pytest.raises(InvalidRuleSet):
        prove(rs, s)


def test_node_cap():
    rs, s = chain_problem(8)
    with pytest.raises(ResourceLimit) as err:
        prove(rs, s, node_cap=5)
    assert err.value.nodes == 5


def test_chain_node_count():
    for n in (2, 4, 8):
        rs, s = chain_problem(n)
        v = prove(rs, s)
        assert v.valid
        check_proof(rs, s, v.proof)


def test_explain_needs_invalid_verdict():
    rs, s = sequent(TREE, "tree(x) |- tree(x)")
    with pytest.raises(Exception):
        explain_invalid(rs, prove(rs, s))
