"""Random loc-deterministic rule sets and sequents for differential testing."""

from __future__ import annotations

import random
from typing import Optional

from .rules import RuleSet, make_ruleset, rule
from .syntax import PointsTo, PredAtom, Sequent, Sort, SymbolicHeap, Term, const, eq, neq, var

DATA = Sort("d")


def random_ruleset(rng: random.Random, max_preds: int = 3, max_rules: int = 3,
                   width: int = 2, tries: int = 200) -> Optional[RuleSet]:
    """A validated rule set, or None when `tries` attempts all fail validation."""
    for _ in range(tries):
        rs = _attempt(rng, max_preds, max_rules, width)
        if rs is not None and rs.is_valid and rs.width <= width:
            return rs
    return None


def _attempt(rng, max_preds, max_rules, width):
    n = rng.randint(1, max_preds)
    names = ["p", "q", "r"][:n]
    use_data = rng.random() < 0.4
    consts = [const("a", DATA), const("b", DATA)]
    arity = {p: rng.randint(1, width) for p in names}
    rules = []
    for p in names:
        params = [var(f"x{i + 1}") for i in range(arity[p])]
        for k in range(rng.randint(1, max_rules)):
            rules.append(_random_rule(rng, p, params, names, arity, width, use_data, consts))
    try:
        return make_ruleset(rules)
    except ValueError:
        return None


def _random_rule(rng, p, params, names, arity, width, use_data, consts):
    k = rng.randint(0, width)
    fresh = [var(f"y{i + 1}") for i in range(k)]
    tup = []
    for i in range(k):
        c = rng.random()
        if use_data and i == 0 and c < 0.5:
            tup.append(rng.choice(consts))
        elif c < 0.45:
            tup.append(fresh[i])
        else:
            tup.append(rng.choice(params))
    tup_fresh = [t for t in tup if t.is_var and t in fresh]
    atoms = [PointsTo(params[0], tuple(tup))]
    allowed = sorted(set(params) | set(t for t in tup if t.is_var), key=lambda t: t.key)
    for y in dict.fromkeys(tup_fresh):
        q = rng.choice(names)
        args = [y] + [rng.choice(allowed) for _ in range(arity[q] - 1)]
        atoms.append(PredAtom(q, tuple(args)))
    pure = []
    if tup_fresh and rng.random() < 0.3:
        y = rng.choice(tup_fresh)
        other = rng.choice([t for t in allowed if t != y] or [y])
        if other != y:
            pure.append(neq(y, other))
    return rule(p, params, *atoms, pure=pure)


def random_sequent(rng: random.Random, rs: RuleSet, max_lhs: int = 3, max_rhs: int = 2,
                   pool_size: int = 4, shaped: float = 0.5) -> Sequent:
    """A random sequent; with probability `shaped` the lhs is grown from the rhs.

    Shaped sequents unfold and perturb the right-hand side, so that they
    land near the valid/invalid border instead of being refuted at once.
    """
    if rng.random() < shaped:
        s = _shaped_sequent(rng, rs, max_lhs, max_rhs, pool_size)
        if s is not None:
            return s
    return _plain_sequent(rng, rs, max_lhs, max_rhs, pool_size)


def _pred_atom(rng, rs, root, pool):
    p = rng.choice(rs.predicates)
    return PredAtom(p, (root,) + tuple(_arg(rng, rs, s, pool) for s in rs.profiles[p].sorts[1:]))


def _shaped_sequent(rng, rs, max_lhs, max_rhs, pool_size):
    pool = [var(n) for n in "xyzw"[:pool_size]]
    roots = rng.sample(pool, min(len(pool), rng.randint(1, max_rhs)))
    rhs = [_pred_atom(rng, rs, r, pool) for r in roots]
    names = iter(f"{c}{i}" for i in range(1, 100) for c in "ys")
    taken = {t.name for a in rhs for t in a.terms}

    def fresh(t: Term) -> Term:
        while True:
            n = next(names)
            if n not in taken:
                taken.add(n)
                return Term(n, t.sort)

    lhs: list = []
    pure: set = set()
    todo = list(rhs)
    while todo:
        a = todo.pop(0)
        room = max_lhs - len(lhs) - len(todo)
        if room <= 1 or rng.random() < 0.3:
            lhs.append(a)
            continue
        r = rng.choice(rs.rules_for(a.pred))
        body = r.instantiate(a.args, {e: fresh(e) for e in r.existentials})
        pure |= body.pure
        for b in body.spatial:
            (todo if isinstance(b, PredAtom) and rng.random() < 0.3 else lhs).append(b)
    if len(lhs) > max_lhs:
        return None
    # perturb: alias two loc variables, swap a predicate or drop a disequation
    lvars = sorted({t for a in lhs for t in a.terms if t.is_var and t.sort.is_loc}, key=lambda t: t.key)
    c = rng.random()
    if c < 0.25 and len(lvars) >= 2:
        u, v = rng.sample(lvars, 2)
        lhs = [_rename(a, {u: v}) for a in lhs]
        pure = {_rename_pure(p, {u: v}) for p in pure}
    elif c < 0.45:
        i = rng.randrange(len(lhs))
        lhs[i] = _pred_atom(rng, rs, lhs[i].root, pool + lvars)
    elif c < 0.6 and pure:
        pure.discard(rng.choice(sorted(pure, key=str)))
    vset = tuple(v for v in pool if rng.random() < 0.05)
    return Sequent(SymbolicHeap(tuple(lhs), frozenset(pure)), vset, SymbolicHeap(tuple(rhs)))


def _rename(a, m):
    if isinstance(a, PointsTo):
        return PointsTo(m.get(a.root, a.root), tuple(m.get(t, t) for t in a.args))
    return PredAtom(a.pred, tuple(m.get(t, t) for t in a.args))


def _rename_pure(p, m):
    l, r = m.get(p.left, p.left), m.get(p.right, p.right)
    return eq(l, r) if p.is_eq else neq(l, r)


def _plain_sequent(rng, rs, max_lhs, max_rhs, pool_size):
    pool = [var(n) for n in "xyzw"[:pool_size]]

    def atom(roots_taken):
        free = [v for v in pool if v not in roots_taken] or pool
        root = rng.choice(free)
        if rng.random() < 0.6:
            return _pred_atom(rng, rs, root, pool)
        k = rng.randint(0, rs.measures[1])
        return PointsTo(root, tuple(rng.choice(pool) for _ in range(k)))

    lhs, roots = [], []
    for _ in range(rng.randint(1, max_lhs)):
        a = atom(roots)
        roots.append(a.root)
        lhs.append(a)
    rhs, rroots = [], []
    for _ in range(rng.randint(0, max_rhs) if rng.random() < 0.2 else rng.randint(1, max_rhs)):
        a = atom(rroots)
        rroots.append(a.root)
        rhs.append(a)
    lpure = []
    for _ in range(rng.choice([0, 0, 1, 2])):
        u, v = rng.sample(pool, 2)
        lpure.append(eq(u, v) if rng.random() < 0.3 else neq(u, v))
    rpure = []
    if rng.random() < 0.15:
        u, v = rng.sample(pool, 2)
        rpure.append(eq(u, v) if rng.random() < 0.3 else neq(u, v))
    vset = tuple(v for v in pool if rng.random() < 0.1)
    return Sequent(SymbolicHeap(tuple(lhs), frozenset(lpure)), vset,
                   SymbolicHeap(tuple(rhs), frozenset(rpure)))


def _arg(rng, rs, sort, pool):
    if sort.is_loc:
        return rng.choice(pool)
    cs = sorted((c for c in rs.constants if c.sort == sort), key=lambda t: t.key)
    if cs and rng.random() < 0.5:
        return rng.choice(cs)
    return Term(rng.choice(["u", "v"]), sort)


def chain_problem(n: int) -> tuple[RuleSet, Sequent]:
    """x1 -> (x2) * ... * xn -> () |- list(x1) over the usual list rules."""
    x, y = var("x"), var("y")
    rs = make_ruleset([rule("list", (x,), PointsTo(x, (y,)), PredAtom("list", (y,))),
                       rule("list", (x,), PointsTo(x, ()))])
    xs = [var(f"x{i}") for i in range(1, n + 1)]
    cells = [PointsTo(xs[i], (xs[i + 1],)) for i in range(n - 1)] + [PointsTo(xs[-1], ())]
    return rs, Sequent(SymbolicHeap(tuple(cells)), (), SymbolicHeap((PredAtom("list", (xs[0],)),)))
