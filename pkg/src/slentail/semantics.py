"""Executable semantics: stores, heaps, satisfaction and bounded search.

Universe elements are plain tuples so they sort and hash cheaply:

    ("L", i)            the i-th location
    ("C", sort, name)   the image of a constant
    ("D", sort, i)      the i-th fresh element of a non-loc sort
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Sequence

from .analysis import heap_satisfiable, path_edges, reachable
from .rules import InductiveRule, RuleSet, productive_rank
from .syntax import (
    PointsTo, PredAtom, PureAtom, Sequent, SpatialAtom, SymbolicHeap, Term,
    constants_of, heap_vars,
)

Value = tuple
Heap = dict  # Value -> tuple[Value, ...]


def loc(i: int) -> Value:
    return ("L", i)


def const_value(t: Term) -> Value:
    return ("C", t.sort.name, t.name)


def is_loc_value(v: Value) -> bool:
    return v[0] == "L"


def show_value(v: Value) -> str:
    if v[0] == "L":
        return f"l{v[1]}"
    if v[0] == "C":
        return v[2]
    return f"{v[1]}{v[2]}"


@dataclass(frozen=True)
class Structure:
    store: tuple[tuple[Term, Value], ...]
    heap: tuple[tuple[Value, tuple[Value, ...]], ...]

    @classmethod
    def of(cls, store: dict, heap: dict) -> "Structure":
        return cls(tuple(sorted(store.items(), key=lambda kv: kv[0].key)),
                   tuple(sorted(heap.items())))

    @property
    def store_map(self) -> dict[Term, Value]:
        return dict(self.store)

    @property
    def heap_map(self) -> dict[Value, tuple]:
        return dict(self.heap)

    def to_text(self) -> str:
        lines = ["store:"]
        for t, v in self.store:
            lines.append(f"  {t.name} = {show_value(v)}")
        lines.append("heap:")
        if not self.heap:
            lines.append("  (empty)")
        for l, tup in self.heap:
            lines.append(f"  {show_value(l)} -> ({','.join(show_value(v) for v in tup)})")
        return "\n".join(lines)

    def to_record(self) -> dict:
        return {
            "store": {t.name: show_value(v) for t, v in self.store},
            "heap": [[show_value(l), [show_value(v) for v in tup]] for l, tup in self.heap],
        }

    def sort_key(self) -> tuple:
        return (len(self.heap), self.heap, tuple((t.key, v) for t, v in self.store))


def locs(h: Heap) -> set[Value]:
    """Allocated locations plus every location stored in a cell."""
    out = set(h)
    for tup in h.values():
        out.update(v for v in tup if is_loc_value(v))
    return out


def value_of(store: dict, t: Term) -> Value:
    if t.is_const:
        return const_value(t)
    try:
        return store[t]
    except KeyError:
        raise KeyError(f"store does not interpret {t}") from None


def holds_pure(store: dict, atoms: Iterable[PureAtom]) -> bool:
    for a in atoms:
        same = value_of(store, a.left) == value_of(store, a.right)
        if same != a.is_eq:
            return False
    return True


class _Footprints:
    """Sub-heap domains of a fixed heap on which spatial atoms hold."""

    def __init__(self, rs: RuleSet, heap: Heap, extra_values: Iterable[Value] = ()):
        self.rs = rs
        self.heap = heap
        self.memo: dict = {}
        vals = set(heap) | set(extra_values)
        for tup in heap.values():
            vals.update(tup)
        for c in rs.constants:
            vals.add(const_value(c))
        self.values = vals

    def _candidates(self, t: Term) -> list[Value]:
        if t.sort.is_loc:
            out = sorted(v for v in self.values if is_loc_value(v))
            n = max([v[1] for v in out], default=0)
            return out + [loc(n + 1)]
        out = sorted(v for v in self.values if v[0] != "L" and v[1] == t.sort.name)
        n = max([v[2] for v in out if v[0] == "D"], default=0)
        return out + [("D", t.sort.name, n + 1)]

    def pred(self, name: str, args: tuple[Value, ...], avail: frozenset) -> frozenset:
        key = (name, args, avail)
        got = self.memo.get(key)
        if got is not None:
            return got
        res: set[frozenset] = set()
        root = args[0]
        if root in avail:
            cell = self.heap[root]
            for r in self.rs.rules_for(name):
                res |= self._rule(r, args, cell, avail - {root})
        out = frozenset(frozenset({root} | d) for d in res)
        self.memo[key] = out
        return out

    def _rule(self, r: InductiveRule, args, cell, avail) -> set[frozenset]:
        pts = r.points_to
        if len(pts) != 1 or len(pts[0].args) != len(cell):
            return set()
        env: dict[Term, Value] = dict(zip(r.params, args))
        for t, v in zip(pts[0].args, cell):
            if t.is_const:
                if const_value(t) != v:
                    return set()
            elif t in env:
                if env[t] != v:
                    return set()
            else:
                if t.sort.is_loc != is_loc_value(v) or (not is_loc_value(v) and v[1] != t.sort.name):
                    return set()
                env[t] = v
        loose = [t for t in r.existentials if t not in env]
        out: set[frozenset] = set()
        pools = [self._candidates(t) for t in loose]
        for choice in itertools.product(*pools):
            e = dict(env)
            e.update(zip(loose, choice))
            if not holds_pure(e, r.body.pure):
                continue
            atoms = [(a.pred, tuple(value_of(e, t) for t in a.args)) for a in r.pred_atoms]
            out |= self._combine(atoms, avail)
        return out

    def _combine(self, atoms, avail: frozenset) -> set[frozenset]:
        if not atoms:
            return {frozenset()}
        (name, args), rest = atoms[0], atoms[1:]
        out: set[frozenset] = set()
        for d in self.pred(name, args, avail):
            for d2 in self._combine(rest, avail - d):
                out.add(d | d2)
        return out

    def atom(self, store: dict, a: SpatialAtom) -> frozenset:
        if isinstance(a, PointsTo):
            root = value_of(store, a.root)
            tup = tuple(value_of(store, t) for t in a.args)
            if self.heap.get(root) == tup:
                return frozenset({frozenset({root})})
            return frozenset()
        args = tuple(value_of(store, t) for t in a.args)
        return self.pred(a.pred, args, frozenset(self.heap))

    def spatial(self, store: dict, atoms: Sequence[SpatialAtom]) -> set[frozenset]:
        """All domains D such that the heap restricted to D satisfies the atoms."""
        doms: set[frozenset] = {frozenset()}
        for a in atoms:
            fps = self.atom(store, a)
            doms = {d | f for d in doms for f in fps if not (d & f)}
            if not doms:
                break
        return doms


def satisfies(rs: RuleSet, st: Structure, h: SymbolicHeap) -> bool:
    store, hp = st.store_map, st.heap_map
    if not holds_pure(store, h.pure):
        return False
    fp = _Footprints(rs, hp, store.values())
    return frozenset(hp) in fp.spatial(store, h.spatial)


def satisfying_subheaps(rs: RuleSet, store: dict, hp: Heap, atoms: Sequence[SpatialAtom]) -> list[frozenset]:
    """Domains of the sub-heaps of hp that satisfy the spatial atoms."""
    fp = _Footprints(rs, hp, store.values())
    return sorted(fp.spatial(store, atoms), key=lambda d: (len(d), sorted(d)))


# ------------------------------------------------------------- model generation

class _Shape:
    """A predicate-free unfolding: points-to atoms plus pure constraints."""

    __slots__ = ("cells", "pure", "exists")

    def __init__(self, cells, pure, exists):
        self.cells = cells
        self.pure = pure
        self.exists = exists


def unfoldings(rs: RuleSet, atoms: Sequence[SpatialAtom], max_cells: int) -> Iterator[_Shape]:
    """Predicate-free unfoldings with at most max_cells points-to atoms."""
    counter = itertools.count()

    def go(cells, pending, pure, exists, steps):
        if len(cells) + len(pending) > max_cells or steps > 4 * max_cells + 8:
            return
        if not pending:
            yield _Shape(tuple(cells), tuple(pure), tuple(exists))
            return
        a, rest = pending[0], pending[1:]
        for r in rs.rules_for(a.pred):
            k = next(counter)
            fresh = {e: Term(f"{e.name}#{k}", e.sort) for e in r.existentials}
            body = r.instantiate(a.args, fresh)
            new_cells = [b for b in body.spatial if isinstance(b, PointsTo)]
            new_preds = [b for b in body.spatial if isinstance(b, PredAtom)]
            yield from go(cells + new_cells, new_preds + rest, pure + list(body.pure),
                          exists + list(fresh.values()), steps + 1)

    pts = [a for a in atoms if isinstance(a, PointsTo)]
    preds = [a for a in atoms if isinstance(a, PredAtom)]
    yield from go(pts, preds, [], [], 0)


def _assignments(order: list[Term], checks: list[list], const_pool: dict, max_locs: int,
                 fixed: Optional[dict] = None, loc_universe: Optional[list] = None) -> Iterator[dict]:
    """Depth-first assignment with symmetry breaking on fresh elements.

    checks[i] holds predicates over the partial store that become decidable
    once order[i] is assigned.
    """
    env: dict[Term, Value] = {}
    n = len(order)

    def cands(t: Term) -> list[Value]:
        if fixed and t in fixed:
            return [fixed[t]]
        if t.sort.is_loc:
            if loc_universe is not None:
                return loc_universe
            used = sorted({v for v in env.values() if v[0] == "L"})
            out = list(used)
            if len(used) < max_locs:
                out.append(loc(len(used) + 1))
            return out
        s = t.sort.name
        used = sorted({v for v in env.values() if v[0] == "D" and v[1] == s})
        return list(const_pool.get(s, [])) + used + [("D", s, len(used) + 1)]

    def go(i: int):
        if i == n:
            yield dict(env)
            return
        t = order[i]
        for v in cands(t):
            env[t] = v
            if all(c(env) for c in checks[i]):
                yield from go(i + 1)
            del env[t]

    yield from go(0)


def _check(fn, *terms):
    return fn, terms


def _plan(order: list[Term], constraints: list[tuple]) -> list[list]:
    """Attach each constraint to the position where its last variable is bound."""
    pos = {t: i for i, t in enumerate(order)}
    checks: list[list] = [[] for _ in order]
    pre: list = []
    for fn, terms in constraints:
        vs = [pos[t] for t in terms if t.is_var]
        if vs:
            checks[max(vs)].append(fn)
        else:
            pre.append(fn)
    if not all(fn({}) for fn in pre):
        return None
    return checks


def _val(env, t):
    return const_value(t) if t.is_const else env[t]


def models(rs: RuleSet, lhs: SymbolicHeap, extra_vars: Iterable[Term], max_cells: int, max_locs: int,
           vset: Sequence[Term] = (), fixed: Optional[dict] = None,
           loc_universe: Optional[list] = None, const_terms: Iterable[Term] = ()) -> Iterator[tuple[dict, Heap, int]]:
    """Models (store, heap) of lhs within the bounds.

    Stores interpret the free variables of lhs and `extra_vars`.  With V
    given, only models leaving V unallocated and injective are produced.
    Up to renaming of fresh elements, every model is produced.
    """
    free = sorted(set(heap_vars(lhs)) | set(extra_vars) | set(vset), key=lambda t: t.key)
    consts = set(rs.constants) | constants_of(lhs) | set(const_terms)
    const_pool: dict[str, list[Value]] = {}
    for c in sorted(consts, key=lambda t: t.key):
        const_pool.setdefault(c.sort.name, []).append(const_value(c))
    vlist = list(vset)
    if len(set(vlist)) != len(vlist):
        return
    for shape in unfoldings(rs, lhs.spatial, max_cells):
        roots = [c.root for c in shape.cells]
        if len(set(roots)) != len(roots):
            continue
        order = free + [e for e in shape.exists if e not in free]
        cons: list[tuple] = []
        for a, b in itertools.combinations(roots, 2):
            cons.append((lambda e, a=a, b=b: e[a] != e[b], (a, b)))
        for p in list(lhs.pure) + list(shape.pure):
            cons.append((lambda e, p=p: (_val(e, p.left) == _val(e, p.right)) == p.is_eq, (p.left, p.right)))
        for v in vlist:
            for r in roots:
                cons.append((lambda e, v=v, r=r: e[v] != e[r], (v, r)))
        for a, b in itertools.combinations(vlist, 2):
            cons.append((lambda e, a=a, b=b: e[a] != e[b], (a, b)))
        # existentials not occurring anywhere would be unconstrained
        used = set(free)
        for c in shape.cells:
            used.update(t for t in c.terms if t.is_var)
        for p in shape.pure:
            used.update(t for t in p.terms if t.is_var)
        order = [t for t in order if t in used]
        checks = _plan(order, cons)
        if checks is None:
            continue
        for env in _assignments(order, checks, const_pool, max_locs, fixed, loc_universe):
            hp = {env[c.root]: tuple(_val(env, t) for t in c.args) for c in shape.cells}
            store = {t: env[t] for t in free}
            yield store, hp, len(shape.cells)


def _check_bounds(max_cells: int, max_locs: int) -> None:
    if max_cells <= 0 or max_locs <= 0:
        raise ValueError("bounds must be positive")


def countermodels(rs: RuleSet, s: Sequent, max_cells: int, max_locs: int) -> Iterator[Structure]:
    """Every counter-model within the bounds (up to renaming), unordered."""
    _check_bounds(max_cells, max_locs)
    extra = heap_vars(s.rhs) | set(s.vset)
    for store, hp, _ in models(rs, s.lhs, extra, max_cells, max_locs, s.vset,
                               const_terms=constants_of(s.rhs)):
        st = Structure.of(store, hp)
        if not satisfies(rs, st, s.rhs):
            yield st


def find_countermodel(rs: RuleSet, s: Sequent, max_cells: int = 4, max_locs: int = 5) -> Optional[Structure]:
    """Minimal counter-model (fewest cells, then lexicographic), or None."""
    _check_bounds(max_cells, max_locs)
    best_by_size: dict[int, Structure] = {}
    for st in countermodels(rs, s, max_cells, max_locs):
        n = len(st.heap)
        cur = best_by_size.get(n)
        if cur is None or st.sort_key() < cur.sort_key():
            best_by_size[n] = st
    if not best_by_size:
        return None
    return best_by_size[min(best_by_size)]


def has_countermodel(rs: RuleSet, s: Sequent, max_cells: int = 4, max_locs: int = 5) -> bool:
    return next(countermodels(rs, s, max_cells, max_locs), None) is not None


# ------------------------------------------------------------- model building

def construct_model(rs: RuleSet, phi: Sequence[SpatialAtom], store: dict,
                    fresh_pool: Iterable[Value]) -> Heap:
    """A model of phi over the given store, allocating fresh cells from the pool.

    Predicates unfold through rules whose body predicates became productive
    strictly earlier; among those the fewest body atoms wins, then rule order.
    """
    phi = tuple(phi)
    if not heap_satisfiable(phi):
        raise ValueError("formula is heap-unsatisfiable")
    roots = [store[a.root] for a in phi]
    if len(set(roots)) != len(roots):
        raise ValueError("store is not injective on alloc(phi)")
    pool = iter(fresh_pool)
    image = set(store.values())
    rank = productive_rank(rs)
    fresh_data = itertools.count(1)
    hp: Heap = {}

    def data(sort_name: str) -> Value:
        while True:
            v = ("D", sort_name, next(fresh_data))
            if v not in image:
                return v

    def pick(pred: str) -> InductiveRule:
        if pred not in rank:
            raise ValueError(f"predicate {pred} is not productive")
        ok = [r for r in rs.rules_for(pred)
              if all(rank.get(a.pred, 10 ** 9) < rank[pred] for a in r.pred_atoms)]
        return min(ok, key=lambda r: (len(r.pred_atoms), rs.rules.index(r)))

    def cell(at: Value, tup: tuple) -> None:
        if at in hp:
            raise ValueError("fresh pool overlaps the store image")
        hp[at] = tup

    def build(a: SpatialAtom, env: dict) -> None:
        if isinstance(a, PointsTo):
            cell(value_of(env, a.root), tuple(value_of(env, t) for t in a.args))
            return
        r = pick(a.pred)
        e: dict[Term, Value] = {p: value_of(env, t) for p, t in zip(r.params, a.args)}
        for x in r.existentials:
            if x.sort.is_loc:
                try:
                    v = next(pool)
                except StopIteration:
                    raise ValueError("fresh pool exhausted") from None
                if v in image:
                    raise ValueError("fresh pool overlaps the store image")
                e[x] = v
            else:
                e[x] = data(x.sort.name)
        if not holds_pure(e, r.body.pure):
            raise ValueError(f"could not satisfy the constraints of a {a.pred} rule")
        for b in r.body.spatial:
            build(b, e)

    for a in phi:
        build(a, store)
    return hp


def is_path_compatible(rs: RuleSet, st: Structure, h: SymbolicHeap) -> bool:
    if not satisfies(rs, st, h):
        raise ValueError("structure is not a model of the formula")
    store, hp = st.store_map, st.heap_map
    edges = path_edges(rs, h)
    heap_succ: dict[Value, set] = {}
    for l, tup in hp.items():
        heap_succ[l] = {v for v in tup if is_loc_value(v)}
    lv = sorted((v for v in heap_vars(h) if v.sort.is_loc), key=lambda t: t.key)
    for x in lv:
        seen = {store[x]}
        stack = [store[x]]
        while stack:
            u = stack.pop()
            for w in heap_succ.get(u, ()):
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        syn = reachable(edges, [x])
        for y in lv:
            if store[y] in seen and y not in syn:
                return False
    return True


def all_heaps(locations: Sequence[Value], arities: Iterable[int], max_cells: int,
              values: Optional[Sequence[Value]] = None) -> Iterator[Heap]:
    """Every heap over `locations` with at most max_cells cells.

    Cells hold tuples of the given arities over `values` (default: the
    locations themselves).
    """
    values = list(locations) if values is None else list(values)
    tuples = [t for k in sorted(set(arities)) for t in itertools.product(values, repeat=k)]
    for n in range(max_cells + 1):
        for dom in itertools.combinations(locations, n):
            for tups in itertools.product(tuples, repeat=n):
                yield dict(zip(dom, tups))
