"""Terms, formulas, substitutions and sequents in canonical form.

Every value is an immutable, hashable dataclass.  Constructors normalize
their input (atom orientation, sorted spatial multisets, pure sets) so
structural equality coincides with equality modulo AC and contraction.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Optional, Union


class SortError(ValueError):
    """Raised when a construction mixes terms of different sorts."""


@dataclass(frozen=True)
class Sort:
    name: str
    is_loc: bool = False

    def __str__(self) -> str:
        return self.name


LOC = Sort("loc", True)


@dataclass(frozen=True)
class Term:
    name: str
    sort: Sort = LOC
    is_const: bool = False

    def __post_init__(self):
        if self.is_const and self.sort.is_loc:
            raise SortError(f"constant {self.name} cannot have sort loc")

    @property
    def is_var(self) -> bool:
        return not self.is_const

    @property
    def key(self) -> tuple:
        # constants first, then (sort, name)
        return (0 if self.is_const else 1, self.sort.name, self.name)

    def __lt__(self, other: "Term") -> bool:
        return self.key < other.key

    def __str__(self) -> str:
        return self.name


def var(name: str, sort: Sort = LOC) -> Term:
    return Term(name, sort, False)


def const(name: str, sort: Sort) -> Term:
    return Term(name, sort, True)


@dataclass(frozen=True)
class PureAtom:
    """t = s (is_eq) or t != s, stored with left <= right."""

    is_eq: bool
    left: Term
    right: Term

    def __post_init__(self):
        if self.left.sort != self.right.sort:
            raise SortError(f"sort mismatch in {self.left} vs {self.right}")
        if self.right.key < self.left.key:
            l, r = self.right, self.left
            object.__setattr__(self, "left", l)
            object.__setattr__(self, "right", r)

    @property
    def terms(self) -> tuple[Term, Term]:
        return (self.left, self.right)

    @property
    def is_trivial_eq(self) -> bool:
        return self.is_eq and self.left == self.right

    @property
    def is_bottom(self) -> bool:
        return (not self.is_eq) and self.left == self.right

    def __str__(self) -> str:
        op = "=" if self.is_eq else "!="
        return f"{self.left} {op} {self.right}"


def eq(a: Term, b: Term) -> PureAtom:
    return PureAtom(True, a, b)


def neq(a: Term, b: Term) -> PureAtom:
    return PureAtom(False, a, b)


@dataclass(frozen=True)
class PointsTo:
    root: Term
    args: tuple[Term, ...] = ()

    def __post_init__(self):
        if not (self.root.is_var and self.root.sort.is_loc):
            raise SortError(f"points-to root {self.root} must be a loc variable")
        object.__setattr__(self, "args", tuple(self.args))

    @property
    def terms(self) -> tuple[Term, ...]:
        return (self.root,) + self.args

    def __str__(self) -> str:
        return f"{self.root} -> ({','.join(map(str, self.args))})"


@dataclass(frozen=True)
class PredAtom:
    pred: str
    args: tuple[Term, ...]

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))
        if not self.args:
            raise SortError(f"predicate atom {self.pred} needs a root argument")
        root = self.args[0]
        if not (root.is_var and root.sort.is_loc):
            raise SortError(f"predicate root {root} must be a loc variable")

    @property
    def root(self) -> Term:
        return self.args[0]

    @property
    def terms(self) -> tuple[Term, ...]:
        return self.args

    def __str__(self) -> str:
        return f"{self.pred}({','.join(map(str, self.args))})"


SpatialAtom = Union[PointsTo, PredAtom]


def atom_key(a: SpatialAtom) -> str:
    return str(a)


@dataclass(frozen=True)
class SymbolicHeap:
    """spatial ⋏ pure; spatial is a sorted tuple (multiset), pure a frozenset."""

    spatial: tuple[SpatialAtom, ...] = ()
    pure: frozenset[PureAtom] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "spatial", tuple(sorted(self.spatial, key=atom_key)))
        object.__setattr__(
            self, "pure", frozenset(a for a in self.pure if not a.is_trivial_eq))

    @property
    def is_emp(self) -> bool:
        return not self.spatial

    def variables(self) -> set[Term]:
        return heap_vars(self)

    def __str__(self) -> str:
        return show_heap(self)


def pure_key(a: PureAtom) -> tuple:
    return (0 if a.is_eq else 1, a.left.key, a.right.key)


def show_spatial(atoms: Iterable[SpatialAtom]) -> str:
    atoms = list(atoms)
    return " * ".join(map(str, atoms)) if atoms else "emp"


def show_pure(pure: Iterable[PureAtom]) -> str:
    return " /\\ ".join(str(a) for a in sorted(pure, key=pure_key))


def show_heap(h: SymbolicHeap) -> str:
    sp = show_spatial(h.spatial)
    if not h.pure:
        return sp
    if len(h.spatial) > 1:
        sp = f"({sp})"
    return f"{sp} /\\ {show_pure(h.pure)}"


def canonicalize(h: SymbolicHeap) -> SymbolicHeap:
    # construction already canonicalizes; kept as an explicit entry point
    return SymbolicHeap(h.spatial, h.pure)


def heap(*atoms: SpatialAtom, pure: Iterable[PureAtom] = ()) -> SymbolicHeap:
    return SymbolicHeap(tuple(atoms), frozenset(pure))


@dataclass(frozen=True)
class Sequent:
    lhs: SymbolicHeap
    vset: tuple[Term, ...] = ()
    rhs: SymbolicHeap = field(default_factory=SymbolicHeap)

    def __post_init__(self):
        for v in self.vset:
            if not (v.is_var and v.sort.is_loc):
                raise SortError(f"V may only contain loc variables, got {v}")
        object.__setattr__(self, "vset", tuple(sorted(self.vset, key=lambda t: t.key)))

    def variables(self) -> set[Term]:
        return heap_vars(self.lhs) | set(self.vset) | heap_vars(self.rhs)

    def __str__(self) -> str:
        vs = "{" + ",".join(map(str, self.vset)) + "}"
        return f"{self.lhs} |-{vs} {self.rhs}"


Formula = Union[Term, PureAtom, SpatialAtom, SymbolicHeap, Sequent]


def atom_vars(a: Union[SpatialAtom, PureAtom]) -> set[Term]:
    return {t for t in a.terms if t.is_var}


def heap_vars(h: SymbolicHeap) -> set[Term]:
    out: set[Term] = set()
    for a in h.spatial:
        out |= atom_vars(a)
    for p in h.pure:
        out |= atom_vars(p)
    return out


def spatial_vars(atoms: Iterable[SpatialAtom]) -> set[Term]:
    out: set[Term] = set()
    for a in atoms:
        out |= atom_vars(a)
    return out


def pure_vars(pure: Iterable[PureAtom]) -> set[Term]:
    out: set[Term] = set()
    for p in pure:
        out |= atom_vars(p)
    return out


def constants_of(x: Formula) -> set[Term]:
    return {t for t in terms_of(x) if t.is_const}


def terms_of(x: Formula) -> Iterator[Term]:
    if isinstance(x, Term):
        yield x
    elif isinstance(x, (PureAtom, PointsTo, PredAtom)):
        yield from x.terms
    elif isinstance(x, SymbolicHeap):
        for a in x.spatial:
            yield from a.terms
        for p in x.pure:
            yield from p.terms
    elif isinstance(x, Sequent):
        yield from terms_of(x.lhs)
        yield from x.vset
        yield from terms_of(x.rhs)


# ---------------------------------------------------------------- substitutions

@dataclass(frozen=True)
class Substitution:
    """Simultaneous, sort-preserving replacement of variables."""

    pairs: tuple[tuple[Term, Term], ...] = ()

    def __post_init__(self):
        clean = {}
        for k, v in self.pairs:
            if not k.is_var:
                raise SortError(f"cannot substitute constant {k}")
            if k.sort != v.sort:
                raise SortError(f"substitution {k}<-{v} is not sort-preserving")
            if k != v:
                clean[k] = v
        object.__setattr__(self, "pairs", tuple(sorted(clean.items(), key=lambda kv: kv[0].key)))

    @classmethod
    def of(cls, mapping: Mapping[Term, Term]) -> "Substitution":
        return cls(tuple(mapping.items()))

    def as_dict(self) -> dict[Term, Term]:
        return dict(self.pairs)

    def __bool__(self) -> bool:
        return bool(self.pairs)

    def __str__(self) -> str:
        return "{" + ", ".join(f"{k}<-{v}" for k, v in self.pairs) + "}"


def _term(m: Mapping[Term, Term], t: Term) -> Term:
    return m.get(t, t)


def apply_subst(sigma: Union[Substitution, Mapping[Term, Term]], x):
    """Apply sigma simultaneously to a term, atom, heap or sequent."""
    m = sigma.as_dict() if isinstance(sigma, Substitution) else dict(sigma)
    for k, v in m.items():
        if k.sort != v.sort:
            raise SortError(f"substitution {k}<-{v} is not sort-preserving")
    return _apply(m, x)


def _apply(m: Mapping[Term, Term], x):
    if not m:
        return x
    if isinstance(x, Term):
        return _term(m, x)
    if isinstance(x, PureAtom):
        return PureAtom(x.is_eq, _term(m, x.left), _term(m, x.right))
    if isinstance(x, PointsTo):
        return PointsTo(_term(m, x.root), tuple(_term(m, t) for t in x.args))
    if isinstance(x, PredAtom):
        return PredAtom(x.pred, tuple(_term(m, t) for t in x.args))
    if isinstance(x, SymbolicHeap):
        return SymbolicHeap(tuple(_apply(m, a) for a in x.spatial),
                            frozenset(_apply(m, p) for p in x.pure))
    if isinstance(x, Sequent):
        return Sequent(_apply(m, x.lhs), tuple(_term(m, v) for v in x.vset), _apply(m, x.rhs))
    if isinstance(x, (tuple, list)):
        return type(x)(_apply(m, y) for y in x)
    raise TypeError(f"cannot substitute into {type(x).__name__}")


# ---------------------------------------------------------------- pure reasoning

def vector_eq(ts: tuple[Term, ...], ss: tuple[Term, ...]) -> Optional[frozenset[PureAtom]]:
    """Pointwise expansion of (ts) = (ss); None stands for bottom."""
    if len(ts) != len(ss):
        return None
    if any(a.sort != b.sort for a, b in zip(ts, ss)):
        return None
    return frozenset(eq(a, b) for a, b in zip(ts, ss))


class _UF:
    def __init__(self):
        self.parent: dict[Term, Term] = {}

    def find(self, t: Term) -> Term:
        p = self.parent.setdefault(t, t)
        if p != t:
            p = self.parent[t] = self.find(p)
        return p

    def union(self, a: Term, b: Term) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb, key=lambda t: t.key)] = min(ra, rb, key=lambda t: t.key)


def pure_model(atoms: Iterable[Optional[PureAtom]]) -> Optional[dict[Term, Term]]:
    """Congruence classes for a satisfiable conjunction, or None.

    The result maps each term to its class representative (constants win).
    A None entry in `atoms` denotes bottom.
    """
    atoms = list(atoms)
    if any(a is None for a in atoms):
        return None
    uf = _UF()
    for a in atoms:
        uf.find(a.left)
        uf.find(a.right)
        if a.is_eq:
            uf.union(a.left, a.right)
    # distinct constants must stay apart
    seen: dict[Term, Term] = {}
    for t in list(uf.parent):
        if t.is_const:
            r = uf.find(t)
            if r in seen and seen[r] != t:
                return None
            seen[r] = t
    for a in atoms:
        if not a.is_eq and uf.find(a.left) == uf.find(a.right):
            return None
    return {t: uf.find(t) for t in uf.parent}


def pure_satisfiable(atoms: Iterable[Optional[PureAtom]]) -> bool:
    return pure_model(atoms) is not None


def multiset(items: Iterable[Term]) -> Counter:
    return Counter(items)
