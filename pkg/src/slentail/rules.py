"""Inductive rule sets and their static validation."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional

from .syntax import (
    PointsTo, PredAtom, PureAtom, Sort, SortError, SymbolicHeap, Term,
    apply_subst, constants_of, heap_vars, pure_model, show_heap, vector_eq,
)


@dataclass(frozen=True)
class Profile:
    pred: str
    sorts: tuple[Sort, ...]

    def __post_init__(self):
        object.__setattr__(self, "sorts", tuple(self.sorts))
        if not self.sorts or not self.sorts[0].is_loc:
            raise SortError(f"profile of {self.pred} must start with loc")

    @property
    def arity(self) -> int:
        return len(self.sorts)


@dataclass(frozen=True)
class InductiveRule:
    head: str
    params: tuple[Term, ...]
    body: SymbolicHeap

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        if len(set(self.params)) != len(self.params):
            raise SortError(f"parameters of {self.head} rule are not distinct")
        if any(p.is_const for p in self.params):
            raise SortError(f"parameters of {self.head} rule must be variables")

    @property
    def points_to(self) -> list[PointsTo]:
        return [a for a in self.body.spatial if isinstance(a, PointsTo)]

    @property
    def pred_atoms(self) -> list[PredAtom]:
        return [a for a in self.body.spatial if isinstance(a, PredAtom)]

    @property
    def existentials(self) -> list[Term]:
        ps = set(self.params)
        return sorted((v for v in heap_vars(self.body) if v not in ps), key=lambda t: t.key)

    def instantiate(self, args: tuple[Term, ...], fresh: dict[Term, Term]) -> SymbolicHeap:
        """Body with params := args and existentials renamed via `fresh`."""
        m = dict(zip(self.params, args))
        m.update(fresh)
        return apply_subst(m, self.body)

    def __str__(self) -> str:
        return f"{self.head}({','.join(map(str, self.params))}) <= {show_heap(self.body)}"


@dataclass(frozen=True)
class Violation:
    rule: int          # index in the rule list, -1 for set-level findings
    kind: str          # see KINDS
    detail: str

    def __str__(self) -> str:
        where = f"rule {self.rule}: " if self.rule >= 0 else ""
        return f"{where}[{self.kind}] {self.detail}"


# order matters: the first violation of a rule is its headline label
KINDS = (
    "no-points-to", "condition-2", "condition-1", "condition-3", "sort",
    "non-productive", "assumption-2", "non-deterministic", "non-loc-disequation",
)


def validate_prule(rule: InductiveRule, index: int = 0) -> list[Violation]:
    """P-rule shape checks; returns every violation found, headline first."""
    out: list[Violation] = []
    pts = rule.points_to
    xs = set(rule.params)
    if len(pts) != 1 or pts[0].root != rule.params[0]:
        if not pts:
            msg = "no points-to atom"
        elif len(pts) > 1:
            msg = "more than one points-to atom"
        else:
            msg = f"points-to atom not rooted at {rule.params[0]}"
        return [Violation(index, "no-points-to", msg)]
    ys = list(pts[0].args)
    yvars = {t for t in ys if t.is_var}
    fresh = yvars - xs
    fresh_loc = {t for t in fresh if t.sort.is_loc}
    roots = [a.root for a in rule.pred_atoms]
    if set(roots) != fresh_loc or len(set(roots)) != len(roots):
        missing = sorted(map(str, fresh_loc - set(roots)))
        extra = sorted(map(str, set(roots) - fresh_loc))
        dup = len(set(roots)) != len(roots)
        bits = []
        if missing:
            bits.append(f"fresh loc variables not rooted: {', '.join(missing)}")
        if extra:
            bits.append(f"roots not fresh tuple variables: {', '.join(extra)}")
        if dup:
            bits.append("repeated body roots")
        out.append(Violation(index, "condition-2", "; ".join(bits)))
    for p in sorted(rule.body.pure, key=str):
        ok = (not p.is_eq) and any(
            u in (xs | yvars) and v in fresh for u, v in ((p.left, p.right), (p.right, p.left)))
        if not ok:
            out.append(Violation(index, "condition-1", f"pure atom {p} not allowed"))
    allowed = xs | yvars
    for a in rule.pred_atoms:
        for t in a.args[1:]:
            if t.is_var and t not in allowed:
                out.append(Violation(index, "condition-3", f"{t} in {a} is not a parameter or tuple variable"))
    return out


def _rename_apart(rule: InductiveRule, tag: str) -> tuple[tuple[Term, ...], PointsTo, frozenset[PureAtom]]:
    vs = sorted(set(rule.params) | heap_vars(rule.body), key=lambda t: t.key)
    m = {v: Term(f"{v.name}#{tag}", v.sort) for v in vs}
    params = tuple(m[p] for p in rule.params)
    body = apply_subst(m, rule.body)
    pt = [a for a in body.spatial if isinstance(a, PointsTo)][0]
    return params, pt, body.pure


@dataclass
class RuleSet:
    profiles: dict[str, Profile]
    rules: tuple[InductiveRule, ...]
    constants: frozenset[Term] = frozenset()

    def __post_init__(self):
        self.rules = tuple(self.rules)
        cs = set(self.constants)
        for r in self.rules:
            cs |= constants_of(r.body)
        self.constants = frozenset(cs)
        for r in self.rules:
            prof = self.profiles.get(r.head)
            if prof is None:
                raise SortError(f"no profile for predicate {r.head}")
            if tuple(p.sort for p in r.params) != prof.sorts:
                raise SortError(f"rule for {r.head} does not match its profile")
            for a in r.pred_atoms:
                check_pred_atom(self.profiles, a)

    def __hash__(self):
        return id(self)

    def rules_for(self, pred: str) -> list[InductiveRule]:
        return self._by_head.get(pred, [])

    @cached_property
    def _by_head(self) -> dict[str, list[InductiveRule]]:
        d: dict[str, list[InductiveRule]] = {}
        for r in self.rules:
            d.setdefault(r.head, []).append(r)
        return d

    @cached_property
    def predicates(self) -> list[str]:
        return sorted(self.profiles)

    # cached analyses -------------------------------------------------
    @cached_property
    def productive(self) -> frozenset[str]:
        return frozenset(compute_productive(self))

    @cached_property
    def out_params(self) -> dict[str, frozenset[int]]:
        return compute_out_params(self)

    @cached_property
    def measures(self) -> tuple[int, int, int]:
        return measures(self)

    @property
    def width(self) -> int:
        return self.measures[2]

    @cached_property
    def determinism(self) -> tuple[bool, Optional[tuple[int, int, dict]]]:
        return check_deterministic(self)

    @cached_property
    def diagnostics(self) -> list[Violation]:
        return diagnose(self)

    @property
    def is_valid(self) -> bool:
        return not self.diagnostics


def check_pred_atom(profiles: dict[str, Profile], a: PredAtom) -> None:
    prof = profiles.get(a.pred)
    if prof is None:
        raise SortError(f"unknown predicate {a.pred}")
    if tuple(t.sort for t in a.args) != prof.sorts:
        raise SortError(f"atom {a} does not match profile of {a.pred}")


def compute_productive(rs: RuleSet) -> set[str]:
    prod: set[str] = set()
    changed = True
    while changed:
        changed = False
        for r in rs.rules:
            if r.head not in prod and all(a.pred in prod for a in r.pred_atoms):
                prod.add(r.head)
                changed = True
    return prod


def productive_rank(rs: RuleSet) -> dict[str, int]:
    """Iteration at which each predicate became productive."""
    rank: dict[str, int] = {}
    level = 0
    while True:
        new = {r.head for r in rs.rules
               if r.head not in rank and all(a.pred in rank for a in r.pred_atoms)}
        if not new:
            return rank
        for p in new:
            rank[p] = level
        level += 1


def compute_out_params(rs: RuleSet) -> dict[str, frozenset[int]]:
    """Least fixpoint of out-indices (1-based, as in the literature)."""
    out: dict[str, set[int]] = {p: set() for p in rs.profiles}
    changed = True
    while changed:
        changed = False
        for r in rs.rules:
            prof = rs.profiles[r.head]
            tuple_terms: set[Term] = set()
            for pt in r.points_to:
                if pt.root == r.params[0]:
                    tuple_terms |= set(pt.args)
            for i, x in enumerate(r.params, start=1):
                if not prof.sorts[i - 1].is_loc or i in out[r.head]:
                    continue
                hit = x in tuple_terms or any(
                    a.args[j - 1] == x for a in r.pred_atoms for j in out.get(a.pred, ()))
                if hit:
                    out[r.head].add(i)
                    changed = True
    return {p: frozenset(s) for p, s in out.items()}


def check_assumption2(rs: RuleSet) -> list[tuple[str, int]]:
    bad = []
    for p in rs.predicates:
        prof = rs.profiles[p]
        for i, s in enumerate(prof.sorts[1:], start=2):
            if s.is_loc and i not in rs.out_params[p]:
                bad.append((p, i))
    return bad


def check_deterministic(rs: RuleSet) -> tuple[bool, Optional[tuple[int, int, dict]]]:
    """Pairwise unsatisfiability test; returns (verdict, witness).

    The witness is (i, j, classes) with rule indices and the congruence
    classes of a satisfying assignment of the unified constraint.
    """
    idx = {id(r): k for k, r in enumerate(rs.rules)}
    for p in rs.predicates:
        group = rs.rules_for(p)
        for r1, r2 in itertools.combinations(group, 2):
            if len(r1.points_to) != 1 or len(r2.points_to) != 1:
                continue
            x1, t1, xi1 = _rename_apart(r1, "1")
            x2, t2, xi2 = _rename_apart(r2, "2")
            a = vector_eq(x1, x2)
            b = vector_eq(t1.args, t2.args)
            if a is None or b is None:
                continue
            m = pure_model(list(a) + list(b) + list(xi1) + list(xi2))
            if m is not None:
                classes = {str(t): str(r) for t, r in sorted(m.items(), key=lambda kv: kv[0].key)}
                return False, (idx[id(r1)], idx[id(r2)], classes)
    return True, None


def non_loc_disequations(rs: RuleSet) -> list[tuple[int, PureAtom]]:
    out = []
    for k, r in enumerate(rs.rules):
        for a in sorted(r.body.pure, key=str):
            if not a.is_eq and not (a.left.sort.is_loc and a.left.is_var and a.right.is_var):
                out.append((k, a))
    return out


def check_loc_deterministic(rs: RuleSet) -> bool:
    return rs.determinism[0] and not non_loc_disequations(rs)


def measures(rs: RuleSet) -> tuple[int, int, int]:
    preds = {r.head for r in rs.rules} | {a.pred for r in rs.rules for a in r.pred_atoms}
    ar = max((rs.profiles[p].arity for p in preds), default=0)
    rec = max((len(pt.args) for r in rs.rules for pt in r.points_to), default=0)
    return ar, rec, max(ar, rec)


def diagnose(rs: RuleSet) -> list[Violation]:
    """Everything that keeps rs out of the prover's input class."""
    out: list[Violation] = []
    if not rs.rules:
        out.append(Violation(-1, "non-productive", "empty rule set"))
        return out
    for k, r in enumerate(rs.rules):
        out.extend(validate_prule(r, k))
    prod = rs.productive
    for p in rs.predicates:
        if p not in prod:
            out.append(Violation(-1, "non-productive", f"predicate {p} is not productive"))
    for p, i in check_assumption2(rs):
        out.append(Violation(-1, "assumption-2", f"parameter {i} of {p} is not an out-parameter"))
    if not any(v.kind in ("no-points-to",) for v in out):
        det, wit = rs.determinism
        if not det:
            i, j, classes = wit
            out.append(Violation(-1, "non-deterministic",
                                 f"rules {i} and {j} overlap (witness classes {classes})"))
    for k, a in non_loc_disequations(rs):
        out.append(Violation(k, "non-loc-disequation", f"{a} is not between loc variables"))
    return out


def make_ruleset(rules: Iterable[InductiveRule], profiles: Optional[dict[str, Profile]] = None,
                 constants: Iterable[Term] = ()) -> RuleSet:
    """Build a RuleSet, inferring missing profiles from rule heads and body atoms."""
    rules = list(rules)
    profs = dict(profiles or {})
    for r in rules:
        profs.setdefault(r.head, Profile(r.head, tuple(p.sort for p in r.params)))
    for r in rules:
        for a in r.pred_atoms:
            profs.setdefault(a.pred, Profile(a.pred, tuple(t.sort for t in a.args)))
    return RuleSet(profs, tuple(rules), frozenset(constants))


def rule(head: str, params: Iterable[Term], *atoms, pure: Iterable[PureAtom] = ()) -> InductiveRule:
    return InductiveRule(head, tuple(params), SymbolicHeap(tuple(atoms), frozenset(pure)))
