"""Problem-file grammar and the `slentail` command line.

    sort d;
    const a : d;
    pred p(loc, d);
    rule p(x,y) <= x -> (a,y,z) * p(z,y);
    rule als(x,y) <= x -> (z) * als(z,y) /\\ y != z;
    entail V: u (p(x,y) * q(z)) /\\ x != y |- q(x,y);

`%` starts a comment.  A variable occurrence may carry a sort annotation
`u:d`; otherwise sorts are inferred from predicate profiles, constants and
equations, defaulting to loc.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .rules import InductiveRule, Profile, RuleSet, make_ruleset
from .semantics import find_countermodel
from .syntax import (
    LOC, PointsTo, PredAtom, PureAtom, Sequent, Sort, SortError, SymbolicHeap, Term,
)


class ParseError(ValueError):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {msg}" if line else msg)
        self.line = line
        self.col = col


# ---------------------------------------------------------------- tokens

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+) | (?P<nl>\n) | (?P<comment>%[^\n]*)
  | (?P<op>\|-|->|<=|/\\|!=|[=*(),;:{}])
  | (?P<ident>[A-Za-z][A-Za-z0-9_']*)
""", re.VERBOSE)


@dataclass(frozen=True)
class Tok:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Tok]:
    out = []
    line, start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            start = m.end()
        elif kind in ("op", "ident"):
            out.append(Tok(kind, m.group(), line, m.start() - start + 1))
        pos = m.end()
    out.append(Tok("eof", "", line, pos - start + 1))
    return out


# ---------------------------------------------------------------- raw AST

@dataclass
class RawTerm:
    name: str
    sort: Optional[str]
    tok: Tok


@dataclass
class RawHeap:
    spatial: list        # ("pto", RawTerm, [RawTerm]) | ("pred", name, [RawTerm], Tok)
    pure: list           # (is_eq, RawTerm, RawTerm)


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Tok:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Optional[Tok] = None):
        t = tok or self.tok
        raise ParseError(msg, t.line, t.col)

    def take(self, text: Optional[str] = None, kind: Optional[str] = None) -> Tok:
        t = self.tok
        if (text is not None and t.text != text) or (kind is not None and t.kind != kind):
            want = repr(text) if text is not None else kind
            self.error(f"expected {want}, found {t.text or 'end of input'!r}")
        self.i += 1
        return t

    def accept(self, text: str) -> bool:
        if self.tok.text == text and self.tok.kind == "op" or (self.tok.kind == "ident" and self.tok.text == text):
            self.i += 1
            return True
        return False

    def ident(self) -> Tok:
        return self.take(kind="ident")

    def term(self) -> RawTerm:
        t = self.ident()
        sort = None
        if self.tok.text == ":" and self.peek().kind == "ident":
            self.i += 1
            sort = self.ident().text
        return RawTerm(t.text, sort, t)

    def terms(self) -> list[RawTerm]:
        self.take("(")
        out = []
        if not self.accept(")"):
            out.append(self.term())
            while self.accept(","):
                out.append(self.term())
            self.take(")")
        return out

    def spatial(self) -> list:
        atoms = self.satom()
        while self.accept("*"):
            atoms += self.satom()
        return atoms

    def satom(self) -> list:
        if self.accept("("):
            atoms = self.spatial()
            self.take(")")
            return atoms
        t = self.tok
        if t.kind == "ident" and t.text == "emp":
            self.i += 1
            return []
        if t.kind == "ident" and self.peek().text == "->":
            root = self.term()
            self.take("->")
            return [("pto", root, self.terms())]
        if t.kind == "ident" and self.peek().text == ":" and self.peek(3).text == "->":
            root = self.term()
            self.take("->")
            return [("pto", root, self.terms())]
        if t.kind == "ident" and self.peek().text == "(":
            name = self.ident()
            return [("pred", name.text, self.terms(), name)]
        self.error(f"expected a spatial atom, found {t.text or 'end of input'!r}")

    def pure(self) -> list:
        out = [self.patom()]
        while self.accept("/\\"):
            out.append(self.patom())
        return out

    def patom(self):
        left = self.term()
        if self.accept("="):
            return (True, left, self.term())
        if self.accept("!="):
            return (False, left, self.term())
        self.error("expected '=' or '!='")

    def heap(self) -> RawHeap:
        sp = self.spatial()
        pure = self.pure() if self.accept("/\\") else []
        return RawHeap(sp, pure)


# ---------------------------------------------------------------- problems

@dataclass
class Query:
    index: int
    sequent: Sequent
    line: int


@dataclass
class Problem:
    sorts: dict[str, Sort]
    constants: dict[str, Term]
    profiles: dict[str, Profile]
    rules: list[InductiveRule]
    queries: list[Query] = field(default_factory=list)
    declared_profiles: frozenset = frozenset()

    def ruleset(self) -> RuleSet:
        return make_ruleset(self.rules, self.profiles, self.constants.values())


class _Sorts:
    """Union-find over sort slots: variables in a scope and predicate positions."""

    def __init__(self):
        self.parent: dict = {}
        self.sort: dict = {}
        self.where: dict = {}

    def find(self, a):
        self.parent.setdefault(a, a)
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def fix(self, a, s: Sort, tok: Optional[Tok]):
        r = self.find(a)
        old = self.sort.get(r)
        if old is not None and old != s:
            raise ParseError(f"sort clash: {s.name} vs {old.name}",
                             *(self.where.get(r) or (tok.line, tok.col) if tok else (0, 0)))
        self.sort[r] = s
        if tok is not None:
            self.where.setdefault(r, (tok.line, tok.col))

    def union(self, a, b, tok: Optional[Tok]):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        sa, sb = self.sort.get(ra), self.sort.get(rb)
        if sa is not None and sb is not None and sa != sb:
            line, col = (tok.line, tok.col) if tok else (0, 0)
            raise ParseError(f"sort clash: {sa.name} vs {sb.name}", line, col)
        self.parent[rb] = ra
        if sa is None and sb is not None:
            self.sort[ra] = sb
        if rb in self.where:
            self.where.setdefault(ra, self.where[rb])

    def get(self, a) -> Optional[Sort]:
        return self.sort.get(self.find(a))


def parse(text: str) -> Problem:
    p = _Parser(text)
    sorts: dict[str, Sort] = {"loc": LOC}
    consts: dict[str, Term] = {}
    declared: dict[str, tuple[Tok, list[Sort]]] = {}
    raw_rules = []    # (scope, head tok, params, body)
    raw_queries = []  # (scope, vset toks, lhs, rhs, line)
    while p.tok.kind != "eof":
        kw = p.ident()
        if kw.text == "sort":
            name = p.ident()
            if name.text in sorts:
                p.error(f"sort {name.text} declared twice", name)
            sorts[name.text] = Sort(name.text)
        elif kw.text == "const":
            name = p.ident()
            p.take(":")
            s = p.ident()
            if s.text not in sorts:
                p.error(f"unknown sort {s.text}", s)
            if sorts[s.text].is_loc:
                p.error("constants cannot have sort loc", s)
            if name.text in consts:
                p.error(f"constant {name.text} declared twice", name)
            consts[name.text] = Term(name.text, sorts[s.text], True)
        elif kw.text == "pred":
            name = p.ident()
            p.take("(")
            ss = [p.ident()]
            while p.accept(","):
                ss.append(p.ident())
            p.take(")")
            for s in ss:
                if s.text not in sorts:
                    p.error(f"unknown sort {s.text}", s)
            if name.text in declared:
                p.error(f"predicate {name.text} declared twice", name)
            prof = [sorts[s.text] for s in ss]
            if not prof[0].is_loc:
                p.error(f"first argument of {name.text} must have sort loc", ss[0])
            declared[name.text] = (name, prof)
        elif kw.text == "rule":
            head = p.ident()
            params = p.terms()
            p.take("<=")
            body = p.heap()
            raw_rules.append((("rule", len(raw_rules)), head, params, body))
        elif kw.text == "entail":
            vset = []
            if p.tok.text == "V" and p.peek().text == ":":
                p.i += 2
                vset.append(p.term())
                while p.accept(","):
                    vset.append(p.term())
            lhs = p.heap()
            p.take("|-")
            rhs = p.heap()
            raw_queries.append((("query", len(raw_queries)), vset, lhs, rhs, kw.line))
        else:
            p.error(f"unknown declaration {kw.text!r}", kw)
        p.take(";")

    uf = _Sorts()

    def sort_of(name: str, tok: Tok) -> Sort:
        if name not in sorts:
            raise ParseError(f"unknown sort {name}", tok.line, tok.col)
        return sorts[name]

    for name, (tok, prof) in declared.items():
        for i, s in enumerate(prof):
            uf.fix(("pos", name, i), s, tok)

    def slot(scope, t: RawTerm):
        if t.name in consts:
            if t.sort is not None and sort_of(t.sort, t.tok) != consts[t.name].sort:
                raise ParseError(f"constant {t.name} has sort {consts[t.name].sort}", t.tok.line, t.tok.col)
            return ("const", t.name)
        s = ("var", scope, t.name)
        if t.sort is not None:
            uf.fix(s, sort_of(t.sort, t.tok), t.tok)
        return s

    for c in consts.values():
        uf.fix(("const", c.name), c.sort, None)
    arity: dict[str, tuple[int, Tok]] = {n: (len(pr), tok) for n, (tok, pr) in declared.items()}

    def pred_use(name: str, args: list[RawTerm], tok: Tok, scope):
        n, first = arity.setdefault(name, (len(args), tok))
        if n != len(args):
            raise ParseError(f"{name} used with {len(args)} arguments, expected {n}", tok.line, tok.col)
        if not args:
            raise ParseError(f"{name} needs at least one argument", tok.line, tok.col)
        for i, a in enumerate(args):
            uf.union(("pos", name, i), slot(scope, a), a.tok)
        uf.fix(("pos", name, 0), LOC, tok)

    def heap_constraints(scope, h: RawHeap):
        for at in h.spatial:
            if at[0] == "pto":
                uf.fix(slot(scope, at[1]), LOC, at[1].tok)
                for a in at[2]:
                    slot(scope, a)
            else:
                pred_use(at[1], at[2], at[3], scope)
        for _, l, r in h.pure:
            uf.union(slot(scope, l), slot(scope, r), l.tok)

    for scope, head, params, body in raw_rules:
        if not params:
            raise ParseError(f"rule for {head.text} needs parameters", head.line, head.col)
        for a in params:
            if a.name in consts:
                raise ParseError(f"parameter {a.name} is a constant", a.tok.line, a.tok.col)
        pred_use(head.text, params, head, scope)
        heap_constraints(scope, body)
    for scope, vset, lhs, rhs, _ in raw_queries:
        for t in vset:
            uf.fix(slot(scope, t), LOC, t.tok)
        heap_constraints(scope, lhs)
        heap_constraints(scope, rhs)

    def resolve(key) -> Sort:
        return uf.get(key) or LOC

    profiles = {name: Profile(name, tuple(resolve(("pos", name, i)) for i in range(n)))
                for name, (n, _) in sorted(arity.items())}

    def term(scope, t: RawTerm) -> Term:
        if t.name in consts:
            return consts[t.name]
        return Term(t.name, resolve(("var", scope, t.name)))

    def build_heap(scope, h: RawHeap) -> SymbolicHeap:
        sp = []
        for at in h.spatial:
            try:
                if at[0] == "pto":
                    sp.append(PointsTo(term(scope, at[1]), tuple(term(scope, a) for a in at[2])))
                else:
                    sp.append(PredAtom(at[1], tuple(term(scope, a) for a in at[2])))
            except SortError as e:
                tok = at[1].tok if at[0] == "pto" else at[3]
                raise ParseError(str(e), tok.line, tok.col) from None
        pure = []
        for is_eq, l, r in h.pure:
            try:
                pure.append(PureAtom(is_eq, term(scope, l), term(scope, r)))
            except SortError as e:
                raise ParseError(str(e), l.tok.line, l.tok.col) from None
        return SymbolicHeap(tuple(sp), frozenset(pure))

    rules = []
    for scope, head, params, body in raw_rules:
        try:
            rules.append(InductiveRule(head.text, tuple(term(scope, a) for a in params), build_heap(scope, body)))
        except SortError as e:
            raise ParseError(str(e), head.line, head.col) from None
    queries = []
    for k, (scope, vset, lhs, rhs, line) in enumerate(raw_queries):
        try:
            s = Sequent(build_heap(scope, lhs), tuple(term(scope, t) for t in vset), build_heap(scope, rhs))
        except SortError as e:
            raise ParseError(str(e), line, 1) from None
        queries.append(Query(k + 1, s, line))
    return Problem(sorts, consts, profiles, rules, queries, frozenset(declared))


# ---------------------------------------------------------------- printing

def _fmt_term(t: Term) -> str:
    if t.is_const or t.sort.is_loc:
        return t.name
    return f"{t.name}:{t.sort.name}"


def _fmt_atom(a) -> str:
    if isinstance(a, PointsTo):
        return f"{a.root} -> ({','.join(_fmt_term(t) for t in a.args)})"
    return f"{a.pred}({','.join(_fmt_term(t) for t in a.args)})"


def format_heap(h: SymbolicHeap) -> str:
    sp = " * ".join(_fmt_atom(a) for a in h.spatial) if h.spatial else "emp"
    if not h.pure:
        return sp
    if len(h.spatial) > 1:
        sp = f"({sp})"
    pure = " /\\ ".join(f"{_fmt_term(p.left)} {'=' if p.is_eq else '!='} {_fmt_term(p.right)}"
                        for p in sorted(h.pure, key=lambda p: (0 if p.is_eq else 1, p.left.key, p.right.key)))
    return f"{sp} /\\ {pure}"


def format_sequent(s: Sequent) -> str:
    v = f"V: {', '.join(t.name for t in s.vset)} " if s.vset else ""
    return f"entail {v}{format_heap(s.lhs)} |- {format_heap(s.rhs)};"


def format_problem(pb: Problem) -> str:
    lines = [f"sort {n};" for n, s in pb.sorts.items() if not s.is_loc]
    lines += [f"const {c.name} : {c.sort.name};" for c in pb.constants.values()]
    lines += [f"pred {p.pred}({', '.join(s.name for s in p.sorts)});" for p in pb.profiles.values()]
    for r in pb.rules:
        head = f"{r.head}({','.join(_fmt_term(t) for t in r.params)})"
        lines.append(f"rule {head} <= {format_heap(r.body)};")
    lines += [format_sequent(q.sequent) for q in pb.queries]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- commands

def _load(path: str) -> Problem:
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ParseError(f"cannot read {path}: {e.strerror}") from None
    return parse(text)


def _emit_json(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


def cmd_check(args) -> int:
    pb = _load(args.file)
    rs = pb.ruleset()
    diags = rs.diagnostics
    ar, rec, width = rs.measures
    det, _ = rs.determinism
    if args.json:
        _emit_json({"valid": not diags, "measures": {"ar_max": ar, "record_max": rec, "width": width},
                    "deterministic": det,
                    "diagnostics": [{"rule": v.rule, "kind": v.kind, "detail": v.detail} for v in diags]})
    else:
        for k, r in enumerate(pb.rules):
            print(f"rule {k}: {r}")
        print(f"measures: ar_max={ar} record_max={rec} width={width}")
        print(f"deterministic: {'yes' if det else 'no'}")
        for v in diags:
            print(f"error: {v}")
        print("rule set is valid" if not diags else f"{len(diags)} problem(s)")
    return 0 if not diags else 2


def _verdict_record(q: Query, v, ms: Optional[float], args) -> dict:
    detail: dict = {}
    if v.valid:
        if getattr(args, "proof", False):
            detail["proof"] = v.proof.to_record()
    else:
        detail["trace"] = [st.to_record() for st in v.trace]
        if v.countermodel_searched:
            detail["countermodel"] = v.countermodel.to_record() if v.countermodel else None
    detail["rules"] = v.rule_counts
    return {"query": q.index, "valid": v.valid, "nodes": v.nodes,
            "milliseconds": None if ms is None else round(ms, 3),
            "evidence": v.evidence_kind, "detail": detail}


def _prove_all(args, pb: Problem):
    from .prover import explain_invalid, prove
    rs = pb.ruleset()
    if not rs.is_valid:
        for d in rs.diagnostics:
            print(f"error: {d}", file=sys.stderr)
        raise _Exit(2)
    out = []
    for q in pb.queries:
        t0 = time.perf_counter()
        v = prove(rs, q.sequent, node_cap=args.max_sequents)
        ms = (time.perf_counter() - t0) * 1000
        if not v.valid and getattr(args, "countermodel", False):
            explain_invalid(rs, v, args.max_cells, args.max_locs)
        out.append((q, v, ms))
    return out


class _Exit(Exception):
    def __init__(self, code: int):
        self.code = code


def cmd_prove(args) -> int:
    from .prover import render_proof, render_trace
    pb = _load(args.file)
    results = _prove_all(args, pb)
    for q, v, ms in results:
        if args.json:
            _emit_json(_verdict_record(q, v, None if args.no_timing else ms, args))
            continue
        word = "valid" if v.valid else "invalid"
        timing = "" if args.no_timing else f", {ms:.1f} ms"
        print(f"query {q.index}: {word} ({v.nodes} sequents{timing})  {q.sequent}")
        if v.valid and args.proof:
            print(render_proof(v.proof))
        if not v.valid:
            print(render_trace(v.trace))
            if v.countermodel_searched:
                if v.countermodel is None:
                    print(f"no counter-model within bounds ({args.max_cells} cells, {args.max_locs} locations)")
                else:
                    print("counter-model:")
                    print(v.countermodel.to_text())
    return 0 if all(v.valid for _, v, _ in results) else 1


def cmd_oracle(args) -> int:
    pb = _load(args.file)
    rs = pb.ruleset()
    if not rs.is_valid:
        for d in rs.diagnostics:
            print(f"error: {d}", file=sys.stderr)
        return 2
    found_any = False
    for q in pb.queries:
        cm = find_countermodel(rs, q.sequent, args.max_cells, args.max_locs)
        found_any |= cm is not None
        if args.json:
            _emit_json({"query": q.index, "countermodel": cm.to_record() if cm else None,
                        "max_cells": args.max_cells, "max_locs": args.max_locs})
        elif cm is None:
            print(f"query {q.index}: no counter-model within bounds  {q.sequent}")
        else:
            print(f"query {q.index}: counter-model  {q.sequent}")
            print(cm.to_text())
    return 1 if found_any else 0


def cmd_bench(args) -> int:
    pb = _load(args.file)
    results = _prove_all(args, pb)
    print("query\tlhs_atoms\tvalid\tnodes\tmilliseconds")
    rows = []
    for q, v, ms in results:
        n = len(q.sequent.lhs.spatial)
        rows.append((q.index, n, v.valid, v.nodes, ms))
        shown = "-" if args.no_timing else f"{ms:.3f}"
        print(f"{q.index}\t{n}\t{str(v.valid).lower()}\t{v.nodes}\t{shown}")
    if args.plot:
        from .plot import scaling_plot
        scaling_plot(rows, args.plot)
        print(f"# plot written to {args.plot}", file=sys.stderr)
    return 0 if all(r[2] for r in rows) else 1


def build_argparser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="slentail", description="Separation-logic entailment prover.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    c = sub.add_parser("check", help="validate the rule set")
    c.add_argument("file")
    c.add_argument("--json", action="store_true")
    c.set_defaults(fn=cmd_check)

    def prover_flags(q):
        q.add_argument("file")
        q.add_argument("--max-sequents", type=int, default=200_000, help="node cap per query")
        q.add_argument("--no-timing", action="store_true", help="omit wall-clock figures")
        q.add_argument("--max-cells", type=int, default=4)
        q.add_argument("--max-locs", type=int, default=5)

    p = sub.add_parser("prove", help="decide every query")
    prover_flags(p)
    p.add_argument("--proof", action="store_true", help="print proofs of valid queries")
    p.add_argument("--countermodel", action="store_true", help="search counter-models of invalid queries")
    p.add_argument("--json", action="store_true", help="one JSON record per query")
    p.set_defaults(fn=cmd_prove)

    o = sub.add_parser("oracle", help="bounded counter-model search only")
    o.add_argument("file")
    o.add_argument("--max-cells", type=int, default=4)
    o.add_argument("--max-locs", type=int, default=5)
    o.add_argument("--json", action="store_true")
    o.set_defaults(fn=cmd_oracle)

    b = sub.add_parser("bench", help="tab-separated node and time statistics")
    prover_flags(b)
    b.add_argument("--plot", metavar="PATH", help="also render a scaling plot (PNG/SVG/PDF)")
    b.set_defaults(fn=cmd_bench)
    return ap


def run(argv: Optional[Sequence[str]] = None) -> int:
    from .prover import ProverError, ResourceLimit
    ap = build_argparser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 2
    try:
        return args.fn(args)
    except _Exit as e:
        return e.code
    except ParseError as e:
        print(f"{args.file}:{e}", file=sys.stderr)
        return 2
    except ResourceLimit as e:
        print(f"error: {e} after {e.nodes} sequents", file=sys.stderr)
        return 2
    except (ProverError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
