"""Proof search: normalization, the sequent graph and the non-provability fixpoint.

Narrow sequents are decided first, on demand, in closed subgraphs; wider
sequents consult those verdicts when rule S needs a validity check.  A node
is non-provable when it is not an axiom and every admissible application
has a non-provable premise (least fixpoint); everything else in a closed
graph is provable, which is what makes cyclic proofs sound here.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Optional

from .analysis import is_anti_axiom, is_axiom, is_narrow
from .calculus import RuleApplication, candidates, enumerate_admissible
from .rules import RuleSet
from .semantics import Structure, find_countermodel
from .syntax import (
    Sequent, Term, apply_subst,
)

DEFAULT_NODE_CAP = 200_000


class ProverError(RuntimeError):
    pass


class ResourceLimit(ProverError):
    """The node cap was reached before the graph closed."""

    def __init__(self, msg: str, nodes: int, rule_counts: dict):
        super().__init__(msg)
        self.nodes = nodes
        self.rule_counts = rule_counts


class InvalidRuleSet(ProverError):
    pass


# ---------------------------------------------------------------- normalization

def _items(s: Sequent) -> list[tuple[str, tuple[Term, ...], str, bool]]:
    """(part, terms, head, ordered) for every atom; V counts as one item.

    Pure atoms and V are unordered: their term order comes from names.
    """
    out = []
    for part, h in (("L", s.lhs), ("R", s.rhs)):
        for a in h.spatial:
            out.append((part + "s", a.terms, getattr(a, "pred", "->"), True))
        for p in h.pure:
            out.append((part + "p", p.terms, "=" if p.is_eq else "!=", False))
    out.append(("V", s.vset, "V", False))
    return out


def _colour_order(s: Sequent, keep: frozenset) -> list[Term]:
    """Variables outside `keep`, ordered independently of their names.

    Colours start from sorts and are refined by the atoms a variable occurs
    in, with other movable variables replaced by their colour.  Remaining
    ties (symmetric variables) fall back to the current names.
    """
    items = _items(s)
    movable = sorted({t for _, ts, _, _ in items for t in ts if t.is_var and t not in keep},
                     key=lambda t: t.key)
    colour = {t: t.sort.name for t in movable}

    def show(t: Term) -> str:
        return f"?{colour[t]}" if t in colour else t.name

    def text(part, ts, head, ordered) -> str:
        shown = [show(t) for t in ts]
        return part + head + "(" + ",".join(shown if ordered else sorted(shown)) + ")"

    for _ in range(len(movable) + 1):
        sigs = {t: [colour[t]] for t in movable}
        for part, ts, head, ordered in items:
            tx = text(part, ts, head, ordered)
            for i, t in enumerate(ts):
                if t in sigs:
                    sigs[t].append(f"{tx}@{i}" if ordered else tx)
        flat = {t: "|".join(sorted(v)) for t, v in sigs.items()}
        rank = {sig: str(i) for i, sig in enumerate(sorted(set(flat.values())))}
        new = {t: rank[flat[t]] for t in movable}
        stable = len(set(new.values())) == len(set(colour.values()))
        colour = new
        if stable:
            break

    def arranged(ts, ordered):
        return tuple(ts) if ordered else tuple(sorted(ts, key=lambda t: (show(t), t.name)))

    def item_key(it):
        part, ts, head, ordered = it
        ts = arranged(ts, ordered)
        return (part, head, tuple(show(t) for t in ts), tuple(t.name for t in ts))

    seen: dict[Term, None] = {}
    for part, ts, head, ordered in sorted(items, key=item_key):
        for t in arranged(ts, ordered):
            if t in colour and t not in seen:
                seen[t] = None
    return list(seen)


def reserved_name(sort_name: str, i: int, is_loc: bool) -> str:
    return f"_{i}" if is_loc else f"_{sort_name}{i}"


def _rename(s: Sequent, order: list[Term], namer) -> Sequent:
    counters: Counter = Counter()
    m = {}
    for t in order:
        counters[t.sort] += 1
        m[t] = Term(namer(t, counters[t.sort]), t.sort)
    # a two-step rename keeps the substitution simultaneous even when the
    # target names already occur
    tmp = {t: Term(f"\0{v.name}", t.sort) for t, v in m.items()}
    back = {Term(f"\0{v.name}", t.sort): v for t, v in m.items()}
    return apply_subst(back, apply_subst(tmp, s))


def _fixpoint(s: Sequent, step, limit: int = 64) -> Sequent:
    seen = [s]
    while True:
        nxt = step(seen[-1])
        if nxt == seen[-1]:
            return nxt
        if nxt in seen or len(seen) > limit:
            cycle = seen[seen.index(nxt):] if nxt in seen else seen
            return min(cycle, key=str)
        seen.append(nxt)


def normalize(root: Sequent, s: Sequent) -> Sequent:
    """Rename every variable not occurring in `root` into the reserved namespace."""
    keep = frozenset(root.variables())
    namer = lambda t, i: reserved_name(t.sort.name, i, t.sort.is_loc)
    return _fixpoint(s, lambda x: _rename(x, _colour_order(x, keep), namer))


def variant_key(s: Sequent) -> str:
    """A string shared by sequents equal up to a renaming of all variables.

    Sequents with equal keys are always renamings of each other; the
    converse can fail only on symmetric sequents, costing duplicate nodes
    but never soundness.
    """
    renamed = _rename(s, _colour_order(s, frozenset()), lambda t, i: f"v{i}")
    return str(renamed)


# ---------------------------------------------------------------- graph

@dataclass
class Node:
    key: str
    seq: Sequent
    narrow: bool
    mark: str = "pending"          # axiom | anti-axiom | pending | provable | non-provable
    reason: Optional[str] = None   # axiom/anti-axiom form
    apps: list = field(default_factory=list)   # list of (RuleApplication, [premise keys])
    np_time: Optional[int] = None

    @property
    def decided(self) -> bool:
        return self.mark in ("axiom", "anti-axiom", "provable", "non-provable")

    @property
    def provable(self) -> bool:
        return self.mark in ("axiom", "provable")


@dataclass
class ProofNode:
    sequent: Sequent
    rule: Optional[str] = None      # None for axioms and links
    detail: str = ""
    children: list = field(default_factory=list)
    axiom: Optional[int] = None
    back_edge: Optional[int] = None  # id of the ancestor this leaf folds into
    ref: Optional[int] = None        # id of a node expanded elsewhere
    id: int = 0

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()

    def to_record(self) -> dict:
        d: dict = {"id": self.id, "sequent": str(self.sequent)}
        if self.axiom is not None:
            d["axiom"] = self.axiom
        if self.back_edge is not None:
            d["back_edge"] = self.back_edge
        if self.ref is not None:
            d["ref"] = self.ref
        if self.rule is not None:
            d["rule"] = self.rule
            d["detail"] = self.detail
            d["children"] = [c.to_record() for c in self.children]
        return d


@dataclass
class TraceStep:
    sequent: Sequent
    rule: Optional[str]
    detail: str
    leaf: Optional[str] = None   # "anti-axiom N" or "stuck" on the last step

    def to_record(self) -> dict:
        d = {"sequent": str(self.sequent)}
        if self.rule is not None:
            d["rule"] = self.rule
            d["detail"] = self.detail
        if self.leaf is not None:
            d["leaf"] = self.leaf
        return d


@dataclass
class Verdict:
    valid: bool
    root: Sequent
    nodes: int
    rule_counts: dict
    proof: Optional[ProofNode] = None
    trace: Optional[list] = None
    countermodel: Optional[Structure] = None
    countermodel_searched: bool = False

    @property
    def evidence_kind(self) -> str:
        if self.valid:
            return "axiom" if self.proof is not None and self.proof.rule is None else "proof"
        last = self.trace[-1].leaf if self.trace else "stuck"
        return "anti-axiom" if last and last.startswith("anti-axiom") else "stuck"


class Prover:
    """Decides sequents over one rule set, sharing memoized verdicts across queries
    with the same root variables."""

    def __init__(self, rs: RuleSet, root: Sequent, node_cap: int = DEFAULT_NODE_CAP):
        if not rs.is_valid:
            raise InvalidRuleSet("rule set failed validation: "
                                 + "; ".join(str(v) for v in rs.diagnostics))
        self.rs = rs
        self.root = root
        self.node_cap = node_cap
        self.nodes: dict[str, Node] = {}
        self.rule_counts: Counter = Counter()
        self.clock = 0

    # -- node table

    def _node(self, s: Sequent) -> tuple[Node, Sequent]:
        s = normalize(self.root, s)
        k = variant_key(s)
        n = self.nodes.get(k)
        if n is not None:
            return n, s
        if len(self.nodes) >= self.node_cap:
            raise ResourceLimit(f"node cap {self.node_cap} reached", len(self.nodes), dict(self.rule_counts))
        n = Node(k, s, is_narrow(self.rs, s))
        ax = is_axiom(s)
        if ax is not None:
            n.mark, n.reason = "axiom", f"axiom {ax}"
        else:
            anti = is_anti_axiom(self.rs, s)
            if anti is not None:
                n.mark, n.reason = "anti-axiom", f"anti-axiom {anti}"
                n.np_time = self._tick()
        self.nodes[k] = n
        return n, s

    def _tick(self) -> int:
        self.clock += 1
        return self.clock

    def _oracle(self, s: Sequent) -> bool:
        if not is_narrow(self.rs, s):
            raise ProverError(f"validity oracle called on a non-narrow sequent {s}")
        n = self.decide_node(s)
        return n.provable

    # -- deciding

    def decide(self, s: Sequent) -> bool:
        return self.decide_node(s).provable

    def decide_node(self, s: Sequent) -> Node:
        seed, _ = self._node(s)
        if seed.decided:
            return seed
        phase_narrow = seed.narrow
        graph: list[Node] = []
        queue = deque([seed])
        members = {seed.key}
        while queue:
            n = queue.popleft()
            graph.append(n)
            oracle = None if n.narrow else self._oracle
            for app in enumerate_admissible(self.rs, n.seq, oracle):
                self.rule_counts[app.rule] += 1
                keys = []
                prems = []
                for p in app.premises:
                    m, ps = self._node(p)
                    prems.append(ps)
                    if phase_narrow and not m.narrow:
                        raise ProverError(f"narrow sequent {n.seq} has a non-narrow successor {m.seq}")
                    if not m.decided and m.narrow != phase_narrow:
                        self.decide_node(m.seq)
                    keys.append(m.key)
                    if not m.decided and m.key not in members:
                        members.add(m.key)
                        queue.append(m)
                n.apps.append((RuleApplication(app.rule, app.detail, tuple(prems), app.rank), keys))
        self._fixpoint(graph)
        return seed

    def _fixpoint(self, graph: list[Node]) -> None:
        live: dict[str, int] = {}
        dead: dict[str, list[bool]] = {}
        users: dict[str, list[tuple[str, int]]] = {}
        work: deque = deque()
        for n in graph:
            live[n.key] = len(n.apps)
            dead[n.key] = [False] * len(n.apps)
            for i, (_, keys) in enumerate(n.apps):
                for k in keys:
                    users.setdefault(k, []).append((n.key, i))
        np_set: set[str] = set()

        def enter(k: str):
            np_set.add(k)
            node = self.nodes[k]
            if node.np_time is None:
                node.np_time = self._tick()
            work.append(k)

        # premises decided earlier (other phase or anti-axioms) seed the worklist
        seeded = set()
        for n in graph:
            for _, keys in n.apps:
                for k in keys:
                    m = self.nodes[k]
                    if m.decided and not m.provable and k not in seeded:
                        seeded.add(k)
                        np_set.add(k)
                        work.append(k)
        for n in graph:
            if live[n.key] == 0:
                enter(n.key)
        while work:
            k = work.popleft()
            for user, i in users.get(k, ()):
                if user in np_set or dead[user][i]:
                    continue
                dead[user][i] = True
                live[user] -= 1
                if live[user] == 0:
                    enter(user)
        for n in graph:
            n.mark = "non-provable" if n.key in np_set else "provable"

    # -- evidence

    def _realize(self, rule_id: str, seq: Sequent, keys: list) -> RuleApplication:
        """The application on `seq` itself whose premises are the nodes `keys`.

        A node is shared by all variants of its sequent, so the stored
        application may be phrased in another variant's names.
        """
        for a in candidates(self.rs, seq, rule_id, lambda p: self.decide_node(p).provable):
            prems = tuple(normalize(self.root, q) for q in a.premises)
            if [variant_key(q) for q in prems] == list(keys):
                return RuleApplication(a.rule, a.detail, prems, a.rank)
        raise ProverError(f"cannot replay {rule_id} on {seq}")

    def extract_proof(self, s: Sequent, budget: int = 20_000) -> ProofNode:
        top = self.nodes[variant_key(normalize(self.root, s))]
        if not top.provable:
            raise ProverError("sequent is not provable")
        counter = [0]
        expanded: dict[str, int] = {}

        def build(node: Node, seq: Sequent, path: dict[str, int]) -> ProofNode:
            counter[0] += 1
            pn = ProofNode(seq, id=counter[0])
            if node.mark == "axiom":
                pn.axiom = int(node.reason.split()[1])
                return pn
            if node.key in path:
                pn.back_edge = path[node.key]
                return pn
            if counter[0] > budget and node.key in expanded:
                pn.ref = expanded[node.key]
                return pn
            stored, keys = next((a, ks) for a, ks in node.apps
                                if all(self.nodes[k].provable for k in ks))
            app = self._realize(stored.rule, seq, keys)
            pn.rule, pn.detail = app.rule, app.detail
            expanded.setdefault(node.key, pn.id)
            path = dict(path)
            path[node.key] = pn.id
            for prem, k in zip(app.premises, keys):
                pn.children.append(build(self.nodes[k], prem, path))
            return pn

        return build(top, s, {})

    def refutation_trace(self, s: Sequent) -> list[TraceStep]:
        node = self.nodes[variant_key(normalize(self.root, s))]
        if node.provable:
            raise ProverError("sequent is provable")
        steps: list[TraceStep] = []
        seq = s
        while True:
            if node.mark == "anti-axiom":
                steps.append(TraceStep(seq, None, "", node.reason))
                return steps
            if not node.apps:
                steps.append(TraceStep(seq, None, "", "stuck"))
                return steps
            stored, keys = node.apps[0]
            app = self._realize(stored.rule, seq, keys)
            j = min(range(len(keys)), key=lambda i: (self.nodes[keys[i]].np_time
                                                     if not self.nodes[keys[i]].provable else float("inf")))
            steps.append(TraceStep(seq, app.rule, app.detail))
            node, seq = self.nodes[keys[j]], app.premises[j]


def check_ruleset(rs: RuleSet) -> None:
    if not rs.is_valid:
        raise InvalidRuleSet("rule set failed validation: " + "; ".join(str(v) for v in rs.diagnostics))


def prove(rs: RuleSet, root: Sequent, node_cap: int = DEFAULT_NODE_CAP,
          evidence: bool = True) -> Verdict:
    """Decide validity of root; attach a proof or a refutation trace."""
    check_ruleset(rs)
    p = Prover(rs, root, node_cap)
    node = p.decide_node(root)
    v = Verdict(node.provable, root, len(p.nodes), dict(sorted(p.rule_counts.items())))
    if evidence:
        if v.valid:
            v.proof = p.extract_proof(root)
        else:
            v.trace = p.refutation_trace(root)
    return v


def explain_invalid(rs: RuleSet, v: Verdict, max_cells: int = 4, max_locs: int = 5) -> Verdict:
    """Attach a minimal counter-model of the root when one exists within bounds."""
    if v.valid:
        raise ProverError("verdict is valid; nothing to explain")
    v.countermodel = find_countermodel(rs, v.root, max_cells, max_locs)
    v.countermodel_searched = True
    return v


# ---------------------------------------------------------------- rendering

def render_proof(p: ProofNode, indent: int = 0) -> str:
    pad = "  " * indent
    head = f"{pad}({p.id}) {p.sequent}"
    if p.axiom is not None:
        return f"{head}   [axiom {p.axiom}]"
    if p.back_edge is not None:
        return f"{head}   [back-edge to ({p.back_edge})]"
    if p.ref is not None:
        return f"{head}   [see ({p.ref})]"
    lines = [f"{head}   by {p.rule}: {p.detail}"]
    lines += [render_proof(c, indent + 1) for c in p.children]
    return "\n".join(lines)


def render_trace(steps: list[TraceStep]) -> str:
    lines = []
    for i, st in enumerate(steps):
        tail = f"   by {st.rule}: {st.detail}" if st.rule else f"   [{st.leaf}]"
        lines.append(f"{'  ' * i}{st.sequent}{tail}")
    return "\n".join(lines)
