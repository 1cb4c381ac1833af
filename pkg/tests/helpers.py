"""Small builders shared by the test modules."""

from slentail.cli import parse


def load(text: str):
    """Parse a problem text and return (ruleset, [sequents])."""
    pb = parse(text)
    return pb.ruleset(), [q.sequent for q in pb.queries]


def ruleset(text: str):
    return parse(text).ruleset()


def sequent(rules_text: str, query: str):
    rs, qs = load(rules_text + f"\nentail {query};")
    return rs, qs[-1]


UNFOLD = """
sort d;
const a : d;
const b : d;
pred p(loc, d);
pred r(loc);
rule p(x,y) <= x -> (a,y,z) * p(z,y);
rule p(x,y) <= x -> (b);
rule r(x) <= x -> (a,y:d,z) * r(z);
rule r(x) <= x -> (u:d);
"""

LISTS = """
rule ls(x,y) <= x -> (y);
rule ls(x,y) <= x -> (z) * ls(z,y);
"""

TREE = """
rule tree(x) <= x -> ();
rule tree(x) <= x -> (y,z) * tree(y) * tree(z);
"""

ALS = """
rule als(x,y) <= x -> (z) * als(z,y) /\\ y != z;
rule als(x,y) <= x -> (y);
"""

TLL = """
rule tll(x,y) <= x -> (y,z) * tree(z);
rule tll(x,y) <= x -> (z,u) * tll(z,y) * tree(u) /\\ y != z;
"""

DLL = """
rule dll(x,y) <= x -> (y,z) * dll(z,x);
rule dll(x,y) <= x -> ();
"""

TPTR = """
rule tptr(x,y,z) <= x -> (u,v,y,z) * tptr(u,v,x) * tptr(v,u,x);
rule tptr(x,y,z) <= x -> ();
"""

# the five refutable shapes, one per anti-axiom condition
ANTI = """
rule p(x,y) <= x -> (y);
rule q(x,y) <= x -> (y);
rule r(x) <= x -> ();
"""
ANTI_QUERIES = [
    "p(x,y) |- p(y,x)",
    "p(x,y) |- emp",
    "p(x,y) * p(z,y) |- q(x,y)",
    "V: y p(x,y) |- r(x)",
    "p(x,y) |- r(x)",
]
