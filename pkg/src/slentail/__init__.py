"""Entailment checking for separation-logic symbolic heaps with inductive predicates."""

__version__ = "0.1.0"
