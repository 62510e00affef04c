"""Commutator calculus in Cohen groups: normal forms, identity checks and subgroup membership."""
__version__ = "0.1.0"
