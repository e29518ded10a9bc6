"""rplab: reactant-product coherence laboratory."""

__version__ = "0.1.0"
