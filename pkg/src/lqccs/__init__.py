"""lqCCS: a linear quantum process calculus with a density-operator
backend, two operational semantics, and a behavioural equivalence
toolbox."""

__version__ = "0.1.0"
