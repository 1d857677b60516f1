"""Schema-driven insight mining: over-generate candidate insights from tabular
data, validate them statistically, score and verbalize them, and recommend a
diverse feedback-adaptive top-K."""

__version__ = "0.1.0"
