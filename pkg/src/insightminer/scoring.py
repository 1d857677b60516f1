"""Truthfulness gate and relevance scoring.

The final relevance score is the product of completeness, significance and
usefulness: score_f = score_c * score_s * score_u.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .dataset import SampleSet
from .errors import InsightError
from .schema_model import CandidateSpec, Direction, InsightSchema, MeasurementDef
from .stats import TestResult

DEFAULT_ALPHA = 0.05
DEFAULT_GAMMA = 6.0


@dataclass(frozen=True)
class ScoringConfig:
    alpha: float = DEFAULT_ALPHA
    gamma: float = DEFAULT_GAMMA

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise InsightError(f"alpha must lie in (0,1), got {self.alpha}")


@dataclass(frozen=True)
class ScoreBreakdown:
    p_value: float
    truthful: bool
    score_c: float
    score_s: float
    score_u: float
    score_f: float
    delta: float  # claim-aligned signed mean difference
    gamma: float
    tau: float

    def to_dict(self) -> dict:
        return {
            "p_value": self.p_value,
            "truthful": self.truthful,
            "score_c": self.score_c,
            "score_s": self.score_s,
            "score_u": self.score_u,
            "score_f": self.score_f,
            "delta": self.delta,
            "gamma": self.gamma,
            "tau": self.tau,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScoreBreakdown":
        return cls(
            d["p_value"], d["truthful"], d["score_c"], d["score_s"],
            d["score_u"], d["score_f"], d["delta"], d["gamma"], d["tau"],
        )

    def with_usefulness(self, score_u: float) -> "ScoreBreakdown":
        return ScoreBreakdown(
            self.p_value, self.truthful, self.score_c, self.score_s,
            score_u, self.score_c * self.score_s * score_u,
            self.delta, self.gamma, self.tau,
        )


def completeness_score(n_rec: int, f_exp: float, t: float) -> float:
    """n_rec / (f_exp * t), clamped to [0, 1].

    A zero time span means the query window is degenerate: score 0 with no
    data, 1 with any data.
    """
    if n_rec < 0 or f_exp <= 0 or t < 0:
        raise InsightError(f"invalid completeness inputs n_rec={n_rec}, f_exp={f_exp}, t={t}")
    expected = f_exp * t  # can underflow to 0 for denormal spans
    if expected == 0.0:
        return 0.0 if n_rec == 0 else 1.0
    return min(1.0, n_rec / expected)


def significance_score(delta: float, gamma: float, tau: float) -> float:
    """Sigmoid of the tolerance-normalized mean difference: 1/(1+exp(-gamma*delta/tau))."""
    if tau <= 0:
        raise InsightError(f"tau must be > 0, got {tau}")
    x = gamma * delta / tau
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def aligned_delta(schema: InsightSchema, mean1: float, mean2: float) -> float:
    """Signed mean difference, positive when the schema's claimed direction
    holds for the ordered (context1, context2) pair."""
    d = mean1 - mean2
    return d if schema.direction is Direction.GREATER else -d


def score_candidate(
    candidate: CandidateSpec,
    schema: InsightSchema,
    measurement: MeasurementDef,
    s1: SampleSet,
    s2: SampleSet,
    test: TestResult,
    score_u: float = 1.0,
    config: ScoringConfig = ScoringConfig(),
) -> ScoreBreakdown:
    """Apply the p < alpha truthfulness gate and assemble the score product.

    score_u defaults to 1 when no usefulness model exists yet. Completeness
    pools both contexts' record counts over the larger of the two time spans.
    """
    if not (0.0 <= score_u <= 1.0):
        raise InsightError(f"score_u must lie in [0,1], got {score_u}")
    truthful = test.p_value < config.alpha
    delta = aligned_delta(schema, s1.mean, s2.mean)
    score_c = completeness_score(
        s1.n_rec + s2.n_rec, measurement.expected_rate_f_exp, max(s1.time_span, s2.time_span)
    )
    score_s = significance_score(delta, config.gamma, measurement.tolerance_tau)
    return ScoreBreakdown(
        p_value=test.p_value,
        truthful=truthful,
        score_c=score_c,
        score_s=score_s,
        score_u=score_u,
        score_f=score_c * score_s * score_u,
        delta=delta,
        gamma=config.gamma,
        tau=measurement.tolerance_tau,
    )
