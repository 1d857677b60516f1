"""Bag-of-schema-words feature vectors, per-measurement standardization, and
a from-scratch 2-D PCA (cyclic Jacobi rotations) for the inspection plot.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import InsightError
from .schema_model import SchemaBundle


@dataclass(frozen=True)
class Vocabulary:
    """Schema-level token vocabulary: context ids, measurement ids, and
    (optionally) schema ids, in lexicographic order."""

    tokens: tuple[str, ...]

    def __post_init__(self):
        if list(self.tokens) != sorted(set(self.tokens)):
            raise InsightError("vocabulary tokens must be sorted and unique")

    @property
    def index(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def fingerprint(self) -> str:
        return hashlib.sha256("|".join(self.tokens).encode()).hexdigest()[:16]


def build_vocabulary(bundle: SchemaBundle, include_schema: bool = True) -> Vocabulary:
    ids = [c.context_id for c in bundle.contexts] + [
        m.measurement_id for m in bundle.measurements
    ]
    if include_schema:
        ids += [s.schema_id for s in bundle.schemas]
    if len(set(ids)) != len(ids):
        raise InsightError("context/measurement/schema ids collide across kinds")
    return Vocabulary(tuple(sorted(ids)))


@dataclass(frozen=True)
class Standardization:
    """Per-measurement (mu, sigma) of the raw context means over one run's
    insights; stored with the model so serving matches training."""

    params: dict[str, tuple[float, float]]

    def apply(self, measurement_id: str, value: float) -> float:
        mu, sigma = self.params.get(measurement_id, (0.0, 1.0))
        return (value - mu) / sigma

    def to_dict(self) -> dict:
        return {m: [mu, sigma] for m, (mu, sigma) in self.params.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardization":
        return cls({m: (v[0], v[1]) for m, v in d.items()})


def fit_standardization(raw_means: dict[str, list[float]]) -> Standardization:
    """raw_means maps measurement_id to every raw context mean seen in the run."""
    params = {}
    for mid, values in raw_means.items():
        arr = np.asarray(values, dtype=float)
        mu = float(arr.mean()) if arr.size else 0.0
        sigma = float(arr.std()) if arr.size else 1.0
        if sigma == 0.0:
            sigma = 1.0
        params[mid] = (mu, sigma)
    return Standardization(params)


@dataclass(frozen=True)
class FeatureVector:
    candidate_id: str
    bosw: tuple[int, ...]  # binary presence over the vocabulary
    mean1: float  # standardized
    mean2: float  # standardized
    delta_norm: float  # aligned delta / tau
    context1_id: str
    context2_id: str
    measurement_id: str
    schema_id: str

    def to_dict(self) -> dict:
        return {
            "candidate_id": self.candidate_id,
            "bosw": list(self.bosw),
            "mean1": self.mean1,
            "mean2": self.mean2,
            "delta_norm": self.delta_norm,
            "context1_id": self.context1_id,
            "context2_id": self.context2_id,
            "measurement_id": self.measurement_id,
            "schema_id": self.schema_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureVector":
        return cls(
            d["candidate_id"], tuple(d["bosw"]), d["mean1"], d["mean2"],
            d["delta_norm"], d["context1_id"], d["context2_id"],
            d["measurement_id"], d["schema_id"],
        )


def featurize(
    candidate_id: str,
    schema_id: str,
    measurement_id: str,
    context1_id: str,
    context2_id: str,
    raw_mean1: float,
    raw_mean2: float,
    aligned_delta: float,
    tau: float,
    vocab: Vocabulary,
    standardization: Standardization,
) -> FeatureVector:
    index = vocab.index
    bosw = [0] * len(vocab)
    for token in (context1_id, context2_id, measurement_id):
        if token not in index:
            raise InsightError(f"token {token!r} not in vocabulary")
        bosw[index[token]] = 1
    if schema_id in index:
        bosw[index[schema_id]] = 1
    return FeatureVector(
        candidate_id=candidate_id,
        bosw=tuple(bosw),
        mean1=standardization.apply(measurement_id, raw_mean1),
        mean2=standardization.apply(measurement_id, raw_mean2),
        delta_norm=aligned_delta / tau,
        context1_id=context1_id,
        context2_id=context2_id,
        measurement_id=measurement_id,
        schema_id=schema_id,
    )


def _jacobi_eigh(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns (eigenvalues, eigenvectors as columns), unsorted.
    """
    a = matrix.copy()
    d = a.shape[0]
    v = np.eye(d)
    scale = np.linalg.norm(a) or 1.0
    for _ in range(100):
        off = np.sqrt(max(np.sum(a**2) - np.sum(np.diag(a) ** 2), 0.0))
        if off < 1e-14 * scale:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta == 0.0:
                    t = 1.0
                elif abs(theta) > 1e150:
                    # theta^2 would overflow; use the first-order root
                    t = 1.0 / (2.0 * theta)
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot_p = c * a[:, p] - s * a[:, q]
                rot_q = s * a[:, p] + c * a[:, q]
                a[:, p], a[:, q] = rot_p, rot_q
                rot_p = c * a[p, :] - s * a[q, :]
                rot_q = s * a[p, :] + c * a[q, :]
                a[p, :], a[q, :] = rot_p, rot_q
                rot_p = c * v[:, p] - s * v[:, q]
                rot_q = s * v[:, p] + c * v[:, q]
                v[:, p], v[:, q] = rot_p, rot_q
    return np.diag(a).copy(), v


def pca_project(
    vectors: np.ndarray, dims: int = 2
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Project mean-centered rows onto the top principal components.

    The covariance matrix is diagonalized with a from-scratch Jacobi rotation
    sweep; each component's sign is fixed so its largest-magnitude entry is
    positive. Returns (projections, components [dims x d], explained-variance
    fractions).
    """
    x = np.asarray(vectors, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise InsightError("pca_project needs at least 2 vectors")
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / (x.shape[0] - 1)
    total_var = float(np.trace(cov))
    d = cov.shape[0]
    dims = min(dims, d)
    eigvals, eigvecs = _jacobi_eigh(cov)
    order = np.argsort(eigvals)[::-1][:dims]
    components = np.zeros((dims, d))
    variances = np.zeros(dims)
    for i, j in enumerate(order):
        v = eigvecs[:, j]
        peak = int(np.argmax(np.abs(v)))
        if v[peak] < 0:
            v = -v
        components[i] = v
        variances[i] = max(float(eigvals[j]), 0.0)
    explained = variances / total_var if total_var > 0 else np.zeros(dims)
    return centered @ components.T, components, explained
