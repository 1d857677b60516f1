"""Usefulness recommendation: KNN pseudo-labeling, the twin-tower usefulness
network trained with plain backprop, K-means diverse selection.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InsightError, ModelError
from .features import FeatureVector, Vocabulary

HIDDEN_TOWER = 16
HIDDEN_HEAD = 16

RATING_LABELS = {
    "not_useful_at_all": 0.0,
    "not_useful": 0.25,
    "neutral": 0.5,
    "useful": 0.75,
    "very_useful": 1.0,
}


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1000
    learning_rate: float = 0.1
    batch_size: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.learning_rate <= 0 or self.batch_size < 1:
            raise ModelError(f"invalid training config: {self}")


def knn_pseudo_label(
    seeds: list[tuple[FeatureVector, float]],
    unlabeled: list[FeatureVector],
    k: int = 5,
) -> list[float]:
    """Unweighted mean label of the min(k, #seeds) nearest seeds by Euclidean
    distance on bosw; distance ties broken by seed candidate_id order."""
    if not seeds:
        raise ModelError("knn_pseudo_label requires at least one seed")
    if k < 1:
        raise ModelError("k must be >= 1")
    ordered = sorted(seeds, key=lambda s: s[0].candidate_id)
    seed_mat = np.asarray([s[0].bosw for s in ordered], dtype=float)
    labels = np.asarray([s[1] for s in ordered], dtype=float)
    k_eff = min(k, len(ordered))
    out = []
    for fv in unlabeled:
        dists = np.linalg.norm(seed_mat - np.asarray(fv.bosw, dtype=float), axis=1)
        # stable sort keeps candidate_id order among equal distances
        nearest = np.argsort(dists, kind="stable")[:k_eff]
        out.append(float(labels[nearest].mean()))
    return out


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return np.where(x >= 0, 1.0 / (1.0 + np.exp(-x)), np.exp(x) / (1.0 + np.exp(x)))


@dataclass
class UsefulnessModel:
    """Twin-tower network with shared tower weights.

    Tower input: [context one-hot; standardized context mean]. Head input:
    [both tower outputs; measurement one-hot; tolerance-normalized delta].
    """

    context_ids: tuple[str, ...]
    measurement_ids: tuple[str, ...]
    w_tower: np.ndarray  # (C+1, 16)
    b_tower: np.ndarray
    w_head: np.ndarray  # (32 + M + 1, 16)
    b_head: np.ndarray
    w_out: np.ndarray  # (16, 1)
    b_out: np.ndarray
    standardization: dict = field(default_factory=dict)
    vocab_fingerprint: str = ""
    seed: int = 0
    config: dict = field(default_factory=dict)
    final_mse: float = 0.0
    epoch_losses: list[float] = field(default_factory=list)

    @classmethod
    def initialize(
        cls,
        context_ids: list[str],
        measurement_ids: list[str],
        seed: int = 0,
        vocab_fingerprint: str = "",
    ) -> "UsefulnessModel":
        rng = np.random.default_rng(seed)
        c = len(context_ids)
        m = len(measurement_ids)
        init = lambda *shape: rng.uniform(-0.1, 0.1, size=shape)
        return cls(
            context_ids=tuple(sorted(context_ids)),
            measurement_ids=tuple(sorted(measurement_ids)),
            w_tower=init(c + 1, HIDDEN_TOWER),
            b_tower=init(HIDDEN_TOWER),
            w_head=init(2 * HIDDEN_TOWER + m + 1, HIDDEN_HEAD),
            b_head=init(HIDDEN_HEAD),
            w_out=init(HIDDEN_HEAD, 1),
            b_out=init(1),
            vocab_fingerprint=vocab_fingerprint,
            seed=seed,
        )

    # --- encoding -------------------------------------------------------------

    def encode(self, fvs: list[FeatureVector]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        c_index = {c: i for i, c in enumerate(self.context_ids)}
        m_index = {m: i for i, m in enumerate(self.measurement_ids)}
        n = len(fvs)
        x1 = np.zeros((n, len(self.context_ids) + 1))
        x2 = np.zeros((n, len(self.context_ids) + 1))
        aux = np.zeros((n, len(self.measurement_ids) + 1))
        for i, fv in enumerate(fvs):
            for token in (fv.context1_id, fv.context2_id):
                if token not in c_index:
                    raise ModelError(f"context {token!r} unknown to the model")
            if fv.measurement_id not in m_index:
                raise ModelError(f"measurement {fv.measurement_id!r} unknown to the model")
            x1[i, c_index[fv.context1_id]] = 1.0
            x1[i, -1] = fv.mean1
            x2[i, c_index[fv.context2_id]] = 1.0
            x2[i, -1] = fv.mean2
            aux[i, m_index[fv.measurement_id]] = 1.0
            aux[i, -1] = fv.delta_norm
        return x1, x2, aux

    # --- forward / backward ---------------------------------------------------

    def _forward(self, x1, x2, aux):
        h1 = np.tanh(x1 @ self.w_tower + self.b_tower)
        h2 = np.tanh(x2 @ self.w_tower + self.b_tower)
        z = np.concatenate([h1, h2, aux], axis=1)
        g = np.tanh(z @ self.w_head + self.b_head)
        y = _sigmoid(g @ self.w_out + self.b_out).ravel()
        return y, (h1, h2, z, g)

    def predict(self, fvs: list[FeatureVector], vocab_fingerprint: str | None = None) -> np.ndarray:
        if vocab_fingerprint is not None and self.vocab_fingerprint and (
            vocab_fingerprint != self.vocab_fingerprint
        ):
            raise ModelError("feature vocabulary does not match the model's fingerprint")
        x1, x2, aux = self.encode(fvs)
        y, _ = self._forward(x1, x2, aux)
        return y

    def loss_and_gradients(self, x1, x2, aux, targets):
        """Mean squared error and its analytic gradients for every parameter."""
        y, (h1, h2, z, g) = self._forward(x1, x2, aux)
        n = len(targets)
        err = y - targets
        loss = float(np.mean(err**2))
        d_out = (2.0 * err / n) * y * (1.0 - y)  # (n,)
        grad_w_out = g.T @ d_out[:, None]
        grad_b_out = np.array([d_out.sum()])
        d_g = d_out[:, None] @ self.w_out.T * (1.0 - g**2)
        grad_w_head = z.T @ d_g
        grad_b_head = d_g.sum(axis=0)
        d_z = d_g @ self.w_head.T
        d_h1 = d_z[:, :HIDDEN_TOWER] * (1.0 - h1**2)
        d_h2 = d_z[:, HIDDEN_TOWER : 2 * HIDDEN_TOWER] * (1.0 - h2**2)
        grad_w_tower = x1.T @ d_h1 + x2.T @ d_h2
        grad_b_tower = d_h1.sum(axis=0) + d_h2.sum(axis=0)
        grads = {
            "w_tower": grad_w_tower,
            "b_tower": grad_b_tower,
            "w_head": grad_w_head,
            "b_head": grad_b_head,
            "w_out": grad_w_out,
            "b_out": grad_b_out,
        }
        return loss, grads

    def _loss_only(self, x1, x2, aux, targets) -> float:
        y, _ = self._forward(x1, x2, aux)
        return float(np.mean((y - targets) ** 2))

    # --- serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "architecture": {
                "hidden_tower": HIDDEN_TOWER,
                "hidden_head": HIDDEN_HEAD,
                "n_contexts": len(self.context_ids),
                "n_measurements": len(self.measurement_ids),
            },
            "context_ids": list(self.context_ids),
            "measurement_ids": list(self.measurement_ids),
            "weights": {
                "w_tower": self.w_tower.tolist(),
                "b_tower": self.b_tower.tolist(),
                "w_head": self.w_head.tolist(),
                "b_head": self.b_head.tolist(),
                "w_out": self.w_out.tolist(),
                "b_out": self.b_out.tolist(),
            },
            "standardization": self.standardization,
            "vocab_fingerprint": self.vocab_fingerprint,
            "seed": self.seed,
            "config": self.config,
            "final_mse": self.final_mse,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "UsefulnessModel":
        w = d["weights"]
        return cls(
            context_ids=tuple(d["context_ids"]),
            measurement_ids=tuple(d["measurement_ids"]),
            w_tower=np.asarray(w["w_tower"]),
            b_tower=np.asarray(w["b_tower"]),
            w_head=np.asarray(w["w_head"]),
            b_head=np.asarray(w["b_head"]),
            w_out=np.asarray(w["w_out"]),
            b_out=np.asarray(w["b_out"]),
            standardization=d.get("standardization", {}),
            vocab_fingerprint=d.get("vocab_fingerprint", ""),
            seed=d.get("seed", 0),
            config=d.get("config", {}),
            final_mse=d.get("final_mse", 0.0),
        )


def train_usefulness_model(
    data: list[tuple[FeatureVector, float]],
    context_ids: list[str],
    measurement_ids: list[str],
    config: TrainConfig = TrainConfig(),
    vocab_fingerprint: str = "",
) -> UsefulnessModel:
    """Mini-batch gradient descent on MSE; fully deterministic given the seed
    (initialization and shuffle order both derive from it)."""
    if not data:
        raise ModelError("training requires at least one example")
    for _, label in data:
        if not (0.0 <= label <= 1.0):
            raise ModelError(f"label out of range: {label}")
    model = UsefulnessModel.initialize(
        context_ids, measurement_ids, seed=config.seed, vocab_fingerprint=vocab_fingerprint
    )
    model.config = {
        "epochs": config.epochs,
        "learning_rate": config.learning_rate,
        "batch_size": config.batch_size,
        "seed": config.seed,
    }
    fvs = [fv for fv, _ in data]
    targets = np.asarray([t for _, t in data], dtype=float)
    x1, x2, aux = model.encode(fvs)
    rng = np.random.default_rng(config.seed + 1)
    n = len(data)
    for _ in range(config.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = perm[start : start + config.batch_size]
            _, grads = model.loss_and_gradients(
                x1[batch], x2[batch], aux[batch], targets[batch]
            )
            lr = config.learning_rate
            model.w_tower -= lr * grads["w_tower"]
            model.b_tower -= lr * grads["b_tower"]
            model.w_head -= lr * grads["w_head"]
            model.b_head -= lr * grads["b_head"]
            model.w_out -= lr * grads["w_out"]
            model.b_out -= lr * grads["b_out"]
        model.epoch_losses.append(model._loss_only(x1, x2, aux, targets))
    model.final_mse = model._loss_only(x1, x2, aux, targets)
    return model


# --- k-means ------------------------------------------------------------------


@dataclass(frozen=True)
class ClusterAssignment:
    k: int
    centroids: np.ndarray  # (k, d)
    labels: tuple[int, ...]  # cluster index per input vector
    inertia: float

    def members(self, cluster: int) -> list[int]:
        return [i for i, lab in enumerate(self.labels) if lab == cluster]


def _kmeans_pp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centroids = [x[rng.integers(n)]]
    for _ in range(k - 1):
        d2 = np.min(
            np.sum((x[:, None, :] - np.asarray(centroids)[None, :, :]) ** 2, axis=2), axis=1
        )
        total = d2.sum()
        if total == 0:
            centroids.append(x[rng.integers(n)])
            continue
        r = rng.random() * total
        idx = int(np.searchsorted(np.cumsum(d2), r))
        centroids.append(x[min(idx, n - 1)])
    return np.asarray(centroids, dtype=float)


def kmeans(
    vectors: np.ndarray, k: int, seed: int = 0, max_iter: int = 100, tol: float = 1e-6
) -> ClusterAssignment:
    """Seeded k-means++ with Lloyd iterations; empty clusters are repaired by
    stealing the point farthest from its centroid among multi-member clusters."""
    x = np.asarray(vectors, dtype=float)
    n = x.shape[0]
    if k < 1 or k > n:
        raise InsightError(f"k must lie in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(x, k, rng)
    labels = np.zeros(n, dtype=int)
    for _ in range(max_iter):
        d2 = np.sum((x[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
        labels = np.argmin(d2, axis=1)  # ties resolve to the lowest cluster index
        counts = np.bincount(labels, minlength=k)
        for empty in np.flatnonzero(counts == 0):
            own_d2 = d2[np.arange(n), labels]
            candidates = np.flatnonzero(counts[labels] > 1)
            if candidates.size == 0:
                continue
            steal = candidates[np.argmax(own_d2[candidates])]
            counts[labels[steal]] -= 1
            labels[steal] = empty
            counts[empty] += 1
        new_centroids = np.empty_like(centroids)
        for j in range(k):
            members = x[labels == j]
            new_centroids[j] = members.mean(axis=0) if len(members) else centroids[j]
        movement = float(np.max(np.linalg.norm(new_centroids - centroids, axis=1)))
        centroids = new_centroids
        if movement < tol:
            break
    inertia = float(np.sum((x - centroids[labels]) ** 2))
    return ClusterAssignment(k, centroids, tuple(int(v) for v in labels), inertia)


def select_diverse(
    insights: list, k: int, seed: int = 0
) -> tuple[list, ClusterAssignment]:
    """Cluster bosw vectors into k groups and keep the score_f argmax of each,
    ties broken by candidate_id; returned list ordered by score_f descending.

    Each element of `insights` must expose .features.bosw, .scores.score_f and
    .candidate_id (the pipeline's ScoredInsight does).
    """
    if k > len(insights):
        raise InsightError(f"cannot select {k} insights from {len(insights)} available")
    vectors = np.asarray([ins.features.bosw for ins in insights], dtype=float)
    assignment = kmeans(vectors, k, seed=seed)
    chosen = []
    for cluster in range(k):
        members = assignment.members(cluster)
        best = min(members, key=lambda i: (-insights[i].scores.score_f, insights[i].candidate_id))
        chosen.append(insights[best])
    chosen.sort(key=lambda ins: (-ins.scores.score_f, ins.candidate_id))
    return chosen, assignment
