"""Hard-negative mining, the contrastive loss, and adapter training.

Full backbone fine-tuning is out of scope at desk scale; a single linear map
with re-normalization over frozen embeddings stands in for it, exercising the
identical loss, gradient, and evaluation machinery. The loss for one pair is

    L = -log( phi(u_q, u_p) / (phi(u_q, u_p) + sum_n phi(u_q, u_n)) )

with phi(a, b) = exp(cos(a, b) / tau) and u_x = Wx / ||Wx||, evaluated in
log space so small temperatures cannot overflow.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .embedding import EmbeddingMatrix, cosine

log = logging.getLogger(__name__)

DEFAULT_TAU = 0.05
DEFAULT_POOL_SIZE = 50


class NumericalError(Exception):
    """A non-finite value appeared mid-computation."""


@dataclass(frozen=True)
class TrainingPair:
    """Video-side query, recall-side positive, and its mined hard negatives."""

    query_id: str
    positive_id: str
    hard_negative_ids: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.positive_id in self.hard_negative_ids:
            raise ValueError(f"pair {self.query_id}: positive is listed as a hard negative")

    def to_json(self) -> dict[str, Any]:
        return {
            "query_id": self.query_id,
            "positive_id": self.positive_id,
            "hard_negative_ids": list(self.hard_negative_ids),
        }

    @classmethod
    def from_json(cls, raw: Mapping[str, Any]) -> "TrainingPair":
        return cls(
            query_id=str(raw["query_id"]),
            positive_id=str(raw["positive_id"]),
            hard_negative_ids=tuple(raw.get("hard_negative_ids") or ()),
        )


@dataclass
class AdapterState:
    weight: np.ndarray  # dim_out x dim_in
    temperature: float
    step: int = 0
    seed: int = 0

    def __post_init__(self) -> None:
        self.weight = np.asarray(self.weight, dtype=np.float64)
        if self.weight.ndim != 2:
            raise ValueError("adapter weight must be a matrix")
        if not np.isfinite(self.weight).all():
            raise NumericalError("adapter weight contains non-finite entries")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")

    @classmethod
    def identity(cls, dim: int, temperature: float = DEFAULT_TAU, seed: int = 0) -> "AdapterState":
        return cls(weight=np.eye(dim), temperature=temperature, seed=seed)

    def save(self, path: str | Path) -> None:
        doc = {
            "dim_in": int(self.weight.shape[1]),
            "dim_out": int(self.weight.shape[0]),
            "tau": self.temperature,
            "seed": self.seed,
            "weight": np.asarray(self.weight, dtype=np.float32).tolist(),
        }
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(doc) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "AdapterState":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        weight = np.asarray(doc["weight"], dtype=np.float64)
        if weight.shape != (int(doc["dim_out"]), int(doc["dim_in"])):
            raise ValueError(f"{path}: weight shape {weight.shape} contradicts header")
        return cls(weight=weight, temperature=float(doc["tau"]), seed=int(doc["seed"]))


def mine_hard_negatives(
    recall_matrix: EmbeddingMatrix,
    *,
    pool_size: int = DEFAULT_POOL_SIZE,
    per_sample: int = 1,
    seed: int = 0,
) -> dict[str, tuple[str, ...]]:
    """For each recall, sample negatives from its top-`pool_size` most similar others.

    Deterministic for a given seed: ids are visited in sorted order and ranked
    by (similarity descending, id ascending) before sampling.
    """
    if not recall_matrix.normalized:
        raise ValueError("recall matrix must be normalized before mining")
    n = len(recall_matrix)
    if n < 2:
        raise ValueError("mining needs at least two recalls")
    if n - 1 <= pool_size:
        log.warning("corpus of %d <= pool size %d; pools span all other recalls", n, pool_size)

    order = sorted(range(n), key=lambda i: recall_matrix.ids[i])
    rng = np.random.default_rng(seed)
    assignment: dict[str, tuple[str, ...]] = {}
    for i in order:
        anchor_id = recall_matrix.ids[i]
        scores = recall_matrix.vectors @ recall_matrix.vectors[i]
        ranked = sorted(
            (j for j in range(n) if j != i),
            key=lambda j: (-float(scores[j]), recall_matrix.ids[j]),
        )
        pool = [recall_matrix.ids[j] for j in ranked[:pool_size]]
        take = min(per_sample, len(pool))
        picks = rng.choice(len(pool), size=take, replace=False)
        assignment[anchor_id] = tuple(pool[int(k)] for k in picks)
    return assignment


def phi(a: np.ndarray, b: np.ndarray, tau: float) -> float:
    """exp(cos(a, b) / tau); inputs are unit vectors, tau strictly positive."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    return float(np.exp(cosine(a, b) / tau))


def info_nce_loss(
    hq: np.ndarray,
    ht_pos: np.ndarray,
    negatives: Sequence[np.ndarray],
    tau: float,
) -> float:
    """Contrastive loss for one (query, positive, negatives) instance, in log space.

    Equals log(1 + sum_n exp((s_n - s_pos)/tau)); exactly 0.0 with no negatives.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    s_pos = cosine(hq, ht_pos)
    if not negatives:
        return 0.0
    gaps = np.array([(cosine(hq, neg) - s_pos) / tau for neg in negatives])
    return float(np.logaddexp.reduce(np.concatenate(([0.0], gaps))))


def _pair_loss_grad(
    weight: np.ndarray,
    query: np.ndarray,
    targets: np.ndarray,
    tau: float,
) -> tuple[float, np.ndarray]:
    """Loss and d(loss)/d(weight) for one pair; targets row 0 is the positive.

    All vectors are mapped through u(x) = Wx/||Wx|| before scoring, and the
    gradient backpropagates through that normalization analytically.
    """
    v_q = weight @ query
    n_q = float(np.linalg.norm(v_q))
    v_t = targets @ weight.T
    n_t = np.linalg.norm(v_t, axis=1)
    if n_q == 0.0 or np.any(n_t == 0.0):
        raise NumericalError("adapter mapped a vector to zero; cannot normalize")
    u_q = v_q / n_q
    u_t = v_t / n_t[:, None]

    s = u_t @ u_q
    z = s / tau
    z_max = float(z.max())
    lse = z_max + float(np.log(np.exp(z - z_max).sum()))
    loss = lse - float(z[0])

    # dL/ds_y: softmax weight / tau, minus 1/tau for the positive.
    coef = np.exp(z - lse) / tau
    coef[0] -= 1.0 / tau

    # ds_y/dW = ((u_y - s_y u_q)/n_q) q^T + ((u_q - s_y u_y)/n_y) y^T
    g_query = (u_t - s[:, None] * u_q[None, :]) / n_q
    grad = np.outer(coef @ g_query, query)
    g_target = (u_q[None, :] - s[:, None] * u_t) / n_t[:, None]
    grad += (g_target * coef[:, None]).T @ targets

    if not (np.isfinite(loss) and np.isfinite(grad).all()):
        raise NumericalError(
            f"non-finite loss/grad (loss={loss}, |s|max={np.abs(s).max():.3f}, tau={tau})"
        )
    return loss, grad


def info_nce_grad(
    hq: np.ndarray,
    ht_pos: np.ndarray,
    negatives: Sequence[np.ndarray],
    tau: float,
    adapter: AdapterState,
) -> tuple[float, np.ndarray]:
    """(loss, gradient w.r.t. adapter.weight) with the adapter applied to all sides."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    targets = np.vstack([np.asarray(ht_pos, dtype=np.float64)[None, :]] + [
        np.asarray(neg, dtype=np.float64)[None, :] for neg in negatives
    ])
    return _pair_loss_grad(adapter.weight, np.asarray(hq, dtype=np.float64), targets, tau)


@dataclass(frozen=True)
class TrainConfig:
    tau: float = DEFAULT_TAU
    lr: float = 0.01
    batch_size: int = 64
    epochs: int = 5
    seed: int = 0
    momentum: float = 0.0


@dataclass
class LossTrace:
    batch_losses: list[list[float]]  # per epoch

    @property
    def epoch_means(self) -> list[float]:
        return [float(np.mean(losses)) for losses in self.batch_losses if losses]

    def to_json(self) -> dict[str, Any]:
        return {"batch_losses": self.batch_losses, "epoch_means": self.epoch_means}


def train_adapter(
    pairs: Sequence[TrainingPair],
    queries: EmbeddingMatrix,
    docs: EmbeddingMatrix,
    config: TrainConfig,
) -> tuple[AdapterState, LossTrace]:
    """Mini-batch gradient descent on the contrastive loss.

    In-batch negatives are the other positives of the batch, on top of each
    pair's mined hard negatives. Batch order is a seeded permutation per epoch,
    so a (seed, config) pair always reproduces the same final weights. If the
    loss goes non-finite, training aborts and returns the last good state.
    """
    if not pairs:
        raise ValueError("no training pairs")
    if queries.dim != docs.dim:
        raise ValueError(f"query dim {queries.dim} != doc dim {docs.dim}")
    for pair in pairs:
        if pair.query_id not in queries:
            raise ValueError(f"unknown query id {pair.query_id}")
        if pair.positive_id not in docs:
            raise ValueError(f"unknown positive id {pair.positive_id}")
        for neg_id in pair.hard_negative_ids:
            if neg_id not in docs:
                raise ValueError(f"unknown hard negative id {neg_id}")

    rng = np.random.default_rng(config.seed)
    weight = np.eye(docs.dim)
    velocity = np.zeros_like(weight)
    trace = LossTrace(batch_losses=[])
    step = 0

    for _epoch in range(config.epochs):
        order = rng.permutation(len(pairs))
        epoch_losses: list[float] = []
        for start in range(0, len(order), config.batch_size):
            batch = [pairs[int(i)] for i in order[start : start + config.batch_size]]
            grad = np.zeros_like(weight)
            batch_loss = 0.0
            try:
                for pair in batch:
                    query = np.asarray(queries.row(pair.query_id), dtype=np.float64)
                    rows = [np.asarray(docs.row(pair.positive_id), dtype=np.float64)]
                    for neg_id in pair.hard_negative_ids:
                        rows.append(np.asarray(docs.row(neg_id), dtype=np.float64))
                    for other in batch:
                        if other is not pair and other.positive_id != pair.positive_id:
                            rows.append(np.asarray(docs.row(other.positive_id), dtype=np.float64))
                    loss, pair_grad = _pair_loss_grad(weight, query, np.vstack(rows), config.tau)
                    batch_loss += loss
                    grad += pair_grad
            except NumericalError as err:
                log.error("aborting training at step %d: %s", step, err)
                return (
                    AdapterState(weight=weight, temperature=config.tau, step=step, seed=config.seed),
                    trace,
                )
            grad /= len(batch)
            batch_loss /= len(batch)
            if not np.isfinite(batch_loss):
                log.error("aborting training at step %d: loss is not finite", step)
                return (
                    AdapterState(weight=weight, temperature=config.tau, step=step, seed=config.seed),
                    trace,
                )
            velocity = config.momentum * velocity - config.lr * grad
            updated = weight + velocity
            if not np.isfinite(updated).all():
                log.error("aborting training at step %d: weights diverged", step)
                return (
                    AdapterState(weight=weight, temperature=config.tau, step=step, seed=config.seed),
                    trace,
                )
            weight = updated
            epoch_losses.append(batch_loss)
            step += 1
        trace.batch_losses.append(epoch_losses)

    state = AdapterState(weight=weight, temperature=config.tau, step=step, seed=config.seed)
    return state, trace


def apply_adapter(adapter: AdapterState, matrix: EmbeddingMatrix) -> EmbeddingMatrix:
    """Map every row through the adapter and re-normalize."""
    if matrix.dim != adapter.weight.shape[1]:
        raise ValueError(f"matrix dim {matrix.dim} != adapter dim_in {adapter.weight.shape[1]}")
    mapped = matrix.vectors.astype(np.float64) @ adapter.weight.T
    norms = np.linalg.norm(mapped, axis=1)
    if np.any(norms == 0.0):
        bad = matrix.ids[int(np.where(norms == 0.0)[0][0])]
        raise NumericalError(f"adapter maps row {bad} to the zero vector")
    return EmbeddingMatrix(
        ids=list(matrix.ids),
        vectors=(mapped / norms[:, None]).astype(np.float32),
        normalized=True,
    )
