"""Linear-chain CRF head: scoring, exact inference, NLL loss, gradients.

Log-domain parameterization of a sequence x with word vectors v_1..v_N and
tags y_1..y_N over L tags:

    score(y) = start[y_1] + sum_i emit[i, y_i] + sum_i trans[y_{i-1}, y_i]
               + end[y_N]
    emit[i, y] = emit_w[y] . v_i + emit_b[y]

log_partition sums exp(score) over all L^N tag sequences via the forward
recursion; marginals come from forward-backward; decoding is Viterbi.
All DP runs in float64 and is overflow-safe for scores up to +-1e4.

The emission bias and the start/end transition vectors are zero-initialized
extensions that give the chain explicit sequence-boundary handling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .corpus import LabelSet
from .errors import DataError


@dataclass
class CrfParams:
    """Trainable parameters: emission weights/bias and transition scores."""

    emit_w: np.ndarray  # (L, d)
    emit_b: np.ndarray  # (L,)
    trans: np.ndarray  # (L, L), trans[prev, cur]
    start: np.ndarray  # (L,)
    end: np.ndarray  # (L,)

    def __post_init__(self):
        L, d = self.emit_w.shape
        if self.emit_b.shape != (L,) or self.trans.shape != (L, L) \
                or self.start.shape != (L,) or self.end.shape != (L,):
            raise DataError("inconsistent CRF parameter shapes")
        for name, arr in self.arrays().items():
            if not np.isfinite(arr).all():
                raise DataError(f"non-finite values in parameter {name!r}")

    @property
    def n_tags(self) -> int:
        return self.emit_w.shape[0]

    @property
    def dim(self) -> int:
        return self.emit_w.shape[1]

    def arrays(self) -> dict[str, np.ndarray]:
        """Parameter blocks in their canonical (checkpoint) order."""
        return {
            "emit_w": self.emit_w,
            "emit_b": self.emit_b,
            "trans": self.trans,
            "start": self.start,
            "end": self.end,
        }

    def copy(self) -> "CrfParams":
        return CrfParams(**{k: v.copy() for k, v in self.arrays().items()})


def init_crf_params(n_tags: int, dim: int, rng: np.random.Generator) -> CrfParams:
    """Bounded-uniform emission weights, everything else zero."""
    bound = np.sqrt(6.0 / (dim + n_tags))
    return CrfParams(
        emit_w=rng.uniform(-bound, bound, size=(n_tags, dim)),
        emit_b=np.zeros(n_tags),
        trans=np.zeros((n_tags, n_tags)),
        start=np.zeros(n_tags),
        end=np.zeros(n_tags),
    )


@dataclass
class ScoreLattice:
    """Per-sentence emission scores plus the (shared) transition scores."""

    emissions: np.ndarray  # (N, L)
    trans: np.ndarray  # (L, L)
    start: np.ndarray  # (L,)
    end: np.ndarray  # (L,)

    def __post_init__(self):
        if self.emissions.ndim != 2 or self.emissions.shape[0] < 1:
            raise DataError(f"emissions must be (N>=1, L), got {self.emissions.shape}")
        if not np.isfinite(self.emissions).all():
            raise DataError("non-finite emission scores")

    @property
    def n_positions(self) -> int:
        return self.emissions.shape[0]

    @property
    def n_tags(self) -> int:
        return self.emissions.shape[1]


def emission_scores(
    word_vectors: np.ndarray,
    params: CrfParams,
    trans_mask: np.ndarray | None = None,
    start_mask: np.ndarray | None = None,
) -> ScoreLattice:
    """Build the lattice for one sentence: e[i, y] = emit_w[y].v_i + emit_b[y].

    Optional additive masks (0 or -inf) impose hard transition constraints.
    """
    V = np.asarray(word_vectors, dtype=np.float64)
    if V.ndim != 2:
        raise DataError(f"word vectors must be 2-D, got shape {V.shape}")
    if V.shape[1] != params.dim:
        raise DataError(f"embedding dim {V.shape[1]} != parameter dim {params.dim}")
    e = V @ params.emit_w.T + params.emit_b
    trans = params.trans if trans_mask is None else params.trans + trans_mask
    start = params.start if start_mask is None else params.start + start_mask
    return ScoreLattice(e, trans, start, params.end)


def bio_transition_masks(label_set: LabelSet) -> tuple[np.ndarray, np.ndarray]:
    """Additive -inf masks forbidding invalid BIO moves (constrained mode).

    I-y may only follow B-y or I-y, and no sequence may start with I-y.
    """
    L = label_set.n_tags
    trans_mask = np.zeros((L, L))
    start_mask = np.zeros(L)
    for cur in range(L):
        if not label_set.is_inside(cur):
            continue
        start_mask[cur] = -np.inf
        label = label_set.label_of(cur)
        for prev in range(L):
            if label_set.label_of(prev) != label:
                trans_mask[prev, cur] = -np.inf
    return trans_mask, start_mask


def path_score(lat: ScoreLattice, tags: Sequence[int]) -> float:
    """Unnormalized log-score of one tag sequence (start/end terms included)."""
    _check_tags(lat, tags)
    score = lat.start[tags[0]] + lat.emissions[0, tags[0]]
    for i in range(1, len(tags)):
        score += lat.trans[tags[i - 1], tags[i]] + lat.emissions[i, tags[i]]
    return float(score + lat.end[tags[-1]])


def _forward(lat: ScoreLattice) -> np.ndarray:
    """Alpha table: alpha[t, y] = log-sum of prefix scores ending in y at t."""
    N = lat.n_positions
    alpha = np.empty_like(lat.emissions)
    alpha[0] = lat.start + lat.emissions[0]
    for t in range(1, N):
        alpha[t] = logsumexp(alpha[t - 1][:, None] + lat.trans, axis=0) \
            + lat.emissions[t]
    return alpha


def _backward(lat: ScoreLattice) -> np.ndarray:
    """Beta table: beta[t, y] = log-sum of suffix scores after tag y at t."""
    N = lat.n_positions
    beta = np.empty_like(lat.emissions)
    beta[N - 1] = lat.end
    for t in range(N - 2, -1, -1):
        beta[t] = logsumexp(
            lat.trans + (lat.emissions[t + 1] + beta[t + 1])[None, :], axis=1
        )
    return beta


def log_partition(lat: ScoreLattice) -> float:
    alpha = _forward(lat)
    return float(logsumexp(alpha[-1] + lat.end))


def nll_loss(lat: ScoreLattice, gold: Sequence[int]) -> float:
    """Negative log-likelihood of the gold path: logZ - score(gold)."""
    return log_partition(lat) - path_score(lat, gold)


def marginals(lat: ScoreLattice) -> tuple[np.ndarray, np.ndarray, float]:
    """Exact unary (N, L) and pairwise (N-1, L, L) tag marginals, plus logZ."""
    alpha = _forward(lat)
    beta = _backward(lat)
    log_z = float(logsumexp(alpha[-1] + lat.end))
    unary = np.exp(alpha + beta - log_z)
    N = lat.n_positions
    pair = np.empty((N - 1, lat.n_tags, lat.n_tags))
    for t in range(1, N):
        pair[t - 1] = np.exp(
            alpha[t - 1][:, None] + lat.trans
            + (lat.emissions[t] + beta[t])[None, :] - log_z
        )
    return unary, pair, log_z


@dataclass
class LatticeGradients:
    """d(nll)/d(lattice scores) for one sentence."""

    emissions: np.ndarray  # (N, L)
    trans: np.ndarray  # (L, L)
    start: np.ndarray  # (L,)
    end: np.ndarray  # (L,)
    loss: float = field(default=0.0)


def loss_gradients(lat: ScoreLattice, gold: Sequence[int]) -> LatticeGradients:
    """NLL and its exact gradients via forward-backward.

    d/d e[i, y]     = P(y_i = y | x)           - [gold_i == y]
    d/d trans[p, q] = sum_i P(y_{i-1}=p, y_i=q) - gold transition counts
    d/d start, end  = boundary unary marginal   - gold one-hot
    """
    _check_tags(lat, gold)
    unary, pair, log_z = marginals(lat)
    L = lat.n_tags
    N = lat.n_positions
    gold = np.asarray(gold, dtype=np.intp)

    d_e = unary.copy()
    d_e[np.arange(N), gold] -= 1.0
    d_trans = pair.sum(axis=0) if N > 1 else np.zeros((L, L))
    for i in range(1, N):
        d_trans[gold[i - 1], gold[i]] -= 1.0
    d_start = unary[0].copy()
    d_start[gold[0]] -= 1.0
    d_end = unary[-1].copy()
    d_end[gold[-1]] -= 1.0

    loss = log_z - path_score(lat, gold)
    return LatticeGradients(d_e, d_trans, d_start, d_end, loss)


def emission_param_gradients(
    word_vectors: np.ndarray, d_emissions: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Chain d(loss)/d(emissions) back to (d emit_w, d emit_b)."""
    V = np.asarray(word_vectors, dtype=np.float64)
    return d_emissions.T @ V, d_emissions.sum(axis=0)


@dataclass
class DecodeResult:
    """Viterbi output: best tag path with its score and log-probability."""

    tags: list[int]
    score: float  # unnormalized log-score, start/end terms included
    log_prob: float  # score - logZ, clamped to <= 0 against rounding


def viterbi(lat: ScoreLattice) -> DecodeResult:
    """Highest-scoring tag sequence; ties resolve to the lowest tag id."""
    N = lat.n_positions
    delta = lat.start + lat.emissions[0]
    backptr = np.empty((N, lat.n_tags), dtype=np.intp)
    for t in range(1, N):
        scores = delta[:, None] + lat.trans
        backptr[t] = scores.argmax(axis=0)  # first (= lowest) index on ties
        delta = scores.max(axis=0) + lat.emissions[t]
    final = delta + lat.end
    best = int(final.argmax())
    tags = [best]
    for t in range(N - 1, 0, -1):
        best = int(backptr[t, best])
        tags.append(best)
    tags.reverse()
    score = float(final.max())
    log_prob = min(score - log_partition(lat), 0.0)
    return DecodeResult(tags, score, log_prob)


def _check_tags(lat: ScoreLattice, tags: Sequence[int]) -> None:
    if len(tags) != lat.n_positions:
        raise DataError(
            f"tag sequence length {len(tags)} != lattice length {lat.n_positions}"
        )
    if any(not 0 <= t < lat.n_tags for t in tags):
        raise DataError("tag id out of range for lattice")
