"""Shared helpers: independent oracles the DP code cannot share a bug with.

Everything here scores paths or span layouts by explicit enumeration, so a
mistake in the library's recursions shows up as a disagreement rather than
a self-consistent wrong answer.
"""

import itertools

import numpy as np

from enscrf import CrfParams, EntitySpan, ScoreLattice, emission_scores, nll_loss


def naive_path_score(lat: ScoreLattice, tags) -> float:
    """Plain-Python path score: start + emissions + transitions + end."""
    s = float(lat.start[tags[0]])
    for i, y in enumerate(tags):
        s += float(lat.emissions[i, y])
        if i > 0:
            s += float(lat.trans[tags[i - 1], y])
    s += float(lat.end[tags[-1]])
    return s


def enumerate_paths(lat: ScoreLattice):
    """All L^N tag paths with their scores, in itertools.product order."""
    n, L = lat.n_positions, lat.n_tags
    paths = list(itertools.product(range(L), repeat=n))
    scores = np.array([naive_path_score(lat, p) for p in paths])
    return paths, scores


def logsumexp_ld(scores: np.ndarray) -> float:
    """Log-sum-exp in extended precision, independent of scipy."""
    x = np.asarray(scores, dtype=np.longdouble)
    m = x.max()
    return float(m + np.log(np.exp(x - m).sum()))


def random_lattice(rng, n_max=6, l_max=4, lo=-2.0, hi=2.0) -> ScoreLattice:
    n = int(rng.integers(1, n_max + 1))
    L = int(rng.integers(1, l_max + 1))
    return ScoreLattice(
        emissions=rng.uniform(lo, hi, size=(n, L)),
        trans=rng.uniform(lo, hi, size=(L, L)),
        start=rng.uniform(lo, hi, size=L),
        end=rng.uniform(lo, hi, size=L),
    )


def random_params(rng, L, d) -> CrfParams:
    return CrfParams(
        emit_w=rng.uniform(-0.5, 0.5, size=(L, d)),
        emit_b=rng.uniform(-0.5, 0.5, size=L),
        trans=rng.uniform(-0.5, 0.5, size=(L, L)),
        start=rng.uniform(-0.5, 0.5, size=L),
        end=rng.uniform(-0.5, 0.5, size=L),
    )


def numeric_param_gradients(V, params: CrfParams, gold, h=1e-5):
    """Central finite differences of the NLL through every parameter entry."""
    out = {}
    for name, arr in params.arrays().items():
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for j in range(flat.size):
            keep = flat[j]
            flat[j] = keep + h
            hi = nll_loss(emission_scores(V, params), gold)
            flat[j] = keep - h
            lo = nll_loss(emission_scores(V, params), gold)
            flat[j] = keep
            gflat[j] = (hi - lo) / (2 * h)
        out[name] = g
    return out


def iter_flat_span_sets(n: int, labels):
    """Every flat labeled span layout on a length-n sentence, recursively.

    Spans are emitted sorted by start, matching bio_to_spans output order.
    """

    def rec(pos):
        if pos >= n:
            yield []
            return
        for rest in rec(pos + 1):  # position pos stays outside
            yield rest
        for end in range(pos + 1, n + 1):
            tails = list(rec(end))
            for lab in labels:
                head = EntitySpan(lab, pos, end)
                for rest in tails:
                    yield [head] + rest

    yield from rec(0)


def random_flat_span_set(rng, n: int, labels) -> list:
    """One random flat span layout via a left-to-right walk."""
    spans = []
    pos = 0
    while pos < n:
        if rng.random() < 0.5:
            pos += 1
            continue
        end = int(rng.integers(pos + 1, n + 1))
        spans.append(EntitySpan(labels[int(rng.integers(len(labels)))], pos, end))
        pos = end
    return spans
