"""Re-ranking: sort slates with a weak linear base ranker, then train the
context-aware model with and without positional encodings on that order."""

import dataclasses
from dataclasses import dataclass

import numpy as np

from .. import data as D
from ..errors import FoldTooSmall
from ..metrics import evaluate_split, report_from_scores
from .training import Dataset, Streams, fit, load_dataset


class LinearBaseRanker:
    """Ordinary least squares of labels on features (with intercept)."""

    def __init__(self):
        self.weights = None
        self.intercept = 0.0

    def fit(self, slates):
        x = np.concatenate([s.features[s.mask] for s in slates]).astype(np.float64)
        y = np.concatenate([s.labels[s.mask] for s in slates]).astype(np.float64)
        design = np.hstack([x, np.ones((len(x), 1))])
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        self.weights, self.intercept = coef[:-1], float(coef[-1])
        return self

    def predict(self, slate):
        return slate.features.astype(np.float64) @ self.weights + self.intercept


def fold_assignment(n, k, rng):
    if k < 2 or k > n:
        raise FoldTooSmall(f"need 2 <= folds <= n_slates, got folds={k}, n_slates={n}")
    return np.array_split(rng.permutation(n), k)


def out_of_fold_scores(slates, k, rng):
    """Base scores for each training slate from a ranker fit on the other folds."""
    scores = [None] * len(slates)
    for held in fold_assignment(len(slates), k, rng):
        held_set = set(held.tolist())
        ranker = LinearBaseRanker().fit([s for i, s in enumerate(slates) if i not in held_set])
        for i in held:
            scores[i] = ranker.predict(slates[i])
    return scores


def sort_by_scores(slate, scores):
    """Real items in descending base-score order (ties by index), padding dropped."""
    real = np.flatnonzero(slate.mask)
    order = real[np.argsort(-np.asarray(scores)[real], kind="stable")]
    return D.Slate(slate.features[order], slate.labels[order], slate.mask[order], slate.qid)


@dataclass
class RerankResult:
    base: object
    with_pe: object
    without_pe: object
    results: dict


def rerank_pipeline(config, log=None):
    """Return metrics of the base ordering, the PE model and the no-PE model.

    Training slates are ordered by out-of-fold base scores; validation and
    test slates by a base ranker fit on the whole training split.
    """
    streams = Streams.from_seed(config.seed)
    dataset = load_dataset(config, streams)
    fold_rng = np.random.default_rng(np.random.SeedSequence(config.seed).spawn(7)[6])
    train_scores = out_of_fold_scores(dataset.train, config.rerank.folds, fold_rng)
    full = LinearBaseRanker().fit(dataset.train)

    train = [sort_by_scores(s, sc) for s, sc in zip(dataset.train, train_scores)]
    valid = [sort_by_scores(s, full.predict(s)) for s in dataset.valid]
    raw_test = dataset.test()
    test = [sort_by_scores(s, full.predict(s)) for s in raw_test] if raw_test else None
    final_split = test if test else valid

    sorted_data = Dataset(train, valid, dataset.stats, dataset.d_f)
    base = report_from_scores([full.predict(s) for s in final_split], final_split, config.cutoffs)
    results = {}
    for name, use_pe in (("with_pe", True), ("without_pe", False)):
        cfg = dataclasses.replace(
            config, model=dataclasses.replace(config.model, use_positional_encoding=use_pe))
        if log:
            log(f"-- training {name}")
        results[name] = fit(cfg, sorted_data, Streams.from_seed(config.seed), log)
    reports = {name: evaluate_split(r.model, final_split, config.cutoffs)
               for name, r in results.items()}
    return RerankResult(base, reports["with_pe"], reports["without_pe"], results)
