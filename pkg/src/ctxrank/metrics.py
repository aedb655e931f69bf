"""NDCG@k and MRR with fixed conventions.

* gains ``2**y - 1``, discounts ``1 / log2(1 + rank)``, 1-based ranks;
* padded items are dropped before ranking;
* score ties are broken by within-slate index (stable sort), so results are
  reproducible bit for bit;
* a slate whose labels are all 0 has NDCG 1.0 and MRR 0.0;
* ideal DCG@k is truncated at k (unlike the full-list maxDCG used in losses).
"""

from dataclasses import dataclass, field

import numpy as np

from .data import fix_length, stack_slates
from .errors import AllMasked, EmptySplit

DEFAULT_CUTOFFS = (5, 10, 30, 60)


def _real(scores, labels, mask):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    mask = np.ones(len(scores), dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if not mask.any():
        raise AllMasked("slate has no unmasked items")
    return scores[mask], labels[mask]


def dcg(labels_in_rank_order, k):
    y = np.asarray(labels_in_rank_order, dtype=np.float64)[:k]
    return float(((2.0 ** y - 1.0) / np.log2(np.arange(2, len(y) + 2))).sum())


def rank_order(scores):
    return np.argsort(-np.asarray(scores), kind="stable")


def ndcg_at_k(scores, labels, mask=None, k=10):
    if k < 1:
        raise ValueError(f"cutoff k must be >= 1, got {k}")
    s, y = _real(scores, labels, mask)
    if not (y > 0).any():
        return 1.0
    ideal = dcg(np.sort(y)[::-1], k)
    return dcg(y[rank_order(s)], k) / ideal


def mrr(scores, labels, mask=None):
    s, y = _real(scores, labels, mask)
    hits = np.flatnonzero(y[rank_order(s)] > 0)
    return 1.0 / (hits[0] + 1) if len(hits) else 0.0


@dataclass
class EvalReport:
    ndcg: dict = field(default_factory=dict)
    mrr: float = 0.0
    n_slates: int = 0
    n_degenerate: int = 0

    def rows(self):
        for k, v in self.ndcg.items():
            yield "ndcg", str(k), v
        yield "mrr", "-", self.mrr

    def to_tsv(self):
        lines = ["metric\tcutoff\tvalue"]
        lines += [f"{m}\t{c}\t{v:.12f}" for m, c, v in self.rows()]
        lines.append(f"n_slates\t-\t{self.n_slates}")
        lines.append(f"n_degenerate\t-\t{self.n_degenerate}")
        return "\n".join(lines) + "\n"

    def to_table(self, title=""):
        head = f"{title}\n" if title else ""
        body = "\n".join(f"  {m + ('@' + c if c != '-' else ''):<10} {v:.4f}" for m, c, v in self.rows())
        return f"{head}{body}\n  slates     {self.n_slates} ({self.n_degenerate} all-zero)"


def report_from_scores(score_list, slates, cutoffs=DEFAULT_CUTOFFS):
    """Average per-slate metrics given one score vector per slate."""
    if not slates:
        raise EmptySplit("no slates to evaluate")
    per_k = {k: [] for k in cutoffs}
    rr, degenerate = [], 0
    for s, slate in zip(score_list, slates):
        degenerate += int(not (slate.labels[slate.mask] > 0).any())
        for k in cutoffs:
            per_k[k].append(ndcg_at_k(s, slate.labels, slate.mask, k))
        rr.append(mrr(s, slate.labels, slate.mask))
    return EvalReport({k: float(np.mean(v)) for k, v in per_k.items()},
                      float(np.mean(rr)), len(slates), degenerate)


def evaluate_split(model, slates, cutoffs=DEFAULT_CUTOFFS, batch_size=64):
    """Eval-mode metrics for ``model`` on ``slates`` padded to the split's longest slate."""
    if not slates:
        raise EmptySplit("no slates to evaluate")
    length = max(len(s) for s in slates)
    padded = [fix_length(s, length, "eval") for s in slates]
    scores = []
    for start in range(0, len(padded), batch_size):
        x, _, m = stack_slates(padded[start:start + batch_size])
        scores.extend(model.predict(x, m))
    return report_from_scores(scores, padded, cutoffs)
