"""The seven objectives on one tiny slate.

Scores come in reversed label order, so every loss has work to do. Each
value is printed next to its gradient with respect to the scores; the
pairwise losses of the LambdaLoss family weight pairs by rank-dependent
terms that are held fixed while differentiating.

Run:  python notebooks/03_losses_by_hand.py
"""

import numpy as np

from ctxrank.losses import KINDS, LossSpec, compute_loss
from ctxrank.metrics import ndcg_at_k
from ctxrank.nn import Parameter

labels = np.array([2, 1, 0])
scores = np.array([0.1, 0.2, 0.3])
mask = np.ones(3, dtype=bool)
print("labels", labels, " scores", scores, f" NDCG@3 = {ndcg_at_k(scores, labels, k=3):.4f}\n")

for kind in KINDS:
    spec = LossSpec(kind=kind)
    if kind == "ordinal":
        # one logit per grade threshold; reuse the score as every logit
        raw = Parameter(np.repeat(scores[:, None], spec.n_levels - 1, axis=1))
    else:
        raw = Parameter(scores.copy())
    loss = compute_loss(spec, raw, labels, mask, np.random.default_rng(0))
    loss.backward()
    grad = raw.grad if raw.grad.ndim == 1 else raw.grad.sum(axis=1)
    print(f"{kind:>12}: {float(loss.data):9.5f}   d/ds = {np.round(grad, 5)}")

# Gradient descent moves against d/ds: every pairwise and listwise loss
# raises item 0 (grade 2) and lowers item 2 (grade 0). The pointwise losses
# only pull each score toward its own grade, so with 4*sigmoid(0.1) = 2.1
# already above grade 2 they lower item 0 as well.
