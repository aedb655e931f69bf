"""Re-ranking with positional encodings.

A weak linear ranker orders each slate first. On the positional task the
grade of an item is a fixed, non-monotone function of its position in that
ordering (2, 4, 1, 3, 0, 2, 0, 1, then zeros). A model that is blind to
input order must infer position from features alone; adding sinusoidal
position signals after the input projection hands it the ordering directly.

Training slates are scored by base rankers fit on the other folds so the
model never sees scores from a ranker that was trained on the same slate.

Run:  python notebooks/02_reranking_with_positions.py
"""

import pathlib

from ctxrank.harness import load_config, rerank_pipeline

CONFIG = pathlib.Path(__file__).resolve().parent.parent / "configs" / "positional_rerank.json"

config = load_config(CONFIG, ["optim.epochs=30"])
result = rerank_pipeline(config, log=None)

print(result.base.to_table("linear base ranker"))
print(result.with_pe.to_table("context-aware, with positional encoding"))
print(result.without_pe.to_table("context-aware, without positional encoding"))
gain = result.with_pe.ndcg[5] - result.without_pe.ndcg[5]
print(f"\nNDCG@5 gained by position signals: {gain:+.3f}")
