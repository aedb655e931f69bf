"""Why score items jointly?

On the contextual synthetic task an item's grade depends on where its
utility sits relative to the rest of its slate. The same feature vector can
be a top result in one slate and irrelevant in another, so any per-item
scorer is capped well below what a model that looks at the whole slate can
reach.

Run:  python notebooks/01_context_matters.py
"""

import json
import pathlib

import numpy as np

from ctxrank import data as D
from ctxrank.harness import config_from_dict, train

CONFIG = pathlib.Path(__file__).resolve().parent.parent / "configs" / "contextual.json"

# --- the data ----------------------------------------------------------------
# Draw a few slates and find a feature vector that appears twice with two
# different labels. No pointwise function can get both right.
spec = D.SyntheticSpec(n_slates=50, l=12, d_f=4, task="contextual")
slates = D.generate_synthetic(spec, np.random.default_rng(0))
(sa, ia), (sb, ib) = D.find_witness(slates)
print("same features", np.round(slates[sa].features[ia], 3))
print(f"  slate {slates[sa].qid}: grade {slates[sa].labels[ia]}")
print(f"  slate {slates[sb].qid}: grade {slates[sb].labels[ib]}")

# --- two scorers, same budget ----------------------------------------------
# The MLP baseline picks hidden widths so its parameter count lands within a
# few percent of the self-attention model.
raw = json.loads(CONFIG.read_text())
raw["optim"]["epochs"] = 30  # a little shorter than the acceptance run
for kind in ("context", "mlp"):
    raw["model"]["kind"] = kind
    result = train(config_from_dict(raw))
    print(f"\n{kind:>7}: {result.model.n_parameters()} parameters, "
          f"best epoch {result.best_epoch}")
    print(result.final_report.to_table("test split"))
