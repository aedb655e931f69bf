"""Gradient-check and synthetic-data commands."""

import dataclasses
import os

import numpy as np

from .. import data as D
from ..losses import KINDS, LossSpec, compute_loss
from ..model import ContextAwareRanker, ModelConfig
from ..nn import grad_check, ops
from .training import Streams, _synthetic_splits

GRADCHECK_LOSSES = KINDS + ("listnet_binary",)


def _loss_spec(name):
    if name == "listnet_binary":
        return LossSpec(kind="listnet", binary_listnet=True)
    return LossSpec(kind=name)


def tiny_problem(spec, seed=0, n_slates=3, length=6, d_f=5):
    """A tiny model (N=1, H=1, d_h=4) and a random padded batch for ``spec``."""
    rng = np.random.default_rng(seed)
    config = ModelConfig(d_f=d_f, d_fc=4, N=1, H=1, d_h=4, p_drop=0.0, output_dim=spec.output_dim)
    model = ContextAwareRanker(config, rng, np.float64)
    x = rng.standard_normal((n_slates, length, d_f))
    mask = np.ones((n_slates, length), dtype=bool)
    mask[0, length - 2:] = False
    x[~mask] = 0.0
    if spec.kind == "listnet" and spec.binary_listnet:
        y = (rng.random((n_slates, length)) < 0.4).astype(np.int64)
        y[:, 0] = 1
    else:
        y = rng.integers(0, spec.n_levels, size=(n_slates, length))
    y[~mask] = 0
    return model, x, y, mask


def run_gradcheck(losses=None, h=1e-5, tolerance=1e-4, seed=0, corrupt=False):
    """Finite-difference check of every loss composed with the tiny model.

    Returns ``{loss_name: GradCheckReport}``; the report's ``per_param``
    breaks the error down by model component. ``corrupt`` scales the
    analytic gradient by 1.01 as a negative control.
    """
    names = list(losses) if losses else list(GRADCHECK_LOSSES)
    unknown = set(names) - set(GRADCHECK_LOSSES)
    if unknown:
        raise ValueError(f"unknown loss(es) {sorted(unknown)}; choose from {GRADCHECK_LOSSES}")
    reports = {}
    for name in names:
        spec = _loss_spec(name)
        model, x, y, mask = tiny_problem(spec, seed)

        def scalar_fn(spec=spec, model=model, x=x, y=y, mask=mask):
            loss = compute_loss(spec, model(x, mask, mode="eval"), y, mask,
                                np.random.default_rng(seed))
            if corrupt:
                loss = ops.function(loss, loss.data, lambda g: g * 1.01)
            return loss

        reports[name] = grad_check(scalar_fn, model.parameters(), h=h, tolerance=tolerance)
    return reports


def format_gradcheck(reports):
    lines = []
    for name, rep in reports.items():
        status = "PASS" if rep.passed else "FAIL"
        lines.append(f"{status}  {name:<15} max_rel_err={rep.max_rel_error:.3e}  "
                     f"(tol {rep.tolerance:.0e}, {rep.n_checked} entries)")
        for pname, err in rep.per_param.items():
            mark = "" if err < rep.tolerance else "  <-- FAIL"
            lines.append(f"        {pname:<24} {err:.3e}{mark}")
    return "\n".join(lines)


def synth_command(config, out_dir):
    """Write train/valid/test LETOR files for the config's synthetic spec.

    The slates are drawn from the same streams ``train`` uses, so training on
    the written files sees the same data as training on the spec directly.
    """
    spec = config.data.synthetic
    if spec is None:
        raise ValueError("synth needs data.synthetic in the config")
    streams = Streams.from_seed(config.seed)
    train, valid, test_loader = _synthetic_splits(spec, config, streams)
    os.makedirs(out_dir, exist_ok=True)
    paths = {}
    for name, slates in (("train", train), ("valid", valid), ("test", test_loader(spec.d_f))):
        path = os.path.join(out_dir, f"{name}.txt")
        D.write_letor(path, slates)
        paths[name] = path
    return paths


def file_config(config, paths):
    """Copy of ``config`` pointing at LETOR files instead of a synthetic spec."""
    d_f = config.data.synthetic.d_f if config.data.synthetic else config.model.d_f
    data = dataclasses.replace(config.data, synthetic=None, **paths)
    return dataclasses.replace(config, data=data, model=dataclasses.replace(config.model, d_f=d_f))
