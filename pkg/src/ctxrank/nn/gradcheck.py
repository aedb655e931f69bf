"""Central finite-difference verification of recorded gradients."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import NonFiniteLoss
from .tensor import no_grad


@dataclass
class GradCheckReport:
    max_rel_error: float
    tolerance: float
    per_param: dict = field(default_factory=dict)
    n_checked: int = 0

    @property
    def passed(self):
        return self.max_rel_error < self.tolerance

    def worst(self):
        if not self.per_param:
            return None
        return max(self.per_param.items(), key=lambda kv: kv[1])


def relative_error(a, b):
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)


def grad_check(scalar_fn, params, h=1e-5, tolerance=1e-4, max_entries=None, rng=None,
               fd_dtype=np.longdouble):
    """Compare analytic gradients of ``scalar_fn()`` against central differences.

    ``scalar_fn`` takes no arguments, runs a recorded forward pass over the
    current parameter values and returns a scalar Tensor. The analytic pass
    runs in float64. The perturbed evaluations run with the parameters cast
    to ``fd_dtype`` (extended precision by default) so that entries whose
    true gradient is zero are not swamped by float64 roundoff. Every entry of
    every parameter is perturbed by ``+-h`` unless ``max_entries`` caps the
    number of (randomly chosen) entries per parameter.
    """
    if not 1e-7 <= h <= 1e-4:
        raise ValueError(f"step h={h} outside [1e-7, 1e-4]")
    params = list(params)
    for p in params:
        if p.dtype != np.float64:
            raise TypeError(f"gradient checks need float64 parameters ({p.name} is {p.dtype})")
        p.zero_grad()

    out = scalar_fn()
    if not np.isfinite(out.data).all():
        raise NonFiniteLoss(f"loss is {out.item()}")
    out.backward()
    analytic = [p.grad.copy() for p in params]

    report = GradCheckReport(max_rel_error=0.0, tolerance=tolerance)
    rng = rng or np.random.default_rng(0)
    originals = [p.data for p in params]

    def evaluate():
        with no_grad():
            return np.asarray(scalar_fn().data, dtype=fd_dtype)

    try:
        for p in params:
            p.data = p.data.astype(fd_dtype)
        step = fd_dtype(h)
        for idx, (p, ga) in enumerate(zip(params, analytic)):
            flat = p.data.reshape(-1)
            entries = np.arange(flat.size)
            if max_entries is not None and flat.size > max_entries:
                entries = np.sort(rng.choice(flat.size, size=max_entries, replace=False))
            worst = 0.0
            for e in entries:
                orig = flat[e]
                flat[e] = orig + step
                fp = evaluate()
                flat[e] = orig - step
                fm = evaluate()
                flat[e] = orig
                if not (np.isfinite(fp) and np.isfinite(fm)):
                    raise NonFiniteLoss(f"loss not finite while perturbing {p.name}[{e}]")
                numeric = float((fp - fm) / (2 * step))
                worst = max(worst, float(relative_error(ga.reshape(-1)[e], numeric)))
            name = p.name or f"param{idx}"
            report.per_param[name] = worst
            report.n_checked += len(entries)
            report.max_rel_error = max(report.max_rel_error, worst)
    finally:
        for p, orig in zip(params, originals):
            p.data = orig
            p.zero_grad()
    return report
