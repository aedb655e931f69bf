"""Acceptance gate: one test per criterion, each at its stated tolerance.

Every test records a single ``criterion N: PASS|FAIL|SKIP ...`` line, shown
in the "acceptance criteria" section of the pytest summary.
"""

import functools
import itertools
import math
import os
import time
import warnings

import numpy as np
import pytest

import oracles
from conftest import ACCEPTANCE
from ctxrank import data as D
from ctxrank.harness import cli
from ctxrank.harness.commands import run_gradcheck
from ctxrank.harness.config import config_from_dict
from ctxrank.harness.rerank import rerank_pipeline
from ctxrank.harness.training import Streams, load_dataset, train
from ctxrank.losses import (LossSpec, compute_loss, listmle_loss, listnet_loss, ndcgloss2pp_loss,
                            ordinal_decode, ordinal_encode, ranknet_loss)
from ctxrank.metrics import ndcg_at_k
from ctxrank.model import ContextAwareRanker, ModelConfig
from ctxrank.nn import Parameter


class Criterion:
    def __init__(self, number, title):
        self.number, self.title = number, title

    def __enter__(self):
        self.start = time.perf_counter()
        self.details = []
        return self

    def note(self, text):
        self.details.append(text)

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        if exc_type is pytest.skip.Exception:
            verdict = "SKIP"
            self.details.append(str(exc))
        else:
            verdict = "PASS" if exc_type is None else "FAIL"
            if exc_type is not None:
                self.details.append(f"{exc_type.__name__}: {str(exc).splitlines()[0] if str(exc) else ''}")
        line = (f"criterion {self.number:>2}: {verdict}  {self.title}  "
                f"[{'; '.join(self.details)}] ({elapsed:.1f}s)")
        ACCEPTANCE[self.number] = line
        print(line)
        return False


# tuned desk-scale settings for the two training experiments
DESK = {
    "data": {"synthetic": {"task": "contextual", "n_slates": 200, "l": 20, "d_f": 8,
                           "min_length": 10}},
    "model": {"d_fc": 32, "N": 2, "H": 2, "d_h": 32, "p_drop": 0.0},
    "optim": {"lr": 3e-3, "epochs": 50, "batch_size": 16},
    "slate_length": 20,
    "seed": 0,
}


def desk_config(task="contextual", loss="ordinal", kind="context"):
    raw = {k: (dict(v) if isinstance(v, dict) else v) for k, v in DESK.items()}
    raw["data"] = {"synthetic": dict(DESK["data"]["synthetic"], task=task)}
    raw["model"] = dict(DESK["model"], kind=kind)
    raw["loss"] = {"kind": loss}
    return config_from_dict(raw)


@functools.lru_cache(maxsize=None)
def desk_run(loss, kind="context"):
    return train(desk_config(loss=loss, kind=kind))


def test_criterion_01_permutation_equivariance():
    with Criterion(1, "permutation equivariance (no PE, eval)") as c:
        start = time.perf_counter()
        worst = {}
        for dtype, tol in ((np.float32, 1e-5), (np.float64, 1e-10)):
            rng = np.random.default_rng(0)
            cfg = ModelConfig(d_f=12, d_fc=64, N=2, H=2, d_h=64, p_drop=0.1)
            model = ContextAwareRanker(cfg, rng, dtype)
            err = 0.0
            for _ in range(100):
                n = int(rng.integers(1, 31))
                x = rng.standard_normal((1, n, 12)).astype(dtype)
                mask = np.ones((1, n), bool)
                perm = rng.permutation(n)
                s = model.predict(x, mask)
                sp = model.predict(x[:, perm], mask)
                err = max(err, float(np.abs(sp - s[:, perm]).max()))
            worst[np.dtype(dtype).name] = err
            c.note(f"{np.dtype(dtype).name} max err {err:.2e} (< {tol:g})")
            assert err < tol
        runtime = time.perf_counter() - start
        assert runtime < 30


def test_criterion_02_gradient_suite():
    with Criterion(2, "all losses pass finite differences with the tiny model") as c:
        start = time.perf_counter()
        reports = run_gradcheck(tolerance=1e-4)
        worst_name = max(reports, key=lambda k: reports[k].max_rel_error)
        c.note(f"{len(reports)} checks, worst {worst_name} {reports[worst_name].max_rel_error:.2e} (< 1e-4)")
        for name in ("rmse", "ordinal", "ranknet", "lambdarank", "ndcgloss2pp", "listnet", "listmle"):
            assert reports[name].max_rel_error < 1e-4, (name, reports[name].per_param)
        assert all(r.passed for r in reports.values())
        assert time.perf_counter() - start < 300


def test_criterion_03_metric_oracle():
    with Criterion(3, "ndcg_at_k equals the exhaustive-ordering oracle") as c:
        rng = np.random.default_rng(0)
        worst = 0.0
        for _ in range(1000):
            n = int(rng.integers(1, 7))
            s = rng.integers(-2, 3, n).astype(float) if rng.random() < 0.5 else rng.standard_normal(n)
            y = rng.integers(0, 5, n)
            k = int(rng.integers(1, 8))
            worst = max(worst, abs(ndcg_at_k(s, y, k=k) - oracles.ndcg_brute(list(s), list(y), k)))
        zero_ok = all(ndcg_at_k(rng.standard_normal(n), np.zeros(n, int), k=k) == 1.0
                      for n in range(1, 7) for k in (1, 5, 10))
        c.note(f"1000 instances, max |diff| {worst:.1e} (<= 1e-12); all-zero slates -> 1.0: {zero_ok}")
        assert worst <= 1e-12 and zero_ok


def test_criterion_04_contextual_advantage():
    with Criterion(4, "self-attention beats parameter-matched MLP by >= 0.05 NDCG@5") as c:
        start = time.perf_counter()
        for loss in ("ordinal", "listnet", "ranknet"):
            ctx = desk_run(loss).final_report.ndcg[5]
            mlp = desk_run(loss, "mlp").final_report.ndcg[5]
            c.note(f"{loss}: {ctx:.3f} vs {mlp:.3f}")
            assert ctx - mlp >= 0.05, (loss, ctx, mlp)
        runtime = time.perf_counter() - start
        assert runtime < 15 * 60


def test_criterion_05_reranking_with_positions():
    with Criterion(5, "re-ranking: PE model >= no-PE model + 0.01 NDCG@5 (ordinal)") as c:
        res = rerank_pipeline(desk_config(task="positional", loss="ordinal"))
        pe, no_pe = res.with_pe.ndcg[5], res.without_pe.ndcg[5]
        c.note(f"base {res.base.ndcg[5]:.3f}, PE {pe:.3f}, no-PE {no_pe:.3f}")
        assert pe - no_pe >= 0.01


def test_criterion_06_ordinal_encoding():
    with Criterion(6, "ordinal encode/decode bijection on grades 0-4") as c:
        table = {0: [0, 0, 0, 0], 1: [1, 0, 0, 0], 2: [1, 1, 0, 0], 3: [1, 1, 1, 0], 4: [1, 1, 1, 1]}
        for grade, bits in table.items():
            assert ordinal_encode(grade).tolist() == bits
            assert ordinal_decode(ordinal_encode(grade)) == grade
        codes = {tuple(ordinal_encode(g)) for g in range(5)}
        assert len(codes) == 5
        decodable = [b for b in itertools.product((0, 1), repeat=4) if _decodes(b)]
        assert sorted(decodable) == sorted(codes)
        c.note("5 grades, 5 distinct codes, only cumulative codes decode")


def _decodes(bits):
    try:
        ordinal_decode(bits)
        return True
    except ValueError:
        return False


def test_criterion_07_loss_spot_values():
    with Criterion(7, "loss spot values") as c:
        one = np.ones(2, bool)
        rn = float(ranknet_loss(np.zeros(2), np.array([1, 0]), one).data)
        ln = float(listnet_loss(np.array([0.5, 0.5]), np.array([1, 1]), one).data)
        mle = float(listmle_loss(np.array([3.0, 2, 1]), np.array([2, 1, 0]), np.ones(3, bool)).data)
        mle_oracle = oracles.listmle_fixed([3.0, 2.0, 1.0])
        s, y = [0.1, 0.2, 0.3], [2, 1, 0]
        nd = float(ndcgloss2pp_loss(np.array(s), np.array(y), np.ones(3, bool), 1.0, 10.0).data)
        nd_oracle = oracles.pairwise(s, y, "ndcgloss2pp", sigma=1.0, mu=10.0)
        c.note(f"ranknet {rn!r}; listnet-ln2 {abs(ln - math.log(2)):.1e}; "
               f"listmle {mle:.6f} vs {mle_oracle:.6f}; ndcgloss2pp {nd:.6f} vs {nd_oracle:.6f}")
        assert rn == 1.0
        assert abs(ln - math.log(2)) <= 1e-12
        assert abs(mle - mle_oracle) <= 1e-9
        assert abs(nd - nd_oracle) <= 1e-9


def test_criterion_08_determinism(tmp_path):
    with Criterion(8, "two identical train runs give byte-identical metrics.tsv (64-bit)") as c:
        cfg = tmp_path / "cfg.json"
        cfg.write_text(
            '{"data": {"synthetic": {"task": "contextual", "n_slates": 60, "l": 16, "d_f": 6,'
            ' "min_length": 8}, "n_valid": 30, "n_test": 30},'
            ' "model": {"d_fc": 16, "N": 2, "H": 2, "d_h": 16, "p_drop": 0.1},'
            ' "loss": {"kind": "listmle"}, "optim": {"epochs": 4, "lr": 0.003},'
            ' "slate_length": 12, "seed": 7}')
        for run in ("a", "b"):
            code = cli.main(["train", "--config", str(cfg), "--precision", "f64",
                             "--out", str(tmp_path / run)])
            assert code == 0
        a = (tmp_path / "a" / "metrics.tsv").read_bytes()
        b = (tmp_path / "b" / "metrics.tsv").read_bytes()
        c.note(f"{len(a)} bytes, identical={a == b}")
        assert a == b


def test_criterion_09_numerical_robustness():
    with Criterion(9, "listnet/listmle finite at |score| <= 1e3 over 10,000 instances") as c:
        rng = np.random.default_rng(0)
        bad = 0
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            for kind in ("listnet", "listmle"):
                spec = LossSpec(kind=kind)
                for _ in range(100):  # 100 batches x 100 slates
                    n = int(rng.integers(1, 31))
                    scores = Parameter(rng.uniform(-1e3, 1e3, (100, n)))
                    labels = rng.integers(0, 5, (100, n))
                    mask = rng.random((100, n)) < 0.8
                    mask[:, 0] = True
                    loss = compute_loss(spec, scores, labels, mask, rng)
                    loss.backward()
                    bad += int(not np.isfinite(loss.data)) + int((~np.isfinite(scores.grad)).sum())
        c.note(f"2 x 10,000 slates, {bad} NaN/Inf")
        assert bad == 0


WEB30K = os.environ.get("CTXRANK_WEB30K_FOLD1")


def test_criterion_10_web30k_subset():
    with Criterion(10, "optional WEB30K Fold1 1,000-query subset: self-attention > MLP (ordinal)") as c:
        if not WEB30K:
            pytest.skip("network-gated: set CTXRANK_WEB30K_FOLD1 to a Fold1 directory to run")
        results = {}
        for kind in ("context", "mlp"):
            cfg = config_from_dict({
                "data": {"train": _subset(os.path.join(WEB30K, "train.txt"), 1000),
                         "valid": _subset(os.path.join(WEB30K, "vali.txt"), 200),
                         "test": _subset(os.path.join(WEB30K, "test.txt"), 200)},
                "model": {"d_f": 136, "kind": kind, "p_drop": 0.1},
                "loss": {"kind": "ordinal"}, "optim": {"epochs": 20, "lr": 1e-3},
                "slate_length": 30, "seed": 0})
            results[kind] = train(cfg).final_report.ndcg[5]
        c.note(f"context {results['context']:.4f} vs mlp {results['mlp']:.4f}")
        assert results["context"] > results["mlp"]


def _subset(path, n_queries):
    out = path + f".first{n_queries}"
    if not os.path.exists(out):
        seen = set()
        with open(path, encoding="utf-8") as src, open(out, "w", encoding="utf-8") as dst:
            for line in src:
                qid = line.split()[1] if line.strip() else None
                if qid not in seen and len(seen) == n_queries:
                    break
                seen.add(qid)
                dst.write(line)
    return out


# -- supporting checks (not numbered criteria) -------------------------------

def test_desk_ordinal_run_reaches_095_validation_ndcg5():
    ctx, mlp = desk_run("ordinal"), desk_run("ordinal", "mlp")
    assert ctx.best_valid.ndcg[5] >= 0.95
    assert mlp.best_valid.ndcg[5] < ctx.best_valid.ndcg[5]
    params = ctx.model.n_parameters(), mlp.model.n_parameters()
    assert abs(params[1] - params[0]) <= 0.2 * params[0]


def test_witness_backs_criterion_4():
    # the contextual training split admits no pointwise-optimal scorer
    cfg = desk_config()
    dataset = load_dataset(cfg, Streams.from_seed(cfg.seed))
    assert D.find_witness(dataset.train) is not None
