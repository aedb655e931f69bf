"""Training loop, evaluation and run artefacts."""

import dataclasses
import os
from dataclasses import dataclass, field

import numpy as np

from .. import data as D
from ..errors import NonFiniteLoss
from ..losses import compute_loss
from ..metrics import evaluate_split
from ..model import build_model
from ..nn import Adam, load_checkpoint, save_checkpoint
from .config import dump_config

SELECTION_CUTOFF = 5
STATS_PREFIX = "standardizer."


@dataclass
class Streams:
    """Independent generators, one per purpose, derived from the run seed."""

    init: np.random.Generator
    shuffle: np.random.Generator
    subsample: np.random.Generator
    dropout: np.random.Generator
    tiebreak: np.random.Generator
    data: np.random.Generator

    @classmethod
    def from_seed(cls, seed):
        children = np.random.SeedSequence(seed).spawn(6)
        return cls(*(np.random.default_rng(c) for c in children))


@dataclass
class Dataset:
    train: list
    valid: list
    stats: D.DatasetStats
    d_f: int
    test_loader: object = None
    _test: list | None = None

    def test(self):
        """Load (once) and return the standardised test split, or None."""
        if self._test is None and self.test_loader is not None:
            self._test = [D.apply_standardizer(s, self.stats) for s in self.test_loader(self.d_f)]
        return self._test


@dataclass
class TrainResult:
    model: object
    history: list = field(default_factory=list)
    valid_reports: list = field(default_factory=list)
    best_epoch: int = 0
    best_valid: object = None
    test_report: object = None

    @property
    def final_report(self):
        return self.test_report if self.test_report is not None else self.best_valid


def dtype_of(config):
    return np.float32 if config.precision == "f32" else np.float64


def _synthetic_splits(spec, cfg, streams):
    train_rng, valid_rng, test_rng = (np.random.default_rng(s)
                                      for s in np.random.SeedSequence(
                                          int(streams.data.integers(2**63))).spawn(3))
    train = D.generate_synthetic(spec, train_rng)
    valid = D.generate_synthetic(
        dataclasses.replace(spec, n_slates=cfg.data.n_valid, qid_prefix="v", ensure_witness=False),
        valid_rng)

    def test_loader(_d_f):
        return D.generate_synthetic(
            dataclasses.replace(spec, n_slates=cfg.data.n_test, qid_prefix="t", ensure_witness=False),
            test_rng)

    return train, valid, test_loader


def load_dataset(config, streams, stats=None):
    """Training and validation splits, standardised with training statistics
    (or with ``stats`` when given, e.g. from a checkpoint).

    The test split is only materialised through :meth:`Dataset.test`.
    """
    dtype = dtype_of(config)
    d = config.data
    if d.synthetic is not None:
        train, valid, test_loader = _synthetic_splits(d.synthetic, config, streams)
        d_f = d.synthetic.d_f
    else:
        train_rows = D.read_letor(d.train)
        valid_rows = D.read_letor(d.valid) if d.valid else []
        d_f = config.model.d_f or max(D.max_feature_index(train_rows),
                                      D.max_feature_index(valid_rows)) + 1
        train = D.group_and_densify(train_rows, d_f)
        valid = D.group_and_densify(valid_rows, d_f) if valid_rows else train
        test_loader = (lambda n: D.group_and_densify(D.read_letor(d.test), n)) if d.test else None
    stats = stats if stats is not None else D.fit_standardizer(train)
    cast = lambda s: dataclasses.replace(s, features=s.features.astype(dtype))
    train = [cast(D.apply_standardizer(s, stats)) for s in train]
    valid = [cast(D.apply_standardizer(s, stats)) for s in valid]
    loader = None
    if test_loader is not None:
        loader = lambda n: [cast(s) for s in test_loader(n)]
    return Dataset(train, valid, stats, d_f, loader)


def model_config_for(config, d_f):
    return dataclasses.replace(config.model, d_f=d_f, output_dim=config.loss.output_dim)


def _selection_score(report):
    if SELECTION_CUTOFF in report.ndcg:
        return report.ndcg[SELECTION_CUTOFF]
    return next(iter(report.ndcg.values()))


def _eval_cutoffs(config):
    return sorted(set(int(k) for k in config.cutoffs) | {SELECTION_CUTOFF})


def fit(config, dataset, streams=None, log=None):
    """Train a scorer on ``dataset`` and return the best-on-validation model."""
    streams = streams or Streams.from_seed(config.seed)
    dtype = dtype_of(config)
    model = build_model(model_config_for(config, dataset.d_f), streams.init, dtype)
    opt = Adam(model.parameters(), lr=config.optim.lr)
    cutoffs = _eval_cutoffs(config)
    l, bs = config.slate_length, config.optim.batch_size

    report = evaluate_split(model, dataset.valid, cutoffs)
    result = TrainResult(model, valid_reports=[report], best_epoch=0, best_valid=report)
    best_state, best_score = model.state_dict(), _selection_score(report)
    result.history.append(_history_row(0, opt.lr, float("nan"), report))
    if log:
        log(_format_row(result.history[-1]))

    decay_at = set(int(e) for e in config.optim.decay_at_epochs)
    for epoch in range(1, config.optim.epochs + 1):
        order = streams.shuffle.permutation(len(dataset.train))
        losses = []
        for start in range(0, len(order), bs):
            batch = [D.fix_length(dataset.train[i], l, "train", streams.subsample)
                     for i in order[start:start + bs]]
            x, y, m = D.stack_slates(batch)
            out = model(x, m, mode="train", rng=streams.dropout)
            loss = compute_loss(config.loss, out, y, m, streams.tiebreak)
            if not np.isfinite(loss.data):
                raise NonFiniteLoss(f"epoch {epoch}: non-finite loss on slates "
                                    f"{[s.qid for s in batch]}")
            loss.backward()
            opt.step()
            losses.append(loss.item())
        report = evaluate_split(model, dataset.valid, cutoffs)
        result.valid_reports.append(report)
        result.history.append(_history_row(epoch, opt.lr, float(np.mean(losses)), report))
        if log:
            log(_format_row(result.history[-1]))
        if _selection_score(report) > best_score:
            best_score, best_state = _selection_score(report), model.state_dict()
            result.best_epoch, result.best_valid = epoch, report
        if epoch in decay_at:
            opt.lr *= config.optim.decay_factor

    model.load_state_dict(best_state)
    return result


def _history_row(epoch, lr, loss, report):
    row = {"epoch": epoch, "lr": lr, "train_loss": loss}
    row.update({f"valid_ndcg@{k}": v for k, v in report.ndcg.items()})
    row["valid_mrr"] = report.mrr
    return row


def _format_row(row):
    return "  ".join(f"{k}={v:.4f}" if isinstance(v, float) else f"{k}={v}" for k, v in row.items())


def train(config, out_dir=None, log=None):
    """Load data, fit, evaluate the selected checkpoint on the test split and
    (optionally) write run artefacts into ``out_dir``."""
    streams = Streams.from_seed(config.seed)
    dataset = load_dataset(config, streams)
    result = fit(config, dataset, streams, log)
    test = dataset.test()
    if test:
        result.test_report = evaluate_split(result.model, test, config.cutoffs)
    else:
        result.best_valid = evaluate_split(result.model, dataset.valid, config.cutoffs)
    if out_dir is not None:
        write_artifacts(out_dir, config, result, dataset.stats)
    return result


def evaluate(config, checkpoint_path, out_dir=None):
    """Score the test split (validation if no test) with a saved checkpoint."""
    streams = Streams.from_seed(config.seed)
    state = load_checkpoint(checkpoint_path)
    stats = D.DatasetStats(state.pop(STATS_PREFIX + "mean"), state.pop(STATS_PREFIX + "stddev"))
    dataset = load_dataset(config, streams, stats)
    model = build_model(model_config_for(config, dataset.d_f), streams.init, dtype_of(config))
    model.load_state_dict(state)
    split = dataset.test() or dataset.valid
    report = evaluate_split(model, split, config.cutoffs)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "metrics.tsv"), "w", newline="\n") as fh:
            fh.write(report.to_tsv())
    return report


def write_artifacts(out_dir, config, result, stats):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "metrics.tsv"), "w", newline="\n") as fh:
        fh.write(result.final_report.to_tsv())
    with open(os.path.join(out_dir, "train_log.tsv"), "w", newline="\n") as fh:
        keys = list(result.history[0])
        fh.write("\t".join(keys) + "\n")
        for row in result.history:
            fh.write("\t".join(_tsv_value(row[k]) for k in keys) + "\n")
    with open(os.path.join(out_dir, "config.json"), "w", newline="\n") as fh:
        fh.write(dump_config(config))
    arrays = result.model.state_dict()
    arrays[STATS_PREFIX + "mean"] = stats.mean
    arrays[STATS_PREFIX + "stddev"] = stats.stddev
    save_checkpoint(os.path.join(out_dir, "checkpoint.npz"), arrays)


def _tsv_value(v):
    if isinstance(v, float):
        return "nan" if np.isnan(v) else f"{v:.12g}"
    return str(v)
