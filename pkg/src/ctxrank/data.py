"""LETOR / SVMLight-rank ingestion, slate shaping and synthetic datasets.

File lines look like ``<label> qid:<qid> <idx>:<val> ... [# comment]`` with
1-based feature indices; internally everything is 0-based and dense.
"""

import io
from dataclasses import dataclass, replace

import numpy as np

from .errors import (EmptyDataset, FeatureIndexOutOfRange, InvalidSpec, MalformedLine,
                     NegativeLabel)


@dataclass(frozen=True)
class RawRow:
    label: int
    qid: str
    features: dict
    comment: str = ""


@dataclass(frozen=True, eq=False)
class Slate:
    """One query's items: ``features`` (l, d_f), ``labels`` (l,), ``mask`` (l,)."""

    features: np.ndarray
    labels: np.ndarray
    mask: np.ndarray
    qid: str = ""

    def __post_init__(self):
        n = len(self.labels)
        if self.features.ndim != 2 or self.features.shape[0] != n or self.mask.shape != (n,):
            raise ValueError(
                f"slate {self.qid!r}: features {self.features.shape}, labels {self.labels.shape}, "
                f"mask {self.mask.shape} are not aligned")
        if not self.mask.any():
            raise ValueError(f"slate {self.qid!r} has no real items")

    def __len__(self):
        return len(self.labels)

    @property
    def n_items(self):
        return int(self.mask.sum())

    @property
    def d_f(self):
        return self.features.shape[1]


@dataclass(frozen=True)
class DatasetStats:
    mean: np.ndarray
    stddev: np.ndarray


# parsing -----------------------------------------------------------------

def parse_letor(source):
    """Parse LETOR text (a string, a path-like opened by the caller, or any
    iterable of lines) into :class:`RawRow` objects in file order."""
    if isinstance(source, str):
        source = io.StringIO(source)
    rows = []
    for line_no, line in enumerate(source, start=1):
        body, _, comment = line.partition("#")
        tokens = body.split()
        if not tokens:
            continue
        try:
            label = int(tokens[0])
        except ValueError:
            raise MalformedLine(line_no, f"label {tokens[0]!r} is not an integer") from None
        if label < 0:
            raise NegativeLabel(line_no)
        if len(tokens) < 2 or not tokens[1].startswith("qid:") or len(tokens[1]) == 4:
            raise MalformedLine(line_no, "missing qid:<id> token")
        qid = tokens[1][4:]
        features = {}
        for tok in tokens[2:]:
            idx, sep, val = tok.partition(":")
            try:
                if not sep:
                    raise ValueError
                index = int(idx)
                value = float(val)
            except ValueError:
                raise MalformedLine(line_no, f"bad feature token {tok!r}") from None
            if index < 1:
                raise MalformedLine(line_no, f"feature index {index} < 1")
            features[index - 1] = value
        rows.append(RawRow(label, qid, features, comment.strip()))
    return rows


def read_letor(path):
    with open(path, encoding="utf-8") as fh:
        return parse_letor(fh)


def format_row(row):
    parts = [str(row.label), f"qid:{row.qid}"]
    parts += [f"{i + 1}:{float(v)!r}" for i, v in sorted(row.features.items())]
    line = " ".join(parts)
    return f"{line} # {row.comment}" if row.comment else line


def format_letor(rows):
    return "".join(format_row(r) + "\n" for r in rows)


def slates_to_rows(slates):
    """Dense slates back to rows (mask-true items only, every feature written)."""
    rows = []
    for s in slates:
        for x, y in zip(s.features[s.mask], s.labels[s.mask]):
            rows.append(RawRow(int(y), s.qid, {j: float(v) for j, v in enumerate(x)}))
    return rows


def write_letor(path, slates):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_letor(slates_to_rows(slates)))


def max_feature_index(rows):
    return max((max(r.features) for r in rows if r.features), default=-1)


def group_and_densify(rows, d_f, dtype=np.float64):
    """Group rows by qid (first-appearance order) into dense, unpadded slates."""
    groups = {}
    for row in rows:
        groups.setdefault(row.qid, []).append(row)
    slates = []
    for qid, members in groups.items():
        x = np.zeros((len(members), d_f), dtype=dtype)
        for i, row in enumerate(members):
            for j, v in row.features.items():
                if j >= d_f:
                    raise FeatureIndexOutOfRange(
                        f"qid {qid}: feature index {j + 1} exceeds d_f={d_f}")
                x[i, j] = v
        y = np.array([r.label for r in members], dtype=np.int64)
        slates.append(Slate(x, y, np.ones(len(members), dtype=bool), qid))
    return slates


def load_slates(path, d_f=None, dtype=np.float64):
    rows = read_letor(path)
    if d_f is None:
        d_f = max_feature_index(rows) + 1
    return group_and_densify(rows, d_f, dtype)


# standardisation ---------------------------------------------------------

def fit_standardizer(slates):
    """Per-feature mean and population stddev over mask-true rows.

    Constant columns get stddev 1 so they standardise to 0 instead of NaN.
    """
    blocks = [s.features[s.mask] for s in slates]
    if not blocks or sum(len(b) for b in blocks) == 0:
        raise EmptyDataset("cannot fit a standardizer on zero rows")
    x = np.concatenate(blocks, axis=0).astype(np.float64)
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std[std <= 1e-12] = 1.0
    return DatasetStats(mean, std)


def apply_standardizer(slate, stats):
    x = (slate.features - stats.mean) / stats.stddev
    x[~slate.mask] = 0.0
    return replace(slate, features=x.astype(slate.features.dtype))


# slate length ------------------------------------------------------------

def pad_slate(slate, length):
    n = len(slate)
    if n >= length:
        return slate
    extra = length - n
    return Slate(
        np.concatenate([slate.features, np.zeros((extra, slate.d_f), slate.features.dtype)]),
        np.concatenate([slate.labels, np.zeros(extra, slate.labels.dtype)]),
        np.concatenate([slate.mask, np.zeros(extra, bool)]),
        slate.qid,
    )


def fix_length(slate, l, mode="train", rng=None):
    """Pad or (train mode only) subsample real items to exactly ``l`` positions.

    Subsampling is uniform without replacement and keeps the surviving items
    in their original relative order. Eval mode only pads; the caller passes
    the split's longest slate length.
    """
    if l < 1:
        raise ValueError(f"slate length must be >= 1, got {l}")
    real = np.flatnonzero(slate.mask)
    if mode == "train" and len(real) > l:
        if rng is None:
            raise ValueError("subsampling needs an rng")
        keep = np.sort(rng.choice(real, size=l, replace=False))
        slate = Slate(slate.features[keep], slate.labels[keep], slate.mask[keep], slate.qid)
    elif mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    elif len(slate) > l:
        # strip trailing padding before re-padding
        if len(real) > l:
            raise ValueError(f"eval-mode slate {slate.qid!r} has {len(real)} items > l={l}")
        keep = np.arange(real[-1] + 1) if real[-1] + 1 <= l else real
        slate = Slate(slate.features[keep], slate.labels[keep], slate.mask[keep], slate.qid)
    return pad_slate(slate, l)


def stack_slates(slates):
    """Stack equal-length slates into (B, l, d_f), (B, l), (B, l) arrays."""
    lengths = {len(s) for s in slates}
    if len(lengths) != 1:
        raise ValueError(f"slates must share one length to stack, got {sorted(lengths)}")
    return (np.stack([s.features for s in slates]),
            np.stack([s.labels for s in slates]),
            np.stack([s.mask for s in slates]))


# synthetic data ----------------------------------------------------------

TASKS = ("independent", "contextual", "positional")

# utility cut points for the independent task: grades 0..4
INDEPENDENT_EDGES = (0.0, 0.7, 1.3, 1.9)
# within-slate rank fractions for the contextual task: top 10% -> 4, ...
CONTEXTUAL_FRACTIONS = (0.1, 0.2, 0.35, 0.55)
# grade by 0-based position in the base ordering; later positions get 0
POSITIONAL_PROFILE = (2, 4, 1, 3, 0, 2, 0, 1)


@dataclass
class SyntheticSpec:
    """Shape of a synthetic dataset.

    ``l`` is the longest slate; lengths are drawn uniformly from
    ``[min_length, l]`` (``min_length`` defaults to ``l``). ``weight_seed``
    fixes the hidden utility direction so separate train/valid/test draws
    share it.
    """

    n_slates: int = 200
    l: int = 20
    d_f: int = 8
    task: str = "independent"
    min_length: int | None = None
    offset_scale: float = 3.0
    weight_seed: int = 0
    qid_prefix: str = ""
    ensure_witness: bool = True

    def validate(self):
        if self.task not in TASKS:
            raise InvalidSpec(f"unknown task {self.task!r}; choose from {TASKS}")
        if self.n_slates < 1:
            raise InvalidSpec("n_slates must be >= 1")
        if self.l < 1 or self.d_f < 1:
            raise InvalidSpec("l and d_f must be >= 1")
        lo = self.l if self.min_length is None else self.min_length
        if not 1 <= lo <= self.l:
            raise InvalidSpec(f"min_length={lo} must lie in [1, {self.l}]")
        if self.task == "contextual" and self.ensure_witness and self.n_slates < 2:
            raise InvalidSpec("a contextual witness needs at least 2 slates")


def synthetic_weights(spec):
    w = np.random.default_rng(spec.weight_seed).standard_normal(spec.d_f)
    return w / np.linalg.norm(w)


def independent_grades(utility):
    return np.digitize(utility, INDEPENDENT_EDGES).astype(np.int64)


def grades_from_rank(rank, n):
    """Grade from a 0-based within-slate rank using :data:`CONTEXTUAL_FRACTIONS`."""
    q = np.asarray(rank) / n
    return (4 - np.searchsorted(CONTEXTUAL_FRACTIONS, q, side="right")).astype(np.int64)


def contextual_grades(x, w):
    """Items closest (in utility) to their slate's mean utility are most relevant."""
    u = x @ w
    closeness = np.abs(u - u.mean())
    order = np.argsort(closeness, kind="stable")
    rank = np.empty(len(u), dtype=np.int64)
    rank[order] = np.arange(len(u))
    return grades_from_rank(rank, len(u))


def positional_grades(x, w):
    """Grades from the position under the linear base utility (descending)."""
    u = x @ w
    order = np.argsort(-u, kind="stable")
    profile = np.zeros(len(u), dtype=np.int64)
    k = min(len(u), len(POSITIONAL_PROFILE))
    profile[:k] = POSITIONAL_PROFILE[:k]
    grades = np.empty(len(u), dtype=np.int64)
    grades[order] = profile
    return grades


def generate_synthetic(spec, rng):
    """Draw ``spec.n_slates`` unpadded slates for the chosen task.

    independent -- label is the bucketised utility ``x @ w`` of the item alone.
    contextual  -- each slate is shifted by a random offset and labels rank
                   items by closeness to the slate's mean utility, so the
                   same feature vector can earn different labels in
                   different slates.
    positional  -- labels follow a non-monotone profile over the position of
                   each item when its slate is sorted by ``x @ w``.
    """
    spec.validate()
    w = synthetic_weights(spec)
    lo = spec.l if spec.min_length is None else spec.min_length
    slates = []
    for i in range(spec.n_slates):
        n = int(rng.integers(lo, spec.l + 1))
        x = rng.standard_normal((n, spec.d_f))
        if spec.task == "contextual":
            x = x + spec.offset_scale * rng.standard_normal(spec.d_f)
            y = contextual_grades(x, w)
        elif spec.task == "positional":
            y = positional_grades(x, w)
        else:
            y = independent_grades(x @ w)
        slates.append(Slate(x, y, np.ones(n, dtype=bool), f"{spec.qid_prefix}{i}"))
    if spec.task == "contextual" and spec.ensure_witness:
        slates = _plant_witness(slates, w)
    return slates


def _plant_witness(slates, w):
    """Copy the top item of slate 0 into another slate where it earns a different grade."""
    first = slates[0]
    src = int(np.argmax(first.labels))
    vec = first.features[src]
    for k in range(1, len(slates)):
        target = slates[k]
        for pos in range(len(target)):
            x = target.features.copy()
            x[pos] = vec
            y = contextual_grades(x, w)
            if y[pos] != first.labels[src]:
                slates[k] = Slate(x, y, target.mask.copy(), target.qid)
                return slates
    raise InvalidSpec("could not plant a contextual witness pair")


def find_witness(slates):
    """Return ((slate, item), (slate, item)) sharing features but not labels, or None."""
    seen = {}
    for si, s in enumerate(slates):
        for i in np.flatnonzero(s.mask):
            key = s.features[i].tobytes()
            if key in seen:
                sj, j = seen[key]
                if slates[sj].labels[j] != s.labels[i]:
                    return (sj, j), (si, int(i))
            else:
                seen[key] = (si, int(i))
    return None
