import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ctxrank import data as D
from ctxrank.errors import (EmptyDataset, FeatureIndexOutOfRange, InvalidSpec, MalformedLine,
                            NegativeLabel)


# -- parsing ---------------------------------------------------------------

def test_parse_single_row():
    (row,) = D.parse_letor("2 qid:7 1:0.5 3:-1.0")
    assert row.label == 2 and row.qid == "7"
    assert row.features == {0: 0.5, 2: -1.0}


def test_parse_skips_blank_lines_and_keeps_comments():
    rows = D.parse_letor("\n1 qid:a 2:3.5 # doc-17\n   \n0 qid:a\n")
    assert [r.label for r in rows] == [1, 0]
    assert rows[0].comment == "doc-17"
    assert rows[1].features == {}


def test_parse_empty_input():
    assert D.parse_letor("") == []


@pytest.mark.parametrize("text,line", [
    ("2 qid:7 1:abc", 1),
    ("1 qid:1 1:0.1\n2 qid:7 x", 2),
    ("1 qid:1 1:0.1\n\n2 nope 1:1", 3),
    ("one qid:1 1:1", 1),
    ("1 qid:1 0:1", 1),
])
def test_parse_malformed_reports_line(text, line):
    with pytest.raises(MalformedLine) as exc:
        D.parse_letor(text)
    assert exc.value.line_no == line


def test_parse_negative_label():
    with pytest.raises(NegativeLabel) as exc:
        D.parse_letor("0 qid:1 1:1\n-1 qid:1 1:2")
    assert exc.value.line_no == 2


_rows = st.lists(
    st.builds(
        D.RawRow,
        label=st.integers(0, 4),
        qid=st.text("abc123", min_size=1, max_size=3),
        features=st.dictionaries(st.integers(0, 20),
                                 st.floats(allow_nan=False, allow_infinity=False, width=64),
                                 max_size=6),
        comment=st.sampled_from(["", "doc", "x y z"]),
    ),
    max_size=12,
)


@given(_rows)
def test_parse_format_round_trip(rows):
    assert D.parse_letor(D.format_letor(rows)) == rows


# -- grouping --------------------------------------------------------------

def test_group_by_qid_in_first_appearance_order():
    rows = D.parse_letor("1 qid:7 1:1\n0 qid:9 2:1\n2 qid:7 3:1\n")
    slates = D.group_and_densify(rows, 4)
    assert [s.qid for s in slates] == ["7", "9"]
    assert [len(s) for s in slates] == [2, 1]
    np.testing.assert_array_equal(slates[0].labels, [1, 2])
    assert slates[0].mask.all()


def test_densify_zero_fills():
    (s,) = D.group_and_densify([D.RawRow(1, "q", {0: 0.5})], 3)
    np.testing.assert_array_equal(s.features, [[0.5, 0.0, 0.0]])


def test_densify_index_out_of_range():
    with pytest.raises(FeatureIndexOutOfRange):
        D.group_and_densify([D.RawRow(1, "q", {5: 1.0})], 3)


def test_slate_rejects_misaligned_and_empty():
    with pytest.raises(ValueError):
        D.Slate(np.zeros((2, 3)), np.zeros(3, int), np.ones(3, bool))
    with pytest.raises(ValueError):
        D.Slate(np.zeros((2, 3)), np.zeros(2, int), np.zeros(2, bool))


# -- standardisation -------------------------------------------------------

def _slate(x, y=None, mask=None, qid="q"):
    x = np.asarray(x, dtype=np.float64)
    y = np.zeros(len(x), int) if y is None else np.asarray(y)
    mask = np.ones(len(x), bool) if mask is None else np.asarray(mask)
    return D.Slate(x, y, mask, qid)


def test_standardizer_hand_values():
    s = _slate([[1.0, 5.0], [3.0, 5.0]])
    stats = D.fit_standardizer([s])
    np.testing.assert_array_equal(stats.mean, [2.0, 5.0])
    np.testing.assert_array_equal(stats.stddev, [1.0, 1.0])
    np.testing.assert_array_equal(D.apply_standardizer(s, stats).features, [[-1.0, 0.0], [1.0, 0.0]])


def test_standardizer_ignores_and_zeroes_padding():
    s = D.pad_slate(_slate([[1.0], [3.0]]), 4)
    stats = D.fit_standardizer([s])
    assert stats.mean[0] == 2.0
    out = D.apply_standardizer(s, stats)
    np.testing.assert_array_equal(out.features[2:], 0.0)


def test_standardizer_empty():
    with pytest.raises(EmptyDataset):
        D.fit_standardizer([])


@given(st.integers(0, 2**31))
def test_standardized_training_split_moments(seed):
    rng = np.random.default_rng(seed)
    slates = [_slate(rng.normal(3.0, 7.0, size=(int(rng.integers(1, 6)), 4)))
              for _ in range(5)]
    stats = D.fit_standardizer(slates)
    x = np.concatenate([D.apply_standardizer(s, stats).features for s in slates])
    if len(x) > 1:
        assert np.abs(x.mean(axis=0)).max() < 1e-9
        assert np.abs(x.std(axis=0) - 1.0).max() < 1e-9


# -- fix_length ------------------------------------------------------------

def test_fix_length_pads():
    s = D.fix_length(_slate(np.eye(3), [1, 2, 3]), 5, "train", np.random.default_rng(0))
    np.testing.assert_array_equal(s.mask, [True, True, True, False, False])
    np.testing.assert_array_equal(s.labels, [1, 2, 3, 0, 0])
    np.testing.assert_array_equal(s.features[3:], 0.0)


def test_fix_length_identity_at_length():
    src = _slate(np.eye(5))
    out = D.fix_length(src, 5, "train", np.random.default_rng(0))
    np.testing.assert_array_equal(out.features, src.features)


def test_fix_length_subsample_deterministic_and_ordered():
    src = _slate(np.arange(10.0)[:, None], np.arange(10) % 5)
    a = D.fix_length(src, 4, "train", np.random.default_rng(7))
    b = D.fix_length(src, 4, "train", np.random.default_rng(7))
    np.testing.assert_array_equal(a.features, b.features)
    kept = a.features[:, 0]
    assert len(kept) == 4 and np.all(np.diff(kept) > 0)


def test_fix_length_eval_never_subsamples():
    src = _slate(np.arange(10.0)[:, None])
    with pytest.raises(ValueError):
        D.fix_length(src, 4, "eval")
    padded = D.fix_length(src, 12, "eval")
    np.testing.assert_array_equal(padded.features[:10, 0], np.arange(10.0))


@given(st.integers(1, 15), st.integers(1, 15), st.integers(0, 2**31))
def test_fix_length_invariants(n, l, seed):
    src = _slate(np.arange(float(n))[:, None])
    out = D.fix_length(src, l, "train", np.random.default_rng(seed))
    assert len(out) == l and out.n_items == min(n, l)
    kept = out.features[out.mask, 0]
    assert np.all(np.diff(kept) > 0)


def test_stack_requires_equal_lengths():
    with pytest.raises(ValueError):
        D.stack_slates([_slate(np.eye(2)), _slate(np.eye(3)[:, :2])])


# -- synthetic -------------------------------------------------------------

def test_independent_labels_match_bucketised_utility():
    spec = D.SyntheticSpec(n_slates=1, l=30, d_f=5, task="independent", weight_seed=3)
    (s,) = D.generate_synthetic(spec, np.random.default_rng(0))
    w = np.random.default_rng(3).standard_normal(5)
    u = s.features @ (w / np.linalg.norm(w))
    expected = [sum(ui >= e for e in (0.0, 0.7, 1.3, 1.9)) for ui in u]
    np.testing.assert_array_equal(s.labels, expected)


def test_contextual_grades_depend_on_companions():
    w = np.array([1.0, 0.0])
    item = np.array([0.0, 0.0])
    near = np.vstack([item, [[-0.1, 0], [0.1, 0], [5, 0], [-5, 0]]])
    far = np.vstack([item, [[10, 0], [10.1, 0], [9.9, 0], [10.2, 0]]])
    assert D.contextual_grades(near, w)[0] != D.contextual_grades(far, w)[0]


def test_contextual_dataset_has_witness_pair():
    spec = D.SyntheticSpec(n_slates=20, l=10, d_f=4, task="contextual")
    slates = D.generate_synthetic(spec, np.random.default_rng(1))
    (sa, ia), (sb, ib) = D.find_witness(slates)
    np.testing.assert_array_equal(slates[sa].features[ia], slates[sb].features[ib])
    assert slates[sa].labels[ia] != slates[sb].labels[ib]


def test_positional_labels_follow_profile():
    spec = D.SyntheticSpec(n_slates=3, l=12, d_f=4, task="positional")
    w = D.synthetic_weights(spec)
    for s in D.generate_synthetic(spec, np.random.default_rng(2)):
        by_base = s.labels[np.argsort(-(s.features @ w), kind="stable")]
        np.testing.assert_array_equal(by_base[:8], D.POSITIONAL_PROFILE)
        assert (by_base[8:] == 0).all()


@pytest.mark.parametrize("kwargs", [
    {"n_slates": 0}, {"task": "bogus"}, {"l": 0}, {"min_length": 50},
])
def test_invalid_spec(kwargs):
    with pytest.raises(InvalidSpec):
        D.generate_synthetic(D.SyntheticSpec(**kwargs), np.random.default_rng(0))


def test_variable_lengths_within_bounds():
    spec = D.SyntheticSpec(n_slates=50, l=9, min_length=3, d_f=2)
    lengths = {len(s) for s in D.generate_synthetic(spec, np.random.default_rng(0))}
    assert min(lengths) >= 3 and max(lengths) <= 9 and len(lengths) > 1


def test_write_read_round_trip(tmp_path):
    spec = D.SyntheticSpec(n_slates=4, l=6, min_length=2, d_f=3, task="contextual")
    slates = D.generate_synthetic(spec, np.random.default_rng(5))
    path = tmp_path / "x.txt"
    D.write_letor(path, slates)
    back = D.load_slates(path, d_f=3)
    assert [s.qid for s in back] == [s.qid for s in slates]
    for a, b in zip(slates, back):
        np.testing.assert_array_equal(a.features, b.features)
        np.testing.assert_array_equal(a.labels, b.labels)

