import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from dataring.data import (
    Attribute,
    Domain,
    HistogramDataset,
    Schema,
    build_domain,
    domain_from_text,
    domain_to_text,
    invert_permutation,
    load_dataset,
    random_permutation,
    read_csv,
    sample_background,
    schema_from_rows,
    synth_dataset,
    synth_records,
    synth_schema,
)
from dataring.errors import ConfigurationError, DomainError

# gender x home x loan, lexicographic with F<M, Rent<Own, 10K<20K
LOAN_SCHEMA = Schema([
    Attribute("Gen", ("F", "M")),
    Attribute("Home", ("Rent", "Own")),
    Attribute("Loan", ("10K", "20K")),
])
LOAN_ROWS = [("F", "Rent", "10K"), ("F", "Own", "20K"), ("M", "Rent", "10K"), ("M", "Own", "20K")]


def test_loan_example_histogram():
    domain = build_domain(LOAN_SCHEMA, [], cap=None)
    assert len(domain) == 8
    ds, dups = load_dataset(LOAN_ROWS, domain)
    assert dups == 0
    assert ds.indicator.tolist() == [1, 0, 0, 1, 1, 0, 0, 1]
    assert ds.N == 4


def test_empty_and_repeated_rows():
    domain = Domain.full(LOAN_SCHEMA)
    ds, _ = load_dataset([], domain)
    assert ds.N == 0 and not ds.indicator.any()
    ds, dups = load_dataset([LOAN_ROWS[0]] * 5, domain)
    assert ds.N == 1 and dups == 4


def test_bad_row_reports_index():
    domain = Domain.full(LOAN_SCHEMA)
    with pytest.raises(DomainError) as err:
        load_dataset([LOAN_ROWS[0], ("X", "Rent", "10K")], domain)
    assert err.value.row == 1


def test_schema_roundtrip_every_label():
    domain = Domain.full(LOAN_SCHEMA)
    for label in range(len(domain)):
        assert domain.label(domain.values(label)) == label


def test_duplicate_attribute_names_rejected():
    with pytest.raises(ConfigurationError):
        Schema([Attribute("a", ("x",)), Attribute("a", ("y",))])


def test_capped_domain_small_case():
    codes = [LOAN_SCHEMA.encode(r) for r in LOAN_ROWS[:2]]
    domain = build_domain(LOAN_SCHEMA, codes, cap=2, seed=1)
    assert len(domain) == 4
    assert set(codes) <= set(domain.codes.tolist())


def test_cap_must_exceed_one():
    with pytest.raises(ConfigurationError):
        build_domain(LOAN_SCHEMA, [0], cap=1)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(2, 6), min_size=1, max_size=4), st.integers(1, 20), st.integers(2, 4), st.integers(0, 10**6))
def test_capped_domain_contains_dataset(radices, n, cap, seed):
    schema = synth_schema(radices)
    if cap * n > schema.full_size:
        return
    codes = synth_records(schema, n, seed)
    domain = build_domain(schema, codes, cap, seed)
    assert len(domain) == cap * n
    assert set(codes.tolist()) <= set(domain.codes.tolist())
    assert len(set(domain.codes.tolist())) == len(domain)
    assert build_domain(schema, codes, cap, seed).codes.tolist() == domain.codes.tolist()


def test_domain_manifest_roundtrip():
    schema = synth_schema([3, 4, 5])
    codes = synth_records(schema, 10, 2)
    domain = build_domain(schema, codes, 3, 5)
    back = domain_from_text(domain_to_text(domain))
    assert back.size == domain.size and back.cap == 3 and back.seed == 5
    assert back.schema == schema
    assert back.codes.tolist() == domain.codes.tolist()


def test_dataset_bytes_roundtrip():
    ds = synth_dataset(37, 100, seed=4)
    back = HistogramDataset.from_bytes(ds.to_bytes(), 100)
    assert back == ds and back.N == 37
    with pytest.raises(DomainError):
        HistogramDataset.from_bytes(b"\x05" + ds.to_bytes()[1:], 100)


def test_dataset_does_not_freeze_callers_array():
    ind = np.zeros(5, dtype=np.uint8)
    HistogramDataset(ind)
    ind[0] = 1


def test_csv_ingest_with_previous_schema(tmp_path):
    path = tmp_path / "r.csv"
    path.write_text("age,city\n40,B\n30,A\n40,A\n", encoding="utf-8")
    header, rows = read_csv(path)
    schema = schema_from_rows(header, rows, {"age": "integer"})
    assert schema.attributes[0].values == ("30", "40")
    assert schema.attributes[1].values == ("B", "A")
    more = schema_from_rows(header, [("20", "C")], previous=schema)
    assert more.attributes[0].values == ("20", "30", "40")
    assert more.attributes[1].values == ("B", "A", "C")


def test_csv_requires_header(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("", encoding="utf-8")
    with pytest.raises(DomainError):
        read_csv(path)


def test_background_edges():
    ds = synth_dataset(10, 40, seed=1)
    assert sorted(sample_background(ds, 10, 2).labels.tolist()) == ds.labels.tolist()
    one = sample_background(ds, 1, 3).labels
    assert len(one) == 1 and one[0] in ds.labels
    with pytest.raises(ConfigurationError):
        sample_background(ds, 11)


def test_background_is_uniform():
    ds = synth_dataset(8, 20, seed=1)
    counts = dict.fromkeys(ds.labels.tolist(), 0)
    for s in range(10_000):
        for label in sample_background(ds, 2, s).labels:
            counts[int(label)] += 1
    assert sps.chisquare(list(counts.values())).pvalue > 0.001


def test_synth_dataset_edges():
    assert synth_dataset(12, 12, 0).indicator.all()
    assert not synth_dataset(0, 12, 0).indicator.any()
    assert synth_dataset(5, 100, 1) != synth_dataset(5, 100, 2)


def test_permutation_inverse_and_coverage():
    p = random_permutation(50, 3)
    assert (p.inverse[p.forward] == np.arange(50)).all()
    assert random_permutation(1, 0).forward.tolist() == [0]
    seen = {tuple(random_permutation(3, s).forward.tolist()) for s in range(200)}
    assert seen == set(itertools.permutations(range(3)))
    with pytest.raises(ValueError):
        invert_permutation([0, 0, 1])
