import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bhadv.core import (
    BinLoads,
    BinSystem,
    LabeledPValues,
    SchemaError,
    assign_bin,
    compute_loads,
    prefix_load,
    read_pvalues_csv,
    write_pvalues_csv,
)


def test_assign_bin_examples():
    bins = BinSystem(5, 0.5)
    assert assign_bin(0.0, bins) == 1
    assert assign_bin(0.35, bins) == 4
    assert assign_bin(0.75, bins) is None
    assert bins.in_tail(0.75)


def test_bins_are_right_closed():
    bins = BinSystem(5, 0.5)
    for i in range(1, 6):
        assert assign_bin(bins.edge(i), bins) == i
        assert assign_bin(float(np.nextafter(bins.edge(i), 1)), bins) == (i + 1 if i < 5 else None)


def test_assign_bin_rejects_out_of_range():
    with pytest.raises(ValueError):
        assign_bin(1.2, BinSystem(5, 0.5))
    with pytest.raises(ValueError):
        assign_bin(-0.1, BinSystem(5, 0.5))


def test_bin_system_validation():
    for q in (0.0, 1.0, -0.2):
        with pytest.raises(ValueError):
            BinSystem(5, q)
    with pytest.raises(ValueError):
        BinSystem(0, 0.1)
    with pytest.raises(ValueError):
        BinSystem(5, 0.1, tail="sideways")


def test_loads_of_five(five):
    loads = compute_loads(five, BinSystem(5, 0.5))
    assert loads.total.tolist() == [1, 1, 0, 1, 0]
    assert loads.null.tolist() == [0, 0, 0, 1, 0]
    assert loads.alt.tolist() == [1, 1, 0, 0, 0]
    assert loads.tail_null == 2
    assert loads.tail_total == 2
    assert prefix_load(loads, "total", 4) == 3
    assert prefix_load(loads, "null", 4) == 1
    assert prefix_load(loads, "alt", 4) == 2
    assert prefix_load(loads, "total", 0) == 0


def test_loads_all_ones_and_empty():
    n = 7
    pv = LabeledPValues(np.arange(n), np.ones(n), np.ones(n, dtype=bool))
    loads = compute_loads(pv, BinSystem(n, 0.3))
    assert loads.total.sum() == 0
    assert loads.tail_total == n
    assert prefix_load(loads, "total", n) == 0

    empty = LabeledPValues([], [], [])
    loads = compute_loads(empty, BinSystem(5, 0.5))
    assert loads.total.sum() == 0 and loads.tail_total == 0


def test_prefix_load_domain(five):
    loads = compute_loads(five, BinSystem(5, 0.5))
    with pytest.raises(ValueError):
        prefix_load(loads, "total", 6)
    with pytest.raises(ValueError):
        prefix_load(loads, "mixed", 2)


def test_upper_tail_leaves_middle_unbinned():
    pv = LabeledPValues([1, 2, 3], [0.05, 0.5, 0.95], [True, True, True])
    loads = compute_loads(pv, BinSystem(3, 0.1, tail="upper"))
    assert loads.total.sum() == 1
    assert loads.tail_null == 1  # 0.5 sits in neither region

    # for q > 1/2 the upper tail overlaps the bins
    loads = compute_loads(pv, BinSystem(3, 0.8, tail="upper"))
    assert loads.total.sum() == 2
    assert loads.tail_total == 2


def test_from_counts_validation():
    with pytest.raises(ValueError):
        BinLoads.from_counts([1, 0], [2, 0])
    with pytest.raises(ValueError):
        BinLoads.from_counts([1, 0], [0, 0], tail_total=1, tail_null=2)


def test_labeled_pvalues_validation():
    with pytest.raises(ValueError):
        LabeledPValues([1, 1], [0.1, 0.2], [True, False])
    with pytest.raises(ValueError):
        LabeledPValues([1, 2], [0.1, 1.2], [True, False])
    with pytest.raises(ValueError):
        LabeledPValues([1, 2], [0.1, np.nan], [True, False])
    with pytest.raises(ValueError):
        LabeledPValues([1, 2], [0.1], [True, False])


def test_with_values_keeps_original(five):
    moved = five.with_values([4], 0.4)
    assert five.p[4] == 0.9
    assert moved.p[4] == 0.4
    assert moved.ids.tolist() == five.ids.tolist()


@given(
    st.lists(st.floats(0, 1), min_size=1, max_size=40),
    st.sampled_from([0.05, 0.1, 0.3, 0.5, 0.8]),
)
def test_load_invariants(ps, q):
    n = len(ps)
    pv = LabeledPValues(np.arange(n), ps, np.arange(n) % 2 == 0)
    bins = BinSystem(n, q)
    loads = compute_loads(pv, bins)
    assert (loads.total == loads.null + loads.alt).all()
    assert loads.tail_total == loads.tail_null + loads.tail_alt
    assert (np.diff(loads.prefix_total) >= 0).all()
    # default tail is the complement of the bins
    assert loads.prefix_total[n] + loads.tail_total == n
    for i in range(n + 1):
        assert loads.prefix_total[i] == int((pv.p <= bins.edge(i)).sum()) or i == 0


def test_csv_round_trip(tmp_path, five):
    path = tmp_path / "pv.csv"
    write_pvalues_csv(five, path)
    back = read_pvalues_csv(path)
    assert back.ids.tolist() == five.ids.tolist()
    assert back.p.tolist() == five.p.tolist()
    assert back.is_null.tolist() == five.is_null.tolist()


@pytest.mark.parametrize(
    "body, line",
    [
        ("id,p,label\n1,0.1,0\n", 1),
        ("test_id,p_value,label\n1,0.1,0\n2,abc,1\n", 3),
        ("test_id,p_value,label\n1,0.1,2\n", 2),
        ("test_id,p_value,label\n1,0.1\n", 2),
        ("test_id,p_value,label\n1,-0.1,0\n", 2),
    ],
)
def test_csv_schema_errors_carry_line(tmp_path, body, line):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(SchemaError) as err:
        read_pvalues_csv(path)
    assert err.value.line == line


def test_csv_duplicate_ids(tmp_path):
    path = tmp_path / "dup.csv"
    path.write_text("test_id,p_value,label\n1,0.1,0\n1,0.2,1\n")
    with pytest.raises(SchemaError):
        read_pvalues_csv(path)
