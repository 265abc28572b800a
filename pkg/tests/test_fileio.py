import json
import math

import numpy as np
import pytest

from bridgelab import (
    DiscreteMeasure,
    PairMeasure,
    TrapPotential,
    build_grid,
    fk_kernel_grid,
    load_kernel,
    load_measure,
    load_pair_measure,
    load_report,
    read_table,
    save_kernel,
    save_measure,
    save_pair_measure,
    save_report,
    write_table,
)


def test_table_round_trip_is_bit_exact(tmp_path):
    path = str(tmp_path / "t.csv")
    floats = np.array([0.1, -1.0 / 3.0, 1e300, 1e-300, math.pi, 0.0])
    ints = np.arange(6) * 10**12
    write_table(path, {"f": floats, "k": ints}, {"tag": "demo", "n": 6, "x": 0.25, "ok": True})
    meta, cols = read_table(path)
    np.testing.assert_array_equal(cols["f"], floats)
    assert cols["f"].dtype == np.float64
    np.testing.assert_array_equal(cols["k"], ints)
    assert cols["k"].dtype == np.int64
    assert meta == {"tag": "demo", "n": 6, "x": 0.25, "ok": True}


def test_table_validation(tmp_path):
    path = str(tmp_path / "t.csv")
    with pytest.raises(ValueError):
        write_table(path, {})
    with pytest.raises(ValueError):
        write_table(path, {"a": np.ones((2, 2))})
    with pytest.raises(ValueError):
        write_table(path, {"a": np.ones(3), "b": np.ones(4)})
    for bad in ("a,b", "a=b", "a\nb"):
        with pytest.raises(ValueError):
            write_table(path, {"a": np.ones(2)}, {"k": bad})


def test_read_table_requires_header(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("# only=meta\n")
    with pytest.raises(ValueError):
        read_table(str(path))


def test_measure_round_trip(tmp_path):
    g = build_grid((-1.5, 2.5), 17)
    rng = np.random.default_rng(0)
    m = DiscreteMeasure.probability(g, rng.uniform(0.1, 1.0, 17))
    path = str(tmp_path / "m.csv")
    save_measure(path, m)
    back = load_measure(path)
    assert back.grid == g
    assert back.is_probability
    np.testing.assert_array_equal(back.weights, m.weights)

    save_measure(path, DiscreteMeasure.lebesgue(g))
    assert not load_measure(path).is_probability


def test_measure_kind_checked(tmp_path):
    path = str(tmp_path / "t.csv")
    write_table(path, {"a": np.ones(2)}, {"kind": "other"})
    with pytest.raises(ValueError):
        load_measure(path)
    with pytest.raises(ValueError):
        load_pair_measure(path)
    with pytest.raises(ValueError):
        load_kernel(path)


def test_pair_measure_sparse_round_trip(tmp_path):
    g = build_grid((0.0, 1.0), 5)
    w = np.zeros((5, 5))
    w[1, 3] = 0.7
    w[2, 2] = 1.0 / 7.0
    q = PairMeasure(g, w)
    path = str(tmp_path / "q.csv")
    save_pair_measure(path, q)
    back = load_pair_measure(path)
    assert back.grid == g
    np.testing.assert_array_equal(back.weights, w)
    # only two support rows are stored
    _, cols = read_table(path)
    assert cols["i"].shape == (2,)


def test_kernel_round_trip(tmp_path):
    g = build_grid((0.0, math.pi), 21)
    W = TrapPotential.hard_wall(((0.0, math.pi),))
    K = fk_kernel_grid(W, 0.3, g, steps=40)
    path = str(tmp_path / "k.csv")
    save_kernel(path, K)
    back = load_kernel(path)
    assert back.grid == g
    assert back.beta == K.beta
    assert back.steps == K.steps
    assert back.undermixed == K.undermixed
    np.testing.assert_array_equal(back.matrix, K.matrix)


def test_report_is_deterministic(tmp_path):
    rep = {"b": [1, 2.5, True], "a": {"z": np.float64(0.1), "y": np.int32(3)}}
    p1 = tmp_path / "r1.json"
    p2 = tmp_path / "r2.json"
    save_report(str(p1), rep)
    save_report(str(p2), {"a": {"y": 3, "z": 0.1}, "b": [1, 2.5, True]})
    assert p1.read_bytes() == p2.read_bytes()
    assert load_report(str(p1)) == {"b": [1, 2.5, True], "a": {"z": 0.1, "y": 3}}
    # keys are sorted in the file itself
    text = p1.read_text()
    assert text.index('"a"') < text.index('"b"')


def test_report_degrades_non_finite_to_strings(tmp_path):
    path = str(tmp_path / "r.json")
    save_report(path, {"v": float("inf"), "w": float("nan"), "arr": np.array([1.0, np.inf])})
    loaded = json.loads(open(path).read())
    assert loaded["v"] == "inf"
    assert loaded["w"] == "nan"
    assert loaded["arr"] == [1.0, "inf"]
