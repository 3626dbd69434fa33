import json

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from infbranch.instance import (
    SERIES_MODES,
    MipInstance,
    MpsError,
    SeriesSpec,
    generate_series,
    instances_equal,
    load_series,
    parse_mps,
    regenerate_series,
    write_mps,
    write_series,
)
from oracles import random_lp, random_mip

INF = np.inf


def _mps(rows, columns, rhs="", ranges="", bounds=""):
    parts = ["NAME t", "ROWS", rows, "COLUMNS", columns]
    if rhs:
        parts += ["RHS", rhs]
    if ranges:
        parts += ["RANGES", ranges]
    if bounds:
        parts += ["BOUNDS", bounds]
    parts.append("ENDATA")
    return "\n".join(parts) + "\n"


def test_single_l_row():
    inst = parse_mps(_mps(" N obj\n L c1", " x1 c1 1\n x2 c1 2", " rhs c1 4"))
    assert inst.m == 1 and inst.n == 2
    assert inst.row_lower[0] == -INF and inst.row_upper[0] == 4.0
    assert inst.A.indices.tolist() == [0, 1]
    assert inst.A.data.tolist() == [1.0, 2.0]
    assert inst.var_lower.tolist() == [0.0, 0.0]
    assert inst.var_upper.tolist() == [INF, INF]
    assert not inst.integer.any()


def test_fixed_bound():
    inst = parse_mps(_mps(" N obj\n L c1", " x1 c1 1", " rhs c1 4", bounds=" FX bnd x1 3"))
    assert inst.var_lower[0] == inst.var_upper[0] == 3.0


def test_senses_and_ranges():
    text = _mps(
        " N obj\n L a\n G b\n E c\n E d\n L e",
        " x a 1 b 1\n x c 1 d 1\n x e 1",
        " rhs a 4 b 2\n rhs c 5 d 5\n rhs e 3",
        " rng a 3 c 2\n rng d -2\n rng b 1",
    )
    inst = parse_mps(text)
    assert inst.row_lower.tolist() == [1.0, 2.0, 5.0, 3.0, -INF]
    assert inst.row_upper.tolist() == [4.0, 3.0, 7.0, 5.0, 3.0]


def test_bound_kinds():
    cols = "\n".join(f" {v} r 1" for v in ("a", "b", "c", "d", "e", "f", "g", "h"))
    bounds = "\n".join([
        " LO B a -2", " UP B a 5", " BV B b", " MI B c", " PL B d",
        " LI B e 1", " UI B e 4", " FR B f", " UP B g -1",
    ])
    inst = parse_mps(_mps(" N obj\n L r", cols, " rhs r 10", bounds=bounds))
    assert inst.var_lower.tolist() == [-2, 0, -INF, 0, 1, -INF, -INF, 0]
    assert inst.var_upper.tolist() == [5, 1, INF, INF, 4, INF, -1, INF]
    assert inst.integer.tolist() == [False, True, False, False, True, False, False, False]


def test_integer_markers_and_objective():
    inst = parse_mps(_mps(
        " N cost\n G r",
        " x cost 2 r 1\n M1 'MARKER' 'INTORG'\n y cost -1 r 1\n M2 'MARKER' 'INTEND'\n z r 1",
        " rhs r 1",
    ))
    assert inst.objective.tolist() == [2.0, -1.0, 0.0]
    assert inst.integer.tolist() == [False, True, False]


def test_extra_free_rows_are_dropped():
    inst = parse_mps(_mps(" N obj\n N spare\n L r", " x obj 1 spare 5\n x r 1", " rhs r 1"))
    assert inst.m == 1 and inst.objective.tolist() == [1.0]


@pytest.mark.parametrize("text, line", [
    (_mps(" N obj\n L c1", " x1 c1 1\n x1 c1 2", " rhs c1 4"), 7),
    (_mps(" N obj\n L c1", " x1 c9 1", " rhs c1 4"), 6),
    (_mps(" N obj\n L c1", " x1 c1 abc", " rhs c1 4"), 6),
    (_mps(" N obj\n L c1", " x1 c1 1", " rhs c1 4", bounds=" UP bnd y 1"), 10),
    ("NAME t\nCOLUMNS\n x1 c1 1\nROWS\n N obj\nENDATA\n", 2),
    ("NAME t\nROWS\n N obj\nRHS\n rhs c1 1\nENDATA\n", 4),
    (_mps(" N obj\n L c1\n L c1", " x1 c1 1"), 5),
])
def test_errors_carry_line_numbers(text, line):
    with pytest.raises(MpsError) as exc:
        parse_mps(text)
    assert exc.value.line == line
    assert f"line {line}" in str(exc.value)


def test_missing_endata():
    with pytest.raises(MpsError):
        parse_mps("NAME t\nROWS\n N obj\nCOLUMNS\n x obj 1\n")


def test_writer_emits_only_l_rows_when_lower_bounds_are_infinite():
    inst = MipInstance("w", [1.0, 1.0], sp.csr_matrix([[1.0, 2.0], [3.0, 0.0]]),
                       [-INF, -INF], [4.0, 5.0], [0, 0], [INF, INF], [False, False])
    text = write_mps(inst).decode()
    rows = text.split("ROWS\n")[1].split("COLUMNS")[0].split("\n")
    kinds = [r.split()[0] for r in rows if r.strip()]
    assert kinds == ["N", "L", "L"]
    assert "RANGES" not in text
    assert instances_equal(parse_mps(text), inst)


def test_writer_zero_objective_has_no_objective_entries():
    inst = MipInstance("z", [0.0, 0.0], sp.csr_matrix([[1.0, 1.0]]),
                       [1.0], [1.0], [0, 0], [1, 1], [True, False])
    text = write_mps(inst).decode()
    cols = text.split("COLUMNS\n")[1].split("RHS")[0]
    assert " OBJ " not in cols
    assert text.split("ROWS\n")[1].startswith(" N  OBJ")
    assert instances_equal(parse_mps(text), inst)


def test_writer_keeps_empty_columns():
    inst = MipInstance("e", [0.0, 0.0, 1.5], sp.csr_matrix([[1.0, 0.0, 0.0]]),
                       [-INF], [2.0], [0, -INF, -3], [1, INF, INF], [True, False, False])
    back = parse_mps(write_mps(inst))
    assert instances_equal(back, inst)


def _corpus():
    rng = np.random.default_rng(7)
    out = [random_lp(rng, name=f"lp{i}") for i in range(8)]
    out += [random_mip(rng, name=f"mip{i}") for i in range(8)]
    base = random_mip(rng, name="base")
    out += generate_series(SeriesSpec(base, "combined", count=6, epsilon=0.3, seed=3))
    # awkward floats and infinite bounds
    out.append(MipInstance(
        "odd", [1 / 3, -2e-17, 7e22], sp.csr_matrix([[0.1, 1e-300, -5.5], [0, 2 / 7, 1]]),
        [-INF, -1.25], [0.3, 1.25], [-INF, -1, 0.5], [INF, INF, 2.5], [False, True, True],
    ))
    return out


def test_round_trip_corpus():
    corpus = _corpus()
    assert len(corpus) >= 10
    for inst in corpus:
        # ranged rows store b+ and b+ - b-, so b- can move by one ulp
        once = parse_mps(write_mps(inst))
        assert instances_equal(once, inst, rtol=1e-12), inst.name
        assert instances_equal(parse_mps(write_mps(once)), once, rtol=1e-12)


# ---------------------------------------------------------------------------
# series generation
# ---------------------------------------------------------------------------

@pytest.fixture
def base():
    return random_mip(np.random.default_rng(11), name="base")


def test_zero_epsilon_gives_copies(base):
    for inst in generate_series(SeriesSpec(base, "obj", count=5, epsilon=0.0, seed=1)):
        assert instances_equal(inst.replace(name=base.name), base)


def test_obj_mode_touches_only_objective(base):
    for inst in generate_series(SeriesSpec(base, "obj", count=5, seed=1)):
        assert np.array_equal(inst.A.toarray(), base.A.toarray())
        assert np.array_equal(inst.row_upper, base.row_upper)
        nz = base.objective != 0
        ratio = inst.objective[nz] / base.objective[nz]
        assert np.all((ratio >= 0.9) & (ratio <= 1.1))
        assert np.all(inst.objective[~nz] == 0)


def test_mat_mode_keeps_pattern(base):
    for inst in generate_series(SeriesSpec(base, "mat", count=10, epsilon=0.5, seed=4)):
        assert np.array_equal(inst.A.indptr, base.A.indptr)
        assert np.array_equal(inst.A.indices, base.A.indices)
        ratio = inst.A.data / base.A.data
        assert np.all((ratio >= 0.5) & (ratio <= 1.5))


def test_rhs_mode_is_deterministic(base):
    spec = SeriesSpec(base, "rhs", count=8, seed=42)
    a = generate_series(spec)
    b = generate_series(spec)
    assert all(write_mps(x) == write_mps(y) for x, y in zip(a, b))
    assert any(not np.array_equal(x.row_upper, base.row_upper) for x in a)


def test_bnd_mode_rounds_integer_bounds_outward():
    inst = MipInstance("b", [1.0, 1.0], sp.csr_matrix([[1.0, 1.0]]), [-INF], [10.0],
                       [2.0, 2.0], [7.0, 7.0], [True, False])
    for s in generate_series(SeriesSpec(inst, "bnd", count=30, epsilon=0.2, seed=0)):
        lo, hi = s.var_lower[0], s.var_upper[0]
        assert lo == np.floor(lo) and hi == np.ceil(hi)
        assert lo <= 2.0 * 1.2 and hi >= 7.0 * 0.8


def test_spec_validation(base):
    with pytest.raises(ValueError):
        SeriesSpec(base, "obj", epsilon=1.0)
    with pytest.raises(ValueError):
        SeriesSpec(base, "obj", count=0)
    with pytest.raises(ValueError):
        SeriesSpec(base, "nope")


def _instance_from(data):
    n, m, seed = data
    rng = np.random.default_rng(seed)
    return random_lp(rng, n=n, m=m, box=(-5, 5))


@settings(max_examples=1000, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(
    st.tuples(st.integers(1, 6), st.integers(0, 6), st.integers(0, 2**32 - 1)),
    st.sampled_from(SERIES_MODES),
    st.floats(0.0, 0.99),
    st.integers(0, 2**32 - 1),
)
def test_series_keeps_instance_invariants(data, mode, eps, seed):
    base = _instance_from(data)
    for inst in generate_series(SeriesSpec(base, mode, count=2, epsilon=eps, seed=seed)):
        assert np.all(inst.row_lower <= inst.row_upper)
        assert np.all(inst.var_lower <= inst.var_upper)
        assert np.array_equal(inst.A.indptr, base.A.indptr)
        assert np.array_equal(inst.A.indices, base.A.indices)
        assert np.array_equal(np.isfinite(inst.row_lower), np.isfinite(base.row_lower))
        assert np.array_equal(np.isfinite(inst.row_upper), np.isfinite(base.row_upper))


def test_sidecar_regenerates_identical_series(base, tmp_path):
    out = write_series(SeriesSpec(base, "combined", count=6, seed=9), tmp_path / "s")
    meta = json.loads((out / "series.json").read_text())
    assert meta["mode"] == "combined" and meta["seed"] == 9 and len(meta["files"]) == 6
    again = regenerate_series(out)
    for fname, inst in zip(meta["files"], again):
        assert (out / fname).read_bytes() == write_mps(inst)


def test_load_series_orders_by_manifest(base, tmp_path):
    out = write_series(SeriesSpec(base, "obj", count=4, seed=0), tmp_path / "s")
    names = [name for name, _ in load_series(out)]
    assert names == sorted(names) and len(names) == 4
    listing = tmp_path / "list.txt"
    listing.write_text("\n".join(str(out / f"{n}.mps") for n in reversed(names)) + "\n")
    assert [name for name, _ in load_series(listing)] == list(reversed(names))


def test_instance_is_read_only(base):
    with pytest.raises(ValueError):
        base.objective[0] = 5.0
    with pytest.raises(ValueError):
        base.A.data[0] = 5.0


def test_invalid_instances_rejected():
    A = sp.csr_matrix([[1.0]])
    with pytest.raises(ValueError):
        MipInstance("x", [1.0], A, [2.0], [1.0], [0], [1], [False])
    with pytest.raises(ValueError):
        MipInstance("x", [1.0], A, [-INF], [INF], [0], [1], [False])
    with pytest.raises(ValueError):
        MipInstance("x", [1.0], A, [0.0], [1.0], [2], [1], [False])
