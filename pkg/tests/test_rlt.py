import numpy as np
import pytest

from qploc.errors import SizeGuard
from qploc.instance import DenseQuad
from qploc.oracle import enumerate_optimal
from qploc.rlt import CONFIGS, FAMILIES, build_lp, integral_point, lp_bound, percent_gap

from conftest import VARIANT_NAMES, make_instance, random_assignment

ORDERED = ["RL3", "RL4", "RL5", "RL6", "RL7", "RL8"]


def row_names(model):
    return {r[4] for r in model.rows}


@pytest.mark.parametrize("n", [4, 5, 6])
def test_assignment_products_count(n):
    model = build_lp(make_instance(n, 0, "cphmpsa"), "RL2")
    names = [model.rows[r][4] for r in model.families["ASSIGN"]]
    lower = [s for s in names if int(s.split("_")[2]) < int(s.split("_")[3])]
    assert len(lower) == n * n * (n - 1) // 2
    assert len(names) == 2 * len(lower)


def test_every_config_contains_rl2():
    inst = make_instance(5, 1, "cphmpsa")
    rl2 = row_names(build_lp(inst, "RL2"))
    rl1 = row_names(build_lp(inst, "RL1"))
    for cfg in ORDERED:
        rows = row_names(build_lp(inst, cfg))
        assert rl2 <= rows <= rl1


def test_zero_interaction_gives_linear_bound():
    inst = make_instance(5, 2, "cphmpsa")
    inst = inst.replace(q=DenseQuad.zeros(5))
    linear = lp_bound(inst, ())
    for cfg in CONFIGS:
        assert lp_bound(inst, cfg) == pytest.approx(linear, rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("variant", VARIANT_NAMES)
def test_integral_points_satisfy_all_rows(variant, rng):
    inst = make_instance(5, 3, variant, p=2)
    model = build_lp(inst, list(FAMILIES))
    _, _, pool = enumerate_optimal(inst)
    points = [s.assign for s in pool] + [tuple(random_assignment(inst, rng)) for _ in range(5)]
    for a in points:
        vec = integral_point(inst, a, model.index)
        if variant.startswith("c") and a not in [s.assign for s in pool]:
            continue
        assert model.max_violation(vec) <= 1e-9
        assert model.objective_value(vec) == pytest.approx(
            float(inst.f[list(set(a))].sum() + inst.c[np.arange(5), a].sum() + inst.q.total(np.array(a))))


@pytest.mark.parametrize("seed", range(3))
@pytest.mark.parametrize("variant", VARIANT_NAMES)
def test_bound_ordering(seed, variant):
    inst = make_instance(6, 40 + seed, variant, p=2)
    _, opt, _ = enumerate_optimal(inst)
    bounds = {cfg: lp_bound(inst, cfg) for cfg in CONFIGS}
    tol = 1e-7 * max(1.0, opt)
    assert bounds["STD"] <= bounds["RL2"] + tol
    for cfg in ORDERED:
        assert bounds["RL2"] <= bounds[cfg] + tol
        assert bounds[cfg] <= bounds["RL1"] + tol
    assert bounds["RL1"] <= opt + tol
    assert percent_gap(opt, bounds["RL1"]) <= percent_gap(opt, bounds["RL2"]) + 1e-9


def test_size_guard():
    with pytest.raises(SizeGuard):
        build_lp(make_instance(6, 0), "RL2", max_n=5)


def test_unknown_family():
    with pytest.raises(ValueError):
        build_lp(make_instance(4, 0), ["NOPE"])
