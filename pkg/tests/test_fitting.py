import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_joint, random_local_model, random_process
from oracles import tv_grid_anticorrelated
from qrecall import JointDistribution, LocalModel, ProcessSpec, SearchParams, eval_classical, fit_local_model
from qrecall.errors import StructureError, UsageError
from qrecall.fitting import distance

TV_GRID_OPTIMUM = tv_grid_anticorrelated(0.001)


def test_grid_oracle_value():
    # sqrt(2) - 1 is the analytic minimiser's value; the grid sits just above it
    assert TV_GRID_OPTIMUM == pytest.approx(0.414302, abs=1e-6)
    assert TV_GRID_OPTIMUM >= np.sqrt(2) - 1 - 1e-12


def test_distance_metrics(anti):
    u = JointDistribution.uniform((2, 2))
    assert distance(anti, u, "tv") == pytest.approx(0.5)
    assert distance(anti, u, "l2") == pytest.approx(0.5)
    assert distance(anti, u, "kl") == pytest.approx(np.log(2), abs=1e-9)
    assert distance(anti, anti, "kl") == pytest.approx(0.0, abs=1e-15)


def test_kl_with_zero_model_entries_is_finite(anti):
    point = JointDistribution.point_mass((2, 2), (0, 0))
    assert np.isfinite(distance(anti, point, "kl"))


def test_unknown_metric(anti, oblivious2):
    with pytest.raises(UsageError):
        fit_local_model(anti, oblivious2, "hellinger")


def test_bad_grid_step(anti, oblivious2):
    with pytest.raises(UsageError):
        fit_local_model(anti, oblivious2, params=SearchParams(grid_step=0.0))


def test_target_structure_checked(oblivious2):
    with pytest.raises(StructureError):
        fit_local_model(JointDistribution.uniform((3, 2)), oblivious2)


def test_anticorrelated_tv_gap(anti, oblivious2):
    rep = fit_local_model(anti, oblivious2, "tv", SearchParams(seed=0, restarts=2))
    assert rep.distance == pytest.approx(TV_GRID_OPTIMUM, abs=2e-3)
    assert rep.distance >= np.sqrt(2) - 1 - 1e-9


@pytest.mark.parametrize("metric, value", [("l2", 0.5), ("kl", np.log(2))])
def test_anticorrelated_other_metrics(anti, oblivious2, metric, value):
    rep = fit_local_model(anti, oblivious2, metric, SearchParams(seed=1, restarts=2))
    assert rep.distance == pytest.approx(value, abs=1e-3)


def test_feasible_target_fits_exactly():
    rng = np.random.default_rng(4)
    proc = random_process(rng, (2, 3, 2))
    target = eval_classical(random_local_model(rng, proc), proc)
    rep = fit_local_model(target, proc)
    assert rep.distance < 1e-6
    assert rep.restarts_used == 1 and rep.best_restart == 0


def test_point_mass_under_perfect_recall():
    proc = ProcessSpec.perfect_recall((2, 2, 2))
    rep = fit_local_model(JointDistribution.point_mass((2, 2, 2), (1, 0, 1)), proc)
    assert rep.distance < 1e-6


def test_same_seed_same_answer(anti, oblivious2):
    p = SearchParams(seed=9, restarts=2)
    a = fit_local_model(anti, oblivious2, "l2", p)
    b = fit_local_model(anti, oblivious2, "l2", p)
    assert a.distance == b.distance
    assert a.best_model == b.best_model


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), metric=st.sampled_from(["tv", "l2", "kl"]))
def test_fit_never_worse_than_uniform_and_reports_truthfully(seed, metric):
    rng = np.random.default_rng(seed)
    proc = random_process(rng, (2, 2, 2), max_labels=2)
    target = random_joint(rng, (2, 2, 2))
    rep = fit_local_model(target, proc, metric, SearchParams(seed=seed % 1000, restarts=1, max_iter=30))
    uniform = distance(target, eval_classical(LocalModel.uniform(proc), proc), metric)
    assert rep.distance <= uniform + 1e-12
    recomputed = distance(target, eval_classical(rep.best_model, proc), metric)
    assert abs(recomputed - rep.distance) <= 1e-9
    assert all(np.allclose(t.sum(axis=1), 1.0, atol=1e-12) for t in rep.best_model.tables)
