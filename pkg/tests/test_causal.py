import json

import numpy as np
import pandas as pd
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dgp import cate_data, linear_ate_data

from cautraj import kernels
from cautraj.causal import (CausalWeights, EffectDataset, GradientBoostingRegressor, WeightModel,
                            default_causal_graph, estimate_ate, estimate_cate, fit_gps,
                            normalize_weights, placebo_test, predict_weights,
                            train_weight_predictor)
from cautraj.causal.boosting import bin_features
from cautraj.errors import (InsufficientData, MissingColumn, ModelNotFitted, RankDeficient,
                            ZeroResidualVariance)
from cautraj.factors import OUTCOME, STAGE1_FACTORS, STAGE2_FACTORS, TREATMENT_CONDITIONERS

# ------------------------------------------------------------------ graph


def test_default_graph_is_a_dag_with_single_sink():
    g = default_causal_graph()
    assert g.is_acyclic()
    assert len(g.topological_order()) == len(g.nodes)
    assert g.sinks() == [OUTCOME]
    assert g.children(OUTCOME) == []


def test_eight_stage2_speeds_feed_risk():
    g = default_causal_graph()
    speeds = [f"{v}_v{a}2" for v in ("lc", "fo", "ft", "bt") for a in ("x", "y")]
    assert sorted(g.parents(OUTCOME)) == sorted(speeds)


def test_every_factor_in_edges_is_in_vocabulary():
    vocab = set(STAGE1_FACTORS) | set(STAGE2_FACTORS) | {OUTCOME}
    for a, b in default_causal_graph().edges:
        assert a in vocab and b in vocab


def test_cycle_is_detected():
    from cautraj.causal import CausalGraph

    assert not CausalGraph(["a", "b"], [("a", "b"), ("b", "a")]).is_acyclic()


# --------------------------------------------------------------- boosting

def test_constant_target_predicts_constant():
    X = np.random.default_rng(0).normal(size=(100, 3))
    model = GradientBoostingRegressor(n_estimators=20).fit(X, np.full(100, 4.2))
    assert np.allclose(model.predict(X), 4.2)


def test_step_function_is_learned():
    rng = np.random.default_rng(1)
    X = rng.uniform(-1, 1, size=(400, 2))
    y = np.where(X[:, 0] > 0.3, 5.0, -1.0)
    model = GradientBoostingRegressor(n_estimators=30, max_depth=1, learning_rate=0.5).fit(X, y)
    rmse = np.sqrt(np.mean((model.predict(X) - y) ** 2))
    assert rmse < 0.05 * (y.max() - y.min())


def test_zero_rounds_predicts_mean():
    X = np.arange(40.0)[:, None]
    y = X[:, 0] ** 2
    model = GradientBoostingRegressor(n_estimators=0).fit(X, y)
    assert np.allclose(model.predict(X), y.mean())


def test_boosting_json_round_trip_and_determinism():
    rng = np.random.default_rng(2)
    X, y = rng.normal(size=(200, 4)), rng.normal(size=200)
    a = GradientBoostingRegressor(n_estimators=15, subsample=0.7, random_state=3).fit(X, y)
    b = GradientBoostingRegressor(n_estimators=15, subsample=0.7, random_state=3).fit(X, y)
    assert np.array_equal(a.predict(X), b.predict(X))
    c = GradientBoostingRegressor.from_dict(json.loads(json.dumps(a.to_dict())))
    assert np.array_equal(a.predict(X), c.predict(X))


def test_boosting_errors():
    with pytest.raises(InsufficientData):
        GradientBoostingRegressor().fit(np.zeros((5, 1)), np.zeros(5))
    with pytest.raises(ModelNotFitted):
        GradientBoostingRegressor().predict(np.zeros((3, 1)))


@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=2, max_size=300),
       st.integers(2, 16))
def test_binning_respects_cuts(values, max_bins):
    X = np.array(values)[:, None]
    binned, cuts = bin_features(X, max_bins)
    c = cuts[0]
    assert len(c) <= max(max_bins, len(np.unique(X)) - 1)
    for k in range(len(c)):
        assert np.array_equal(X[:, 0] <= c[k], binned[:, 0] <= k)


# --------------------------------------------------------------------- GPS

def test_gps_exact_linear_treatment_is_flagged_degenerate():
    w = np.linspace(-1, 1, 50)
    gps = fit_gps(2.0 * w, w)
    assert gps.alpha1[0] == pytest.approx(2.0)
    assert gps.sigma2 == pytest.approx(0.0, abs=1e-20)
    assert gps.degenerate
    with pytest.raises(ZeroResidualVariance):
        gps.density(2.0 * w, w[:, None])


def test_gps_recovers_treatment_model():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        W = rng.normal(size=2000)
        T = 1.0 + 0.5 * W + rng.normal(scale=0.5, size=2000)
        gps = fit_gps(T, W)
        assert abs(gps.alpha0 - 1.0) < 0.05
        assert abs(gps.alpha1[0] - 0.5) < 0.05
        assert abs(gps.sigma2 - 0.25) < 0.03


def test_gps_constant_covariate_is_rank_deficient():
    with pytest.raises(RankDeficient):
        fit_gps(np.arange(50.0), np.ones(50))


def test_gps_needs_enough_rows():
    with pytest.raises(InsufficientData):
        fit_gps(np.arange(11.0), np.arange(11.0))


# --------------------------------------------------------------------- ATE

def test_ate_recovers_unit_effect():
    errs = [abs(estimate_ate(linear_ate_data(seed, 1.0)).ate - 1.0) for seed in range(20)]
    assert max(errs) < 0.1


def test_ate_null_effect():
    errs = [abs(estimate_ate(linear_ate_data(seed, 0.0)).ate) for seed in range(20)]
    assert max(errs) < 0.05


def test_ate_is_deterministic():
    d = linear_ate_data(3, 0.5)
    assert estimate_ate(d).to_dict() == estimate_ate(d).to_dict()


# -------------------------------------------------------------------- CATE

def test_cate_recovers_heterogeneity():
    data, theta = cate_data(0, lambda x: 1.0 + x)
    est = estimate_cate(data, seed=0)
    assert np.sqrt(np.mean((est.effects - theta) ** 2)) < 0.15
    assert est.effect_at([0.0])[0] == pytest.approx(1.0, abs=0.15)


def test_cate_homogeneous_effect():
    data, _ = cate_data(1, lambda x: np.full_like(x, 0.7))
    est = estimate_cate(data, seed=1)
    assert abs(est.mean - 0.7) < 0.1
    assert np.std(est.effects) < 0.15


def test_cate_is_bit_identical_for_same_seed():
    data, _ = cate_data(2, lambda x: 1.0 + x, n=400)
    a, b = estimate_cate(data, seed=9), estimate_cate(data, seed=9)
    assert np.array_equal(a.effects, b.effects)


def test_cate_preconditions():
    data, _ = cate_data(0, lambda x: x, n=80)
    with pytest.raises(InsufficientData):
        estimate_cate(data)
    no_x = EffectDataset("T", data.T, data.Y, data.W, data.covariates)
    with pytest.raises(MissingColumn):
        estimate_cate(no_x)


@pytest.mark.parametrize("backend", kernels.available_backends())
def test_local_theta_matches_weighted_ratio(backend):
    impl = kernels.get_backend(backend)
    rng = np.random.default_rng(4)
    x, yr, tr = rng.normal(size=60), rng.normal(size=60), rng.normal(size=60)
    q = np.array([-0.5, 0.0, 1.2])
    out = impl.local_theta(q, x, yr, tr, 0.4)
    for k, xq in enumerate(q):
        w = np.exp(-0.5 * ((x - xq) / 0.4) ** 2)
        assert out[k] == pytest.approx(np.sum(w * yr * tr) / np.sum(w * tr * tr), rel=1e-10)


# ------------------------------------------------------------------ placebo

def test_placebo_with_real_effect():
    rep = placebo_test(linear_ate_data(0, 1.0), "ate", 50, seed=0)
    assert rep.n_reps == 50 and len(rep.to_dict()["placebo"]) == 50
    assert rep.passed
    assert np.median(np.abs(rep.placebo)) < 0.05


def test_placebo_null_effect_does_not_pass():
    assert not placebo_test(linear_ate_data(0, 0.0), "ate", 50, seed=0).passed


def test_placebo_band_covers_zero_for_true_effect():
    covered = [(lambda r: r.lower <= 0.0 <= r.upper)(placebo_test(linear_ate_data(s, 1.0), "ate", 50, s))
               for s in range(20)]
    assert np.mean(covered) >= 0.95


def test_placebo_accepts_callable_and_rejects_unknown():
    rep = placebo_test(linear_ate_data(0, 1.0), lambda d: float(np.mean(d.T * d.Y)), 5, seed=0)
    assert rep.n_reps == 5
    with pytest.raises(ValueError):
        placebo_test(linear_ate_data(0, 1.0), "bogus", 5)


# ------------------------------------------------------------------ weights

def test_equal_raw_predictions_give_equal_weights():
    assert np.allclose(normalize_weights(np.full(6, 0.3)), 1.0 / 6)


def test_negative_prediction_gets_the_floor():
    raw = np.array([-0.4, 0.3, 0.5, 0.2, 0.3, 0.5])
    w = normalize_weights(raw)
    scale = 1.0 / (np.maximum(raw, 0).sum() + 6 * 0.02)
    assert w[0] == pytest.approx(0.02 * scale)
    assert w[0] == w.min() and np.sum(w == w.min()) == 1


@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=6, max_size=6),
       st.floats(0.1, 10))
def test_weights_positive_and_sum_to_budget(raw, budget):
    w = normalize_weights(raw, budget=budget)
    assert np.all(w > 0)
    assert w.sum() == pytest.approx(budget, abs=1e-9)


def _stage1_frame(n, seed):
    rng = np.random.default_rng(seed)
    return pd.DataFrame(rng.normal(size=(n, len(STAGE1_FACTORS))), columns=STAGE1_FACTORS)


def test_constant_cate_gives_constant_predictor():
    frame = _stage1_frame(200, 0)
    cate = {f"{sv}_vx2": np.full(200, 0.4) for sv in ("fo", "ft", "bt")}
    model = train_weight_predictor(frame, cate)
    for k in range(5):
        assert np.allclose(model.raw_predictions(frame.iloc[k].to_dict()), 0.4)
    assert len(model.test_rmse) == 6


def test_linear_cate_is_recoverable_and_model_round_trips(tmp_path):
    frame = _stage1_frame(600, 1)
    cate = {"fo_vx2": 0.5 * frame["lc_vx1"].to_numpy(),
            "ft_vx2": -0.3 * frame["d_lc_ftx1"].to_numpy(),
            "bt_vx2": frame["bt_vx1"].to_numpy()}
    model = train_weight_predictor(frame, cate, seed=2)
    for (kind, sv), rmse in model.test_rmse.items():
        assert rmse < 0.1 * np.std(cate[f"{sv}_vx2"])
    path = tmp_path / "w.json"
    model.save(path)
    again = WeightModel.load(path)
    row = frame.iloc[3].to_dict()
    a, b = predict_weights(again, row), predict_weights(model, row)
    assert np.array_equal(a.alpha, b.alpha) and np.array_equal(a.beta, b.beta)
    w = predict_weights(model, row)
    assert np.all(np.concatenate([w.alpha, w.beta]) > 0)
    assert w.alpha.sum() + w.beta.sum() == pytest.approx(1.0, abs=1e-9)


def test_weight_training_errors():
    frame = _stage1_frame(50, 0)
    cate = {f"{sv}_vx2": np.zeros(50) for sv in ("fo", "ft", "bt")}
    with pytest.raises(InsufficientData):
        train_weight_predictor(frame, cate)
    with pytest.raises(InsufficientData):
        train_weight_predictor(_stage1_frame(200, 0), {"fo_vx2": np.zeros(200)})


def test_causal_weights_validate():
    with pytest.raises(ValueError):
        CausalWeights([-1, 0, 0], [0, 0, 0])
    assert CausalWeights.from_dict(CausalWeights.zeros().to_dict()).alpha.sum() == 0.0


# ------------------------------------------------------------------ dataset

def test_dataset_drops_incomplete_rows_and_descendants():
    rng = np.random.default_rng(0)
    cols = list(STAGE1_FACTORS) + list(STAGE2_FACTORS) + [OUTCOME]
    frame = pd.DataFrame(rng.normal(size=(30, len(cols))), columns=cols)
    frame.loc[4, "ft_vx2"] = np.nan
    d = EffectDataset.from_frame(frame, "ft_vx2", TREATMENT_CONDITIONERS["ft_vx2"])
    assert d.n == 29 and 4 not in d.index
    assert "ft_vx2" not in d.covariates and "d_lc_ftx2" not in d.covariates
    assert d.X is not None
    with pytest.raises(MissingColumn):
        EffectDataset.from_frame(frame.drop(columns=[OUTCOME]), "ft_vx2")
