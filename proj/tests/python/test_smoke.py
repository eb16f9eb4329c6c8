"""Smoke tests for the python bindings."""

import math

import pytest

import pukit


def test_version_and_rng_id():
    assert pukit.__version__ == "0.1.0"
    assert "mt19937_64" in pukit.RNG_ALGORITHM


def test_sigmoid_loss_values():
    assert pukit.sigmoid_loss(0.0, 1) == 0.5
    assert pukit.sigmoid_loss(2.0, 1) == pytest.approx(1.0 / (1.0 + math.exp(2.0)))
    z = 1.37
    assert pukit.sigmoid_loss(z, 1) + pukit.sigmoid_loss(z, -1) == pytest.approx(1.0, abs=1e-12)


def test_pu_losses_and_reduction():
    rc = pukit.risk_components([2.0, -1.0, 0.0], [1, 1, 0])
    assert rc.n_pos == 2 and rc.n_unl == 1
    cfg = pukit.PULossConfig(pi=0.1, pi_prime=0.1)
    assert pukit.imbnnpu_loss(rc, cfg) == pytest.approx(
        pukit.nnpu_loss(rc, cfg), abs=1e-12
    )


def test_contrastive_pieces():
    cfg = pukit.ContrastiveConfig(tau=0.5, tau_plus=0.0)
    assert pukit.pair_similarity([1.0, 0.0], [1.0, 0.0], 0.5) == pytest.approx(
        math.exp(2.0)
    )
    rows = [[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]]
    d_u = pukit.debiased_negative_estimate(rows, 2, 2, 0, 0, cfg)
    assert d_u == pytest.approx(1.0)
    obj = pukit.batch_contrastive_objective(rows, 2, 2, cfg)
    assert obj == pytest.approx(-math.log(math.exp(2.0) / (math.exp(2.0) + 2.0)))


def test_metrics():
    assert pukit.auc([0.9, 0.5, 0.1], [1, -1, 1]) == 0.5
    assert pukit.f1_score([1, 1, -1, 1, -1], [1, 1, 1, -1, -1]) == pytest.approx(2 / 3)
    assert pukit.accuracy([1, -1], [1, 1]) == 0.5


def test_theory_checks():
    lemma = pukit.lemma1_numeric_check(trials=200, dims=6, seed=3)
    assert lemma["violations"] == 0
    eq = pukit.equivalence_check(trials=200, seed=4)
    assert eq["max_abs_diff"] <= 1e-12


def test_synthesis_counts():
    src = pukit.gaussian_mixture(n=1100, d=4, ratio="1:10", separation=8.0, seed=5)
    pu = pukit.scar_label_split(src, [1], "1:10", c=0.2, seed=6)
    assert pu.n == 1100
    assert pu.count_labeled() == 20  # round(0.2 * 100)
    assert pu.pi_true == pytest.approx(80 / 1080)


def test_tiny_pipeline(tmp_path):
    src = pukit.gaussian_mixture(n=660, d=6, ratio="1:10", separation=8.0, seed=11)
    train = pukit.scar_label_split(src, [1], "1:10", c=0.5, seed=12)
    test_src = pukit.gaussian_mixture(n=200, d=6, ratio="1:1", separation=8.0, seed=13)
    test = pukit.scar_label_split(test_src, [1], "1:1", c=0.5, seed=14)

    encoder, projector, trace = pukit.pretrain(
        train, epochs=3, batch_size=64, encoder=[6, 16, 8], proj_dim=4, seed=15
    )
    assert len(trace) == 3
    assert "mlp(6-16-8)" == encoder.architecture()

    clf, losses = pukit.train_classifier(encoder, train, epochs=25, seed=16)
    assert len(losses) == 25
    rec = pukit.evaluate_model(encoder, clf, test)
    assert rec.auc > 0.9  # separation-8 clusters are easy

    path = tmp_path / "enc.json"
    pukit.save_encoder(encoder, path)
    back = pukit.load_encoder(path)
    rec2 = pukit.evaluate_model(back, clf, test)
    assert rec2.auc == rec.auc


def test_baselines_and_sweep():
    src = pukit.gaussian_mixture(n=660, d=6, ratio="1:10", separation=8.0, seed=21)
    train = pukit.scar_label_split(src, [1], "1:10", c=0.5, seed=22)
    test_src = pukit.gaussian_mixture(n=200, d=6, ratio="1:1", separation=8.0, seed=23)
    test = pukit.scar_label_split(test_src, [1], "1:1", c=0.5, seed=24)

    # 1:10 data: the supervised wBCE weight is the negative:positive ratio
    assert pukit.wbce_positive_weight(train, "true") == pytest.approx(10.0)

    enc, clf, losses = pukit.train_scratch(train, [6, 16, 8], epochs=10, seed=25)
    assert len(losses) == 10
    assert pukit.evaluate_model(enc, clf, test).n_test == test.n

    sup_clf, _ = pukit.train_supervised_baseline(enc, train, epochs=40, seed=26)
    assert pukit.evaluate_model(enc, sup_clf, test).auc > 0.5

    rows = pukit.prior_sweep(enc, train, test, factors=[0.5, 1.0], epochs=3, seed=27)
    assert len(rows) == 2 * 3
    assert rows[0]["b_dis"] == 0.5
    assert 0.0 <= rows[-1]["auc"] <= 1.0


def test_errors_surface_as_python_exceptions():
    with pytest.raises(pukit.PukitError):
        pukit.auc([0.5, 0.5], [1, 1])  # single class
