import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qaepp.attacks import AttackConfig, attack, fgsm, fgsm_sweep, input_gradient, pgd, with_epsilon
from qaepp.vqc import VQCClassifier


@pytest.fixture(scope="module")
def model():
    return VQCClassifier(n_qubits=4, n_layers=3, n_classes=4, seed=2).init_params()


@pytest.fixture(scope="module")
def batch():
    rng = np.random.default_rng(0)
    return rng.random((200, 16)), rng.integers(0, 4, size=200)


def test_zero_budget_is_identity(model, batch):
    X, y = batch
    np.testing.assert_array_equal(fgsm(model, X[:5], y[:5], 0.0), X[:5])
    np.testing.assert_array_equal(pgd(model, X[:5], y[:5], AttackConfig("pgd", 0.0)), X[:5])


def test_saturated_pixel_stays_at_one(model):
    x = np.full((1, 16), 0.5)
    x[0, ::2] = 1.0
    g = input_gradient(model, x, [1])[0]
    hit = (x[0] == 1.0) & (g > 0)
    assert hit.any()
    assert np.all(fgsm(model, x, [1], 0.2)[0, hit] == 1.0)


def test_single_step_pgd_is_fgsm(model, batch):
    X, y = batch
    for eps in (0.05, 0.3):
        a = pgd(model, X, y, AttackConfig("pgd", eps, pgd_steps=1, pgd_alpha=eps))
        assert np.max(np.abs(a - fgsm(model, X, y, eps))) <= 1e-12


def test_budget_exact_on_interior_pixels(model, batch):
    X, y = batch
    X = 0.2 + 0.6 * X[:20]
    adv = fgsm(model, X, y[:20], 0.1)
    g = input_gradient(model, X, y[:20])
    moved = np.abs(g) > 0
    np.testing.assert_allclose(np.abs(adv - X)[moved], 0.1, atol=1e-15)


def test_pgd_dominates_fgsm(model, batch):
    X, y = batch
    eps = 0.1
    lf = model.loss(fgsm(model, X, y, eps), y)
    lp = model.loss(pgd(model, X, y, AttackConfig("pgd", eps)), y)
    assert np.mean(lp >= lf - 1e-9) >= 0.9


def test_targeted_lowers_target_loss(model, batch):
    X, _ = batch
    target = np.full(len(X), 2)
    adv = fgsm(model, X, None, 0.05, targeted=True, target=2)
    assert model.loss(adv, target).mean() < model.loss(X, target).mean()


def test_sweep_matches_individual_calls(model, batch):
    X, y = batch
    out = fgsm_sweep(model, X[:10], y[:10], [0.0, 0.1, 0.3])
    for eps, adv in out.items():
        np.testing.assert_array_equal(adv, fgsm(model, X[:10], y[:10], eps))


@settings(max_examples=25, deadline=None)
@given(
    st.sampled_from(["fgsm", "pgd"]),
    st.floats(0.0, 1.0),
    st.integers(1, 4),
    st.integers(0, 2**32 - 1),
)
def test_budget_and_range(kind, eps, steps, seed):
    m = VQCClassifier(n_qubits=3, n_layers=2, n_classes=3, seed=seed % 7).init_params()
    rng = np.random.default_rng(seed)
    X = rng.random((8, 8))
    X[rng.random(X.shape) < 0.2] = 0.0
    y = rng.integers(0, 3, size=8)
    adv = attack(m, X, y, AttackConfig(kind, eps, pgd_steps=steps))
    assert np.max(np.abs(adv - X)) <= eps + 1e-12
    assert adv.min() >= 0.0 and adv.max() <= 1.0


class TestConfig:
    def test_default_alpha(self):
        assert AttackConfig("pgd", 0.2).alpha == pytest.approx(0.05)

    def test_validation(self):
        with pytest.raises(ValueError):
            AttackConfig("cw", 0.1)
        with pytest.raises(ValueError):
            AttackConfig("fgsm", 1.5)
        with pytest.raises(ValueError):
            AttackConfig("pgd", 0.1, pgd_steps=0)
        with pytest.raises(ValueError):
            AttackConfig("fgsm", 0.1, targeted=True)

    def test_metadata(self):
        meta = with_epsilon(AttackConfig("PGD", 0.1), 0.3).metadata()
        assert meta["kind"] == "pgd" and meta["epsilon"] == 0.3 and meta["pgd_steps"] == 10
        assert AttackConfig("fgsm", 0.1).metadata()["pgd_alpha"] is None
