import numpy as np
import pytest

from dualsmooth.atoms import FULL_SPACE, FeasibleSet, atom_huber, atom_l1, atom_linear, atom_sq_l2, atom_zero
from dualsmooth.conjugate import (
    SmoothedConjugate,
    UnsupportedConjugateError,
    brute_force_conjugate,
    conjugate_grad,
    conjugate_value,
)

UNIT_BOX = FeasibleSet("inf_ball", radius=1.0)


def l1_conj(gamma):
    return SmoothedConjugate(atom_l1(), atom_sq_l2(), gamma, FULL_SPACE)


def box_conj(gamma, b):
    return SmoothedConjugate(atom_linear(b), atom_sq_l2(), gamma, UNIT_BOX)


def families():
    yield "l1", lambda g, dim: l1_conj(g)
    yield "linear_box", lambda g, dim: box_conj(g, np.linspace(-0.5, 0.5, dim))
    yield "huber_prox", lambda g, dim: SmoothedConjugate(atom_huber(), atom_sq_l2(), g, FULL_SPACE)
    yield "zero_box", lambda g, dim: SmoothedConjugate(atom_zero(), atom_sq_l2(), g, UNIT_BOX)


FAMILIES = list(families())


def test_value_examples():
    assert conjugate_value(l1_conj(1.0), [2.0]) == pytest.approx(0.5)
    assert conjugate_value(l1_conj(1.0), [0.5]) == 0.0
    assert conjugate_value(box_conj(1.0, [0.0]), [3.0]) == pytest.approx(2.5)


def test_grad_examples():
    assert conjugate_grad(l1_conj(1.0), [2.0]) == pytest.approx([1.0])
    assert conjugate_grad(l1_conj(1.0), [0.0]) == pytest.approx([0.0])
    assert conjugate_grad(box_conj(1.0, [0.0]), [3.0]) == pytest.approx([1.0])


def test_examples_against_oracle():
    val, arg = brute_force_conjugate(atom_l1(), atom_sq_l2(), 1.0, FULL_SPACE, [2.0], 4.0, 1e-5)
    assert (val, arg[0]) == pytest.approx((0.5, 1.0), abs=1e-8)
    val, arg = brute_force_conjugate(atom_linear([0.0]), atom_sq_l2(), 1.0, UNIT_BOX, [3.0], 4.0, 1e-5)
    assert (val, arg[0]) == pytest.approx((2.5, 1.0), abs=1e-8)


def test_family_tags_and_unsupported():
    assert l1_conj(1.0).family == "l1"
    assert box_conj(1.0, [0.0]).family == "linear_box"
    assert SmoothedConjugate(atom_zero(), atom_sq_l2(), 1.0, UNIT_BOX).family == "projection"
    odd = SmoothedConjugate(atom_l1(), atom_huber().__class__(**{**atom_huber().__dict__,
                                                                  "strong_convexity": 1.0}), 1.0)
    with pytest.raises(UnsupportedConjugateError):
        conjugate_value(odd, [1.0])
    with pytest.raises(ValueError):
        SmoothedConjugate(atom_l1(), atom_l1(), 1.0)
    with pytest.raises(ValueError):
        SmoothedConjugate(atom_l1(), atom_sq_l2(), 0.0)


def test_oracle_limits():
    val, _ = brute_force_conjugate(atom_l1(), atom_sq_l2(), 1e6, FULL_SPACE, [1.0], 2.0, 1e-5)
    assert val <= 1e-5
    v = np.array([0.7, -1.3])
    val, arg = brute_force_conjugate(atom_zero(), atom_sq_l2(), 2.0, FULL_SPACE, v, 3.0, 1e-4)
    assert val == pytest.approx(v @ v / 4.0, abs=1e-7)
    assert arg == pytest.approx(v / 2.0, abs=1e-4)
    with pytest.raises(ValueError):
        brute_force_conjugate(atom_l1(), atom_sq_l2(), 1.0, FULL_SPACE, [5.0], 5.0, 1e-3)
    with pytest.raises(ValueError):
        brute_force_conjugate(atom_l1(), atom_sq_l2(), 1.0, FULL_SPACE, np.ones(3), 5.0, 0.1,
                              full_grid=True)


@pytest.mark.parametrize("name,make", FAMILIES, ids=[f[0] for f in FAMILIES])
def test_scalar_oracle_agreement(name, make):
    rng = np.random.default_rng(10)
    for _ in range(25):
        gamma = rng.choice([0.5, 1.0, 2.0])
        c = make(gamma, 1)
        v = rng.uniform(-3, 3, size=1)
        shift = c.base.params.get("b", np.zeros(1))
        radius = np.max(np.abs(v - shift)) / gamma + 1.5
        val, arg = brute_force_conjugate(c.base, c.regularizer, gamma, c.fset, v, radius, 1e-5)
        assert conjugate_value(c, v) == pytest.approx(val, abs=1e-4)
        assert conjugate_grad(c, v) == pytest.approx(arg, abs=1e-4)


@pytest.mark.parametrize("name,make", FAMILIES, ids=[f[0] for f in FAMILIES])
def test_two_dim_full_grid_agreement(name, make):
    rng = np.random.default_rng(11)
    for _ in range(2):
        c = make(1.0, 2)
        v = rng.uniform(-1.5, 1.5, size=2)
        shift = c.base.params.get("b", np.zeros(2))
        radius = np.max(np.abs(v - shift)) + 1.2
        val, _ = brute_force_conjugate(c.base, c.regularizer, 1.0, c.fset, v, radius, 1e-3,
                                       full_grid=True)
        assert conjugate_value(c, v) == pytest.approx(val, abs=1e-3)


@pytest.mark.parametrize("name,make", FAMILIES, ids=[f[0] for f in FAMILIES])
def test_finite_difference_gradient(name, make):
    rng = np.random.default_rng(12)
    c = make(0.8, 3)
    h = 1e-6
    for _ in range(100):
        v = rng.uniform(-3, 3, size=3)
        g = conjugate_grad(c, v)
        fd = np.array([(conjugate_value(c, v + h * e) - conjugate_value(c, v - h * e)) / (2 * h)
                       for e in np.eye(3)])
        assert np.linalg.norm(fd - g) <= 1e-5 * max(1.0, np.linalg.norm(g))


@pytest.mark.parametrize("name,make", FAMILIES, ids=[f[0] for f in FAMILIES])
@pytest.mark.parametrize("gamma", [0.1, 1.0, 10.0])
def test_gradient_lipschitz_bound(name, make, gamma):
    c = make(gamma, 4)
    rng = np.random.default_rng(13)
    bound = c.smoothness_bound + 1e-9
    for _ in range(500):
        v1, v2 = rng.normal(scale=3 * max(gamma, 1), size=(2, 4))
        gap = np.linalg.norm(conjugate_grad(c, v1) - conjugate_grad(c, v2))
        assert gap <= bound * np.linalg.norm(v1 - v2)


@pytest.mark.parametrize("name,make", FAMILIES, ids=[f[0] for f in FAMILIES])
def test_convexity_and_fenchel_young(name, make):
    c = make(0.7, 3)
    rng = np.random.default_rng(14)
    for _ in range(200):
        v1, v2 = rng.normal(scale=2, size=(2, 3))
        assert conjugate_value(c, 0.5 * (v1 + v2)) <= \
            0.5 * (conjugate_value(c, v1) + conjugate_value(c, v2)) + 1e-12
        u = c.fset.project(rng.normal(scale=2, size=3))
        lower = u @ v1 - c.base(u) - c.gamma * c.regularizer(u)
        assert conjugate_value(c, v1) >= lower - 1e-10
