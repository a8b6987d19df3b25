"""
Tests for symplectic and extended-symplectic networks
"""
import numpy as np
import pytest

from pnnflow.errors import ConfigError
from pnnflow.nets.numcore import analytic_vjp, finite_diff_vjp, jacobian_fd, relative_error, seeded_rng
from pnnflow.nets.sympnet import (
    ActivationModule,
    ExtendedModule,
    GradientModule,
    LinearModule,
    build_sympnet,
    sympnet_from_dict,
    sympnet_to_dict,
)

# parameter draw scale per module or net kind (default 0.5)
PARAM_SCALE = {"linear": 0.1, "LA": 0.1}
FD_STEP = 1e-5
INSTANCES = 100


def symplectic_form(d: int) -> np.ndarray:
    j = np.zeros((2 * d, 2 * d))
    j[:d, d:] = np.eye(d)
    j[d:, :d] = -np.eye(d)
    return j


def jacobian(layer, x: np.ndarray) -> np.ndarray:
    """Exact Jacobian from one backward pass per output coordinate"""
    n = layer.dim_in
    jac = layer.backward(np.repeat(x[None], n, axis=0), np.eye(n))
    layer.zero_grad()
    return jac


def symplectic_defect(jac: np.ndarray, d: int) -> float:
    j = symplectic_form(d)
    return float(np.max(np.abs(jac.T @ j @ jac - j)))


def random_module(kind: str, d: int, rng) -> object:
    side = "up" if rng.random() < 0.5 else "low"
    if kind == "linear":
        module = LinearModule(d, sublayers=3, parity=side, rng=seeded_rng(0))
    elif kind == "activation":
        module = ActivationModule(d, side=side)
    elif kind == "gradient":
        module = GradientModule(d, width=6, side=side, rng=seeded_rng(0))
    else:
        module = ExtendedModule(d, 2 * d + 2, width=6, side=side, rng=seeded_rng(0))
    module.params.randomize(rng, scale=PARAM_SCALE.get(kind, 0.5))
    return module


def fd_jacobians(layer, rng, points: int = 5):
    """Central-difference Jacobians of a layer at random points"""
    for _ in range(points):
        yield jacobian_fd(layer, rng.standard_normal(layer.dim_in), step=FD_STEP)


class TestSymplecticModules:
    """Every module has a symplectic Jacobian on (p, q)"""

    @pytest.mark.parametrize("kind", ["linear", "activation", "gradient"])
    @pytest.mark.parametrize("d", [1, 2, 5])
    def test_module_is_symplectic(self, rng, kind, d):
        for _ in range(INSTANCES):
            module = random_module(kind, d, rng)
            for jac in fd_jacobians(module, rng):
                assert symplectic_defect(jac, d) <= 1e-8

    @pytest.mark.parametrize("d", [1, 2, 5])
    def test_extended_module_is_extended_symplectic(self, rng, d):
        for _ in range(INSTANCES):
            module = random_module("extended", d, rng)
            for jac in fd_jacobians(module, rng):
                assert symplectic_defect(jac[: 2 * d, : 2 * d], d) <= 1e-8
                np.testing.assert_array_equal(jac[2 * d :, : 2 * d], 0.0)
                np.testing.assert_allclose(jac[2 * d :, 2 * d :], np.eye(2), atol=1e-8)

    @pytest.mark.parametrize("kind", ["linear", "activation", "gradient"])
    def test_backward_jacobian_is_symplectic(self, rng, kind):
        for _ in range(20):
            module = random_module(kind, 2, rng)
            x = rng.standard_normal(4)
            assert symplectic_defect(jacobian(module, x), 2) <= 1e-10

    def test_extended_module_keeps_trailing_coordinates(self, rng):
        module = random_module("extended", 2, rng)
        x = rng.standard_normal((10, 6))
        y = module.forward(x)
        np.testing.assert_array_equal(y[:, 4:], x[:, 4:])

    def test_up_module_moves_only_p(self, rng):
        module = GradientModule(2, width=5, side="up", rng=seeded_rng(0))
        module.params.randomize(rng)
        x = rng.standard_normal((3, 4))
        np.testing.assert_array_equal(module.forward(x)[:, 2:], x[:, 2:])

    def test_exact_jacobian_agrees_with_finite_differences(self, rng):
        module = random_module("gradient", 2, rng)
        x = rng.standard_normal(4)
        np.testing.assert_allclose(jacobian(module, x), jacobian_fd(module, x), atol=1e-6)

    @pytest.mark.parametrize("kind", ["linear", "activation", "gradient", "extended"])
    def test_backward_matches_finite_differences(self, rng, kind):
        for _ in range(20):
            module = random_module(kind, 2, rng)
            x = rng.standard_normal((3, module.dim_in))
            cot = rng.standard_normal((3, module.dim_in))
            gx, grads = analytic_vjp(module, x, cot)
            fx, fgrads = finite_diff_vjp(module, x, cot)
            assert relative_error(gx, fx) <= 1e-5
            for name in grads:
                assert relative_error(grads[name], fgrads[name]) <= 1e-5

    def test_bad_side_rejected(self):
        with pytest.raises(ConfigError):
            ActivationModule(2, side="middle")

    def test_extended_latent_too_large(self):
        with pytest.raises(ConfigError):
            ExtendedModule(3, 4, width=5)


class TestWorkedExamples:
    """Hand-computed module outputs"""

    def test_linear_upper_factor(self):
        module = LinearModule(1, sublayers=1, parity="up")
        module.params["A0"].value[...] = 1.0
        np.testing.assert_allclose(module(np.array([1.0, 1.0])), [3.0, 1.0])

    def test_activation_module(self):
        module = ActivationModule(1, side="up")
        module.params["a"].value[...] = 2.0
        np.testing.assert_allclose(module(np.zeros(2)), [1.0, 0.0])

    def test_gradient_module(self):
        module = GradientModule(1, width=1, side="up")
        module.params["K1"].value[...] = 1.0
        module.params["a"].value[...] = 1.0
        np.testing.assert_allclose(module(np.zeros(2)), [0.5, 0.0])

    def test_extended_without_trailing_coordinates_is_gradient(self, rng):
        grad = GradientModule(2, width=3, side="low", rng=seeded_rng(4))
        grad.params.randomize(rng)
        ext = ExtendedModule(2, 4, width=3, side="low")
        for name, p in grad.params.items():
            ext.params[name].value[...] = p.value
        x = rng.standard_normal((5, 4))
        np.testing.assert_array_equal(ext.forward(x), grad.forward(x))

    def test_la_biases_compose_to_a_shift(self, rng):
        net = build_sympnet("LA", 2, layers=2)
        total = np.zeros(4)
        for name, p in net.params.items():
            if name.split(".")[-1] == "b":
                p.value[...] = rng.standard_normal(4)
                total += p.value
        x = rng.standard_normal((3, 4))
        np.testing.assert_allclose(net.forward(x), x + total, atol=1e-14)


class TestSympNet:
    """Composed LA / G / E networks"""

    @pytest.mark.parametrize("kind", ["LA", "G"])
    @pytest.mark.parametrize("d", [1, 2, 5])
    def test_composed_net_is_symplectic(self, rng, kind, d):
        for _ in range(INSTANCES):
            net = build_sympnet(kind, 2 * d, layers=3, width=6, sublayers=2, rng=seeded_rng(0))
            net.params.randomize(rng, scale=PARAM_SCALE.get(kind, 0.5))
            for jac in fd_jacobians(net, rng):
                assert symplectic_defect(jac, d) <= 1e-8

    @pytest.mark.parametrize("d", [1, 2, 5])
    def test_composed_extended_net(self, rng, d):
        n = 2 * d + 3
        for _ in range(INSTANCES):
            net = build_sympnet("E", n, layers=4, width=6, latent=2 * d, rng=seeded_rng(0))
            net.params.randomize(rng, scale=0.5)
            for jac in fd_jacobians(net, rng):
                assert symplectic_defect(jac[: 2 * d, : 2 * d], d) <= 1e-8
            x = rng.standard_normal(n)
            np.testing.assert_array_equal(net(x)[2 * d :], x[2 * d :])

    def test_backward_jacobian_of_composed_net(self, rng):
        net = build_sympnet("G", 4, layers=3, width=6, rng=seeded_rng(0))
        net.params.randomize(rng, scale=0.5)
        x = rng.standard_normal(4)
        np.testing.assert_allclose(jacobian(net, x), jacobian_fd(net, x), atol=1e-6)
        assert symplectic_defect(jacobian(net, x), 2) <= 1e-10

    @pytest.mark.parametrize("kind", ["LA", "G"])
    def test_starts_as_identity(self, rng, kind):
        net = build_sympnet(kind, 4, layers=3)
        x = rng.standard_normal((5, 4))
        np.testing.assert_array_equal(net.forward(x), x)

    def test_la_layout(self):
        net = build_sympnet("LA", 4, layers=3, sublayers=2)
        kinds = [m.kind for m in net.members]
        assert kinds == ["linear", "activation", "linear", "activation", "linear"]
        assert [m.side for m in net.members if m.kind == "activation"] == ["up", "low"]

    def test_gradient_modules_alternate(self):
        net = build_sympnet("G", 2, layers=4)
        assert [m.side for m in net.members] == ["up", "low", "up", "low"]

    def test_latent_dim(self):
        net = build_sympnet("E", 5, layers=2, latent=2)
        assert net.latent_dim == 2
        assert net.dim_in == 5

    def test_odd_latent_rejected(self):
        with pytest.raises(ConfigError):
            build_sympnet("G", 3, layers=2)

    def test_gradient_net_needs_full_dimension(self):
        with pytest.raises(ConfigError):
            build_sympnet("G", 4, layers=2, latent=2)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ConfigError):
            build_sympnet("H", 4, layers=2)

    def test_serialization_preserves_outputs(self, rng):
        net = build_sympnet("LA", 4, layers=2, sublayers=3)
        net.params.randomize(rng, scale=0.3)
        restored = sympnet_from_dict(sympnet_to_dict(net))
        x = rng.standard_normal((4, 4))
        np.testing.assert_array_equal(restored.forward(x), net.forward(x))
