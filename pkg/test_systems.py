"""
Tests for the benchmark systems, the bracket checker, the integrator and the
pixel renderer
"""
import numpy as np
import pytest

from pnnflow.errors import ConfigError, DimensionError, DomainError, RenderError
from pnnflow.nets.numcore import jacobian_fd
from pnnflow.systems.base import canonical_structure, check_poisson_bracket, eval_field, from_canonical, to_canonical
from pnnflow.systems.catalog import get_system
from pnnflow.systems.integrate import (
    IntegratorSettings,
    composition_weights,
    generate_dataset,
    generate_trajectory,
    integrate,
    reference_trajectory,
)
from pnnflow.systems.render import flatten_movie, render_two_body, unflatten_movie


def sample_state(name: str, rng) -> np.ndarray:
    if name == "lv":
        return rng.uniform(0.3, 3.0, size=2)
    if name == "pendulum_ext":
        return rng.uniform(-1.5, 1.5, size=3)
    if name in ("lorentz", "lorentz3d"):
        k = 2 if name == "lorentz" else 3
        v = rng.uniform(-1.0, 1.0, size=k)
        x = rng.uniform(0.3, 1.5, size=k) * rng.choice([-1.0, 1.0], size=k)
        return np.concatenate([v, x])
    if name == "al":
        return rng.uniform(-2.5, 2.5, size=10)
    if name == "twobody":
        return np.concatenate([rng.uniform(-0.5, 0.5, size=4), [-1.0, 0.1, 1.0, -0.1]])
    return rng.uniform(-1.0, 1.0, size=2)


def make(name: str):
    return get_system(name, sites=5) if name == "al" else get_system(name)


ALL_SYSTEMS = ["oscillator", "pendulum", "lv", "pendulum_ext", "lorentz", "lorentz3d", "al", "twobody"]
CANONICAL_FORMS = ["lv", "pendulum_ext", "lorentz", "lorentz3d", "al"]


class TestCatalog:
    """Fields, structure matrices and Hamiltonians"""

    @pytest.mark.parametrize("name", ALL_SYSTEMS)
    def test_field_is_structure_times_gradient(self, rng, name):
        system = make(name)
        for _ in range(10):
            y = sample_state(name, rng)
            expected = system.structure(y) @ system.grad_hamiltonian(y)
            np.testing.assert_allclose(system.field(y), expected, rtol=1e-12, atol=1e-10)

    @pytest.mark.parametrize("name", ALL_SYSTEMS)
    def test_gradient_of_hamiltonian(self, rng, name):
        system = make(name)
        y = sample_state(name, rng)
        numeric = jacobian_fd(lambda s: np.array([system.hamiltonian(s)]), y)[0]
        np.testing.assert_allclose(system.grad_hamiltonian(y), numeric, rtol=1e-6, atol=1e-6)

    @pytest.mark.parametrize("name", CANONICAL_FORMS)
    def test_canonical_round_trip(self, rng, name):
        system = make(name)
        y = sample_state(name, rng)
        np.testing.assert_allclose(from_canonical(system, to_canonical(system, y)), y, rtol=1e-12, atol=1e-12)

    @pytest.mark.parametrize("name", CANONICAL_FORMS)
    def test_canonical_hamiltonian_matches(self, rng, name):
        system = make(name)
        y = sample_state(name, rng)
        k = system.canonical_hamiltonian(system.to_canonical(y))
        assert k == pytest.approx(system.canonical_orientation * system.hamiltonian(y), rel=1e-10, abs=1e-10)

    @pytest.mark.parametrize("name", CANONICAL_FORMS)
    def test_canonical_field_is_pushed_forward_field(self, rng, name):
        system = make(name)
        y = sample_state(name, rng)
        z = system.to_canonical(y)
        pushed = jacobian_fd(system.to_canonical, y) @ system.field(y)
        np.testing.assert_allclose(system.canonical_field(z), pushed, rtol=1e-6, atol=1e-6)

    def test_lotka_volterra_values(self):
        lv = get_system("lv")
        assert lv.hamiltonian(np.array([1.0, 1.0])) == pytest.approx(2.0)
        np.testing.assert_allclose(lv.field(np.array([1.0, 1.0])), [-1.0, 0.0])

    def test_lotka_volterra_canonical_coordinates(self):
        lv = get_system("lv")
        np.testing.assert_array_equal(to_canonical(lv, [1.0, 1.0]), [0.0, 0.0])
        np.testing.assert_allclose(to_canonical(lv, [np.e, np.e ** 2]), [1.0, 2.0], rtol=1e-15)

    def test_extended_pendulum_field(self):
        field = eval_field(get_system("pendulum_ext"), [0.0, 1.0, 1.0])
        np.testing.assert_allclose(field, [-np.sin(1.0), 0.0, 0.0], atol=1e-15)

    def test_charged_particle_momentum(self):
        z = to_canonical(get_system("lorentz3d"), [1.0, 0.5, 0.0, 0.5, 1.0, 0.0])
        np.testing.assert_allclose(z[:3], [0.62732, 0.68634, 0.0], atol=1e-5)
        np.testing.assert_array_equal(z[3:], [0.5, 1.0, 0.0])

    def test_ablowitz_ladik_origin_is_fixed(self):
        np.testing.assert_array_equal(eval_field(make("al"), np.zeros(10)), 0.0)

    def test_lotka_volterra_domain(self):
        with pytest.raises(DomainError):
            eval_field(get_system("lv"), [0.0, 1.0])

    def test_charged_particle_singular_axis(self):
        with pytest.raises(DomainError):
            eval_field(get_system("lorentz"), [1.0, 0.0, 0.0, 0.0])

    def test_two_body_collision(self):
        with pytest.raises(DomainError):
            eval_field(get_system("twobody"), [0.0] * 4 + [0.5, 0.5, 0.5, 0.5])

    def test_state_dimension_checked(self):
        with pytest.raises(DimensionError):
            eval_field(get_system("pendulum_ext"), [1.0, 2.0])

    def test_unknown_system(self):
        with pytest.raises(ConfigError):
            get_system("kepler")

    def test_bad_parameters(self):
        with pytest.raises(ConfigError):
            get_system("lv", sites=3)
        with pytest.raises(ConfigError):
            get_system("al", sites=2)

    def test_ablowitz_ladik_default_state(self):
        system = get_system("al")
        (y0,) = system.default_initial_states()
        assert system.dim == 40
        assert y0.shape == (40,)
        assert y0[0] == pytest.approx(2.2)
        np.testing.assert_array_equal(y0[20:], 0.0)

    def test_extended_pendulum_casimir(self):
        system = get_system("pendulum_ext")
        traj = generate_trajectory(system, [0.0, 1.0, 1.0], 0.1, 20)
        casimir = traj[:, 2] - traj[:, 0] ** 2 - traj[:, 1] ** 2
        np.testing.assert_allclose(casimir, casimir[0], atol=1e-12)


class TestBracketChecker:
    """Skew-symmetry and Jacobi identity of structure matrices"""

    @pytest.mark.parametrize("name", ["lv", "pendulum_ext"])
    def test_benchmark_brackets_pass(self, rng, name):
        system = make(name)
        points = [sample_state(name, rng) for _ in range(100)]
        report = check_poisson_bracket(system.structure, points)
        assert report.points == 100
        assert report.passes(1e-6)

    @pytest.mark.parametrize("name", ["lorentz", "al"])
    def test_other_brackets_pass(self, rng, name):
        system = make(name)
        points = [sample_state(name, rng) for _ in range(10)]
        assert check_poisson_bracket(system.structure, points).passes(1e-6)

    def test_constant_canonical_structure_is_exact(self, rng):
        b = canonical_structure(4, 4)
        report = check_poisson_bracket(lambda y: b, [rng.standard_normal(4) for _ in range(5)])
        assert report.skew_residual == 0.0
        assert report.jacobi_residual == 0.0

    def test_violations_are_detected(self, rng):
        report = check_poisson_bracket(lambda y: np.eye(2), [rng.standard_normal(2)])
        assert report.skew_residual == pytest.approx(2.0)
        assert not report.passes(1e-6)

    def test_non_jacobi_structure(self):
        def structure(y):
            x1, x2, _ = y
            return np.array([[0.0, x1, 0.0], [-x1, 0.0, x2], [0.0, -x2, 0.0]])

        report = check_poisson_bracket(structure, [np.array([1.0, 1.0, 1.0])])
        assert report.skew_residual == 0.0
        assert report.jacobi_residual > 1e-3


class TestIntegrator:
    """Implicit midpoint compositions and trajectory generation"""

    def test_composition_weights(self):
        assert composition_weights(2) == [1.0]
        w4 = composition_weights(4)
        w6 = composition_weights(6)
        assert len(w4) == 3
        assert len(w6) == 9
        assert sum(w4) == pytest.approx(1.0)
        assert sum(w6) == pytest.approx(1.0)

    @pytest.mark.parametrize("scheme,ratio", [("midpoint", 4.0), ("midpoint4", 16.0)])
    def test_convergence_order(self, scheme, ratio):
        system = get_system("oscillator")
        settings = IntegratorSettings(scheme=scheme, substeps=1)
        errors = []
        for h, steps in [(0.1, 10), (0.05, 20)]:
            z = integrate(system.canonical_field, [1.0, 0.0], h, steps, settings)[-1]
            errors.append(np.max(np.abs(z - [np.cos(1.0), np.sin(1.0)])))
        assert errors[0] / errors[1] == pytest.approx(ratio, rel=0.2)

    @pytest.mark.parametrize("steps", [1000, pytest.param(10_000, marks=pytest.mark.slow)])
    def test_quadratic_invariant_is_exact(self, steps):
        system = get_system("oscillator")
        settings = IntegratorSettings(scheme="midpoint", substeps=10)
        traj = integrate(system.canonical_field, [1.0, 0.0], 0.1, steps, settings)
        energy = 0.5 * np.sum(traj ** 2, axis=1)
        assert np.max(np.abs(energy - 0.5)) <= 1e-10

    def test_lotka_volterra_energy_conservation(self):
        lv = get_system("lv")
        traj = generate_trajectory(lv, [1.0, 1.0], 0.1, 100)
        assert traj.shape == (101, 2)
        energies = np.array([lv.hamiltonian(y) for y in traj])
        assert np.max(np.abs(energies - 2.0)) <= 1e-8

    def test_canonical_and_direct_integration_agree(self):
        lv = get_system("lv")
        ours = generate_trajectory(lv, [1.0, 1.0], 0.1, 100)
        reference = reference_trajectory(lv, [1.0, 1.0], 0.1, 100)
        assert np.max(np.abs(ours[-1] - reference[-1])) <= 1e-6

    def test_dataset_keeps_input_order(self):
        lv = get_system("lv")
        starts = lv.default_initial_states()
        trajectories = generate_dataset(lv, starts, 0.1, 5, workers=3)
        assert len(trajectories) == 3
        for start, traj in zip(starts, trajectories):
            np.testing.assert_allclose(traj[0], start)

    def test_invalid_settings(self):
        with pytest.raises(ConfigError):
            IntegratorSettings(scheme="rk4")
        with pytest.raises(ConfigError):
            IntegratorSettings(substeps=0)

    def test_invalid_step(self):
        with pytest.raises(ConfigError):
            integrate(lambda z: z, [1.0], 0.0, 5)

    def test_empty_dataset_rejected(self):
        with pytest.raises(ConfigError):
            generate_dataset(get_system("lv"), [], 0.1, 5)


class TestRenderer:
    """Pixel observations of the two-body problem"""

    @pytest.fixture
    def short_orbit(self):
        system = get_system("twobody")
        settings = IntegratorSettings(scheme="midpoint4", substeps=4)
        return system, generate_trajectory(system, system.default_initial_states()[0], 0.6, 12, settings)

    def test_frames(self, short_orbit):
        system, traj = short_orbit
        movie = render_two_body(system.positions(traj), dt=0.6, states=traj)
        assert movie.frames.shape == (13, 50, 100)
        assert movie.frames.min() >= 0.0
        assert movie.frames.max() == 1.0
        assert len(movie) == 13
        # two discs of radius 4
        area = movie.frames[0].sum()
        assert 2 * np.pi * 4.0 ** 2 * 0.8 < area < 2 * np.pi * 4.0 ** 2 * 1.2

    def test_flatten_round_trip_shape(self, short_orbit):
        system, traj = short_orbit
        movie = render_two_body(system.positions(traj))
        samples = flatten_movie(movie)
        assert samples.shape == (13, 5000)
        np.testing.assert_array_equal(unflatten_movie(samples, 50, 100), movie.frames)

    def test_body_leaving_viewport(self):
        positions = np.array([[[0.0, 0.0], [1.95, 0.0]]])
        with pytest.raises(RenderError):
            render_two_body(positions)

    def test_bad_geometry(self):
        with pytest.raises(RenderError):
            render_two_body(np.zeros((1, 2, 2)) + [[0.5, 0.0], [-0.5, 0.0]], radius=0.0)

    def test_wrong_sample_width(self):
        with pytest.raises(DimensionError):
            unflatten_movie(np.zeros((2, 10)), 3, 3)
