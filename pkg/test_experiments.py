"""
Tests for experiment configs, recipes and the gen / train / predict / eval
pipelines
"""
import json

import numpy as np
import pytest

from pnnflow.errors import ConfigError, DataIOError, DimensionError
from pnnflow.experiments import (
    build_dataset,
    build_model,
    compare,
    format_table,
    list_recipes,
    read_dataset,
    resolve_config,
    run_eval,
    run_gen,
    run_predict,
    run_train,
    write_dataset,
)
from pnnflow.models.checkpoint import load_checkpoint
from pnnflow.models.config import build_config, set_dotted
from pnnflow.nets.coupling import AutoencoderPair
from pnnflow.utils import io

RECIPES = [
    "al_n20",
    "lorentz_nvp",
    "lorentz_vp",
    "lorentz_vpnn",
    "lv_pnn",
    "lv_sympnet1",
    "lv_sympnet3",
    "pendulum_ext",
    "twobody",
]


def oscillator_config(**extra) -> dict:
    """A harmonic-oscillator experiment small enough for unit tests"""
    data = {
        "name": "osc",
        "system": {"name": "oscillator"},
        "dataset": {
            "initial_states": [[1.0, 0.0]],
            "h": 0.1,
            "train_steps": 10,
            "test_steps": 5,
            "integrator": {"scheme": "midpoint", "substeps": 1},
        },
        "model": {"architecture": "sympnet", "core": "LA", "core_layers": 2},
        "train": {"iterations": 20, "log_interval": 10, "lr": 0.01},
    }
    for key, value in extra.items():
        set_dotted(data, key, value)
    return data


def movie_config() -> dict:
    return {
        "name": "movie",
        "system": {"name": "twobody"},
        "dataset": {
            "h": 0.6,
            "train_steps": 3,
            "test_steps": 2,
            "fine_factor": 2,
            "integrator": {"scheme": "midpoint4", "substeps": 4},
            "movie": {"width": 40, "height": 20, "radius": 1.5},
        },
        "model": {
            "architecture": "pnn",
            "transform": "AE",
            "transform_layers": 2,
            "transform_width": 16,
            "core": "LA",
            "core_layers": 2,
            "latent": 4,
            "recurrence": 2,
        },
        "train": {"iterations": 5, "lam": 1.0},
    }


class TestConfig:
    """Validation of experiment documents"""

    def test_defaults(self):
        cfg = build_config({"system": {"name": "lv"}})
        assert cfg.dataset.h == 0.1
        assert cfg.train.lr == 0.001
        assert cfg.resolved_partition() == 1
        assert cfg.resolved_loss() == "primary"
        assert len(cfg.resolved_initial_states()) == 3

    def test_overrides_win(self):
        cfg = build_config(oscillator_config(), {"train.iterations": 7, "dataset.h": None})
        assert cfg.train.iterations == 7
        assert cfg.dataset.h == 0.1

    def test_set_dotted_creates_levels(self):
        data = {}
        set_dotted(data, "a.b.c", 1)
        assert data == {"a": {"b": {"c": 1}}}

    def test_unknown_system(self):
        with pytest.raises(ConfigError):
            build_config({"system": {"name": "kepler"}})

    def test_extended_core_needs_reduced_latent(self):
        with pytest.raises(ConfigError):
            build_config({"system": {"name": "lv"}, "model": {"core": "E"}})

    def test_reduced_latent_needs_extended_core(self):
        with pytest.raises(ConfigError):
            build_config({"system": {"name": "pendulum_ext"}, "model": {"core": "G", "latent": 2, "transform": "VP"}})

    def test_odd_latent_rejected(self):
        with pytest.raises(ConfigError):
            build_config({"system": {"name": "pendulum_ext"}, "model": {"core": "G", "transform": "VP"}})

    def test_recurrence_only_for_pnn(self):
        with pytest.raises(ConfigError):
            build_config(oscillator_config(**{"model.recurrence": 2}))

    def test_autoencoder_latent_must_be_smaller(self):
        with pytest.raises(ConfigError):
            build_config({"system": {"name": "lv"}, "model": {"transform": "AE", "core": "G"}})

    def test_movie_only_for_two_body(self):
        with pytest.raises(ConfigError):
            build_config(oscillator_config(**{"dataset.movie": {"width": 10, "height": 10}}))

    def test_initial_state_dimension(self):
        with pytest.raises(ConfigError):
            build_config(oscillator_config(**{"dataset.initial_states": [[1.0, 0.0, 0.0]]}))

    def test_partition_range(self):
        with pytest.raises(ConfigError):
            build_config({"system": {"name": "lv"}, "model": {"transform": "NVP", "partition": 2}})

    def test_vpnn_needs_coupling_transform(self):
        with pytest.raises(ConfigError):
            build_config({"system": {"name": "lv"}, "model": {"architecture": "vpnn", "transform": "AE"}})

    def test_alternative_loss_needs_autoencoder(self):
        with pytest.raises(ConfigError):
            build_config(oscillator_config(**{"train.loss": "alternative"}))

    def test_pixel_dimensions(self):
        cfg = build_config(movie_config())
        assert cfg.ambient_dim() == 800
        assert cfg.latent_dim() == 4
        assert cfg.resolved_loss() == "alternative"


class TestRecipes:
    """Bundled experiment recipes"""

    def test_all_recipes_listed(self):
        assert list_recipes() == RECIPES

    @pytest.mark.parametrize("name", RECIPES)
    def test_recipe_validates(self, name):
        cfg = resolve_config(name)
        assert cfg.name == name
        assert cfg.description

    def test_system_selects_recipe(self):
        assert resolve_config(system="lv").name == "lv_pnn"
        assert resolve_config(system="al").name == "al_n20"

    def test_system_without_recipe(self):
        cfg = resolve_config(system="pendulum", overrides={"model.architecture": "sympnet"})
        assert cfg.name == "pendulum"

    def test_recipe_flags_override(self):
        cfg = resolve_config("lv_pnn", overrides={"train.iterations": 10, "model.architecture": "sympnet"})
        assert cfg.train.iterations == 10
        assert cfg.model.architecture == "sympnet"

    def test_recipe_system_conflict(self):
        with pytest.raises(ConfigError):
            resolve_config("lv_pnn", system="al")

    def test_unknown_recipe(self):
        with pytest.raises(ConfigError):
            resolve_config("lv_best")

    def test_missing_config_file(self, tmp_path):
        with pytest.raises(DataIOError):
            resolve_config(str(tmp_path / "missing.json"))

    def test_nothing_given(self):
        with pytest.raises(ConfigError):
            resolve_config()

    def test_recipe_architectures(self):
        assert build_model(resolve_config("lorentz_vpnn", overrides={"model.transform_layers": 2})).architecture == "bare-inn"
        assert build_model(resolve_config("lv_sympnet1", overrides={"model.core_layers": 2})).architecture == "bare-sympnet"
        lv = build_model(resolve_config("lv_pnn"))
        assert lv.architecture == "pnn-inn"
        assert lv.ambient_dim == 2


class TestPipelines:
    """gen, train, predict and eval on a tiny oscillator experiment"""

    def test_build_dataset_splits(self):
        bundle = build_dataset(build_config(oscillator_config()))
        assert len(bundle.train) == 1
        assert bundle.train[0].shape == (11, 2)
        assert bundle.test[0].shape == (6, 2)
        np.testing.assert_array_equal(bundle.test[0][0], bundle.train[0][-1])
        assert len(bundle.flow_dataset()) == 10

    def test_gen_writes_files_and_manifest(self, tmp_path):
        cfg = build_config(oscillator_config())
        manifest_path = run_gen(cfg, tmp_path)
        manifest = json.loads(manifest_path.read_text())
        assert manifest["h"] == 0.1
        assert manifest["seed"] == 0
        assert manifest["integrator"]["scheme"] == "midpoint"
        assert manifest["trajectories"][0]["train"]["file"] == "traj_000_train.csv"
        times, states = io.read_trajectory(tmp_path / "data" / "traj_000_test.csv")
        assert states.shape == (6, 2)
        assert times[0] == pytest.approx(1.0)

    def test_dataset_round_trip_is_exact(self, tmp_path):
        cfg = build_config(oscillator_config())
        bundle = build_dataset(cfg)
        write_dataset(bundle, cfg, tmp_path, fmt="jsonl")
        restored = read_dataset(tmp_path)
        np.testing.assert_array_equal(restored.train[0], bundle.train[0])
        np.testing.assert_array_equal(restored.test[0], bundle.test[0])

    def test_unknown_format(self, tmp_path):
        cfg = build_config(oscillator_config())
        with pytest.raises(ConfigError):
            write_dataset(build_dataset(cfg), cfg, tmp_path, fmt="parquet")

    def test_train_predict_eval(self, tmp_path):
        cfg = build_config(oscillator_config())
        run_gen(cfg, tmp_path)
        outcome = run_train(cfg, tmp_path / "data", tmp_path)
        assert outcome.checkpoint == tmp_path / "osc.ckpt.json"
        assert (tmp_path / "metrics.json").is_file()
        loss_lines = (tmp_path / "loss.csv").read_text().splitlines()
        assert loss_lines[0] == "iter,loss"
        assert len(loss_lines) == 4

        ckpt = load_checkpoint(outcome.checkpoint)
        assert ckpt.h == 0.1
        assert ckpt.summary["architecture"] == "LA-SympNet"

        written = run_predict(outcome.checkpoint, 7, dataset=tmp_path / "data")
        _, rollout = io.read_trajectory(written[0])
        assert rollout.shape == (8, 2)

        report = run_eval(outcome.checkpoint, tmp_path / "data")
        assert report.train_mse == pytest.approx(outcome.report.train_mse)
        assert report.vpt is not None

    def test_predict_from_explicit_state(self, tmp_path):
        cfg = build_config(oscillator_config())
        outcome = run_train(cfg, out=tmp_path)
        written = run_predict(outcome.checkpoint, 3, x0=[1.0, 0.0], out=tmp_path / "pred")
        times, states = io.read_trajectory(written[0])
        np.testing.assert_array_equal(states[0], [1.0, 0.0])
        np.testing.assert_allclose(times, [0.0, 0.1, 0.2, 0.3])

    def test_training_is_reproducible(self, tmp_path):
        cfg = build_config(oscillator_config())
        a = run_train(cfg, out=tmp_path / "a")
        b = run_train(cfg, out=tmp_path / "b")
        assert a.final_loss == b.final_loss
        assert (tmp_path / "a" / "loss.csv").read_text() == (tmp_path / "b" / "loss.csv").read_text()

    def test_dimension_mismatch(self, tmp_path):
        run_gen(build_config(oscillator_config()), tmp_path)
        planar = build_config({"name": "planar", "system": {"name": "lorentz"}, "model": {"architecture": "sympnet", "core": "G"}})
        with pytest.raises(DimensionError):
            run_train(planar, tmp_path / "data", tmp_path)

    def test_compare_table(self, tmp_path):
        first = run_train(build_config(oscillator_config()), out=tmp_path / "la")
        second = run_train(build_config(oscillator_config(**{"model.core": "G"})), out=tmp_path / "g")
        rows = compare([first.checkpoint, second.checkpoint])
        assert [r.model for r in rows] == ["LA-SympNet", "G-SympNet"]
        table = format_table(rows)
        assert table.splitlines()[0].split()[0] == "model"
        assert len(table.splitlines()) == 3


class TestPixelPipeline:
    """Two-body frames"""

    def test_frames_dataset(self, tmp_path):
        cfg = build_config(movie_config())
        bundle = build_dataset(cfg)
        assert bundle.frame_shape == (20, 40)
        assert bundle.train[0].shape == (4, 800)
        assert bundle.fine[0].shape == (5, 800)
        assert bundle.states["train"][0].shape == (4, 8)

        write_dataset(bundle, cfg, tmp_path)
        assert (tmp_path / "frames" / "traj_000_train_00000.pgm").is_file()
        restored = read_dataset(tmp_path)
        assert restored.frame_shape == (20, 40)
        assert np.max(np.abs(restored.train[0] - bundle.train[0])) <= 0.5 / 255 + 1e-12

    def test_frames_model(self):
        model = build_model(build_config(movie_config()))
        assert isinstance(model.transform, AutoencoderPair)
        assert model.recurrence == 2
        assert model.ambient_dim == 800


@pytest.mark.slow
class TestLearning:
    """Scaled learning runs on the benchmark systems"""

    def test_lotka_volterra_pnn_fits(self, tmp_path):
        cfg = resolve_config("lv_pnn", overrides={"train.iterations": 20000, "dataset.test_steps": 100})
        outcome = run_train(cfg, out=tmp_path)
        bundle = build_dataset(cfg)
        initial = float(np.mean((bundle.flow_dataset().inputs - bundle.flow_dataset().targets) ** 2))
        assert outcome.report.train_mse < initial / 10
        assert outcome.report.vpt is not None
