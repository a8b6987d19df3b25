"""
Tests for the checkpoint inference service
"""
import pytest
from fastapi.testclient import TestClient

from pnnflow.main import app
from pnnflow.models.checkpoint import Checkpoint, save_checkpoint
from pnnflow.nets.coupling import AutoencoderPair, build_inn
from pnnflow.nets.pnn import PnnModel
from pnnflow.nets.sympnet import build_sympnet


@pytest.fixture
def checkpoint_dir(tmp_path, monkeypatch, clean_cache):
    """Checkpoint directory holding an identity model 'ident' and an autoencoder model 'frames'"""
    monkeypatch.setenv("PNNFLOW_CHECKPOINT_DIR", str(tmp_path))
    ident = PnnModel(build_inn("NVP", 2, 1, layers=2), build_sympnet("G", 2, layers=2))
    save_checkpoint(
        tmp_path / "ident.ckpt.json",
        Checkpoint(model=ident, h=0.1, system="lv", summary={"architecture": "NVP-PNN"}),
    )
    frames = PnnModel(AutoencoderPair(6, 2, layers=2, width=4), build_sympnet("LA", 2, layers=2), recurrence=2)
    save_checkpoint(tmp_path / "nested" / "frames.ckpt.json", Checkpoint(model=frames, h=0.6))
    return tmp_path


@pytest.fixture
def client(checkpoint_dir):
    """Test client for FastAPI app"""
    return TestClient(app)


class TestHealth:
    """Service endpoints"""

    def test_health(self, client):
        response = client.get("/health")
        assert response.status_code == 200
        assert response.json() == {"status": "healthy"}

    def test_status(self, client, checkpoint_dir):
        data = client.get("/status").json()
        assert data["checkpoint_dir"] == str(checkpoint_dir)
        assert data["checkpoints"] == 2
        assert "hits" in data["cache"]


class TestModels:
    """Model listing and metadata"""

    def test_list_models(self, client):
        response = client.get("/api/v1/models")
        assert response.status_code == 200
        names = [m["name"] for m in response.json()]
        assert names == ["frames", "ident"]

    def test_get_model(self, client):
        info = client.get("/api/v1/models/ident").json()
        assert info["architecture"] == "NVP-PNN"
        assert info["transform"] == "NVP"
        assert info["core"] == "G"
        assert info["ambient_dim"] == 2
        assert info["h"] == 0.1
        assert info["system"] == "lv"

    def test_autoencoder_model(self, client):
        info = client.get("/api/v1/models/frames").json()
        assert info["architecture"] == "pnn-ae"
        assert info["transform"] == "AE"
        assert info["ambient_dim"] == 6
        assert info["latent_dim"] == 2
        assert info["recurrence"] == 2

    def test_unknown_model(self, client):
        response = client.get("/api/v1/models/nothing")
        assert response.status_code == 404

    def test_unreadable_checkpoint(self, client, checkpoint_dir):
        (checkpoint_dir / "broken.ckpt.json").write_text("{not json")
        assert client.get("/api/v1/models/broken").status_code == 404
        names = [m["name"] for m in client.get("/api/v1/models").json()]
        assert "broken" not in names


class TestPredict:
    """Rollouts over HTTP"""

    def test_single_state(self, client):
        response = client.post("/api/v1/models/ident/predict", json={"x0": [1.0, 2.0], "steps": 3})
        assert response.status_code == 200
        data = response.json()
        assert data["dt"] == 0.1
        assert data["states"] == [[1.0, 2.0]] * 3

    def test_batch(self, client):
        response = client.post("/api/v1/models/ident/predict", json={"x0": [[1.0, 2.0], [0.5, 0.5]], "steps": 2})
        assert response.status_code == 200
        states = response.json()["states"]
        assert len(states) == 2
        assert states[1] == [[1.0, 2.0], [0.5, 0.5]]

    def test_substeps_halve_the_spacing(self, client):
        response = client.post(
            "/api/v1/models/frames/predict", json={"x0": [0.0] * 6, "steps": 2, "emit_substeps": True}
        )
        assert response.status_code == 200
        data = response.json()
        assert data["dt"] == pytest.approx(0.3)
        assert len(data["states"]) == 4

    def test_wrong_dimension(self, client):
        response = client.post("/api/v1/models/ident/predict", json={"x0": [1.0, 2.0, 3.0], "steps": 3})
        assert response.status_code == 422

    def test_zero_steps(self, client):
        response = client.post("/api/v1/models/ident/predict", json={"x0": [1.0, 2.0], "steps": 0})
        assert response.status_code == 422

    def test_non_numeric_state(self, client):
        response = client.post("/api/v1/models/ident/predict", json={"x0": ["a", "b"], "steps": 1})
        assert response.status_code == 422

    def test_unknown_model(self, client):
        response = client.post("/api/v1/models/nothing/predict", json={"x0": [1.0, 2.0]})
        assert response.status_code == 404


class TestEncode:
    """Latent coordinates"""

    def test_identity_encoding(self, client):
        response = client.post("/api/v1/models/ident/encode", json={"x": [0.3, -0.7]})
        assert response.status_code == 200
        assert response.json()["latent"] == [0.3, -0.7]

    def test_autoencoder_latent_width(self, client):
        response = client.post("/api/v1/models/frames/encode", json={"x": [[0.1] * 6, [0.2] * 6]})
        assert response.status_code == 200
        latent = response.json()["latent"]
        assert len(latent) == 2
        assert len(latent[0]) == 2


class TestCache:
    """Checkpoint cache endpoints"""

    def test_repeated_reads_hit_the_cache(self, client):
        client.get("/api/v1/models/ident")
        client.get("/api/v1/models/ident")
        stats = client.get("/api/v1/cache/stats").json()
        assert stats["hits"] >= 1
        assert stats["entries"] == 1

    def test_clear_cache(self, client):
        client.get("/api/v1/models/ident")
        response = client.delete("/api/v1/cache")
        assert response.json() == {"message": "Cache cleared"}
        assert client.get("/api/v1/cache/stats").json()["entries"] == 0
