import numpy as np
import pytest

from safer.store import save_store

from sd_fixture import build_checkpoint


def random_orthonormal(rng, d, k):
    """Orthonormal d x k basis from the QR of a Gaussian draw."""
    q, _ = np.linalg.qr(rng.standard_normal((d, k)))
    return q[:, :k]


@pytest.fixture(scope="session")
def sd_checkpoint_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("ckpt") / "sd_unet_style.safetensors"
    save_store(build_checkpoint(), path)
    return path


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(1234))
