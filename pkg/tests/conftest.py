import pytest

from utils.encoder import EncoderConfig, LayerSpec, init_weights

# Same 40x100x3 input as the full encoder, a fraction of the width
TINY_LAYERS = (
    LayerSpec("conv", 4, (2, 2), (3, 5), "valid"),
    LayerSpec("conv", 4, (2, 2), (3, 5), "valid"),
    LayerSpec("dense", 16, activation="tanh"),
    LayerSpec("dense", 8, activation="linear"),
)

CHECKLIST = [
    "google.com",
    "facebook.com",
    "youtube.com",
    "amazon.com",
    "wikipedia.org",
    "twitter.com",
    "instagram.com",
    "linkedin.com",
    "apple.com",
    "microsoft.com",
]


@pytest.fixture
def tiny_config():
    return EncoderConfig(layers=TINY_LAYERS, embedding_dim=8)


@pytest.fixture
def tiny_model(tiny_config):
    return init_weights(tiny_config, seed=0)


@pytest.fixture
def checklist():
    return list(CHECKLIST)


@pytest.fixture
def domains_file(tmp_path):
    path = tmp_path / "domains.txt"
    path.write_text("\n".join(CHECKLIST) + "\n", encoding="utf-8")
    return str(path)
