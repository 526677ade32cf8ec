import numpy as np
import pytest
import torch

from duoseg.model import ModelConfig, build_model
from duoseg.synth import SynthConfig, synth_dataset, sample_pairs
from duoseg.training import LossConfig, TrainConfig, train

TINY = ModelConfig(
    patch_size=64,
    dim=32,
    encoder_depth=2,
    encoder_patch_px=8,
    encoder_early_tap=1,
    seed=0,
)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_model():
    return build_model(TINY)


@pytest.fixture(scope="session")
def small_dataset():
    return synth_dataset(SynthConfig(n_images=3, image_size=256, n_objects=2, seed=11, radius_frac=(0.09, 0.13)))


@pytest.fixture(scope="session")
def small_pairs(small_dataset):
    return sample_pairs(small_dataset, 3, hr_level=0, patch_size=64, seed=5, require_nonempty=True)


@pytest.fixture(scope="session")
def overfit_model(small_pairs):
    """A model briefly overfit to one patch pair; good enough for liveness
    and trend tests that want a non-random segmenter."""
    torch.manual_seed(0)
    model = build_model(TINY)
    pair = small_pairs[0]
    train(
        model,
        [pair],
        TrainConfig(steps=120, seed=3, prompt_mix={"box": 0.5, "point": 0.5, "coarse": 0.0}),
        LossConfig(),
    )
    return model
