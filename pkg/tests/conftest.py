import numpy as np
import pytest
import torch
from scipy.ndimage import gaussian_filter

from linepaint.extractors import (
    LocalFeatureConfig,
    LocalFeatureNet,
    PerceptualConfig,
    PerceptualFeatureNet,
)
from linepaint.forge import synthesize_pair
from linepaint.networks import DiscriminatorConfig, GeneratorConfig

torch.set_num_threads(1)

# shared shrunk-down network shapes so tests stay fast on one CPU core
TINY_GEN = dict(base_width=16, block_counts=(1, 1, 1, 1), cardinality=4,
                image_side=64, cond_channels=32)
TINY_DISC = dict(base_width=16, cond_channels=32, cardinality=4,
                 extra_stages=1, image_side=64)


def make_illustration(rng, h=96, w=96):
    """Synthetic illustration: smooth color regions plus mild detail."""
    base = gaussian_filter(rng.random((3, h, w)) * 2 - 1, sigma=(0, 6, 6))
    detail = gaussian_filter(rng.random((3, h, w)) * 2 - 1, sigma=(0, 1.5, 1.5))
    return np.clip(3.0 * base + detail, -1.0, 1.0).astype(np.float32)


@pytest.fixture(scope="session")
def illustrations():
    rng = np.random.default_rng(7)
    return [make_illustration(rng) for _ in range(16)]


@pytest.fixture(scope="session")
def forged_pairs(illustrations):
    rng = np.random.default_rng(11)
    pairs = []
    for i, illus in enumerate(illustrations):
        line, color = synthesize_pair(illus, rng)
        pairs.append({"id": f"pair{i:02d}", "line": line, "color": color})
    return pairs


@pytest.fixture(scope="session")
def tiny_f1():
    net = LocalFeatureNet(LocalFeatureConfig(base_width=8, out_channels=32))
    net.init_random(seed=101)
    return net.freeze()


@pytest.fixture(scope="session")
def tiny_f2():
    net = PerceptualFeatureNet(PerceptualConfig(base_width=8, out_channels=16))
    net.init_random(seed=102)
    return net.freeze()


@pytest.fixture(scope="session")
def mini_run(tmp_path_factory, forged_pairs, tiny_f1, tiny_f2):
    """Short but real training run shared by inference/service/CLI tests."""
    from linepaint.training import Trainer, TrainConfig

    out = tmp_path_factory.mktemp("mini_run")
    config = TrainConfig(total_iterations=8, drop_iteration=6, batch_size=2,
                         image_side=64, seed=5, checkpoint_every=8,
                         generator=GeneratorConfig(**TINY_GEN),
                         discriminator=DiscriminatorConfig(**TINY_DISC))
    trainer = Trainer(config, forged_pairs[:8], tiny_f1, tiny_f2, out_dir=out)
    checkpoint = trainer.fit()
    return {"checkpoint": checkpoint, "out_dir": out, "config": config}
