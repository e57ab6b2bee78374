import numpy as np
import pytest
import torch

from linepaint.extractors import (
    HUE_BINS,
    TAG_COUNT,
    ExtractorNotInitialized,
    LocalFeatureConfig,
    LocalFeatureNet,
    PerceptualConfig,
    PerceptualFeatureNet,
    PretrainConfig,
    derive_tags,
    dominant_hue_class,
    load_extractor_checkpoint,
    pretrain_f1,
    pretrain_f2,
    rgb_to_hsv,
    save_extractor_checkpoint,
)
from linepaint.training import parameter_digest


def solid(r, g, b, h=16, w=16):
    img = np.empty((3, h, w), dtype=np.float32)
    img[0], img[1], img[2] = r, g, b
    return img


# ----------------------------------------------------------------- networks


def test_f1_shapes_stride16(tiny_f1):
    x = torch.rand(2, 1, 128, 128)
    feat = tiny_f1.features(x)
    assert feat.shape == (2, 32, 8, 8)
    assert feat.min() >= 0.0  # rectified features
    logits = tiny_f1.tag_logits(x)
    assert logits.shape == (2, TAG_COUNT)


def test_f2_shapes_stride4(tiny_f2):
    img = torch.rand(2, 3, 128, 128) * 2 - 1
    feat = tiny_f2.features(img)
    assert feat.shape == (2, 16, 32, 32)
    assert feat.min() >= 0.0


def test_f1_accepts_numpy_and_unbatched(tiny_f1):
    line = np.random.default_rng(0).random((1, 64, 64)).astype(np.float32)
    feat = tiny_f1.features(line)
    assert feat.shape == (32, 4, 4)  # unbatched in, unbatched out
    batched = tiny_f1.features(line[None])
    assert torch.equal(batched[0], feat)


def test_uninitialized_extractor_refuses_to_run():
    net = LocalFeatureNet(LocalFeatureConfig(base_width=8, out_channels=32))
    with pytest.raises(ExtractorNotInitialized):
        net.features(torch.rand(1, 1, 64, 64))
    net.init_random(0)
    net.features(torch.rand(1, 1, 64, 64))  # fine afterwards


def test_freeze_blocks_gradients(tiny_f1):
    assert all(not p.requires_grad for p in tiny_f1.parameters())
    x = torch.rand(1, 1, 64, 64, requires_grad=True)
    tiny_f1.features(x).sum().backward()
    assert x.grad is not None  # gradients flow to the input, not the weights


def test_features_require_stride_aligned_input(tiny_f1):
    with pytest.raises(ValueError):
        tiny_f1.features(torch.rand(1, 1, 60, 64))


def test_translation_covariance_interior(tiny_f1):
    # interior = cells whose receptive field avoids the padded border, so the
    # canvas must be large relative to the ~55 px receptive field
    rng = np.random.default_rng(31)
    canvas = rng.random((1, 1, 272, 256)).astype(np.float32)
    x1 = torch.from_numpy(canvas[:, :, 0:256, :])
    x2 = torch.from_numpy(canvas[:, :, 16:272, :])
    f1a = tiny_f1.features(x1)[0]
    f1b = tiny_f1.features(x2)[0]
    # shifting the input by one stride shifts features by one cell
    assert torch.allclose(f1b[:, 3:-3, 3:-3], f1a[:, 4:-2, 3:-3], atol=1e-5)


def test_f2_translation_covariance_interior(tiny_f2):
    rng = np.random.default_rng(32)
    canvas = rng.random((1, 3, 100, 96)).astype(np.float32) * 2 - 1
    y1 = torch.from_numpy(canvas[:, :, 0:96, :])
    y2 = torch.from_numpy(canvas[:, :, 4:100, :])
    fa = tiny_f2.features(y1)[0]
    fb = tiny_f2.features(y2)[0]
    assert torch.allclose(fb[:, 3:-3, 3:-3], fa[:, 4:-2, 3:-3], atol=1e-5)


# --------------------------------------------------------------------- tags


def test_rgb_to_hsv_matches_colorsys():
    import colorsys

    rng = np.random.default_rng(33)
    unit = rng.random((3, 4, 5)).astype(np.float32)
    hue, sat, val = rgb_to_hsv(unit)
    for i in range(4):
        for j in range(5):
            h, s, v = colorsys.rgb_to_hsv(*unit[:, i, j])
            assert hue[i, j] == pytest.approx(h, abs=1e-5)
            assert sat[i, j] == pytest.approx(s, abs=1e-5)
            assert val[i, j] == pytest.approx(v, abs=1e-5)


def test_dominant_hue_classes():
    assert dominant_hue_class(solid(1.0, -1.0, -1.0)) == 0      # red
    assert dominant_hue_class(solid(-1.0, 1.0, -1.0)) == 2      # green
    assert dominant_hue_class(solid(-1.0, -1.0, 1.0)) == 4      # blue
    assert dominant_hue_class(solid(0.2, 0.2, 0.2)) == HUE_BINS  # achromatic


def test_derive_tags_known_image():
    illustration = solid(1.0, -1.0, -1.0, h=20, w=20)
    line = np.ones((1, 20, 20), dtype=np.float32)
    line[0, :2, :] = 0.0  # 10% dark pixels
    tags = derive_tags(illustration, line)
    assert tags.shape == (TAG_COUNT,)
    assert tags[0] == 1.0                      # red hue dominates
    assert tags[1:HUE_BINS].sum() == 0.0
    assert tags[HUE_BINS + 2] == 1.0           # fully saturated
    assert tags[HUE_BINS + 3 + 2] == 1.0       # dense lines (>= 8%)
    assert tags.sum() == 3.0


def test_derive_tags_blank_page():
    illustration = solid(1.0, 1.0, 1.0)
    line = np.ones((1, 16, 16), dtype=np.float32)
    tags = derive_tags(illustration, line)
    assert tags[:HUE_BINS].sum() == 0.0        # nothing chromatic
    assert tags[HUE_BINS + 0] == 1.0           # zero saturation
    assert tags[HUE_BINS + 3 + 0] == 1.0       # zero line density


# --------------------------------------------------------------- pretraining


def stripe_corpus(n_per_class=24, side=64, seed=40):
    """Ten line-art classes: five vertical and five horizontal stripe periods."""
    rng = np.random.default_rng(seed)
    samples, labels = [], []
    for k in range(10):
        period = 4 + 2 * (k % 5)
        for _ in range(n_per_class):
            idx = np.arange(side) + rng.integers(0, period)
            stripes = ((idx // (period // 2)) % 2).astype(np.float32)
            art = np.tile(stripes, (side, 1)) if k < 5 else np.tile(stripes[:, None], (1, side))
            noise = rng.random((side, side)) < 0.02
            art = np.where(noise, 1.0 - art, art).astype(np.float32)
            tags = np.zeros(10, dtype=np.float32)
            tags[k] = 1.0
            samples.append((art[None], tags))
            labels.append(k)
    order = rng.permutation(len(samples))
    return [samples[i] for i in order], np.array(labels)[order]


def test_pretrain_refuses_small_corpus():
    samples, _ = stripe_corpus(n_per_class=2)
    with pytest.raises(ValueError, match="200"):
        pretrain_f1(samples, PretrainConfig())


def test_pretrain_f1_probe_beats_chance_and_is_deterministic():
    samples, labels = stripe_corpus()
    config = PretrainConfig(epochs=3, seed=7)
    net_a, hist_a = pretrain_f1(
        samples, config, net=LocalFeatureNet(LocalFeatureConfig(8, 32), n_tags=10))
    net_b, hist_b = pretrain_f1(
        samples, config, net=LocalFeatureNet(LocalFeatureConfig(8, 32), n_tags=10))
    assert hist_a["val_loss"] == hist_b["val_loss"]
    assert parameter_digest(net_a) == parameter_digest(net_b)

    # linear probe on frozen pooled features, held-out accuracy over chance
    net_a.freeze()
    with torch.no_grad():
        xs = torch.from_numpy(np.stack([s[0] for s in samples]))
        feats = net_a.features(xs).mean(dim=(2, 3))
    ys = torch.from_numpy(labels)
    train, test = slice(0, 200), slice(200, None)
    torch.manual_seed(0)
    probe = torch.nn.Linear(feats.shape[1], 10)
    opt = torch.optim.Adam(probe.parameters(), lr=0.05)
    for _ in range(150):
        opt.zero_grad()
        loss = torch.nn.functional.cross_entropy(probe(feats[train]), ys[train])
        loss.backward()
        opt.step()
    with torch.no_grad():
        acc = (probe(feats[test]).argmax(1) == ys[test]).float().mean().item()
    assert acc > 0.30, f"held-out probe accuracy {acc:.2f} is not above 3x chance"


def test_pretrain_f2_learns_hue_task(forged_pairs):
    rng = np.random.default_rng(41)
    images = []
    for _ in range(210):
        hue_push = rng.integers(0, 3)
        img = rng.random((3, 32, 32)).astype(np.float32) * 0.4
        img[hue_push] += 0.6
        images.append(img * 2 - 1)
    config = PretrainConfig(epochs=2, seed=8)
    net, hist = pretrain_f2(images, config,
                            net=PerceptualFeatureNet(PerceptualConfig(8, 16)))
    assert net.initialized
    assert len(hist["train_loss"]) == 2
    assert hist["train_loss"][-1] <= hist["train_loss"][0]


# -------------------------------------------------------------- checkpoints


def test_checkpoint_round_trip_is_bit_identical(tmp_path, tiny_f1, tiny_f2):
    p1 = tmp_path / "f1.pt"
    save_extractor_checkpoint(tiny_f1, p1)
    loaded = load_extractor_checkpoint(p1, "f1")
    assert parameter_digest(loaded) == parameter_digest(tiny_f1)
    assert loaded.initialized

    p2 = tmp_path / "f2.pt"
    save_extractor_checkpoint(tiny_f2, p2)
    loaded2 = load_extractor_checkpoint(p2, "f2")
    assert parameter_digest(loaded2) == parameter_digest(tiny_f2)


def test_checkpoint_kind_mismatch_rejected(tmp_path, tiny_f1):
    path = tmp_path / "f1.pt"
    save_extractor_checkpoint(tiny_f1, path)
    with pytest.raises(ValueError, match="perceptual"):
        load_extractor_checkpoint(path, "f2")


def test_unsaved_uninitialized_net_cannot_be_checkpointed(tmp_path):
    net = LocalFeatureNet(LocalFeatureConfig(8, 32))
    with pytest.raises(ExtractorNotInitialized):
        save_extractor_checkpoint(net, tmp_path / "x.pt")
