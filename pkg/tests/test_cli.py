import json

import numpy as np
import pytest

from linepaint.cli import build_parser, main
from linepaint.images import save_illustration_png
from tests.conftest import TINY_DISC, TINY_GEN, make_illustration

SUBCOMMANDS = ["forge", "pretrain-f1", "pretrain-f2", "train", "colorize", "fid", "serve"]


@pytest.mark.parametrize("sub", SUBCOMMANDS)
def test_help_exits_zero(sub, capsys):
    with pytest.raises(SystemExit) as exc:
        main([sub, "--help"])
    assert exc.value.code == 0
    assert sub in capsys.readouterr().out or True


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0


def test_missing_required_arguments_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["forge", "--input", "somewhere"])
    assert exc.value.code == 2


def test_forge_rejects_missing_input_dir(tmp_path):
    code = main(["forge", "--input", str(tmp_path / "nope"),
                 "--output", str(tmp_path / "out")])
    assert code == 2


def test_colorize_missing_checkpoint_exits_3(tmp_path, capsys):
    art = tmp_path / "line.png"
    art.write_bytes(b"placeholder")
    code = main(["colorize", str(art),
                 "--checkpoint", str(tmp_path / "missing.pt"),
                 "--out", str(tmp_path / "out.png")])
    assert code == 3
    assert "missing.pt" in capsys.readouterr().err


def test_colorize_bad_image_exits_4(tmp_path, mini_run):
    art = tmp_path / "line.png"
    art.write_bytes(b"this is not an image")
    code = main(["colorize", str(art),
                 "--checkpoint", str(mini_run["checkpoint"]),
                 "--out", str(tmp_path / "out.png")])
    assert code == 4


def test_fid_external_embedding_is_refused(tmp_path):
    code = main(["fid", "--set-a", str(tmp_path), "--set-b", str(tmp_path),
                 "--embed", "external", "--out", str(tmp_path / "fid.json")])
    assert code == 2


def test_serve_rejects_malformed_bind(tmp_path):
    code = main(["serve", "--models", str(tmp_path), "--bind", "nocolon"])
    assert code == 2


def test_train_requires_extractors(tmp_path, forged_dir):
    code = main(["train", "--data", str(forged_dir), "--out", str(tmp_path / "run"),
                 "--iterations", "1"])
    assert code == 2


def test_train_rejects_bad_config(tmp_path, forged_dir):
    config_path = tmp_path / "cfg.json"
    config_path.write_text(json.dumps({"image_side": 70}))
    code = main(["train", "--data", str(forged_dir), "--out", str(tmp_path / "run"),
                 "--config", str(config_path),
                 "--f1", "x.pt", "--f2", "y.pt"])
    assert code == 2


@pytest.fixture(scope="module")
def forged_dir(tmp_path_factory):
    rng = np.random.default_rng(21)
    art_dir = tmp_path_factory.mktemp("illustrations")
    for i in range(6):
        save_illustration_png(make_illustration(rng), art_dir / f"img{i}.png")
    out_dir = tmp_path_factory.mktemp("forged")
    assert main(["forge", "--input", str(art_dir), "--output", str(out_dir),
                 "--side", "64", "--seed", "9"]) == 0
    return out_dir


def test_forge_is_reproducible(tmp_path, forged_dir):
    rng = np.random.default_rng(21)
    art_dir = tmp_path / "illustrations"
    art_dir.mkdir()
    for i in range(6):
        save_illustration_png(make_illustration(rng), art_dir / f"img{i}.png")
    again = tmp_path / "again"
    assert main(["forge", "--input", str(art_dir), "--output", str(again),
                 "--side", "64", "--seed", "9"]) == 0
    pngs = sorted(forged_dir.glob("*.png"))
    assert pngs
    for src in pngs:
        assert (again / src.name).read_bytes() == src.read_bytes()


def test_full_pipeline_through_the_cli(tmp_path_factory, forged_dir, capsys):
    work = tmp_path_factory.mktemp("pipeline")
    f1_path = work / "f1.pt"
    f2_path = work / "f2.pt"

    assert main(["pretrain-f1", "--corpus", str(forged_dir), "--out", str(f1_path),
                 "--epochs", "1", "--seed", "3", "--width", "8", "--features", "32",
                 "--min-corpus", "4"]) == 0
    assert main(["pretrain-f2", "--corpus", str(forged_dir), "--out", str(f2_path),
                 "--epochs", "1", "--seed", "4", "--width", "8", "--features", "16",
                 "--min-corpus", "4"]) == 0

    from linepaint.networks import DiscriminatorConfig, GeneratorConfig
    from linepaint.training import TrainConfig

    config = TrainConfig(total_iterations=2, drop_iteration=1, batch_size=2,
                         image_side=64, checkpoint_every=2,
                         generator=GeneratorConfig(**TINY_GEN),
                         discriminator=DiscriminatorConfig(**TINY_DISC))
    config_path = work / "train.json"
    config_path.write_text(json.dumps(config.to_dict()))

    run_dir = work / "run"
    assert main(["train", "--data", str(forged_dir), "--out", str(run_dir),
                 "--config", str(config_path),
                 "--f1", str(f1_path), "--f2", str(f2_path), "--seed", "5"]) == 0
    checkpoint = run_dir / "ckpt_0000002.pt"
    assert checkpoint.exists()
    assert (run_dir / "metrics.jsonl").exists()

    from linepaint.forge import load_forged_pairs
    from linepaint.images import save_line_art_png

    pair = load_forged_pairs(forged_dir)[0]
    line_path = work / "page.png"
    save_line_art_png(pair["line"], line_path)
    out_path = work / "color.png"
    assert main(["colorize", str(line_path), "--checkpoint", str(checkpoint),
                 "--out", str(out_path)]) == 0
    assert out_path.stat().st_size > 0

    set_a = work / "set_a"
    set_b = work / "set_b"
    rng = np.random.default_rng(30)
    for directory, offset in ((set_a, 0), (set_b, 3)):
        directory.mkdir()
        for i in range(6):
            save_illustration_png(make_illustration(rng), directory / f"p{i}.png")
    fid_report = work / "fid.json"
    assert main(["fid", "--set-a", str(set_a), "--set-b", str(set_b),
                 "--embed", "f2", "--extractor", str(f2_path),
                 "--out", str(fid_report)]) == 0
    report = json.loads(fid_report.read_text())
    assert np.isfinite(report["fid"]) and report["fid"] >= 0
    assert report["count_a"] == 6 and report["count_b"] == 6

    manifests = [json.loads(line) for line in
                 (run_dir / "runs.jsonl").read_text().splitlines()]
    assert manifests[0]["command"] == "train"
    assert manifests[0]["seed"] == 5
    for record in manifests:
        assert set(record) >= {"command", "created_utc", "version",
                               "config_sha256", "inputs", "outputs"}


def test_colorize_writes_manifest_next_to_output(tmp_path, mini_run):
    rng = np.random.default_rng(31)
    from linepaint.images import save_line_art_png

    line_path = tmp_path / "line.png"
    save_line_art_png((rng.random((1, 64, 64)) > 0.2).astype(np.float32), line_path)
    out_path = tmp_path / "nested" / "color.png"
    assert main(["colorize", str(line_path), "--checkpoint", str(mini_run["checkpoint"]),
                 "--out", str(out_path)]) == 0
    records = [json.loads(line) for line in
               (out_path.parent / "runs.jsonl").read_text().splitlines()]
    assert records[-1]["command"] == "colorize"
    assert str(line_path) in records[-1]["inputs"]


def test_parser_covers_all_subcommands():
    parser = build_parser()
    actions = [a for a in parser._actions if isinstance(a, type(parser._subparsers._group_actions[0]))]
    names = set(parser._subparsers._group_actions[0].choices)
    assert names == set(SUBCOMMANDS)
