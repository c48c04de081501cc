import numpy as np
import pytest

from sketchmatch.cli import main
from sketchmatch.imageproc import read_netpbm
from sketchmatch.model_io import load_weights


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["demo-data", str(root / "data"), "--identities", "3", "--pairs", "2", "--size", "32"]) == 0
    cfg = root / "tiny.cfg"
    cfg.write_text("image_size = 32\ngen_channels = 4,8,16,32\ndisc_channels = 4,8,16,32\n"
                   "max_steps = 2\nbatch_size = 6\nlr = 0.01\n")
    assert main(["train", str(root / "data"), "--config", str(cfg), "--out", str(root / "run")]) == 0
    return root


def test_train_outputs(workspace, capsys):
    run = workspace / "run"
    assert (run / "config.txt").exists()
    assert len((run / "metrics.csv").read_text().splitlines()) == 3
    assert "gen.out.w" in load_weights(run / "model.fsrw")


def test_ingest(workspace, capsys):
    assert main(["ingest", str(workspace / "data"), "--holdout", "--out", str(workspace / "index.csv")]) == 0
    assert "6 records, 3 identities, 3 held-out probes" in capsys.readouterr().out
    assert (workspace / "index.csv").read_text().startswith("identity,stem,photo,sketch,split")


def test_synthesize(workspace):
    out = workspace / "sk.pgm"
    photo = workspace / "data" / "photos" / "id000_0.pgm"
    assert main(["synthesize", str(workspace / "run" / "model.fsrw"), str(photo), str(out)]) == 0
    assert read_netpbm(out).shape == (32, 32)
    assert main(["synthesize", str(workspace / "run" / "model.fsrw"), str(photo), str(out), "--patch", "16", "16"]) == 0


def test_embed_and_features(workspace, capsys):
    emb = workspace / "emb.csv"
    assert main(["embed", str(workspace / "run" / "model.fsrw"), str(workspace / "data"), "--out", str(emb)]) == 0
    assert len(emb.read_text().splitlines()) == 7
    assert main(["features", "pca", str(emb), "--k", "2", "--out", str(workspace / "pca.csv")]) == 0
    assert main(["features", "topn", str(emb), "--n", "3"]) == 0
    assert main(["features", "ig", str(emb)]) == 0
    capsys.readouterr()
    assert main(["features", "cfs", str(emb), "--strategy", "forward"]) == 0
    assert capsys.readouterr().out.startswith("selected:")


def test_match(workspace, capsys):
    probe = workspace / "data" / "sketches" / "id001_1.pgm"
    out = workspace / "match.csv"
    assert main(["match", str(workspace / "run" / "model.fsrw"), str(probe), str(workspace / "data"),
                 "--identity", "id001", "--out", str(out)]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 3
    assert sorted(l.split()[1] for l in lines) == ["id000", "id001", "id002"]
    assert out.read_text().startswith("rank,identity,distance")


def test_eval(workspace, capsys):
    out = workspace / "cmc.csv"
    assert main(["eval", str(workspace / "run" / "model.fsrw"), str(workspace / "data"), "--holdout",
                 "--out", str(out)]) == 0
    acc = [float(l.split(",")[1]) for l in out.read_text().splitlines()[1:]]
    assert len(acc) == 3 and acc[-1] == 1.0 and acc == sorted(acc)


def test_transfer_two_stage(workspace, capsys):
    run2 = workspace / "run2"
    assert main(["train", str(workspace / "data"), "--config", str(workspace / "tiny.cfg"), "--out", str(run2),
                 "--init-from", str(workspace / "run" / "model.fsrw")]) == 0
    out = capsys.readouterr().out
    assert "transfer: copied" in out and "4 steps" in out
    steps = [int(l.split(",")[0]) for l in (run2 / "metrics.csv").read_text().splitlines()[1:]]
    assert steps == [1, 2, 3, 4]


def test_errors_exit_2(workspace, tmp_path, capsys):
    assert main(["ingest", str(tmp_path / "missing")]) == 2
    assert "error:" in capsys.readouterr().err
    bad = tmp_path / "bad.fsrw"
    bad.write_bytes(b"FSRW garbage")
    assert main(["synthesize", str(bad), str(workspace / "data" / "photos" / "id000_0.pgm"), str(tmp_path / "o.pgm")]) == 2
    cfg = tmp_path / "c.cfg"
    cfg.write_text("nope = 1\n")
    assert main(["train", str(workspace / "data"), "--config", str(cfg), "--out", str(tmp_path / "r")]) == 2


def test_unknown_command():
    with pytest.raises(SystemExit):
        main(["bogus"])
