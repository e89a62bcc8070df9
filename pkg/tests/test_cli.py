from pathlib import Path

import pytest

from kar import cli
from kar.errors import NumericError

from conftest import small_config


@pytest.fixture(scope="module")
def cli_cfg(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert cli.main(["synth", "--kind", "movielens", "--out", str(root / "ml"), "--users", "60",
                     "--items", "80", "--ratings", "2500"]) == 0
    cfg = small_config(root / "work", root / "ml", train_limit=1200)
    conf = root / "run.cfg"
    conf.write_text("# end-to-end CLI run\n" + cfg.dumps())
    return cfg, conf


def test_end_to_end(cli_cfg, capsys):
    cfg, conf = cli_cfg
    c = ["--config", str(conf)]
    for cmd in ("prepare-data", "gen-prompts", "gen-knowledge", "encode"):
        assert cli.main([cmd, *c]) == 0, cmd
    out = capsys.readouterr().out
    assert out.startswith("split\tsamples\ntrain\t")
    assert "preference\t" in out and "item_factual\t" in out
    assert cli.main(["train", *c, "--mode", "none", "--checkpoint-path", cfg.base_checkpoint_path]) == 0
    assert cli.main(["train", *c, "--mode", "both"]) == 0
    out = capsys.readouterr().out
    assert "backbone\tmode\tepoch\ttrain_logloss" in out and "# best epoch" in out
    assert cli.main(["export-augmented", *c]) == 0
    assert capsys.readouterr().out.startswith("vectors\tdim\tcache\n")
    assert cli.main(["bench", *c]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0].split("\t")[:2] == ["backbone", "variant"]
    assert len(out.strip().splitlines()) == 4
    for name in ("train_curve.png", "train_epochs.tsv", "bench.png", "bench.jsonl"):
        assert (Path(cfg.report_dir) / name).exists(), name


def test_ablate_subset(cli_cfg, capsys):
    cfg, conf = cli_cfg
    assert cli.main(["ablate", "--config", str(conf), "--modes", "none,fact",
                     "--set", f"checkpoint_path={Path(cfg.report_dir) / 'abl.ckpt'}"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert [l.split("\t")[1] for l in lines[1:]] == ["none", "fact"]
    assert (Path(cfg.report_dir) / "ablation.png").exists()


def test_elicit_override(capsys):
    assert cli.main(["elicit-factors", "--factors", "plot;pacing"]) == 0
    assert capsys.readouterr().out == "1\tplot\n2\tpacing\n"


def test_elicit_preset(capsys):
    assert cli.main(["elicit-factors"]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 7


@pytest.mark.parametrize("argv", [
    ["train", "--backbone", "xdeepfm"],
    ["train", "--batch-size", "lots"],
    ["train", "--set", "nonsense=1"],
    ["train", "--set", "novalue"],
    ["train", "--config", "/nonexistent/run.cfg"],
    ["ablate", "--modes", "none,all"],
])
def test_config_errors_exit_2(argv, capsys):
    assert cli.main(argv) == 2
    assert "config error" in capsys.readouterr().err


def test_data_errors_exit_3(tmp_path, capsys):
    assert cli.main(["prepare-data", "--data-dir", str(tmp_path / "none")]) == 3
    assert cli.main(["train", "--train-path", str(tmp_path / "t.bin")]) == 3
    assert cli.main(["bench", "--base-checkpoint-path", str(tmp_path / "b.ckpt"),
                     "--test-path", str(tmp_path / "t.bin")]) == 3
    assert "data error" in capsys.readouterr().err


def test_numeric_error_exit_4(monkeypatch, capsys):
    def boom(cfg, args):
        raise NumericError("loss went to nan")

    monkeypatch.setitem(cli.COMMANDS, "train", (boom, "x"))
    assert cli.main(["train"]) == 4
    assert "nan" in capsys.readouterr().err


def test_every_field_is_a_flag():
    from dataclasses import fields

    from kar.pipeline.config import RunConfig

    help_text = cli.build_parser()._subparsers._group_actions[0].choices["train"].format_help()
    for f in fields(RunConfig):
        assert "--" + f.name.replace("_", "-") in help_text
