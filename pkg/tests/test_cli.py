import filecmp

import pytest

from sharc.cli import main
from sharc.config import parse_config

SMALL_CFG = """
[dataset]
num_ids = 3
tracklets_per_id = 2
frames_per_tracklet = 6
height = 8
width = 8
seed = 13

[model]
bins = 2
channels = 8
motion_channels = 6

[train]
num_ids = 3
samples_per_id = 3
input_dim = 6
hidden_dim = 8
embed_dim = 6
steps = 5
"""


@pytest.fixture
def workspace(tmp_path):
    cfg_path = tmp_path / "run.cfg"
    data_dir = tmp_path / "data"
    cfg_path.write_text(SMALL_CFG + f"\n[paths]\ndata_dir = {data_dir}\n")
    return cfg_path, data_dir, tmp_path


def _run(args):
    return main([str(a) for a in args])


def _expected_comment(cfg_path):
    from sharc import __version__

    return f"# sharc {__version__} config={parse_config(cfg_path).hash()}"


class TestExitCodes:
    def test_missing_config_is_2(self, tmp_path, capsys):
        assert _run(["synth", "--config", tmp_path / "nope.cfg"]) == 2
        assert "missing file" in capsys.readouterr().err
        assert "nope.cfg" in str(tmp_path / "nope.cfg")

    def test_invalid_config_is_3_and_names_field(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("[model]\nalpha = 1.7\n")
        assert _run(["synth", "--config", bad, "--out", tmp_path / "o"]) == 3
        err = capsys.readouterr().err
        assert "invalid config" in err and "model.alpha" in err

    def test_unknown_key_is_3(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("[model]\nwhatever = 1\n")
        assert _run(["synth", "--config", bad, "--out", tmp_path / "o"]) == 3
        assert "model.whatever" in capsys.readouterr().err

    def test_missing_inputs_are_2(self, workspace, capsys):
        cfg_path, data_dir, tmp = workspace
        out = tmp / "run"
        # no dataset yet: enroll cannot find the gallery manifest
        assert _run(["enroll", "--config", cfg_path, "--out", out]) == 2
        assert "gallery.csv" in capsys.readouterr().err
        # no index yet: query names it
        assert _run(["query", "--config", cfg_path, "--out", out]) == 2
        assert "index.shrc" in capsys.readouterr().err


class TestPipeline:
    def test_full_run_produces_commented_tables(self, workspace, capsys):
        cfg_path, data_dir, tmp = workspace
        out = tmp / "run"
        comment = _expected_comment(cfg_path)

        assert _run(["synth", "--config", cfg_path, "--out", data_dir]) == 0
        for name in ("manifest.csv", "gallery.csv", "query.csv"):
            text = (data_dir / name).read_text()
            assert text.startswith(comment + "\n"), name

        assert _run(["enroll", "--config", cfg_path, "--out", out]) == 0
        assert (out / "index.shrc").exists()

        assert _run(["query", "--config", cfg_path, "--out", out]) == 0
        for name in ("scores_shape.csv", "scores_appearance.csv", "scores_fused.csv"):
            assert (out / name).read_text().startswith(comment + "\n"), name

        assert _run(["evaluate", "--config", cfg_path, "--out", out]) == 0
        report = (out / "report.txt").read_text().splitlines()
        assert report[0] == comment
        assert report[1].startswith("rank_1=")
        assert report[-1].startswith("map=")
        csv_lines = (out / "report.csv").read_text().splitlines()
        assert csv_lines[1] == "rank_1,rank_5,rank_10,rank_20,map"
        out_text = capsys.readouterr().out
        assert "rank_1=" in out_text and "map=" in out_text

    def test_out_defaults_to_config_data_dir(self, workspace):
        # a config-only session must read and write one directory
        cfg_path, data_dir, tmp = workspace
        for command in ("synth", "enroll", "query", "evaluate"):
            assert _run([command, "--config", cfg_path]) == 0
        for name in ("gallery.csv", "index.shrc", "scores_fused.csv", "report.csv"):
            assert (data_dir / name).exists(), name

    def test_rerun_is_byte_identical(self, workspace):
        cfg_path, data_dir, tmp = workspace
        assert _run(["synth", "--config", cfg_path, "--out", data_dir]) == 0
        out1, out2 = tmp / "r1", tmp / "r2"
        for out in (out1, out2):
            assert _run(["enroll", "--config", cfg_path, "--out", out]) == 0
            assert _run(["query", "--config", cfg_path, "--out", out]) == 0
        for name in ("index.shrc", "scores_fused.csv"):
            assert filecmp.cmp(out1 / name, out2 / name, shallow=False), name

    def test_threads_do_not_change_results(self, workspace):
        cfg_path, data_dir, tmp = workspace
        assert _run(["synth", "--config", cfg_path, "--out", data_dir]) == 0
        out1, out2 = tmp / "t1", tmp / "t4"
        assert _run(["enroll", "--config", cfg_path, "--out", out1]) == 0
        assert _run(["enroll", "--config", cfg_path, "--out", out2, "--threads", "4"]) == 0
        assert filecmp.cmp(out1 / "index.shrc", out2 / "index.shrc", shallow=False)


class TestSweepsAndTraining:
    def test_ablation_tables(self, workspace):
        cfg_path, data_dir, tmp = workspace
        out = tmp / "run"
        assert _run(["synth", "--config", cfg_path, "--out", data_dir]) == 0
        assert _run(["ablate-gamma", "--config", cfg_path, "--out", out]) == 0
        lines = (out / "ablate_gamma.csv").read_text().splitlines()
        assert lines[1] == "gamma,rank1"
        assert len(lines) == 2 + 4
        assert lines[2].startswith("1.0,")

        assert _run(["ablate-alpha", "--config", cfg_path, "--out", out]) == 0
        lines = (out / "ablate_alpha.csv").read_text().splitlines()
        assert lines[1] == "alpha,rank1"
        assert len(lines) == 2 + 5
        for row in lines[2:]:
            rank1 = float(row.split(",")[1])
            assert 0.0 <= rank1 <= 1.0

    def test_train_toy_writes_trace_and_encoder(self, workspace, capsys):
        cfg_path, data_dir, tmp = workspace
        out = tmp / "run"
        assert _run(["train-toy", "--config", cfg_path, "--out", out]) == 0
        lines = (out / "loss_trace.csv").read_text().splitlines()
        assert lines[1] == "step,loss"
        assert len(lines) == 2 + 6  # initial loss plus 5 steps
        losses = [float(r.split(",")[1]) for r in lines[2:]]
        assert losses[-1] < losses[0]
        assert (out / "trained_encoder.shrcenc").exists()
        assert "final=" in capsys.readouterr().out

    def test_modality_drop_changes_shape_scores_only(self, workspace):
        cfg_path, data_dir, tmp = workspace
        assert _run(["synth", "--config", cfg_path, "--out", data_dir]) == 0
        dropped_cfg = tmp / "drop.cfg"
        dropped_cfg.write_text(
            cfg_path.read_text() + "\n[ablation]\ndrop_smpl = true\n"
        )
        out_full, out_drop = tmp / "full", tmp / "drop"
        for cfg, out in ((cfg_path, out_full), (dropped_cfg, out_drop)):
            assert _run(["enroll", "--config", cfg, "--out", out]) == 0
            assert _run(["query", "--config", cfg, "--out", out]) == 0
        full_shape = (out_full / "scores_shape.csv").read_text().splitlines()[2:]
        drop_shape = (out_drop / "scores_shape.csv").read_text().splitlines()[2:]
        assert full_shape != drop_shape
        full_app = (out_full / "scores_appearance.csv").read_text().splitlines()[2:]
        drop_app = (out_drop / "scores_appearance.csv").read_text().splitlines()[2:]
        assert full_app == drop_app
