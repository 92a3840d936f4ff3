"""End-to-end CLI: fixtures -> pretrain -> train -> eval/infer/visualize."""

import pytest

from trisal.cli import main


@pytest.fixture(scope="module")
def cli_workspace(tmp_path_factory):
    """Drive the whole surface through the CLI once, then inspect it."""
    ws = tmp_path_factory.mktemp("cli")
    data = ws / "data"
    cfg = ws / "train.cfg"
    cfg.write_text("max_steps = 4\nseed = 1\n")

    assert main(["fixtures", "--out", str(data), "--seed", "3"]) == 0
    for stage in ("depth", "flow", "rgb"):
        rc = main(
            ["pretrain", "--stage", stage, "--data", str(data),
             "--config", str(cfg), "--out", str(ws / "pre")]
        )
        assert rc == 0
    rc = main(
        ["train", "--data", str(data), "--config", str(cfg),
         "--from-pretrained", str(ws / "pre"), "--out", str(ws / "fit")]
    )
    assert rc == 0
    return ws, data


class TestCli:
    def test_fixture_spec_file(self, tmp_path):
        spec = tmp_path / "fx.cfg"
        spec.write_text("frames = 3\nobject_size = 8\n")
        assert main(["fixtures", "--spec", str(spec), "--out", str(tmp_path / "d"), "--seed", "1"]) == 0
        assert len(list((tmp_path / "d" / "seq00" / "GT").glob("*.png"))) == 3

    def test_corrupted_fixture_flag(self, tmp_path):
        import numpy as np
        from PIL import Image

        assert main(["fixtures", "--out", str(tmp_path / "d"), "--corrupt", "depth"]) == 0
        depth = np.asarray(Image.open(tmp_path / "d" / "seq00" / "Depth" / "00000.png"))
        assert depth.min() == depth.max()

    def test_training_artifacts_exist(self, cli_workspace):
        ws, _ = cli_workspace
        assert (ws / "pre" / "pretrain_depth.pt").is_file()
        assert (ws / "pre" / "pretrain_flow.pt").is_file()
        assert (ws / "pre" / "pretrain_rgb.pt").is_file()
        assert (ws / "fit" / "finetune.pt").is_file()
        assert (ws / "fit" / "train_log.jsonl").is_file()

    def test_eval_writes_table(self, cli_workspace, capsys):
        ws, data = cli_workspace
        rc = main(
            ["eval", "--checkpoint", str(ws / "fit" / "finetune.pt"),
             "--data", str(data), "--out", str(ws / "eval"), "--dataset-name", "toy"]
        )
        assert rc == 0
        out = capsys.readouterr().out
        assert "| dataset | S_alpha | F_beta_max | MAE |" in out
        csv = (ws / "eval" / "metrics.csv").read_text()
        assert csv.startswith("dataset,s_alpha,f_beta_max,mae")
        assert "toy" in csv

    def test_infer_writes_maps(self, cli_workspace):
        ws, data = cli_workspace
        rc = main(
            ["infer", "--checkpoint", str(ws / "fit" / "finetune.pt"),
             "--data", str(data), "--out", str(ws / "maps")]
        )
        assert rc == 0
        assert len(list((ws / "maps").rglob("*.png"))) == 7  # 8 frames - last

    def test_visualize_writes_panels(self, cli_workspace):
        ws, data = cli_workspace
        rc = main(
            ["visualize-sw", "--checkpoint", str(ws / "fit" / "finetune.pt"),
             "--data", str(data), "--out", str(ws / "viz")]
        )
        assert rc == 0
        names = {p.name.split("_", 2)[-1] for p in (ws / "viz").glob("*.png")}
        assert {"sw5.png", "sw5_salient.png", "sw5_nonsalient.png",
                "feat_flow5.png", "feat_depth5.png", "feat_fused5.png",
                "panel.png"} <= names

    def test_output_root_env_var(self, tmp_path, monkeypatch):
        monkeypatch.setenv("TRISAL_OUTPUT_ROOT", str(tmp_path / "rooted"))
        from trisal.cli import _output_root

        assert _output_root() == tmp_path / "rooted"

    def test_visualize_rejects_baseline_checkpoint(self, cli_workspace, tmp_path):
        ws, data = cli_workspace
        cfg = tmp_path / "b.cfg"
        cfg.write_text("max_steps = 2\nuse_selective_fusion = false\nrequire_pretrained = false\n")
        rc = main(["train", "--data", str(data), "--config", str(cfg), "--out", str(tmp_path / "b")])
        assert rc == 0
        with pytest.raises(ValueError, match="selective-fusion"):
            main(["visualize-sw", "--checkpoint", str(tmp_path / "b" / "finetune.pt"),
                  "--data", str(data), "--out", str(tmp_path / "v")])
