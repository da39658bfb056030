import math

from click.testing import CliRunner

from mimox.cli import main, parse_grid, read_config_file


def test_parse_grid():
    assert parse_grid("6:3:18") == (6.0, 9.0, 12.0, 15.0, 18.0)
    assert parse_grid("0:0.5:1") == (0.0, 0.5, 1.0)
    assert parse_grid("1,4,7") == (1.0, 4.0, 7.0)


def test_sweep_writes_outputs(tmp_path):
    r = CliRunner().invoke(
        main, ["sweep", "--scheme", "ljj", "--const", "bpsk", "--pdb", "0:6:6", "--trials", "200", "--out", str(tmp_path)]
    )
    assert r.exit_code == 0, r.output
    assert (tmp_path / "ljj_bpsk.csv").read_text().startswith("p_db,trials,word_errors")
    assert (tmp_path / "ljj_bpsk.png").exists() and (tmp_path / "ljj_bpsk.manifest.txt").exists()


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# desk run\nscheme=ljj\nconst=qam4\npdb=4:4:8\ntrials=150\nnoise=false\n")
    assert read_config_file(cfg)["pdb"] == "4:4:8"
    r = CliRunner().invoke(main, ["sweep", "--config", str(cfg), "--trials", "100", "--out", str(tmp_path)])
    assert r.exit_code == 0, r.output
    lines = (tmp_path / "ljj_qam4.csv").read_text().splitlines()
    assert lines[1].split(",")[:3] == ["4.0", "100", "0"]
    assert len(lines) == 3


def test_bad_config_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour=blue\n")
    r = CliRunner().invoke(main, ["sweep", "--config", str(cfg)])
    assert r.exit_code != 0


def test_verify_reports():
    r = CliRunner().invoke(main, ["verify", "--check", "rank", "--draws", "100"])
    assert r.exit_code == 0 and "failures=0" in r.output
    r = CliRunner().invoke(main, ["verify", "--check", "regression"])
    assert "matrix1_claimed=-1.0" in r.output


def test_rankscan(tmp_path):
    out = tmp_path / "scan.txt"
    r = CliRunner().invoke(main, ["rankscan", "--theta", str(math.pi / 4), "--out", str(out)])
    assert r.exit_code == 0, r.output
    assert "full_rank=True" in out.read_text()
