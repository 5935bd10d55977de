import subprocess
import sys

import numpy as np
import pytest

from zzscale.cli import EXIT_ASSERTION, EXIT_CONFIG, EXIT_OK, build_parser, main
from zzscale.config import CONFIG_KEYS, ConfigError, RunConfig, parse_config, parse_n_grid, parse_x_grid


def run_cli(*argv):
    return main(list(argv))


class TestConfigFile:
    def test_round_trip(self):
        cfg = RunConfig({"model.kind": "cauchy", "scheme": "mixed", "scheme.m": "2", "seed": "5"})
        back = parse_config(cfg.emit())
        assert back.values == cfg.values

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("bogus.key = 1\n")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("seed = 1\nseed = 2\n")

    def test_comments_and_blanks(self):
        cfg = parse_config("# comment\n\nseed = 9  # trailing\n")
        assert cfg.get("seed") == "9"

    def test_defaults_apply(self):
        cfg = RunConfig({})
        assert cfg.get("scheme") == "ss"
        assert cfg.get_int("run.n") == 1000

    def test_malformed_line(self):
        with pytest.raises(ConfigError):
            parse_config("just some words\n")

    def test_n_grid_forms(self):
        assert parse_n_grid("2^4..2^8") == (16, 64, 256)
        assert parse_n_grid("100,1000") == (100, 1000)
        with pytest.raises(ConfigError):
            parse_n_grid("2^8..2^4")

    def test_x_grid(self):
        assert parse_x_grid("-1:1:0.5") == (-1.0, -0.5, 0.0, 0.5, 1.0)
        with pytest.raises(ConfigError):
            parse_x_grid("0:1")


class TestHelp:
    def test_help_lists_every_config_key(self, capsys):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["sample", "--help"])
        out = capsys.readouterr().out
        for key in CONFIG_KEYS:
            assert key in out

    def test_top_level_help_lists_subcommands(self, capsys):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["--help"])
        out = capsys.readouterr().out
        for name in ("sample", "drift-table", "scaling", "transient", "stationary", "mixed", "fluid", "ou"):
            assert name in out


class TestSampleCommand:
    def test_determinism_identical_files(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        args = ["sample", "--model", "gaussian", "--scheme", "ss", "--m", "1",
                "--n", "500", "--t-max", "50", "--seed", "7"]
        assert run_cli(*args, "--out", str(a)) == EXIT_OK
        assert run_cli(*args, "--out", str(b)) == EXIT_OK
        for name in ("skeleton.csv", "ledger.csv", "sample.manifest"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_fresh_seed_recorded_when_omitted(self, tmp_path):
        out = tmp_path / "o"
        assert run_cli("sample", "--model", "gaussian", "--n", "100", "--t-max", "5", "--out", str(out)) == EXIT_OK
        manifest = (out / "sample.manifest").read_text()
        seed_line = [l for l in manifest.splitlines() if l.startswith("seed = ")][0]
        assert int(seed_line.split("=")[1]) >= 0

    def test_sample_from_existing_dataset(self, tmp_path):
        gen = tmp_path / "g"
        assert run_cli("generate-data", "--model", "gaussian", "--n", "200", "--seed", "3", "--out", str(gen)) == EXIT_OK
        out = tmp_path / "s"
        assert (
            run_cli("sample", "--model", "gaussian", "--scheme", "cv", "--data", str(gen / "dataset.csv"),
                    "--t-max", "20", "--seed", "4", "--out", str(out))
            == EXIT_OK
        )
        assert (out / "skeleton.csv").exists()

    def test_config_file_with_flag_override(self, tmp_path):
        cfgfile = tmp_path / "run.cfg"
        cfgfile.write_text("model.kind = gaussian\nrun.n = 100\nrun.t_max = 5\nseed = 2\nout = IGNORED\n")
        out = tmp_path / "o"
        assert run_cli("sample", "--config", str(cfgfile), "--out", str(out)) == EXIT_OK
        assert (out / "skeleton.csv").exists()


class TestErrorPaths:
    def test_unknown_config_key_exits_2(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("nope = 1\n")
        assert run_cli("sample", "--config", str(bad)) == EXIT_CONFIG

    def test_bad_grid_exits_2(self, tmp_path):
        assert run_cli("drift-table", "--model", "cauchy", "--grid", "oops", "--out", str(tmp_path)) == EXIT_CONFIG

    def test_bad_scheme_name_exits_2(self, tmp_path):
        assert (
            run_cli("scaling", "--model", "gaussian", "--schemes", "nope", "--ngrid", "2^4..2^6",
                    "--out", str(tmp_path), "--seed", "1")
            == EXIT_CONFIG
        )

    def test_insufficient_samples_exits_1(self, tmp_path):
        code = run_cli(
            "stationary", "--model", "gaussian", "--schemes", "ss", "--n", "400",
            "--t-max", "20", "--dt", "0.02", "--seed", "5", "--out", str(tmp_path),
        )
        assert code == EXIT_ASSERTION


class TestSmallPipelines:
    def test_fluid_and_ou_outputs(self, tmp_path):
        fl = tmp_path / "fl"
        assert run_cli("fluid", "--model", "gaussian", "--scheme", "ss", "--t-max", "3",
                       "--start-offset", "2", "--seed", "1", "--out", str(fl)) == EXIT_OK
        header = (fl / "fluid_path.csv").read_text().splitlines()[0]
        assert header == "t,x1"
        ou = tmp_path / "ou"
        assert run_cli("ou", "--model", "gaussian", "--m", "1", "--t-max", "5", "--dt", "0.1",
                       "--seed", "2", "--out", str(ou)) == EXIT_OK
        assert (ou / "ou_path.csv").read_text().splitlines()[0] == "t,xi1"

    def test_drift_table_cauchy_quarter_pi(self, tmp_path):
        out = tmp_path / "dt"
        assert run_cli("drift-table", "--model", "cauchy", "--grid", "-0.02:0.02:0.01",
                       "--xstar", "0", "--seed", "1", "--out", str(out)) == EXIT_OK
        rows = (out / "drift_table.csv").read_text().splitlines()[1:]
        vals = {round(float(r.split(",")[0]), 6): float(r.split(",")[3]) for r in rows}
        assert vals[0.01] == pytest.approx(-np.pi / 4, abs=1e-3)
        assert vals[-0.01] == pytest.approx(np.pi / 4, abs=1e-3)

    def test_transient_command(self, tmp_path):
        assert run_cli("transient", "--model", "gaussian", "--schemes", "can", "--n", "500",
                       "--t-max", "1.5", "--replicates", "2", "--dt", "0.01",
                       "--start-offset", "2", "--seed", "3", "--out", str(tmp_path)) == EXIT_OK
        assert (tmp_path / "transient_summary.csv").exists()

    def test_console_entry_point(self):
        res = subprocess.run(
            [sys.executable, "-m", "zzscale.cli", "--help"], capture_output=True, text=True
        )
        assert res.returncode == 0
        assert "zzscale" in res.stdout
