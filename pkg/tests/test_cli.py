import json
import subprocess
import sys

import numpy as np
import pytest

from aflab import cli
from aflab.serialization import read_grid_csv, read_pgm


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestDp:
    def test_ofdm_closed(self, tmp_path, capsys):
        code, out, _ = run(capsys, "dp", "--waveform", "ofdm", "--constellation", "qam16", "--n", "64",
                           "--mode", "closed", "--out-dir", str(tmp_path))
        assert code == 0
        grid = read_grid_csv(tmp_path / "dp.csv")
        assert grid.shape == (64, 64)
        assert grid[5, 0] == pytest.approx(20.48, rel=1e-12)
        side = json.loads((tmp_path / "dp.json").read_text())
        assert side["normalized_eisl"] == pytest.approx(63)
        assert side["meta"]["mode"] == "closed-form"
        assert set(side["paper_anchor"]) == {"dp_grid", "dp_mainlobe", "dp_eisl"}
        assert json.loads(out)["mainlobe"] == pytest.approx(64**2 + 0.32 * 64)

    def test_bad_otfs_factors(self, tmp_path, capsys):
        code, _, err = run(capsys, "dp", "--waveform", "otfs:5x7", "--constellation", "qam16", "--n", "64",
                           "--out-dir", str(tmp_path))
        assert code == 2
        payload = json.loads(err)
        assert payload["exit_code"] == 2 and "N1*N2 = N" in payload["message"]

    def test_enum_and_pgm(self, tmp_path, capsys):
        code, _, _ = run(capsys, "dp", "--waveform", "afdm:1/8", "--constellation", "qpsk", "--n", "4",
                         "--mode", "enum", "--out-dir", str(tmp_path), "--pgm", str(tmp_path / "p.pgm"))
        assert code == 0
        pixels, comments = read_pgm(tmp_path / "p.pgm")
        assert pixels.shape == (4, 4) and comments[0].startswith("linear min-max scaling")

    @pytest.mark.parametrize("fmt", ["json", "pgm"])
    def test_formats(self, tmp_path, capsys, fmt):
        code, _, _ = run(capsys, "--format", fmt, "dp", "--waveform", "sc", "--constellation", "qpsk",
                         "--n", "8", "--out-dir", str(tmp_path))
        assert code == 0
        if fmt == "json":
            assert np.array(json.loads((tmp_path / "dp.json").read_text())["values"]).shape == (8, 8)
        else:
            assert (tmp_path / "dp.pgm").exists()

    def test_mc_byte_identical_across_threads(self, tmp_path, capsys):
        outs = []
        for threads in ("1", "4"):
            d = tmp_path / threads
            code, _, _ = run(capsys, "dp", "--waveform", "otfs:4x4", "--constellation", "qam16", "--n", "16",
                             "--mode", "mc:1300", "--seed", "5", "--threads", threads, "--out-dir", str(d))
            assert code == 0
            outs.append(((d / "dp.csv").read_bytes(), (d / "dp.json").read_bytes()))
        assert outs[0] == outs[1]

    @pytest.mark.parametrize("mode", ["mc:0", "mc:x", "fast"])
    def test_bad_mode(self, tmp_path, capsys, mode):
        code, _, _ = run(capsys, "dp", "--waveform", "sc", "--constellation", "qpsk", "--n", "8",
                         "--mode", mode, "--out-dir", str(tmp_path))
        assert code == 2


class TestOtherCommands:
    def test_fst_afdm(self, tmp_path, capsys):
        code, out, _ = run(capsys, "fst", "--waveform", "afdm:1/16,1/8", "--constellation", "qam16",
                           "--n", "64", "--m", "20", "--out-dir", str(tmp_path))
        assert code == 0
        side = json.loads((tmp_path / "fst.json").read_text())
        assert side["phi"] == 8
        assert side["eisl_grid_route"] == pytest.approx(side["eisl_formula_route"], rel=1e-9)
        grid = read_grid_csv(tmp_path / "fst.csv")
        assert grid.shape == (64, 20) and grid[8, 3] == pytest.approx(409.6)

    def test_index_set(self, tmp_path, capsys):
        code, _, _ = run(capsys, "index-set", "--waveform", "otfs:2x4", "--n", "8", "--out-dir", str(tmp_path))
        assert code == 0
        res = json.loads((tmp_path / "index_set.json").read_text())
        assert res["cardinality"] == 8 and res["no_2x2"] is True
        assert [0, 2] in res["members"] and [4, 0] in res["members"]

    @pytest.mark.parametrize("framing, targets", [("dp", "1:3:1:0,4:9:0.5:-0.5"), ("fst", "2:1:1:0")])
    def test_mf(self, tmp_path, capsys, framing, targets):
        code, _, _ = run(capsys, "mf", "--framing", framing, "--targets", targets, "--n", "16", "--m", "4",
                         "--n-cp", "4", "--out-dir", str(tmp_path))
        assert code == 0
        res = json.loads((tmp_path / "mf.json").read_text())
        assert res["reconstruction_error"] < 1e-9
        assert read_grid_csv(tmp_path / "mf.csv").shape == ((16, 16) if framing == "dp" else (16, 4))

    def test_mf_delay_beyond_cp(self, tmp_path, capsys):
        code, _, err = run(capsys, "mf", "--framing", "dp", "--targets", "9:0:1:0", "--n", "16",
                           "--n-cp", "4", "--out-dir", str(tmp_path))
        assert code == 2 and "CP" in json.loads(err)["message"]

    def test_probe(self, tmp_path, capsys):
        code, out, _ = run(capsys, "probe-optimality", "--n", "8", "--m", "4", "--kappa", "1.32",
                           "--schemes", "10", "--out-dir", str(tmp_path))
        assert code == 0 and json.loads(out)["reference"] == "ofdm"

    def test_stats(self, capsys):
        code, out, _ = run(capsys, "constellation-stats", "--constellation", "qam16")
        assert code == 0 and json.loads(out)["kurtosis"] == pytest.approx(1.32)

    def test_verify_quick(self, tmp_path, capsys):
        code, out, _ = run(capsys, "verify", "--quick", "--out-dir", str(tmp_path))
        assert code == 0
        assert "FAIL" not in out
        report = json.loads((tmp_path / "verify_quick.json").read_text())
        assert len(report["checks"]) >= 14


class TestErrors:
    def test_unknown_flag(self, capsys):
        code, _, err = run(capsys, "dp", "--bogus")
        assert code == 2 and json.loads(err)["exit_code"] == 2

    def test_io_error(self, capsys):
        code, _, err = run(capsys, "dp", "--waveform", "sc", "--constellation", "qpsk", "--n", "4",
                           "--out-dir", "/proc/nope")
        assert code == 4 and json.loads(err)["exit_code"] == 4

    def test_threads_validated(self, capsys):
        code, _, _ = run(capsys, "--threads", "0", "constellation-stats", "--constellation", "qpsk")
        assert code == 2

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "aflab", "constellation-stats", "--constellation", "psk8"],
                              capture_output=True, text=True, check=False)
        assert proc.returncode == 0, proc.stderr
        assert json.loads(proc.stdout)["kurtosis"] == pytest.approx(1.0)
