import json

import numpy as np
import pytest

from annealvi.cli import main
from annealvi.harness import ISO_HEADER, SWEEP_HEADER
from annealvi.trainer import TRACE_HEADER


SMALL = [
    "--d", "32", "--R", "2.0",
    "--batch-size", "64",
    "--steps", "200", "--post-steps", "50",
    "--schedule-beta-i", "0.1", "--schedule-t0", "10.0",
]


def _read(path):
    return path.read_text().splitlines()


class TestTheoryCommand:
    def test_reference_invocation(self, capsys):
        rc = main(
            [
                "theory",
                "--R", "3", "--d", "512", "--w-star", "0.8", "--alpha", "0.608",
                "--beta-i", "0.011111", "--t0", "500",
            ]
        )
        assert rc == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "beta_i,t0,I,p_theory"
        _, _, I, p = map(float, out[1].split(","))
        assert I == pytest.approx(41.1, abs=0.05)
        assert p < 1e-15

    def test_json_summary_single_line(self, capsys):
        rc = main(
            ["theory", "--beta-i", "0.01", "--t0", "100", "--json-summary"]
        )
        assert rc == 0
        lines = [l for l in capsys.readouterr().out.splitlines() if l.startswith("{")]
        assert len(lines) == 1
        payload = json.loads(lines[0])
        assert payload["command"] == "theory"


class TestScenarioCommand:
    def test_trace_has_documented_header(self, tmp_path):
        out = tmp_path / "trace.csv"
        rc = main(["scenario", "fig1_row1", "--seed", "1", "--out", str(out)])
        assert rc == 0
        lines = _read(out)
        assert lines[0] == TRACE_HEADER
        assert len(lines) > 10


class TestErrors:
    def test_missing_config_file_is_usage_error(self, tmp_path):
        rc = main(["sweep", "--config", "missing.cfg", "--out", str(tmp_path / "x.csv")])
        assert rc == 2

    def test_unknown_flag_is_usage_error(self):
        assert main(["theory", "--frobnicate", "1"]) == 2

    def test_unknown_config_key_is_usage_error(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("nonsense=1\n")
        rc = main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "t.csv")])
        assert rc == 2

    def test_unattainable_iso_level_is_runtime_error(self, tmp_path):
        rc = main(
            [
                "iso", "--level", "0.5", "--w-star", "0.5",
                "--out", str(tmp_path / "iso.csv"),
            ]
        )
        # w* = 0.5 has p identically 0: level unattainable, rows become nan
        assert rc == 0
        lines = _read(tmp_path / "iso.csv")
        assert lines[0] == ISO_HEADER
        assert all("nan" in l for l in lines[1:])


class TestDeterminismAndRoundTrip:
    def test_simulate_seed_determines_bytes(self, tmp_path):
        a, b, c = (tmp_path / n for n in ("a.csv", "b.csv", "c.csv"))
        base = ["simulate"] + SMALL
        assert main(base + ["--seed", "7", "--out", str(a)]) == 0
        assert main(base + ["--seed", "7", "--out", str(b)]) == 0
        assert main(base + ["--seed", "8", "--out", str(c)]) == 0
        assert a.read_bytes() == b.read_bytes()
        assert a.read_bytes() != c.read_bytes()

    def test_simulate_csv_roundtrip(self, tmp_path):
        out = tmp_path / "trace.csv"
        assert main(["simulate"] + SMALL + ["--seed", "3", "--out", str(out)]) == 0
        rows = np.genfromtxt(out, delimiter=",", names=True)
        assert list(rows.dtype.names) == TRACE_HEADER.split(",")
        assert rows["beta"][-1] == 1.0

    def test_sweep_csv_roundtrip_and_reference_columns(self, tmp_path):
        out = tmp_path / "sweep.csv"
        rc = main(
            ["sweep"] + SMALL + [
                "--beta-i-grid", "0.02,0.06",
                "--t0-grid", "10",
                "--replicates", "5",
                "--engine", "ode",
                "--seed", "3",
                "--out", str(out),
            ]
        )
        assert rc == 0
        lines = _read(out)
        assert lines[0] == SWEEP_HEADER
        rows = np.genfromtxt(out, delimiter=",", names=True)
        assert rows.shape == (2,)

    def test_ode_command(self, tmp_path):
        out = tmp_path / "ode.csv"
        rc = main(
            ["ode"] + SMALL + [
                "--seed", "5", "--t-end", "15", "--dt", "0.05", "--out", str(out),
            ]
        )
        assert rc == 0
        lines = _read(out)
        assert lines[0] == "t,beta,m1,m2,s"

    def test_compare_command(self, tmp_path):
        out = tmp_path / "cmp.csv"
        rc = main(["compare"] + SMALL + ["--seed", "2", "--out", str(out)])
        assert rc == 0
        assert _read(out)[0].startswith("step,tau,beta,m1_sgd")
