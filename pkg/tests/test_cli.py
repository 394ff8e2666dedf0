import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from hqcoherence import __version__
from hqcoherence._constants import PLANCK_EV_NS
from hqcoherence.cli import main
from hqcoherence.dynamics import analytic_return_probability
from hqcoherence.materials import SILICON_28
from hqcoherence.sweep import derive_point_params
from hqcoherence.tables import SWEEP_COLUMNS, read_trace_csv

from .conftest import synthetic_envelope


def _write_config(path: Path, **config) -> str:
    path.write_text(json.dumps(config))
    return str(path)


@pytest.fixture
def noise_free_config(tmp_path: Path) -> str:
    return _write_config(
        tmp_path / "noise_free.json",
        j0_grid=[1e-6],
        materials=[{"name": "28Si"}],
        sigma_ratios=[0],
        method={"kind": "quad"},
        window={"t_max_ns": 165.0, "n_points": 801},
    )


@pytest.fixture
def reference_config(tmp_path: Path) -> str:
    return _write_config(
        tmp_path / "reference.json",
        j0_grid=[1e-7],
        materials=[{"name": "Si"}],
        sigma_ratios=[0.03],
        method={"kind": "mc", "n_samples": 500},
        master_seed=17,
        window={"t_max_ns": 1500.0, "n_points": 1201},
    )


@pytest.fixture
def synthetic_trace(tmp_path: Path) -> Path:
    times = np.linspace(0, 250, 126)
    p = synthetic_envelope(times, 0.25, 50.0, 2.0)
    path = tmp_path / "synthetic.csv"
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["t_ns", "p_avg"])
        writer.writerows(zip(times, p))
    return path


class TestTrace:
    def test_noise_free_matches_closed_form(
        self, tmp_path: Path, noise_free_config: str
    ) -> None:
        out = tmp_path / "trace.csv"
        assert main(["trace", "--config", noise_free_config, "--out", str(out)]) == 0
        trace = read_trace_csv(out)
        base, _ = derive_point_params(1e-6, 0.0, SILICON_28)
        np.testing.assert_allclose(
            trace.probabilities,
            analytic_return_probability(base, trace.times),
            rtol=0,
            atol=1e-12,
        )
        assert trace.standard_errors is None
        assert len(trace) == 801

    def test_byte_identical(self, tmp_path: Path, reference_config: str) -> None:
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["trace", "--config", reference_config, "--out", str(first)]) == 0
        assert main(["trace", "--config", reference_config, "--out", str(second)]) == 0
        assert first.read_bytes() == second.read_bytes()

    def test_seed_override(self, tmp_path: Path, reference_config: str) -> None:
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["trace", "--config", reference_config, "--out", str(first)])
        args = ["trace", "--config", reference_config, "--out", str(second)]
        main([*args, "--seed", "1"])
        assert first.read_bytes() != second.read_bytes()

    def test_leakage_column(self, tmp_path: Path, reference_config: str) -> None:
        out = tmp_path / "trace.csv"
        args = ["trace", "--config", reference_config, "--out", str(out), "--leakage"]
        assert main(args) == 0
        assert out.read_text().splitlines()[0] == "t_ns,p_avg,std_err,leakage"

    def test_negative_sigma(
        self, tmp_path: Path, capsys: pytest.CaptureFixture[str]
    ) -> None:
        config = _write_config(
            tmp_path / "bad.json", materials=[{"name": "X", "sigma_e": -1e-9}]
        )
        assert main(["trace", "--config", config]) == 1
        assert "materials.0.sigma_e" in capsys.readouterr().err

    def test_quadrature_window_too_long(
        self, tmp_path: Path, capsys: pytest.CaptureFixture[str]
    ) -> None:
        config = _write_config(
            tmp_path / "long.json",
            j0_grid=[1e-7],
            materials=[{"name": "Si"}],
            sigma_ratios=[0.03],
            method={"kind": "quad"},
            window={"t_max_ns": 16000.0, "n_points": 41},
        )
        out = tmp_path / "trace.csv"
        assert main(["trace", "--config", config, "--out", str(out)]) == 1
        assert "by quadrature" in capsys.readouterr().err
        assert not out.exists()

    def test_fit_sidecar_from_config(
        self, tmp_path: Path, reference_config: str
    ) -> None:
        config = json.loads(Path(reference_config).read_text())
        sidecar = tmp_path / "trace_fit.json"
        config["output"] = {"json_path": str(sidecar)}
        path = _write_config(tmp_path / "with_json.json", **config)
        out = tmp_path / "trace.csv"
        assert main(["trace", "--config", path, "--out", str(out)]) == 0
        fit = json.loads(sidecar.read_text())
        assert fit["t2_star_ns"] > 0
        assert 0 <= fit["p_sat"] < 1

    def test_needs_single_point(self, capsys: pytest.CaptureFixture[str]) -> None:
        assert main(["trace"]) == 1
        assert "j0_grid" in capsys.readouterr().err

    def test_unwritable(
        self,
        tmp_path: Path,
        noise_free_config: str,
        capsys: pytest.CaptureFixture[str],
    ) -> None:
        out = tmp_path / "missing" / "trace.csv"
        assert main(["trace", "--config", noise_free_config, "--out", str(out)]) == 2
        assert "missing" in capsys.readouterr().err


class TestFit:
    def test_synthetic(
        self,
        tmp_path: Path,
        synthetic_trace: Path,
        capsys: pytest.CaptureFixture[str],
    ) -> None:
        sidecar = tmp_path / "fit.json"
        assert main(["fit", str(synthetic_trace), "--json", str(sidecar)]) == 0
        fit = json.loads(sidecar.read_text())
        assert fit["t2_star_ns"] == pytest.approx(50.0, rel=5e-3)
        assert fit["p_sat"] == pytest.approx(0.25, abs=1e-3)
        assert capsys.readouterr().out.startswith("p_sat ")

    def test_fixed_alpha(self, tmp_path: Path, synthetic_trace: Path) -> None:
        sidecar = tmp_path / "fit.json"
        args = ["fit", str(synthetic_trace), "--json", str(sidecar)]
        assert main([*args, "--fixed-alpha", "2"]) == 0
        fit = json.loads(sidecar.read_text())
        assert fit["alpha_fixed"] is True
        assert fit["t2_star_ns"] == pytest.approx(50.0, rel=5e-3)

    def test_two_rows(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        path = tmp_path / "short.csv"
        path.write_text("t_ns,p_avg\n0,1\n1,0.5\n")
        assert main(["fit", str(path)]) == 1
        assert "At least" in capsys.readouterr().err

    def test_malformed(self, tmp_path: Path) -> None:
        path = tmp_path / "bad.csv"
        path.write_text("t,p\n0,1\n")
        assert main(["fit", str(path)]) == 1

    def test_constant(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        path = tmp_path / "flat.csv"
        path.write_text("t_ns,p_avg\n" + "".join(f"{t},1\n" for t in range(20)))
        assert main(["fit", str(path)]) == 0
        out = capsys.readouterr().out
        assert "no-decay" in out
        assert "converged   false" in out


class TestSweep:
    def test_rows(
        self, tmp_path: Path, reference_config: str
    ) -> None:
        out = tmp_path / "sweep.csv"
        args = ["sweep", "--config", reference_config, "--out", str(out), "--emit-plot"]
        assert main(args) == 0
        with open(out, newline="") as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == 1
        assert tuple(rows[0]) == SWEEP_COLUMNS
        row = rows[0]
        assert row["material"] == "Si"
        j0, t2 = float(row["j0_eV"]), float(row["t2_star_ns"])
        assert float(row["q"]) == pytest.approx(
            math.exp(-PLANCK_EV_NS / (j0 * t2)), rel=1e-12
        )
        script = (tmp_path / "sweep.gp").read_text()
        assert '"sweep.csv"' in script

    def test_json_rows(self, tmp_path: Path, reference_config: str) -> None:
        config = json.loads(Path(reference_config).read_text())
        rows_path = tmp_path / "sweep.json"
        config["output"] = {"json_path": str(rows_path)}
        path = _write_config(tmp_path / "with_json.json", **config)
        out = tmp_path / "sweep.csv"
        assert main(["sweep", "--config", path, "--out", str(out)]) == 0
        rows = json.loads(rows_path.read_text())
        with open(out, newline="") as f:
            (csv_row,) = list(csv.DictReader(f))
        assert len(rows) == 1
        assert tuple(rows[0]) == SWEEP_COLUMNS
        assert rows[0]["material"] == "Si"
        assert rows[0]["t2_star_ns"] == float(csv_row["t2_star_ns"])
        assert rows[0]["diagnostics"] == [
            d for d in csv_row["diagnostics"].split(";") if d
        ]

    def test_byte_identical_with_workers(
        self, tmp_path: Path, reference_config: str
    ) -> None:
        config = json.loads(Path(reference_config).read_text())
        config["j0_grid"] = [1e-7, 2e-7]
        path = _write_config(tmp_path / "two.json", **config)
        serial, parallel = tmp_path / "serial.csv", tmp_path / "parallel.csv"
        main(["sweep", "--config", path, "--out", str(serial), "--workers", "1"])
        main(["sweep", "--config", path, "--out", str(parallel), "--workers", "2"])
        assert serial.read_bytes() == parallel.read_bytes()

    def test_zero_ratio(
        self, noise_free_config: str, capsys: pytest.CaptureFixture[str]
    ) -> None:
        assert main(["sweep", "--config", noise_free_config]) == 1
        assert "sigma_ratios.0" in capsys.readouterr().err


class TestMisc:
    def test_presets(self, capsys: pytest.CaptureFixture[str]) -> None:
        assert main(["presets"]) == 0
        out = capsys.readouterr().out
        assert out.splitlines()[1] == "Si     sigma_e = 3.0000000000000001e-09 eV"

    def test_version(self, capsys: pytest.CaptureFixture[str]) -> None:
        with pytest.raises(SystemExit) as e:
            main(["--version"])
        assert e.value.code == 0
        assert capsys.readouterr().out.strip() == __version__

    @pytest.mark.parametrize(
        "argv",
        [[], ["simulate"], ["trace", "--samples", "many"], ["sweep", "--method", "x"]],
    )
    def test_usage_errors(
        self, argv: list[str], capsys: pytest.CaptureFixture[str]
    ) -> None:
        assert main(argv) == 1
        assert capsys.readouterr().err.startswith("error: arguments: ")

    def test_missing_config(
        self, tmp_path: Path, capsys: pytest.CaptureFixture[str]
    ) -> None:
        assert main(["trace", "--config", str(tmp_path / "none.json")]) == 1
        assert "none.json" in capsys.readouterr().err
