import json

import numpy as np
import pytest

from raincheck.cli import main
from raincheck.config import load_config
from raincheck.errors import ConfigError
from raincheck.grid_store import read_grid
from raincheck.pipeline import build_outputs, run_pipeline

from .scenario import build_country


@pytest.fixture(scope="module")
def country(tmp_path_factory):
    root = tmp_path_factory.mktemp("country")
    return build_country(root, years=12, gappy_station=True, tiled_product=True)


@pytest.fixture(scope="module")
def report(country):
    return run_pipeline(load_config(country))


def pair(report, sid, pid):
    return next(p for p in report.pairs if (p.station_id, p.product_id) == (sid, pid))


class TestPipeline:
    def test_identity_product_is_perfect(self, report):
        pr = pair(report, "Alpha", "IDENT")
        assert pr.status == "scored"
        assert pr.cell[:2] == (2, 2) and pr.cell[2] == pytest.approx(0.0, abs=1e-6)
        for scores in pr.annual_scores.values():
            assert scores.pbias == 0.0 and scores.me == 0.0
        assert pr.pod == 1.0
        assert set(pr.category_pod.values()) == {1.0}
        assert pr.sweep.best_threshold == 0.85

    def test_drizzle_product_penalised(self, report):
        ident, drizzle = pair(report, "Bravo", "IDENT"), pair(report, "Bravo", "DRIZZLE")
        assert drizzle.annual_scores["rain_days"].pbias > ident.annual_scores["rain_days"].pbias
        assert drizzle.category_pod[0] < ident.category_pod[0]

    def test_inconsistent_product_excluded(self, report):
        tiled = next(p for p in report.products if p.product_id == "TILED")
        assert tiled.verdict == "inconsistent"
        assert pair(report, "Alpha", "TILED").status == "excluded: spatial inconsistency"

    def test_no_exclude_keeps_tiled_product(self, country):
        from dataclasses import replace

        cfg = replace(load_config(country), exclude_inconsistent=False)
        rep = run_pipeline(cfg, stages={"spatial", "intensity"})
        assert pair(rep, "Alpha", "TILED").status == "scored"

    def test_gappy_station_ineligible(self, report):
        st = next(s for s in report.stations if s.meta.station_id == "Gappy")
        assert not st.qc_report.eligible
        assert all(p.status == "excluded: gauge ineligible"
                   for p in report.pairs if p.station_id == "Gappy")

    def test_every_pair_reported(self, report):
        assert len(report.pairs) == 4 * 3

    def test_threads_match_serial(self, country, report):
        threaded = run_pipeline(load_config(country), jobs=4)
        assert build_outputs(threaded) == build_outputs(report)


class TestOutputs:
    def test_file_set(self, report):
        files = build_outputs(report)
        svgs = [f for f in files if f.endswith("__heatmap.svg")]
        assert len(svgs) == 3 * 3
        for kind in ("mean_annual_total", "mean_annual_rain_days", "mean_rain_per_rain_day"):
            assert sum(kind in f for f in svgs) == 3
        for name in ("report.json", "qc_report.json", "scores.csv", "annual_summaries.csv",
                     "category_pod.csv", "seasonal_models.csv", "threshold_choice.csv",
                     "spatial.csv", "status.csv", "category_distribution.csv"):
            assert name in files

    def test_curve_file(self, report):
        text = build_outputs(report)["Alpha__IDENT__curves.csv"]
        lines = text.splitlines()
        assert lines[0] == "t,p_gauge,p_product"
        assert len(lines) == 366
        t, pg, pp = lines[100].split(",")
        assert t == "100" and pg == pp

    def test_scores_csv_reason_column(self, report):
        lines = build_outputs(report)["scores.csv"].splitlines()
        assert lines[0] == "station,product,summary,metric,value,n,reason_if_absent"
        row = next(l for l in lines if l.startswith("Alpha,IDENT,total,PBIAS,"))
        _, _, _, _, value, n, reason = row.split(",")
        assert value == "0" and int(n) >= 10 and reason == ""

    def test_report_json_parses(self, report):
        data = json.loads(build_outputs(report)["report.json"])
        assert {p["product"] for p in data["products"]} == {"IDENT", "DRIZZLE", "TILED"}

    def test_deterministic(self, country, report):
        again = run_pipeline(load_config(country))
        assert build_outputs(again) == build_outputs(report)

    def test_qc_only(self, country):
        rep = run_pipeline(load_config(country), stages=())
        assert set(build_outputs(rep)) == {"qc_report.json", "category_distribution.csv"}


class TestConfig:
    def test_decreasing_sweep_rejected(self, country, tmp_path):
        text = country.read_text().replace("[0.85, 2, 3, 4, 5]", "[2, 0.85]")
        bad = country.parent / "bad_sweep.toml"
        bad.write_text(text)
        with pytest.raises(ConfigError):
            load_config(bad)

    def test_missing_file_rejected(self, country):
        text = country.read_text().replace('"stations.csv"', '"nope.csv"')
        bad = country.parent / "bad_table.toml"
        bad.write_text(text)
        with pytest.raises(ConfigError, match="does not exist"):
            load_config(bad)

    def test_country_settings(self, country):
        cfg = load_config(country)
        assert cfg.country("Synthland").year_convention.start_month == 8
        assert cfg.country("Elsewhere").year_convention.start_month == 1


class TestCli:
    def test_validate_writes_outputs(self, country, tmp_path, capsys):
        out = tmp_path / "o1"
        assert main(["validate", "--config", str(country), "--out", str(out)]) == 0
        assert (out / "report.json").exists()
        assert "Alpha\tIDENT\tscored" in capsys.readouterr().out

    def test_byte_identical_runs(self, country, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["validate", "--config", str(country), "--out", str(a)]) == 0
        assert main(["validate", "--config", str(country), "--out", str(b), "--jobs", "3"]) == 0
        names = sorted(p.name for p in a.iterdir())
        assert names == sorted(p.name for p in b.iterdir())
        for n in names:
            assert (a / n).read_bytes() == (b / n).read_bytes()

    def test_subcommands(self, country, tmp_path):
        for cmd in ("qc", "spatial", "seasonal", "intensity"):
            assert main([cmd, "--config", str(country), "--out", str(tmp_path / cmd)]) == 0
        assert (tmp_path / "spatial" / "spatial.csv").exists()
        assert (tmp_path / "seasonal" / "threshold_choice.csv").exists()
        assert not (tmp_path / "intensity" / "seasonal_models.csv").exists()

    def test_config_error_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.toml"
        bad.write_text("this is = = not toml\n")
        assert main(["validate", "--config", str(bad)]) == 2
        assert main(["validate", "--config", str(tmp_path / "absent.toml")]) == 2

    def test_input_error_exit_code(self, country, tmp_path):
        root = country.parent
        (root / "stations_broken.csv").write_text("country,name\nX,Y\n")
        text = country.read_text().replace('"stations.csv"', '"stations_broken.csv"')
        cfg = root / "broken.toml"
        cfg.write_text(text)
        assert main(["validate", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 3

    def test_unwritable_output(self, country, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        assert main(["qc", "--config", str(country), "--out", str(blocker / "sub")]) == 3

    def test_usage_error(self):
        assert main(["validate"]) == 2

    def test_grid_import_csv(self, tmp_path):
        rows = ["date,lat,lon,value"]
        for d in ("2000-01-01", "2000-01-02"):
            for lat in (-1.0, -0.5):
                for lon in (30.0, 30.5, 31.0):
                    rows.append(f"{d},{lat},{lon},{1.5 if lat < 0 else 0}")
        rows[1] = "2000-01-01,-1.0,30.0,-9999"
        src = tmp_path / "long.csv"
        src.write_text("\n".join(rows) + "\n")
        desc, payload = tmp_path / "g.json", tmp_path / "g.f32"
        assert main(["grid", "import-csv", str(src), "--descriptor", str(desc),
                     "--payload", str(payload)]) == 0
        prod = read_grid(desc, payload)
        assert prod.values.shape == (2, 2, 3)
        assert prod.missing[0, 0, 0] and prod.missing.sum() == 1
        assert np.all(prod.values[1] == 1.5)
