import numpy as np
import pytest

from futureguided import dataio
from futureguided.dataio import ExperimentManifest, ResultRow
from futureguided.errors import ParseError
from futureguided.mackey_glass import MgParams


def rows_fixture():
    return [
        ResultRow("b25-h05-a0.50-s1", 0.5, 5, 25, 1, "argmax", "test", 0.00123456789),
        ResultRow("b25-h02-a1.00-s0", 1.0, 2, 25, 0, "argmax", "test", 0.042),
        ResultRow("b25-h02-a1.00-s0", 1.0, 2, 25, 0, "expectation", "test", 0.041),
    ]


class TestTrajectoryCsv:
    def test_roundtrip_and_sidecar(self, tmp_path):
        path = tmp_path / "series.csv"
        values = np.array([0.9, 0.943465, 1.0000001])
        dataio.write_trajectory_csv(path, values, MgParams())
        assert path.read_text().splitlines()[0] == "value"
        np.testing.assert_array_equal(dataio.read_trajectory_csv(path), values)
        sidecar = tmp_path / "series.csv.params.txt"
        assert "tau_delay = 17" in sidecar.read_text()

    def test_deterministic_bytes(self, tmp_path):
        values = np.random.default_rng(0).normal(size=100)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        dataio.write_trajectory_csv(a, values, MgParams())
        dataio.write_trajectory_csv(b, values, MgParams())
        assert a.read_bytes() == b.read_bytes()

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("values\n1.0\n")
        with pytest.raises(ParseError, match="line 1"):
            dataio.read_trajectory_csv(path)


class TestWindowedCsv:
    def test_happy_path(self, tmp_path):
        path = tmp_path / "win.csv"
        path.write_text("f0,f1,f2,label\n0.1,0.2,0.3,1\n0.4,0.5,0.6,0\n")
        ds = dataio.load_windowed_csv(path)
        assert len(ds) == 2
        np.testing.assert_allclose(ds.inputs[1], [0.4, 0.5, 0.6])
        np.testing.assert_array_equal(ds.labels, [1, 0])

    def test_ragged_row_names_line(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("f0,f1,label\n1,2,0\n1,0\n")
        with pytest.raises(ParseError, match="line 3"):
            dataio.load_windowed_csv(path)

    def test_non_numeric_cell(self, tmp_path):
        path = tmp_path / "nan.csv"
        path.write_text("f0,f1,label\n1,x,0\n")
        with pytest.raises(ParseError, match="line 2"):
            dataio.load_windowed_csv(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(ParseError, match="empty"):
            dataio.load_windowed_csv(path)

    def test_header_only(self, tmp_path):
        path = tmp_path / "hdr.csv"
        path.write_text("f0,f1,label\n")
        with pytest.raises(ParseError, match="no data rows"):
            dataio.load_windowed_csv(path)

    def test_wrong_header(self, tmp_path):
        path = tmp_path / "hdr.csv"
        path.write_text("a,b,label\n1,2,0\n")
        with pytest.raises(ParseError, match="line 1"):
            dataio.load_windowed_csv(path)

    def test_fractional_label(self, tmp_path):
        path = tmp_path / "frac.csv"
        path.write_text("f0,label\n1.0,0.5\n")
        with pytest.raises(ParseError, match="integer"):
            dataio.load_windowed_csv(path)


class TestScoredLabelsCsv:
    def test_happy_path(self, tmp_path):
        path = tmp_path / "scores.csv"
        path.write_text("score,label\n0.7,1\n0.2,0\n")
        data = dataio.load_scored_labels_csv(path)
        np.testing.assert_allclose(data.scores, [0.7, 0.2])
        np.testing.assert_array_equal(data.labels, [1, 0])

    def test_nonbinary_label(self, tmp_path):
        path = tmp_path / "scores.csv"
        path.write_text("score,label\n0.7,2\n")
        with pytest.raises(ParseError, match="0 or 1"):
            dataio.load_scored_labels_csv(path)


class TestResultsCsv:
    def test_canonical_order_independent_of_input(self, tmp_path):
        rows = rows_fixture()
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        dataio.write_results_csv(a, rows)
        dataio.write_results_csv(b, list(reversed(rows)))
        assert a.read_bytes() == b.read_bytes()

    def test_empty_rows_header_only(self, tmp_path):
        path = tmp_path / "empty.csv"
        dataio.write_results_csv(path, [])
        assert path.read_text() == ",".join(dataio.RESULTS_HEADER) + "\n"

    def test_roundtrip(self, tmp_path):
        path = tmp_path / "res.csv"
        rows = rows_fixture()
        dataio.write_results_csv(path, rows)
        back = dataio.read_results_csv(path)
        assert len(back) == len(rows)
        original = {(r.run_id, r.readout): r for r in rows}
        for row in back:
            source = original[(row.run_id, row.readout)]
            assert row.horizon == source.horizon
            assert row.mse == pytest.approx(source.mse, rel=1e-5)  # 6 significant digits

    def test_six_significant_digits(self, tmp_path):
        path = tmp_path / "fmt.csv"
        dataio.write_results_csv(
            path, [ResultRow("r", 0.5, 2, 25, 0, "argmax", "test", 0.00123456789)]
        )
        assert "0.00123457" in path.read_text()


class TestManifest:
    def test_roundtrip_is_byte_stable(self, tmp_path):
        manifest = ExperimentManifest(
            seeds=(0, 1), bins=(25,), horizons=(2, 5), alphas=(0.0, 0.5), temperature=2.0
        )
        first = tmp_path / "manifest.json"
        dataio.write_manifest(first, manifest)
        back = dataio.read_manifest(first)
        second = tmp_path / "again.json"
        dataio.write_manifest(second, back)
        assert first.read_bytes() == second.read_bytes()
        assert back.seeds == manifest.seeds
        assert back.ph_params(25) == manifest.ph_params(25)
        assert back.train_config(3) == manifest.train_config(3)

    def test_ph_defaults(self):
        manifest = ExperimentManifest()
        ph25 = manifest.ph_params(25)
        assert (ph25.delta, ph25.threshold) == (0.130, 0.647)
        ph50 = manifest.ph_params(50)
        assert (ph50.delta, ph50.threshold) == (5.78, 7.84)

    def test_ph_override(self):
        manifest = ExperimentManifest(ph={25: {"delta": 1e-5, "threshold": 1e-3}})
        assert manifest.ph_params(25).delta == 1e-5

    def test_bad_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ParseError):
            dataio.read_manifest(path)


class TestAuxWriters:
    def test_adapted_results_flag_column(self, tmp_path):
        path = tmp_path / "adapted.csv"
        row = rows_fixture()[0]
        dataio.write_adapted_results_csv(path, [(row, False), (row, True)])
        lines = path.read_text().splitlines()
        assert lines[0].endswith(",adapted")
        assert lines[1].endswith(",0") and lines[2].endswith(",1")

    def test_alarm_log(self, tmp_path):
        path = tmp_path / "alarms.csv"
        dataio.write_alarm_log_csv(path, [("cell", 42, 1.5, -0.25, "retrain")])
        assert "cell,42,1.5,-0.25,retrain" in path.read_text()
