import csv
import json

from guardkit.core import DetailSet, ExecStats, Label, RequestKind
from guardkit.evaluator import RunRecord
from guardkit.report import write_records_csv, write_report


def make_records():
    out = []
    for i in range(6):
        truth = Label.DENIED if i % 2 else Label.GRANTED
        rendered = "action denied.\nviolated rules:\n  rule 1" if i % 2 else "action granted."
        details = DetailSet(violated_rules={1}) if i % 2 else DetailSet()
        out.append(RunRecord(
            case_id=f"c{i}",
            kind=RequestKind.SAFETY_RULES,
            truth_label=truth,
            truth_details=details,
            rendered=rendered,
            predicted_details=details,
            exec_stats=ExecStats(),
            group="alpha" if i < 3 else "beta",
        ))
    return out


class TestCsv:
    def test_one_row_per_record_with_flattened_text(self, tmp_path):
        records = make_records()
        path = tmp_path / "records.csv"
        write_records_csv(records, path)
        with open(path) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 6
        assert rows[1]["predicted_label"] == "1"
        assert "\n" not in rows[1]["rendered"]
        assert json.loads(rows[1]["truth_details"])["violated_rules"] == [1]


class TestReportBundle:
    def test_bundle_written(self, tmp_path):
        records = make_records()
        paths = write_report(records, tmp_path / "out")
        assert paths["records"].exists()
        assert paths["metrics"].exists()
        metrics = json.loads(paths["metrics"].read_text())
        assert metrics["overall"]["lpa"] == 100.0
        assert metrics["executable_rate_before_debug"] == 100.0
        assert set(metrics["by_group"]) == {"alpha", "beta"}

    def test_figures_are_real_pngs(self, tmp_path):
        records = make_records()
        paths = write_report(records, tmp_path / "out")
        for key in ("group_figure", "rule_figure"):
            assert key in paths
            data = paths[key].read_bytes()
            assert data[:8] == b"\x89PNG\r\n\x1a\n"
            assert len(data) > 1000

    def test_single_unlabeled_group_skips_group_figure(self, tmp_path):
        records = [r for r in make_records()]
        stripped = [type(r)(**{**r.__dict__, "group": ""}) for r in records]
        paths = write_report(stripped, tmp_path / "out")
        assert "group_figure" not in paths
