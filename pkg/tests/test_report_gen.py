import io
import json
import math

import numpy as np
import pandas as pd
import pytest

from flowloc.analyzers.localization import SuiteSpec, check_parallel_gadget, run_suite, verify_graph
from flowloc.analyzers.report_gen import (
    compute_quantities,
    generate_quantity_data,
    generate_report_data,
    load_report,
    quantities_frame,
    render_quantities,
    render_reports,
    reports_frame,
    summarize,
)

SCHEMA = ("check", "family", "n", "m", "value", "bound", "margin", "pass", "seed")


@pytest.fixture
def document(triangle):
    reports = verify_graph(triangle, SuiteSpec(checks=["quadratic_form", "spectral_weighted", "unweighted_bounds"]))
    reports.append(check_parallel_gadget(9, 10.0))
    return generate_report_data(reports, {"source": "test", "seed": 7})


class TestReportDocument:
    def test_schema(self, document):
        assert set(document) == {"metadata", "summary", "reports"}
        assert document["metadata"]["logarithm"] == "natural"
        for row in document["reports"]:
            assert all(key in row for key in SCHEMA)

    def test_summary(self, document):
        assert document["summary"] == {"pass": 3, "fail": 0, "skipped": 1, "error": 0, "total": 4}

    def test_summarize_counts_errors(self, triangle):
        reports = verify_graph(triangle, SuiteSpec(checks=["projection"]))
        reports[0] = reports[0].model_copy(update={"status": "error"})
        assert summarize(reports)["error"] == 1

    def test_json_round_trip(self, document):
        text = render_reports(document, "json")
        assert load_report(text) == json.loads(text)
        assert "runtime" not in text

    def test_identical_runs_serialize_identically(self):
        suite = SuiteSpec(families=["cycle"], sizes=[5], checks=["quadratic_form", "projection"])
        first = render_reports(generate_report_data(run_suite(suite)), "json")
        second = render_reports(generate_report_data(run_suite(suite)), "json")
        assert first == second

    def test_csv_matches_json_values(self, document):
        rows = document["reports"]
        frame = pd.read_csv(io.StringIO(render_reports(document, "csv")), float_precision="round_trip")
        assert list(frame.columns[:9]) == ["check", "family", "n", "m", "conductance", "seed", "value", "bound", "margin"]
        for row, (_, record) in zip(rows, frame.iterrows()):
            for key in ("value", "bound", "margin"):
                if row[key] is None:
                    assert math.isnan(record[key])
                else:
                    assert float(record[key]) == row[key]

    def test_details_flattened(self, document):
        frame = reports_frame(document["reports"])
        assert "detail_kbar_norm" in frame.columns
        assert "detail_avg_l1" in frame.columns

    def test_table(self, document):
        text = render_reports(document, "table")
        assert "parallel_gadget" in text
        assert "skipped 1" in text

    def test_empty(self):
        document = generate_report_data([])
        assert document["summary"]["total"] == 0
        assert render_reports(document, "csv").startswith("check,family")
        assert "(no rows)" in render_reports(document, "table")

    def test_unknown_format(self, document):
        with pytest.raises(ValueError):
            render_reports(document, "xml")


class TestLoadReport:
    def test_rejects_non_report(self):
        with pytest.raises(ValueError):
            load_report('{"rows": []}')

    def test_rejects_missing_fields(self):
        with pytest.raises(ValueError):
            load_report('{"reports": [{"check": "projection"}]}')

    def test_rebuilds_summary(self, document):
        stripped = {"reports": document["reports"]}
        loaded = load_report(json.dumps(stripped))
        assert loaded["summary"]["skipped"] == 1
        assert loaded["summary"]["total"] == 4


class TestQuantities:
    def test_single_edge(self, single_edge):
        values = compute_quantities(single_edge, ["avg_l1", "eff_res", "entropy_mu"])
        assert values["avg_l1"] == pytest.approx(1.0)
        assert values["eff_res"] == pytest.approx([1.0])
        assert values["entropy_mu"] == pytest.approx(math.log(2))

    def test_four_cycle_norms(self, cycle4):
        values = compute_quantities(cycle4, ["Pibar_norm", "Kbar_norm"])
        assert values["Pibar_norm"] == pytest.approx(1.5, rel=1e-9)
        assert values["Kbar_norm"] == pytest.approx(1.5, rel=1e-9)

    def test_triangle_resistance(self, triangle):
        np.testing.assert_allclose(compute_quantities(triangle, ["eff_res"])["eff_res"], [2 / 3] * 3, atol=1e-9)

    def test_matrices_gated(self, triangle):
        assert "omitted" in compute_quantities(triangle, ["K"])["K"]
        K = compute_quantities(triangle, ["K", "Pi"], emit_matrices=True)["K"]
        assert np.asarray(K).shape == (3, 3)

    def test_unknown_quantity(self, triangle):
        with pytest.raises(ValueError):
            compute_quantities(triangle, ["trace"])

    def test_document_header(self, star5):
        document = generate_quantity_data(star5, compute_quantities(star5, ["avg_l1"]), source="star")
        assert document["graph"]["n"] == 5
        assert document["graph"]["bound_2_log_n"] == pytest.approx(2 * math.log(5))

    def test_long_frame(self, triangle):
        values = compute_quantities(triangle, ["avg_l1", "eff_res", "K"], emit_matrices=True)
        frame = quantities_frame(values)
        assert len(frame) == 1 + 3 + 9
        assert frame.loc[frame["quantity"] == "avg_l1", "row"].isna().all()

    def test_render_formats(self, triangle):
        document = generate_quantity_data(triangle, compute_quantities(triangle, ["avg_l1"]))
        assert json.loads(render_quantities(document, "json"))["quantities"]["avg_l1"] == pytest.approx(4 / 3)
        csv_text = render_quantities(document, "csv")
        assert csv_text.splitlines()[0] == "quantity,row,column,value"
        assert "avg_l1" in render_quantities(document, "table")
