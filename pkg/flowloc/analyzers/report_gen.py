"""
Report Generation Module for FlowLoc
Formats verification reports and computed quantities as JSON, CSV or a table
Reports carry no timestamps, so identical runs serialize identically
"""

import io
import json
import logging
import math
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd

from flowloc.analyzers.entropy import entropy
from flowloc.analyzers.linalg import decompose, nonneg_spectral_norm
from flowloc.analyzers.localization import VerificationReport, matrix_norm
from flowloc.analyzers.transfer_current import avg_l1_flow, effective_resistance, transfer_current_matrix
from flowloc.data_sources.graph_core import WeightedMultigraph, measure_from_weights
from flowloc.utils.config import APP_NAME, APP_VERSION, FLOAT_FORMAT, MATRIX_QUANTITIES, QUANTITIES

logger = logging.getLogger(__name__)

# Leading CSV/table columns, in schema order
REPORT_COLUMNS = [
    "check", "family", "n", "m", "conductance", "seed", "value", "bound", "margin",
    "pass", "status", "direction", "log_n", "rel_tol", "abs_tol", "reason",
]
TABLE_COLUMNS = ["check", "family", "n", "m", "conductance", "value", "bound", "margin", "status"]
STATUSES = ["pass", "fail", "skipped", "error"]


def generate_report_data(reports: Sequence[VerificationReport], run_info: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """
    Assemble the verification report document

    Args:
        reports: Ordered check results
        run_info: Run settings echoed under metadata (seed, tolerances, checks)

    Returns:
        dict: {"metadata", "summary", "reports"} ready for render_json
    """
    logger.info(f"Generating report for {len(reports)} checks")
    return {
        "metadata": {
            "app": APP_NAME,
            "version": APP_VERSION,
            "logarithm": "natural",
            **(run_info or {}),
        },
        "summary": summarize(reports),
        "reports": [r.row() for r in reports],
    }


def summarize(reports: Iterable[VerificationReport]) -> Dict[str, int]:
    """Count reports per status"""
    counts = {status: 0 for status in STATUSES}
    for report in reports:
        counts[report.status] += 1
    counts["total"] = sum(counts.values())
    return counts


def _summary_line(counts: Dict[str, int]) -> str:
    return ", ".join(f"{status} {counts.get(status, 0)}" for status in STATUSES) + f" (total {counts.get('total', 0)})"


def reports_frame(rows: Sequence[Dict[str, Any]]) -> pd.DataFrame:
    """
    One row per report, schema columns first, details flattened as detail_<key>
    """
    flat = []
    for row in rows:
        record = {column: row.get(column) for column in REPORT_COLUMNS}
        for key, value in sorted((row.get("details") or {}).items()):
            record[f"detail_{key}"] = value
        flat.append(record)
    frame = pd.DataFrame(flat)
    if frame.empty:
        return pd.DataFrame(columns=REPORT_COLUMNS)
    detail_columns = sorted(c for c in frame.columns if c.startswith("detail_"))
    return frame[REPORT_COLUMNS + detail_columns]


def render_json(document: Dict[str, Any]) -> str:
    """JSON text; floats use the shortest repr that round-trips exactly"""
    return json.dumps(document, indent=2, allow_nan=False) + "\n"


def render_csv(frame: pd.DataFrame) -> str:
    """CSV text with floats at 17 significant digits"""
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return buffer.getvalue()


def render_table(frame: pd.DataFrame, columns: Optional[List[str]] = None, summary: Optional[Dict[str, int]] = None) -> str:
    """Human-readable fixed-width table"""
    columns = [c for c in (columns or TABLE_COLUMNS) if c in frame.columns]
    text = frame[columns].to_string(index=False) if not frame.empty else "(no rows)"
    if summary is not None:
        text += "\n\n" + _summary_line(summary)
    return text + "\n"


def render_reports(document: Dict[str, Any], fmt: str) -> str:
    """Render a verification document in json | csv | table"""
    if fmt == "json":
        return render_json(document)
    frame = reports_frame(document.get("reports", []))
    if fmt == "csv":
        return render_csv(frame)
    if fmt == "table":
        return render_table(frame, summary=document.get("summary"))
    raise ValueError(f"Unknown output format: {fmt}")


def load_report(text: str) -> Dict[str, Any]:
    """
    Parse a JSON report document written by render_json

    Raises:
        ValueError: not a report document
    """
    document = json.loads(text)
    if not isinstance(document, dict) or not isinstance(document.get("reports"), list):
        raise ValueError("not a FlowLoc report: missing 'reports' list")
    missing = [c for c in ("check", "family", "n", "m", "value", "bound", "margin", "pass", "seed")
               if document["reports"] and c not in document["reports"][0]]
    if missing:
        raise ValueError(f"report rows lack fields: {', '.join(missing)}")
    if "summary" not in document:
        counts = {status: 0 for status in STATUSES}
        for row in document["reports"]:
            counts[row.get("status", "error")] = counts.get(row.get("status", "error"), 0) + 1
        counts["total"] = len(document["reports"])
        document["summary"] = counts
    return document


def compute_quantities(g: WeightedMultigraph, quantities: Sequence[str], emit_matrices: bool = False) -> Dict[str, Any]:
    """
    Evaluate the requested quantities on one graph

    K and Pi (m x m) are emitted only with emit_matrices; otherwise their
    entry records why they were withheld. entropy_mu is H(mu_1), the entropy
    of deg(x) / 2m, reported next to ln n.

    Args:
        g: Graph
        quantities: Subset of QUANTITIES
        emit_matrices: Allow m x m matrices in the output

    Returns:
        dict: quantity name -> value (float, list, or nested list)
    """
    unknown = [q for q in quantities if q not in QUANTITIES]
    if unknown:
        raise ValueError(f"Unknown quantities: {', '.join(unknown)}")

    currents = transfer_current_matrix(g)
    result: Dict[str, Any] = {}
    for quantity in quantities:
        if quantity in MATRIX_QUANTITIES:
            if not emit_matrices:
                result[quantity] = {"omitted": f"{g.m}x{g.m} matrix; pass --emit-matrices"}
                continue
            matrix = currents.K if quantity == "K" else currents.Pi
            result[quantity] = matrix.tolist()
        elif quantity == "Kbar_norm":
            result[quantity] = matrix_norm(currents.Kbar).value
        elif quantity == "Pibar_norm":
            result[quantity] = nonneg_spectral_norm(currents.Pibar).value
        elif quantity == "avg_l1":
            result[quantity] = avg_l1_flow(g, currents)
        elif quantity == "eff_res":
            decomposition = decompose(g)
            result[quantity] = [effective_resistance(g, e, decomposition) for e in range(g.m)]
        elif quantity == "entropy_mu":
            result[quantity] = entropy(measure_from_weights(g, np.ones(g.m)).mu)
    return result


def generate_quantity_data(g: WeightedMultigraph, values: Dict[str, Any], source: str = "") -> Dict[str, Any]:
    """Wrap computed quantities with the graph header"""
    return {
        "metadata": {"app": APP_NAME, "version": APP_VERSION, "logarithm": "natural", "source": source},
        "graph": {"n": g.n, "m": g.m, "log_n": math.log(g.n), "bound_2_log_n": 2.0 * math.log(g.n)},
        "quantities": values,
    }


def quantities_frame(values: Dict[str, Any]) -> pd.DataFrame:
    """Long form: one row per scalar, per edge, or per matrix entry"""
    rows = []
    for quantity, value in values.items():
        if isinstance(value, dict):
            continue
        if isinstance(value, list) and value and isinstance(value[0], list):
            for i, row in enumerate(value):
                rows.extend({"quantity": quantity, "row": i, "column": j, "value": v} for j, v in enumerate(row))
        elif isinstance(value, list):
            rows.extend({"quantity": quantity, "row": e, "column": None, "value": v} for e, v in enumerate(value))
        else:
            rows.append({"quantity": quantity, "row": None, "column": None, "value": value})
    return pd.DataFrame(rows, columns=["quantity", "row", "column", "value"]).astype({"row": "Int64", "column": "Int64"})


def render_quantities(document: Dict[str, Any], fmt: str) -> str:
    if fmt == "json":
        return render_json(document)
    frame = quantities_frame(document["quantities"])
    if fmt == "csv":
        return render_csv(frame)
    if fmt == "table":
        return render_table(frame, columns=list(frame.columns))
    raise ValueError(f"Unknown output format: {fmt}")
