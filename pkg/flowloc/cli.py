"""
FlowLoc command line
    gen      write a generated graph in the text format
    compute  evaluate quantities on a graph file
    verify   run the verification suite (or the per-graph checks on one file)
    report   re-render a JSON report as csv or table
Exit status: 0 all checks pass, 1 some bound failed, 2 configuration or runtime error
"""

import argparse
import logging
import os
import sys
import tempfile
from pathlib import Path
from typing import List, Literal, Optional, Sequence

from pydantic import BaseModel, Field, ValidationError

from flowloc.analyzers.localization import SuiteSpec, run_suite, verify_graph
from flowloc.analyzers.report_gen import (
    compute_quantities,
    generate_quantity_data,
    generate_report_data,
    load_report,
    render_quantities,
    render_reports,
)
from flowloc.data_sources.graph_gen import FamilySpec, generate
from flowloc.data_sources.graph_io import format_graph_text, read_graph
from flowloc.utils.config import (
    ABS_TOL,
    APP_NAME,
    APP_VERSION,
    CHECKS,
    CONDUCTANCE_MODES,
    DEFAULT_JOBS,
    DEFAULT_SEED,
    DEFAULT_SIZES,
    DEFAULT_SUITE_FAMILIES,
    FAMILIES,
    GNP_DEFAULT_P,
    OUTPUT_FORMATS,
    QUANTITIES,
    REL_TOL,
    configure_logging,
    validate_check_name,
    validate_family,
)
from flowloc.utils.errors import FlowLocError, UnknownCheckError

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_ERROR = 2


class RunConfig(BaseModel):
    """Validated settings of one CLI invocation"""
    command: Literal["gen", "compute", "verify", "report"]
    graph_path: Optional[Path] = None
    report_path: Optional[Path] = None
    families: List[str] = Field(default_factory=lambda: list(DEFAULT_SUITE_FAMILIES))
    sizes: List[int] = Field(default_factory=lambda: list(DEFAULT_SIZES))
    m: Optional[int] = Field(default=None, ge=1)
    p: float = Field(default=GNP_DEFAULT_P, gt=0.0, le=1.0)
    big: Optional[float] = Field(default=None, gt=1.0)
    conductance_modes: List[Literal["unit", "weighted"]] = Field(default_factory=lambda: list(CONDUCTANCE_MODES))
    seed: int = Field(default=DEFAULT_SEED, ge=0)
    checks: List[str] = Field(default_factory=lambda: list(CHECKS))
    quantities: List[str] = Field(default_factory=lambda: [q for q in QUANTITIES if q not in ("K", "Pi")])
    rel_tol: float = Field(default=REL_TOL, gt=0.0)
    abs_tol: float = Field(default=ABS_TOL, gt=0.0)
    emit_matrices: bool = False
    jobs: int = Field(default=DEFAULT_JOBS, ge=1)
    format: Literal["json", "csv", "table"] = "json"
    out: Optional[Path] = None


def parse_sizes(text: str) -> List[int]:
    """'4..64' (inclusive range), '4,8,16' or '8'"""
    text = text.strip()
    if ".." in text:
        low, high = (int(part) for part in text.split("..", 1))
        return list(range(low, high + 1))
    if not text:
        return []
    return [int(part) for part in text.split(",") if part.strip()]


def _split(text: Optional[str]) -> Optional[List[str]]:
    if text is None:
        return None
    return [part.strip().lower() for part in text.split(",") if part.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flowloc", description=f"{APP_NAME} {APP_VERSION}: electrical-flow localization verifier")
    parser.add_argument("--log-level", default=None, help="Logging level (default from FLOWLOC_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_output(p: argparse.ArgumentParser) -> None:
        p.add_argument("--format", choices=OUTPUT_FORMATS, default="json")
        p.add_argument("--out", type=Path, default=None, help="Output file (default: stdout)")

    gen = sub.add_parser("gen", help="Generate a graph file")
    gen.add_argument("--family", required=True, choices=FAMILIES)
    gen.add_argument("--n", type=int, default=None)
    gen.add_argument("--m", type=int, default=None)
    gen.add_argument("--p", type=float, default=GNP_DEFAULT_P)
    gen.add_argument("--big", type=float, default=None)
    gen.add_argument("--conductance", choices=CONDUCTANCE_MODES, default="unit")
    gen.add_argument("--seed", type=int, default=DEFAULT_SEED)
    gen.add_argument("--out", type=Path, default=None)

    compute = sub.add_parser("compute", help="Compute quantities on a graph file")
    compute.add_argument("graph", type=Path)
    compute.add_argument("--quantities", default=None, help=f"Comma list from {', '.join(QUANTITIES)}")
    compute.add_argument("--emit-matrices", action="store_true")
    add_output(compute)

    verify = sub.add_parser("verify", help="Run the verification suite")
    verify.add_argument("--graph", type=Path, default=None, help="Check one graph file instead of the families")
    verify.add_argument("--family", default=None, help="Comma list of families")
    verify.add_argument("--n", default=None, help="Sizes: '4..64', '4,8,16' or '8'")
    verify.add_argument("--m", type=int, default=None, help="Gadget edge count / random_weighted edge count")
    verify.add_argument("--p", type=float, default=GNP_DEFAULT_P)
    verify.add_argument("--big", type=float, default=None, help="Gadget conductance (default 100*m)")
    verify.add_argument("--conductance", default=None, help="Comma list of conductance modes")
    verify.add_argument("--seed", type=int, default=DEFAULT_SEED)
    verify.add_argument("--checks", default=None, help=f"Comma list from {', '.join(CHECKS)}")
    verify.add_argument("--tol-rel", type=float, default=REL_TOL)
    verify.add_argument("--tol-abs", type=float, default=ABS_TOL)
    verify.add_argument("--jobs", type=int, default=DEFAULT_JOBS)
    add_output(verify)

    report = sub.add_parser("report", help="Re-render a JSON report")
    report.add_argument("report", type=Path)
    add_output(report)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    """
    Turn parsed arguments into a RunConfig

    Raises:
        UnknownCheckError: a --checks entry is not a known check
        ValidationError: any other invalid setting
    """
    settings = {"command": args.command}
    if args.command == "compute":
        settings.update(graph_path=args.graph, emit_matrices=args.emit_matrices)
        if args.quantities is not None:
            settings["quantities"] = [q.strip() for q in args.quantities.split(",") if q.strip()]
    elif args.command == "verify":
        checks = _split(args.checks)
        if checks is not None:
            unknown = [c for c in checks if not validate_check_name(c)]
            if unknown:
                raise UnknownCheckError(f"unknown checks: {', '.join(unknown)} (known: {', '.join(CHECKS)})")
            settings["checks"] = checks
        families = _split(args.family)
        if families is not None:
            unknown = [f for f in families if not validate_family(f)]
            if unknown:
                raise ValueError(f"unknown families: {', '.join(unknown)}")
            settings["families"] = families
        if args.n is not None:
            settings["sizes"] = parse_sizes(args.n)
        if args.conductance is not None:
            settings["conductance_modes"] = _split(args.conductance)
        settings.update(graph_path=args.graph, m=args.m, p=args.p, big=args.big, seed=args.seed,
                        rel_tol=args.tol_rel, abs_tol=args.tol_abs, jobs=args.jobs)
    elif args.command == "report":
        settings["report_path"] = args.report

    if args.command != "gen":
        settings.update(format=args.format, out=args.out)
    return RunConfig(**settings)


def write_output(text: str, out: Optional[Path]) -> None:
    """Write once: to stdout, or atomically to out via a temporary file and rename"""
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    out = Path(out)
    directory = out.parent if str(out.parent) else Path(".")
    directory.mkdir(parents=True, exist_ok=True)
    fd, temporary = tempfile.mkstemp(dir=directory, prefix=f".{out.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(temporary, out)
    except BaseException:
        if os.path.exists(temporary):
            os.unlink(temporary)
        raise
    logger.info(f"Wrote {out}")


def cmd_gen(args: argparse.Namespace) -> int:
    """Generate one family member and write it in the graph text format"""
    fields = {"family": args.family, "p": args.p, "seed": args.seed, "conductance": args.conductance,
              "m": args.m, "big": args.big}
    if args.family != "parallel_gadget":
        fields["n"] = args.n
    spec = FamilySpec(**fields)
    g = generate(spec)
    write_output(format_graph_text(g), args.out)
    return EXIT_PASS


def cmd_compute(config: RunConfig) -> int:
    """Evaluate the requested quantities on the graph file"""
    g = read_graph(config.graph_path)
    values = compute_quantities(g, config.quantities, emit_matrices=config.emit_matrices)
    document = generate_quantity_data(g, values, source=str(config.graph_path))
    write_output(render_quantities(document, config.format), config.out)
    return EXIT_PASS


def exit_status(statuses: Sequence[str]) -> int:
    """2 if any check errored, else 1 if any failed, else 0"""
    if "error" in statuses:
        return EXIT_ERROR
    if "fail" in statuses:
        return EXIT_FAIL
    return EXIT_PASS


def cmd_verify(config: RunConfig) -> int:
    """Run the suite (or one graph's checks), write the report, map results to the exit status"""
    gadget_sizes = [config.m] if config.m is not None else None
    suite_fields = dict(
        families=config.families,
        sizes=config.sizes,
        conductance_modes=config.conductance_modes,
        checks=config.checks,
        seed=config.seed,
        p=config.p,
        m=config.m,
        big=config.big,
        rel_tol=config.rel_tol,
        abs_tol=config.abs_tol,
        jobs=config.jobs,
    )
    if gadget_sizes is not None:
        suite_fields["gadget_sizes"] = gadget_sizes
    suite = SuiteSpec(**suite_fields)

    if config.graph_path is not None:
        g = read_graph(config.graph_path)
        reports = verify_graph(g, suite)
        source = str(config.graph_path)
    else:
        reports = run_suite(suite)
        source = "families"

    run_info = {"source": source, **suite.model_dump(exclude={"jobs"})}
    document = generate_report_data(reports, run_info)
    write_output(render_reports(document, config.format), config.out)

    status = exit_status([r.status for r in reports])
    summary = document["summary"]
    logger.info(f"verify: pass {summary['pass']}, fail {summary['fail']}, skipped {summary['skipped']}, "
                f"error {summary['error']} -> exit {status}")
    return status


def cmd_report(config: RunConfig) -> int:
    """Re-render a JSON report and print its status summary to stderr"""
    text = config.report_path.read_text(encoding="utf-8")
    document = load_report(text)
    write_output(render_reports(document, config.format), config.out)

    summary = document["summary"]
    print(", ".join(f"{k} {summary.get(k, 0)}" for k in ("pass", "fail", "skipped", "error")), file=sys.stderr)
    return exit_status([row.get("status", "error") for row in document["reports"]])


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging((args.log_level or os.getenv("FLOWLOC_LOG_LEVEL", "INFO")).upper())

    try:
        if args.command == "gen":
            return cmd_gen(args)
        config = config_from_args(args)
        if config.command == "compute":
            return cmd_compute(config)
        if config.command == "verify":
            return cmd_verify(config)
        return cmd_report(config)
    except (FlowLocError, ValidationError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as e:
        logger.error(f"Unexpected error: {e}", exc_info=True)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
