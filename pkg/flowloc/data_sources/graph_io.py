"""
Graph File Reader/Writer for FlowLoc
One edge per line: `tail head [conductance]`; `#` comments; optional `n=<count>` header
"""

import logging
from pathlib import Path
from typing import List, Optional, Tuple, Union

from flowloc.data_sources.graph_core import WeightedMultigraph, build_graph
from flowloc.utils.config import DEFAULT_CONDUCTANCE
from flowloc.utils.errors import GraphConstructionError, GraphParseError

logger = logging.getLogger(__name__)


def parse_graph_text(text: str) -> WeightedMultigraph:
    """
    Parse the graph text format into a validated graph

    Args:
        text: File contents

    Returns:
        WeightedMultigraph

    Raises:
        GraphParseError: malformed line (with its line number), or a
            construction error re-raised with the offending line attached
    """
    n: Optional[int] = None
    edges: List[Tuple[int, int, float]] = []
    edge_lines: List[int] = []

    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith('#'):
            continue

        if line.lower().startswith('n='):
            if n is not None:
                raise GraphParseError("duplicate n= header", line_number)
            try:
                n = int(line[2:].strip())
            except ValueError:
                raise GraphParseError(f"invalid vertex count {line[2:].strip()!r}", line_number) from None
            continue

        fields = line.split()
        if len(fields) not in (2, 3):
            raise GraphParseError(f"expected 'tail head [conductance]', got {line!r}", line_number)
        try:
            tail, head = int(fields[0]), int(fields[1])
        except ValueError:
            raise GraphParseError(f"vertex indices must be integers, got {line!r}", line_number) from None
        try:
            conductance = float(fields[2]) if len(fields) == 3 else DEFAULT_CONDUCTANCE
        except ValueError:
            raise GraphParseError(f"invalid conductance {fields[2]!r}", line_number) from None

        edges.append((tail, head, conductance))
        edge_lines.append(line_number)

    if not edges:
        raise GraphParseError("no edges found")

    try:
        return build_graph(edges, n)
    except GraphConstructionError as e:
        # Point at the offending edge when the message names one
        line_number = None
        message = str(e)
        if message.startswith("Edge "):
            try:
                line_number = edge_lines[int(message.split()[1])]
            except (ValueError, IndexError):
                pass
        raise GraphParseError(message, line_number) from e


def read_graph(path: Union[str, Path]) -> WeightedMultigraph:
    """Read and validate a graph file"""
    path = Path(path)
    logger.info(f"Reading graph from {path}")
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise GraphParseError(f"cannot read {path}: {e}") from e
    return parse_graph_text(text)


def format_graph_text(g: WeightedMultigraph) -> str:
    """
    Serialize a graph in the text format

    The n= header is written only when n cannot be inferred from the edges.
    Conductances use repr(), so values round-trip exactly.
    """
    lines = []
    if 1 + max(int(g.tails.max()), int(g.heads.max())) != g.n:
        lines.append(f"n={g.n}")
    lines.extend(f"{t} {h} {c!r}" for t, h, c in g.edges)
    return "\n".join(lines) + "\n"
