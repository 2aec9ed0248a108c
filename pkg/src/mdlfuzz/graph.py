"""Directed multigraph extraction from model trees and structural metrics.

The four metrics mirror the usual structural summaries for block-diagram
corpora: block count, number of connected subgraphs (weakly connected,
ignoring singletons), size of the largest subgraph, and the maximum number
of blocks on a simple directed path from a source (in-degree 0) to a sink
(out-degree 0), endpoints included.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .syntax import STRICT, Param, Section, SyntaxTree

__all__ = [
    "BlockNode",
    "PortEdge",
    "ModelGraph",
    "MetricsRecord",
    "GraphError",
    "PathSearchBudgetExceeded",
    "build_graph",
    "connected_components",
    "longest_source_sink_path",
    "metrics",
    "METRICS_CSV_HEADER",
]

METRICS_CSV_HEADER = "model,blk_count,n_subgraphs,max_subgraph_size,max_src_sink_path"

DEFAULT_PATH_BUDGET = 10**6


class GraphError(Exception):
    """Structural failure while extracting a graph (strict mode).

    ``code`` is one of DanglingReference, DuplicateBlockName, MalformedLine.
    """

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


class PathSearchBudgetExceeded(Exception):
    """Simple-path enumeration exceeded its node-expansion budget."""

    def __init__(self, budget: int):
        super().__init__(f"path search exceeded {budget} node expansions")
        self.budget = budget


@dataclass
class BlockNode:
    """One block: unique name, type, and its parameter list as parsed."""

    name: str
    block_type: str
    params: list[Param] = field(default_factory=list)


@dataclass(frozen=True)
class PortEdge:
    """Directed connection (src block, out port) -> (dst block, in port)."""

    src: tuple[str, int]
    dst: tuple[str, int]


@dataclass
class ModelGraph:
    """Blocks in file-appearance order plus port-addressed edges."""

    blocks: list[BlockNode] = field(default_factory=list)
    edges: list[PortEdge] = field(default_factory=list)
    findings: list[str] = field(default_factory=list, compare=False)

    def block_names(self) -> list[str]:
        return [b.name for b in self.blocks]

    def outgoing(self) -> dict[str, list[int]]:
        """Block name -> indices of edges leaving it, in edge-list order."""
        out: dict[str, list[int]] = {b.name: [] for b in self.blocks}
        for i, e in enumerate(self.edges):
            out[e.src[0]].append(i)
        return out

    def incoming(self) -> dict[str, list[int]]:
        inc: dict[str, list[int]] = {b.name: [] for b in self.blocks}
        for i, e in enumerate(self.edges):
            inc[e.dst[0]].append(i)
        return inc


def find_system(tree: SyntaxTree) -> Section:
    """The section whose children are the model's blocks and lines.

    The first ``System`` child of the root when present, else the root
    itself (tolerates sampled fragments that skip the wrapper).
    """
    systems = tree.root.children_named("System")
    return systems[0] if systems else tree.root


def _port_value(sec: Section, key: str) -> int:
    val = sec.get(key)
    if val is None:
        return 1
    n = val.as_int()
    return n if n is not None else 0


def _collect_destinations(line: Section) -> list[tuple[str, int]]:
    """Destinations of a Line: its own DstBlock plus all Branch dsts, nested."""
    dsts: list[tuple[str, int]] = []
    dst = line.get("DstBlock")
    if dst is not None:
        dsts.append((dst.as_string(), _port_value(line, "DstPort")))
    for branch in line.children_named("Branch"):
        dsts.extend(_collect_destinations(branch))
    return dsts


def build_graph(tree: SyntaxTree, mode: str = STRICT) -> ModelGraph:
    """Extract blocks and edges from a parsed model.

    Every ``Block`` child of the system section becomes a node; every
    ``Line`` becomes one edge per destination, expanding nested ``Branch``
    sections (one line with k branch destinations -> k edges sharing the
    source). Strict mode raises GraphError on duplicate block names and
    references to unknown blocks; lenient mode drops the offender and
    records a finding.
    """
    g = ModelGraph()
    system = find_system(tree)
    seen: set[str] = set()
    for sec in system.children_named("Block"):
        name_val = sec.get("Name")
        if name_val is None:
            if mode == STRICT:
                raise GraphError("MalformedLine", "Block without Name parameter")
            g.findings.append("block without Name parameter skipped")
            continue
        name = name_val.as_string()
        if name in seen:
            raise GraphError("DuplicateBlockName", f"block name {name!r} appears twice")
        seen.add(name)
        type_val = sec.get("BlockType")
        block_type = type_val.as_string() if type_val is not None else ""
        g.blocks.append(BlockNode(name, block_type, list(sec.params)))

    for line in system.children_named("Line"):
        src_val = line.get("SrcBlock")
        if src_val is None:
            if mode == STRICT:
                raise GraphError("MalformedLine", "Line without SrcBlock")
            g.findings.append("line without SrcBlock dropped")
            continue
        src = (src_val.as_string(), _port_value(line, "SrcPort"))
        dsts = _collect_destinations(line)
        if not dsts:
            if mode == STRICT:
                raise GraphError("MalformedLine", "Line without any destination")
            g.findings.append(f"line from {src[0]!r} has no destination; dropped")
            continue
        for dst in dsts:
            bad = [n for n in (src[0], dst[0]) if n not in seen]
            if bad:
                if mode == STRICT:
                    raise GraphError("DanglingReference",
                                     f"edge endpoint(s) {bad} name no existing block")
                g.findings.append(f"edge {src[0]!r}->{dst[0]!r} dropped: unknown {bad}")
                continue
            if src[1] < 1 or dst[1] < 1:
                if mode == STRICT:
                    raise GraphError("MalformedLine",
                                     f"edge {src[0]!r}->{dst[0]!r} has non-positive port")
                g.findings.append(f"edge {src[0]!r}->{dst[0]!r} dropped: non-positive port")
                continue
            g.edges.append(PortEdge(src, dst))
    return g


def connected_components(g: ModelGraph) -> list[set[str]]:
    """Weakly connected components with at least two blocks.

    Edge direction is ignored; singletons are excluded (a subgraph is a set
    of nodes each connected to at least one other node in it). Components
    are listed by first block appearance, so output is order-stable.
    """
    neighbors: dict[str, set[str]] = {b.name: set() for b in g.blocks}
    for e in g.edges:
        a, b = e.src[0], e.dst[0]
        if a != b:
            neighbors[a].add(b)
            neighbors[b].add(a)
    seen: set[str] = set()
    components: list[set[str]] = []
    for block in g.blocks:
        if block.name in seen:
            continue
        comp = {block.name}
        queue = deque([block.name])
        seen.add(block.name)
        while queue:
            cur = queue.popleft()
            for nb in neighbors[cur]:
                if nb not in seen:
                    seen.add(nb)
                    comp.add(nb)
                    queue.append(nb)
        if len(comp) >= 2:
            components.append(comp)
    return components


def longest_source_sink_path(g: ModelGraph, budget: int = DEFAULT_PATH_BUDGET) -> int:
    """Most blocks on any simple directed source-to-sink path.

    Sources have in-degree 0, sinks out-degree 0, both endpoints counted;
    an isolated block is its own source and sink (path of 1). Returns 0
    when no qualifying path exists (e.g. a pure cycle). Enumeration is a
    budgeted DFS; exceeding ``budget`` node expansions raises
    PathSearchBudgetExceeded rather than silently truncating.
    """
    indeg: dict[str, int] = {b.name: 0 for b in g.blocks}
    outdeg: dict[str, int] = {b.name: 0 for b in g.blocks}
    succ: dict[str, list[str]] = {b.name: [] for b in g.blocks}
    for e in g.edges:
        indeg[e.dst[0]] += 1
        outdeg[e.src[0]] += 1
        if e.dst[0] not in succ[e.src[0]]:
            succ[e.src[0]].append(e.dst[0])

    sources = [b.name for b in g.blocks if indeg[b.name] == 0]
    best = 0
    expansions = 0
    on_path: set[str] = set()

    def dfs(node: str, length: int) -> None:
        nonlocal best, expansions
        expansions += 1
        if expansions > budget:
            raise PathSearchBudgetExceeded(budget)
        if outdeg[node] == 0:
            best = max(best, length)
        on_path.add(node)
        for nxt in succ[node]:
            if nxt not in on_path:
                dfs(nxt, length + 1)
        on_path.remove(node)

    for s in sources:
        dfs(s, 1)
    return best


@dataclass(frozen=True)
class MetricsRecord:
    blk_count: int
    n_subgraphs: int
    max_subgraph_size: int
    max_src_sink_path: int

    def csv_row(self, model: str) -> str:
        return (f"{model},{self.blk_count},{self.n_subgraphs},"
                f"{self.max_subgraph_size},{self.max_src_sink_path}")


def metrics(g: ModelGraph, budget: int = DEFAULT_PATH_BUDGET) -> MetricsRecord:
    """All four structural metrics for one model graph."""
    comps = connected_components(g)
    return MetricsRecord(
        blk_count=len(g.blocks),
        n_subgraphs=len(comps),
        max_subgraph_size=max((len(c) for c in comps), default=0),
        max_src_sink_path=longest_source_sink_path(g, budget),
    )
