"""Breadth-first rewrite of model files into interleaved block/edge order,
and the inverse restoration into blocks-before-edges tool-compliant order.

The interleaved form keeps every edge textually close to at least one of
its endpoint blocks, which is what makes the files learnable by models
with a bounded context window. Restoration moves all block definitions
back in front of all edge definitions, which is the order the original
tool expects.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .graph import BlockNode, ModelGraph, PortEdge
from .syntax import (LENIENT, Param, ParamValue, ParseError, Section,
                     SyntaxTree, parse, parse_token_stream, print_tree, tokenize)

__all__ = [
    "CanonicalDoc",
    "RestructureState",
    "UnparsableSample",
    "bfs_restructure",
    "emit_canonical",
    "restore",
]


class UnparsableSample(Exception):
    """The sample cannot be parsed even leniently."""


@dataclass
class CanonicalDoc:
    """Blocks and edges in breadth-first emission order."""

    elements: list[BlockNode | PortEdge] = field(default_factory=list)

    @property
    def blocks(self) -> list[BlockNode]:
        return [e for e in self.elements if isinstance(e, BlockNode)]

    @property
    def edges(self) -> list[PortEdge]:
        return [e for e in self.elements if isinstance(e, PortEdge)]


@dataclass
class RestructureState:
    """Working state of the breadth-first rewrite."""

    source_queue: deque[str]
    other_queue: deque[str]
    work_queue: deque[str] = field(default_factory=deque)
    emitted: list[BlockNode | PortEdge] = field(default_factory=list)
    visited_blocks: set[str] = field(default_factory=set)
    visited_edges: set[int] = field(default_factory=set)


def bfs_restructure(g: ModelGraph) -> CanonicalDoc:
    """Rewrite a graph into breadth-first block/edge emission order.

    Source blocks (in-degree 0) seed the traversal in file order; the
    outer loop keeps running while either queue is nonempty, so dangling
    blocks and sourceless cyclic models are still covered. Each popped
    block is emitted, then all of its not-yet-emitted incident edges
    (outgoing first, then incoming, in file order), then its unvisited
    neighbor blocks are enqueued FIFO.
    """
    incoming = g.incoming()
    outgoing = g.outgoing()
    by_name = {b.name: b for b in g.blocks}

    state = RestructureState(
        source_queue=deque(b.name for b in g.blocks if not incoming[b.name]),
        other_queue=deque(b.name for b in g.blocks if incoming[b.name]),
    )

    while state.source_queue or state.other_queue:
        start = (state.source_queue.popleft() if state.source_queue
                 else state.other_queue.popleft())
        state.work_queue.append(start)
        while state.work_queue:
            cur = state.work_queue.popleft()
            if cur in state.visited_blocks:
                continue
            state.visited_blocks.add(cur)
            state.emitted.append(by_name[cur])
            incident = outgoing[cur] + incoming[cur]
            for ei in incident:
                if ei not in state.visited_edges:
                    state.visited_edges.add(ei)
                    state.emitted.append(g.edges[ei])
            for ei in incident:
                edge = g.edges[ei]
                neighbor = edge.dst[0] if edge.src[0] == cur else edge.src[0]
                if edge.src[0] == edge.dst[0]:
                    continue
                if neighbor not in state.visited_blocks:
                    state.work_queue.append(neighbor)

    return CanonicalDoc(list(state.emitted))


def _block_section(node: BlockNode) -> Section:
    """Block section with BlockType and Name leading, other params after."""
    params = [Param("BlockType", ParamValue.bare(node.block_type or "Unknown")),
              Param("Name", ParamValue.quoted(node.name))]
    params.extend(p for p in node.params if p.key not in ("BlockType", "Name"))
    return Section("Block", params)


def _line_section(edge: PortEdge) -> Section:
    return Section("Line", [
        Param("SrcBlock", ParamValue.quoted(edge.src[0])),
        Param("SrcPort", ParamValue.bare(str(edge.src[1]))),
        Param("DstBlock", ParamValue.quoted(edge.dst[0])),
        Param("DstPort", ParamValue.bare(str(edge.dst[1]))),
    ])


def _doc_tree(doc: CanonicalDoc, interleaved: bool) -> SyntaxTree:
    if interleaved:
        children = [_block_section(e) if isinstance(e, BlockNode) else _line_section(e)
                    for e in doc.elements]
    else:
        children = [_block_section(b) for b in doc.blocks]
        children += [_line_section(e) for e in doc.edges]
    return SyntaxTree(Section("Model", [], [Section("System", [], children)]))


def emit_canonical(doc: CanonicalDoc) -> str:
    """Print a canonical doc as a ``Model { System { ... } }`` file whose
    children follow the breadth-first emission order."""
    return print_tree(_doc_tree(doc, interleaved=True))


def _reorder(sec: Section) -> Section:
    """Stable partition of children: everything else first, Lines last."""
    non_lines = [_reorder(c) for c in sec.children if c.name != "Line"]
    lines = [_reorder(c) for c in sec.children if c.name == "Line"]
    return Section(sec.name, list(sec.params), non_lines + lines)


def restore(doc_or_text: CanonicalDoc | SyntaxTree | str) -> SyntaxTree:
    """Reorder a canonical-order model so all blocks precede all edges.

    Accepts a CanonicalDoc, an already-parsed tree, or model text
    (possibly a sampled single-line token stream, possibly slightly
    malformed -- parsed leniently). Relative order within blocks and
    within edges is preserved; the result is idempotent under restore.
    Raises UnparsableSample when the input cannot be parsed at all.
    """
    if isinstance(doc_or_text, CanonicalDoc):
        return _doc_tree(doc_or_text, interleaved=False)
    if isinstance(doc_or_text, SyntaxTree):
        tree = doc_or_text
    else:
        text = doc_or_text
        try:
            if "\n" in text.strip():
                tree = parse(text, LENIENT)
            else:
                tree = parse_token_stream(tokenize(text), LENIENT)
        except ParseError as exc:
            raise UnparsableSample(str(exc)) from exc
    return SyntaxTree(_reorder(tree.root), list(tree.diagnostics))
