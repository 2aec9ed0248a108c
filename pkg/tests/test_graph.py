import random

import pytest

from conftest import random_graph
from oracles import components_unionfind, longest_path_bruteforce
from mdlfuzz.graph import (BlockNode, GraphError, ModelGraph,
                           PathSearchBudgetExceeded, PortEdge, build_graph,
                           connected_components, longest_source_sink_path,
                           metrics)
from mdlfuzz.syntax import LENIENT, parse


def model_text(blocks: list[tuple[str, str]], lines: list[str]) -> str:
    parts = ["Model {", " System {"]
    for btype, name in blocks:
        parts += ["  Block {", f"   BlockType {btype}", f'   Name "{name}"', "  }"]
    parts += lines
    parts += [" }", "}"]
    return "\n".join(parts)


def simple_line(src: str, dst: str, sport: int = 1, dport: int = 1) -> str:
    return (f'  Line {{\n   SrcBlock "{src}"\n   SrcPort {sport}\n'
            f'   DstBlock "{dst}"\n   DstPort {dport}\n  }}')


def graph_of(*edges: tuple[str, str]) -> ModelGraph:
    names = []
    for a, b in edges:
        for n in (a, b):
            if n not in names:
                names.append(n)
    return ModelGraph([BlockNode(n, "Gain") for n in names],
                      [PortEdge((a, 1), (b, 1)) for a, b in edges])


class TestBuildGraph:
    def test_single_line_single_edge(self):
        text = model_text([("Sin", "a"), ("Scope", "b")], [simple_line("a", "b")])
        g = build_graph(parse(text, LENIENT))
        assert g.edges == [PortEdge(("a", 1), ("b", 1))]
        assert g.block_names() == ["a", "b"]

    def test_branch_expansion(self):
        text = model_text(
            [("Sin", "a"), ("Gain", "b"), ("Gain", "c")],
            ['  Line {\n   SrcBlock "a"\n   SrcPort 1\n'
             '   Branch {\n    DstBlock "b"\n    DstPort 1\n   }\n'
             '   Branch {\n    DstBlock "c"\n    DstPort 1\n   }\n  }'])
        g = build_graph(parse(text, LENIENT))
        assert g.edges == [PortEdge(("a", 1), ("b", 1)), PortEdge(("a", 1), ("c", 1))]

    def test_nested_branch_expansion(self):
        text = model_text(
            [("Sin", "a"), ("Gain", "b"), ("Gain", "c")],
            ['  Line {\n   SrcBlock "a"\n   SrcPort 1\n'
             '   Branch {\n    DstBlock "b"\n    DstPort 1\n'
             '    Branch {\n     DstBlock "c"\n     DstPort 2\n    }\n   }\n  }'])
        g = build_graph(parse(text, LENIENT))
        assert PortEdge(("a", 1), ("c", 2)) in g.edges
        assert len(g.edges) == 2

    def test_dangling_reference(self):
        text = model_text([("Sin", "a")], [simple_line("a", "x")])
        tree = parse(text, LENIENT)
        with pytest.raises(GraphError) as exc_info:
            build_graph(tree)
        assert exc_info.value.code == "DanglingReference"
        g = build_graph(tree, LENIENT)
        assert g.edges == []
        assert any("x" in f for f in g.findings)

    def test_duplicate_block_name(self):
        text = model_text([("Sin", "a"), ("Gain", "a")], [])
        with pytest.raises(GraphError) as exc_info:
            build_graph(parse(text, LENIENT))
        assert exc_info.value.code == "DuplicateBlockName"

    def test_missing_port_defaults_to_one(self):
        text = model_text(
            [("Sin", "a"), ("Scope", "b")],
            ['  Line {\n   SrcBlock "a"\n   DstBlock "b"\n  }'])
        g = build_graph(parse(text, LENIENT))
        assert g.edges == [PortEdge(("a", 1), ("b", 1))]


class TestComponents:
    def test_chain(self):
        g = graph_of(("a", "b"), ("b", "c"))
        assert connected_components(g) == [{"a", "b", "c"}]
        assert [frozenset(c) for c in connected_components(g)] == \
            components_unionfind(g)

    def test_two_isolated_blocks(self):
        g = ModelGraph([BlockNode("a", "Sin"), BlockNode("b", "Sin")], [])
        assert connected_components(g) == []

    def test_edge_plus_isolated(self):
        g = ModelGraph([BlockNode(n, "Gain") for n in "abc"],
                       [PortEdge(("a", 1), ("b", 1))])
        assert connected_components(g) == [{"a", "b"}]

    def test_self_loop_is_singleton(self):
        g = ModelGraph([BlockNode("a", "Gain")], [PortEdge(("a", 1), ("a", 1))])
        assert connected_components(g) == []

    def test_matches_unionfind_on_random_graphs(self):
        rng = random.Random(7)
        for _ in range(300):
            g = random_graph(rng, max_blocks=12)
            mine = sorted(frozenset(c) for c in connected_components(g))
            oracle = sorted(components_unionfind(g))
            assert mine == oracle

    def test_partition_property(self):
        rng = random.Random(8)
        for _ in range(100):
            g = random_graph(rng, max_blocks=12)
            comps = connected_components(g)
            seen = set()
            for comp in comps:
                assert not (comp & seen)
                seen |= comp


class TestLongestPath:
    def test_diamond(self):
        g = graph_of(("a", "b"), ("a", "c"), ("b", "d"), ("c", "d"))
        assert longest_source_sink_path(g) == 3
        assert longest_path_bruteforce(g) == 3

    def test_isolated_block(self):
        g = ModelGraph([BlockNode("a", "Sin")], [])
        assert longest_source_sink_path(g) == 1

    def test_pure_cycle_has_no_path(self):
        g = graph_of(("a", "b"), ("b", "a"))
        assert longest_source_sink_path(g) == 0
        assert longest_path_bruteforce(g) == 0

    def test_budget_exceeded(self):
        g = graph_of(*[(a, b) for a in "abcde" for b in "abcde" if a < b])
        with pytest.raises(PathSearchBudgetExceeded):
            longest_source_sink_path(g, budget=3)


class TestMetrics:
    def test_chain_of_three(self):
        g = graph_of(("a", "b"), ("b", "c"))
        rec = metrics(g)
        assert (rec.blk_count, rec.n_subgraphs, rec.max_subgraph_size,
                rec.max_src_sink_path) == (3, 1, 3, 3)

    def test_empty_model(self):
        rec = metrics(ModelGraph())
        assert (rec.blk_count, rec.n_subgraphs, rec.max_subgraph_size,
                rec.max_src_sink_path) == (0, 0, 0, 0)

    def test_edge_plus_isolated(self):
        g = ModelGraph([BlockNode(n, "Gain") for n in "abc"],
                       [PortEdge(("a", 1), ("b", 1))])
        rec = metrics(g)
        assert (rec.blk_count, rec.n_subgraphs, rec.max_subgraph_size,
                rec.max_src_sink_path) == (3, 1, 2, 2)

    def test_order_independence(self):
        rng = random.Random(21)
        for _ in range(50):
            g = random_graph(rng, max_blocks=8)
            base = metrics(g)
            blocks = list(g.blocks)
            edges = list(g.edges)
            rng.shuffle(blocks)
            rng.shuffle(edges)
            assert metrics(ModelGraph(blocks, edges)) == base

    def test_csv_row(self):
        g = graph_of(("a", "b"))
        assert metrics(g).csv_row("m.mdl") == "m.mdl,2,1,2,2"
