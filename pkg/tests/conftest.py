"""Shared generators for property-style tests: random syntax trees and
random model graphs, both seedable for reproducibility."""

from __future__ import annotations

import random
import string

import pytest

from mdlfuzz.graph import BlockNode, ModelGraph, PortEdge
from mdlfuzz.simplify import index_to_name
from mdlfuzz.syntax import Param, ParamValue, Section, SyntaxTree

IDENT_CHARS = string.ascii_letters + string.digits + "_"
BARE_CHARS = string.ascii_letters + string.digits + "._-+"
QUOTED_CHARS = string.ascii_letters + string.digits + ' .,_-"'

BLOCK_TYPES = ("Sin", "Gain", "Scope", "Constant", "Abs", "Terminator", "Sum")


def random_ident(rng: random.Random) -> str:
    first = rng.choice(string.ascii_letters)
    rest = "".join(rng.choice(IDENT_CHARS) for _ in range(rng.randrange(0, 8)))
    return first + rest


def random_value(rng: random.Random) -> ParamValue:
    roll = rng.random()
    if roll < 0.4:
        text = "".join(rng.choice(BARE_CHARS) for _ in range(rng.randrange(1, 10)))
        return ParamValue.bare(text)
    if roll < 0.75:
        text = "".join(rng.choice(QUOTED_CHARS) for _ in range(rng.randrange(0, 12)))
        return ParamValue.quoted(text)
    if roll < 0.92:
        scalars = ", ".join(str(rng.randrange(-99, 999)) for _ in range(rng.randrange(1, 5)))
        return ParamValue((f"[{scalars}]",))
    lexemes = tuple("".join(rng.choice(BARE_CHARS) for _ in range(rng.randrange(1, 6)))
                    for _ in range(rng.randrange(2, 4)))
    return ParamValue(lexemes)


def random_section(rng: random.Random, depth: int, budget: list[int]) -> Section:
    sec = Section(random_ident(rng))
    for _ in range(rng.randrange(0, 5)):
        sec.params.append(Param(random_ident(rng), random_value(rng)))
    if depth < 3:
        for _ in range(rng.randrange(0, 4)):
            if budget[0] <= 0:
                break
            budget[0] -= 1
            sec.children.append(random_section(rng, depth + 1, budget))
    return sec


def random_tree(rng: random.Random) -> SyntaxTree:
    budget = [rng.randrange(0, 25)]
    root = random_section(rng, 0, budget)
    root.name = "Model"
    return SyntaxTree(root)


def random_graph(rng: random.Random, max_blocks: int = 50,
                 profile: str = "random") -> ModelGraph:
    """Random multigraph. Profiles: ``random`` (arbitrary edges, may include
    self-loops and parallels), ``dangling_only`` (no edges),
    ``sourceless_cycle`` (one cycle through every block)."""
    n = rng.randrange(1, max_blocks + 1)
    blocks = [BlockNode(index_to_name(i), rng.choice(BLOCK_TYPES)) for i in range(n)]
    names = [b.name for b in blocks]
    edges: list[PortEdge] = []
    if profile == "dangling_only":
        pass
    elif profile == "sourceless_cycle":
        if n == 1:
            edges.append(PortEdge((names[0], 1), (names[0], 1)))
        else:
            for i in range(n):
                edges.append(PortEdge((names[i], 1), (names[(i + 1) % n], 1)))
    else:
        m = rng.randrange(0, 2 * n + 1)
        for _ in range(m):
            src = rng.choice(names)
            dst = rng.choice(names)
            if src == dst and rng.random() < 0.7:
                dst = rng.choice(names)
            edges.append(PortEdge((src, rng.randrange(1, 3)),
                                  (dst, rng.randrange(1, 3))))
    return ModelGraph(blocks, edges)


@pytest.fixture
def rng() -> random.Random:
    return random.Random(1234)
