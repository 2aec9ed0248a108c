import pytest
from hypothesis import given, strategies as st

from oracles import bijective_base26_sequence
from mdlfuzz import data
from mdlfuzz.graph import build_graph
from mdlfuzz.simplify import (DuplicateOriginalName, RenameMap,
                              SimplifyPolicy, index_to_name, is_flat_no_deps,
                              rename_identifiers, simplify)
from mdlfuzz.syntax import LENIENT, parse, print_tree, tokenize

POSITIONED = """Model {
 Name "m"
 System {
  Name "m"
  Block {
   BlockType Gain
   Name "g"
   Position [100, 50, 130, 80]
  }
 }
}"""

ANNOTATION_ONLY = """Model {
 Name "m"
 System {
  Name "m"
  Annotation {
   Name "just a note"
   Position [10, 10]
  }
 }
}"""


class TestSimplify:
    def test_position_removed(self):
        result = simplify(parse(POSITIONED, LENIENT))
        block = result.tree.root.children[0].children[0]
        assert block.get("Position") is None
        assert block.get("BlockType").as_string() == "Gain"
        assert not result.empty_after_simplify

    def test_annotation_only_model_flagged(self):
        result = simplify(parse(ANNOTATION_ONLY, LENIENT))
        assert result.empty_after_simplify
        assert result.removed_sections == 1

    def test_no_blocklisted_content_unchanged(self):
        text = 'Model {\n Name "m"\n System {\n  Block {\n   BlockType Sin\n   Name "s"\n  }\n }\n}'
        tree = parse(text, LENIENT)
        result = simplify(tree)
        assert result.tree == tree
        assert result.removed_params == 0 and result.removed_sections == 0

    def test_result_still_prints_and_parses(self):
        result = simplify(parse(POSITIONED, LENIENT))
        assert parse(print_tree(result.tree)) == result.tree

    def test_graph_unchanged_by_simplify(self):
        for path in sorted(data.corpus50_dir().glob("*.mdl"))[:10]:
            tree = parse(path.read_text(), LENIENT)
            before = build_graph(tree, LENIENT)
            after = build_graph(simplify(tree).tree, LENIENT)
            assert before.block_names() == after.block_names()
            assert before.edges == after.edges

    def test_token_count_never_increases(self):
        for path in sorted(data.corpus50_dir().glob("*.mdl")):
            text = path.read_text()
            result = simplify(parse(text, LENIENT))
            assert len(tokenize(print_tree(result.tree))) <= len(tokenize(text))

    def test_collapse_whitespace_normalizes_vectors(self):
        tree = parse('Model {\n System {\n  Block {\n   BlockType Sin\n   Name "s"\n'
                     '   Ports [1, 2]\n  }\n }\n}', LENIENT)
        policy = SimplifyPolicy(param_blocklist=frozenset())
        block = simplify(tree, policy).tree.root.children[0].children[0]
        assert block.get("Ports").lexemes == ("[1,2]",)

    def test_policy_overrides(self):
        policy = SimplifyPolicy().with_overrides(keep_params=["Position"],
                                                 drop_params=["Gain"])
        assert "Position" not in policy.param_blocklist
        assert "Gain" in policy.param_blocklist

    def test_policy_from_file(self, tmp_path):
        cfg = tmp_path / "policy.cfg"
        cfg.write_text("drop_params = Foo, Bar\nstrip_comments = false\n")
        policy = SimplifyPolicy.from_file(str(cfg))
        assert policy.param_blocklist == frozenset({"Foo", "Bar"})
        assert policy.strip_comments is False


class TestIndexToName:
    @pytest.mark.parametrize("i,expected", [
        (0, "a"), (1, "b"), (2, "c"), (25, "z"),
        (26, "aa"), (27, "ab"), (701, "zz"), (702, "aaa"),
    ])
    def test_sequence_values(self, i, expected):
        assert index_to_name(i) == expected

    def test_matches_bruteforce_enumeration(self):
        names = bijective_base26_sequence(1000)
        assert [index_to_name(i) for i in range(1000)] == names

    def test_injective_over_million(self):
        assert len({index_to_name(i) for i in range(10 ** 6)}) == 10 ** 6

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            index_to_name(-1)


THREE_BLOCKS = """Model {
 Name "m"
 System {
  Name "m"
  Block {
   BlockType Sin
   Name "X"
  }
  Block {
   BlockType Gain
   Name "Y"
  }
  Block {
   BlockType Scope
   Name "Z"
  }
  Line {
   SrcBlock "X"
   SrcPort 1
   DstBlock "Y"
   DstPort 1
  }
  Line {
   SrcBlock "Y"
   SrcPort 1
   Branch {
    DstBlock "Z"
    DstPort 1
   }
  }
 }
}"""


class TestRename:
    def test_three_blocks_renamed_consistently(self):
        tree = parse(THREE_BLOCKS, LENIENT)
        renamed, rename_map = rename_identifiers(tree, ["X", "Y", "Z"])
        assert rename_map.pairs == {"X": "a", "Y": "b", "Z": "c"}
        g_before = build_graph(tree, LENIENT)
        g_after = build_graph(renamed, LENIENT)
        # isomorphism oracle: re-extract and compare under the bijection
        assert [rename_map.apply(n) for n in g_before.block_names()] == \
            g_after.block_names()
        mapped = [((rename_map.apply(e.src[0]), e.src[1]),
                   (rename_map.apply(e.dst[0]), e.dst[1])) for e in g_before.edges]
        assert mapped == [(e.src, e.dst) for e in g_after.edges]

    def test_single_block(self):
        text = 'Model {\n System {\n  Block {\n   BlockType Sin\n   Name "only"\n  }\n }\n}'
        renamed, _ = rename_identifiers(parse(text, LENIENT), ["only"])
        block = renamed.root.children[0].children[0]
        assert block.get("Name").as_string() == "a"

    def test_duplicate_original_name(self):
        text = ('Model {\n System {\n'
                '  Block {\n   BlockType Sin\n   Name "dup"\n  }\n'
                '  Block {\n   BlockType Gain\n   Name "dup"\n  }\n }\n}')
        with pytest.raises(DuplicateOriginalName):
            rename_identifiers(parse(text, LENIENT), ["dup", "other"])

    def test_duplicate_in_order(self):
        with pytest.raises(DuplicateOriginalName):
            RenameMap.from_order(["x", "x"])


class TestFlatness:
    def test_primitive_model_is_flat(self):
        report = is_flat_no_deps(parse(THREE_BLOCKS, LENIENT))
        assert report.flat and bool(report)

    @pytest.mark.parametrize("btype", ["SubSystem", "Reference", "S-Function"])
    def test_dependency_types_rejected(self, btype):
        text = (f'Model {{\n System {{\n  Block {{\n   BlockType {btype}\n'
                f'   Name "dep"\n  }}\n }}\n}}')
        report = is_flat_no_deps(parse(text, LENIENT))
        assert not report.flat
        assert any("dep" in r for r in report.reasons)

    def test_library_link_param_rejected(self):
        text = ('Model {\n System {\n  Block {\n   BlockType Gain\n   Name "g"\n'
                '   SourceBlock "somelib/Gain"\n  }\n }\n}')
        report = is_flat_no_deps(parse(text, LENIENT))
        assert not report.flat
        assert "SourceBlock" in report.reasons[0]


@given(st.integers(min_value=0, max_value=10 ** 7))
def test_index_to_name_alphabet(i):
    name = index_to_name(i)
    assert name and all("a" <= ch <= "z" for ch in name)
