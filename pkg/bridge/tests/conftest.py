"""Builds a tiny randomly initialized causal LM on disk so the server and
fine-tuner can be exercised without any network or large checkpoints."""

from __future__ import annotations

import pytest

CANONICAL_DOCS = [
    'Model { System { Block { BlockType Sin Name "a" } '
    'Line { SrcBlock "a" SrcPort 1 DstBlock "b" DstPort 1 } '
    'Block { BlockType Scope Name "b" } } }',
    'Model { System { Block { BlockType Constant Name "a" } '
    'Line { SrcBlock "a" SrcPort 1 DstBlock "b" DstPort 1 } '
    'Block { BlockType Display Name "b" } } }',
    'Model { System { Block { BlockType Step Name "a" } '
    'Line { SrcBlock "a" SrcPort 1 DstBlock "b" DstPort 1 } '
    'Block { BlockType Gain Name "b" } '
    'Line { SrcBlock "b" SrcPort 1 DstBlock "c" DstPort 1 } '
    'Block { BlockType Terminator Name "c" } } }',
]


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory) -> str:
    import torch
    from tokenizers import ByteLevelBPETokenizer
    from transformers import GPT2Config, GPT2LMHeadModel, PreTrainedTokenizerFast

    torch.manual_seed(0)
    bpe = ByteLevelBPETokenizer()
    bpe.train_from_iterator(CANONICAL_DOCS * 4, vocab_size=320, min_frequency=1,
                            special_tokens=["<|endoftext|>"])
    tokenizer = PreTrainedTokenizerFast(tokenizer_object=bpe._tokenizer,
                                        eos_token="<|endoftext|>")
    config = GPT2Config(vocab_size=tokenizer.vocab_size, n_positions=128,
                        n_embd=32, n_layer=2, n_head=2,
                        bos_token_id=tokenizer.eos_token_id,
                        eos_token_id=tokenizer.eos_token_id)
    model = GPT2LMHeadModel(config)
    out = tmp_path_factory.mktemp("tiny-model")
    model.save_pretrained(str(out))
    tokenizer.save_pretrained(str(out))
    return str(out)


@pytest.fixture
def toy_corpus(tmp_path) -> str:
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    for i in range(10):
        (corpus / f"doc{i:02d}.mdl").write_text(
            CANONICAL_DOCS[i % len(CANONICAL_DOCS)] + "\n", encoding="utf-8")
    return str(corpus)
