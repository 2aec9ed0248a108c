"""Fine-tune a base causal LM on a canonicalized corpus directory.

Documents are concatenated with the tokenizer's end-of-text token between
them, split into fixed-size blocks, and trained with Adam. Defaults
follow the small-batch regime: batch size 1 with learning rate 2e-5.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import torch
from transformers import AutoModelForCausalLM, AutoTokenizer
from transformers import logging as hf_logging

DEFAULT_LR = 2e-5
DEFAULT_BATCH = 1


class EmptyCorpus(ValueError):
    pass


@dataclass
class FinetuneResult:
    out_dir: str
    steps: int
    losses: list[float] = field(default_factory=list)


def _load_corpus(corpus_dir: str | Path, eot: str) -> str:
    paths = sorted(p for p in Path(corpus_dir).glob("*")
                   if p.suffix in (".mdl", ".txt") and p.is_file())
    docs = [p.read_text(encoding="utf-8").strip() for p in paths]
    docs = [d for d in docs if d]
    if not docs:
        raise EmptyCorpus(f"no documents found in {corpus_dir}")
    return ("\n" + eot + "\n").join(docs) + "\n" + eot


def finetune(corpus_dir: str | Path, out_dir: str | Path, base_model: str | Path,
             lr: float = DEFAULT_LR, batch_size: int = DEFAULT_BATCH,
             steps: int | None = None, block_size: int | None = None,
             seed: int = 0) -> FinetuneResult:
    """Train ``base_model`` on the corpus and save a checkpoint to ``out_dir``.

    ``steps`` counts optimizer steps; None means one pass over the blocks.
    Passing a previous checkpoint as ``base_model`` resumes from it. The
    checkpoint is a regular transformers directory, loadable by the
    server. Raises EmptyCorpus when the directory holds no documents.
    """
    hf_logging.set_verbosity_error()
    torch.manual_seed(seed)
    tokenizer = AutoTokenizer.from_pretrained(str(base_model))
    model = AutoModelForCausalLM.from_pretrained(str(base_model))
    eot = tokenizer.eos_token or "<|endoftext|>"
    text = _load_corpus(corpus_dir, eot)

    ids = tokenizer.encode(text)
    window = getattr(model.config, "n_positions", None) \
        or getattr(model.config, "max_position_embeddings", None) or 1024
    block = min(block_size or 256, int(window))
    blocks = [ids[i:i + block] for i in range(0, len(ids), block)]
    blocks = [b for b in blocks if len(b) >= 2]
    if not blocks:
        raise EmptyCorpus(f"corpus in {corpus_dir} tokenizes to fewer than 2 tokens")

    if steps is None:
        steps = (len(blocks) + batch_size - 1) // batch_size
    optimizer = torch.optim.Adam(model.parameters(), lr=lr)
    losses: list[float] = []
    model.train()
    step = 0
    cursor = 0
    while step < steps:
        chunk = [blocks[(cursor + j) % len(blocks)] for j in range(batch_size)]
        cursor += batch_size
        width = max(len(b) for b in chunk)
        pad_id = tokenizer.eos_token_id or 0
        input_ids = torch.tensor(
            [b + [pad_id] * (width - len(b)) for b in chunk])
        labels = input_ids.clone()
        out = model(input_ids, labels=labels)
        out.loss.backward()
        optimizer.step()
        optimizer.zero_grad()
        losses.append(float(out.loss.detach()))
        step += 1

    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)
    model.save_pretrained(str(out_path))
    tokenizer.save_pretrained(str(out_path))
    return FinetuneResult(str(out_path), steps, losses)
