"""Request loop and model wrapper for the stdio bridge.

Single-threaded by design: one server process per client connection, one
response line per request line, stateless across requests (the full
context arrives with every query).
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from typing import IO

import torch
from transformers import AutoModelForCausalLM, AutoTokenizer
from transformers import logging as hf_logging

DEFAULT_TOP_K = 1000


@dataclass
class ModelHandle:
    model: object
    tokenizer: object
    window: int


def load_model(path: str) -> ModelHandle:
    """Load a causal LM and its tokenizer from a local directory."""
    hf_logging.set_verbosity_error()
    tokenizer = AutoTokenizer.from_pretrained(path)
    model = AutoModelForCausalLM.from_pretrained(path)
    model.eval()
    config = model.config
    window = getattr(config, "n_positions", None) \
        or getattr(config, "max_position_embeddings", None) or 1024
    return ModelHandle(model=model, tokenizer=tokenizer, window=int(window))


@torch.no_grad()
def next_token_distribution(handle: ModelHandle, context: str,
                            top_k: int) -> tuple[list[str], list[float]]:
    """Top-k next-token continuations with renormalized probabilities.

    The context is truncated to the model window from the left, keeping
    the most recent tokens; each returned token is the decoded text piece,
    so clients append it to the context verbatim.
    """
    ids = handle.tokenizer.encode(context)
    if not ids:
        ids = [handle.tokenizer.eos_token_id or 0]
    ids = ids[-(handle.window - 1):]
    logits = handle.model(torch.tensor([ids])).logits[0, -1]
    probs = torch.softmax(logits.float(), dim=-1)
    k = min(top_k, probs.shape[-1])
    top = torch.topk(probs, k)
    tokens = [handle.tokenizer.decode([tid]) for tid in top.indices.tolist()]
    raw = [float(p) for p in top.values.tolist()]
    total = sum(raw)
    return tokens, [p / total for p in raw]


def _handle_line(handle: ModelHandle, line: str) -> dict:
    try:
        request = json.loads(line)
    except json.JSONDecodeError as exc:
        return {"id": None, "error": f"invalid JSON: {exc.msg}"}
    if not isinstance(request, dict):
        return {"id": None, "error": "request must be a JSON object"}
    request_id = request.get("id")
    if not isinstance(request_id, int):
        return {"id": None, "error": "missing integer 'id'"}
    context = request.get("context")
    if not isinstance(context, str):
        return {"id": request_id, "error": "missing string 'context'"}
    top_k = request.get("top_k", DEFAULT_TOP_K)
    if not isinstance(top_k, int) or top_k < 1:
        return {"id": request_id, "error": "'top_k' must be a positive integer"}
    try:
        tokens, probs = next_token_distribution(handle, context, top_k)
    except Exception as exc:  # surface inference errors without dying
        return {"id": request_id, "error": f"inference failed: {exc}"}
    return {"id": request_id, "tokens": tokens, "probs": probs}


def serve(handle: ModelHandle, in_stream: IO[str] | None = None,
          out_stream: IO[str] | None = None) -> int:
    """Answer requests line by line until end-of-input; returns 0.

    A malformed request produces an error response and the loop continues;
    only end-of-input stops the server.
    """
    in_stream = in_stream if in_stream is not None else sys.stdin
    out_stream = out_stream if out_stream is not None else sys.stdout
    for line in in_stream:
        line = line.strip()
        if not line:
            continue
        response = _handle_line(handle, line)
        out_stream.write(json.dumps(response) + "\n")
        out_stream.flush()
    return 0
