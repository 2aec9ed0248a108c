"""lm-bridge: serve next-token distributions from a causal LM over stdio.

Wire protocol (one JSON object per line, UTF-8):
  request:  {"id": <int>, "context": "<string>", "top_k": <int>}
  response: {"id": <int>, "tokens": ["<t1>", ...], "probs": [<p1>, ...]}
  error:    {"id": <int|null>, "error": "<message>"}

Responses echo the request id, keep both arrays the same length (at most
top_k entries), and normalize probs to sum to 1 within 1e-6.
"""

__version__ = "0.1.0"
