"""Temperature + nucleus sampling loop over pluggable next-token backends.

The built-in backend is a stupid-backoff n-gram model trained on
canonicalized corpora; an external language model can be plugged in over a
line-delimited JSON bridge (see BridgeBackend for the wire format). Both
answer the same query: context string in, next-token distribution out.
"""

from __future__ import annotations

import json
import math
import random
import subprocess
import threading
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Protocol, runtime_checkable

from .syntax import TokenSeq, tokenize

__all__ = [
    "TokenDistribution",
    "SamplerConfig",
    "GenerationResult",
    "NGramModel",
    "BridgeBackend",
    "NonPositiveTemperature",
    "EmptyDistribution",
    "EmptyCorpus",
    "BackendFailure",
    "apply_temperature",
    "nucleus_filter",
    "sample_token",
    "generate",
    "ngram_train",
    "ngram_next_dist",
    "ngram_score",
]

DEFAULT_EOT = "<endoftext>"
PROB_TOL = 1e-9


class NonPositiveTemperature(ValueError):
    pass


class EmptyDistribution(ValueError):
    pass


class EmptyCorpus(ValueError):
    pass


class BackendFailure(RuntimeError):
    """A backend query failed; ``partial`` carries any output produced so far."""

    def __init__(self, message: str, partial: "GenerationResult | None" = None):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class TokenDistribution:
    """Ordered probability mass function over next tokens."""

    entries: tuple[tuple[str, float], ...]

    def tokens(self) -> tuple[str, ...]:
        return tuple(t for t, _ in self.entries)

    def prob(self, token: str) -> float:
        for t, p in self.entries:
            if t == token:
                return p
        return 0.0

    def total(self) -> float:
        return sum(p for _, p in self.entries)

    def normalized(self) -> "TokenDistribution":
        total = self.total()
        if not self.entries or total <= 0.0:
            raise EmptyDistribution("no probability mass to normalize")
        return TokenDistribution(tuple((t, p / total) for t, p in self.entries))

    @staticmethod
    def from_pairs(pairs: Iterable[tuple[str, float]]) -> "TokenDistribution":
        entries = tuple(pairs)
        seen = {t for t, _ in entries}
        if len(seen) != len(entries):
            raise ValueError("duplicate tokens in distribution")
        return TokenDistribution(entries)


@dataclass(frozen=True)
class SamplerConfig:
    """Knobs of one sampling run; temperature and nucleus follow the usual
    decoder semantics (see apply_temperature / nucleus_filter)."""

    seed_text: str = "Model {"
    temperature: float = 1.0
    nucleus: float = 1.0
    max_tokens: int = 1000
    rng_seed: int = 0
    eot_token: str = DEFAULT_EOT

    def __post_init__(self):
        if self.temperature <= 0:
            raise NonPositiveTemperature(f"temperature must be > 0, got {self.temperature}")
        if not (0.0 < self.nucleus <= 1.0):
            raise ValueError(f"nucleus must be in (0, 1], got {self.nucleus}")
        if self.max_tokens < 1:
            raise ValueError(f"max_tokens must be >= 1, got {self.max_tokens}")


@dataclass(frozen=True)
class GenerationResult:
    text: str
    completed: bool
    tokens_emitted: int


@runtime_checkable
class NextTokenBackend(Protocol):
    """Anything that answers next-token-distribution queries.

    ``token_joiner`` is the separator used when appending a sampled token
    to the context (" " for whitespace-token backends, "" for backends
    whose tokens carry their own spacing).
    """

    token_joiner: str

    def next_distribution(self, context: str) -> TokenDistribution: ...


def apply_temperature(pmf: TokenDistribution, temperature: float) -> TokenDistribution:
    """Sharpen or flatten a distribution: p_i -> p_i^(1/T), renormalized.

    Equivalent to dividing logits by T. T=1 is the identity; T -> 0
    approaches greedy argmax. Computed in log space so extreme
    temperatures stay finite. Ranking (and hence argmax) is preserved for
    every T > 0.
    """
    if temperature <= 0:
        raise NonPositiveTemperature(f"temperature must be > 0, got {temperature}")
    if not pmf.entries:
        raise EmptyDistribution("cannot scale an empty distribution")
    if temperature == 1.0:
        return pmf.normalized()
    scaled_logs = [(t, math.log(p) / temperature if p > 0.0 else -math.inf)
                   for t, p in pmf.entries]
    peak = max(lp for _, lp in scaled_logs)
    if peak == -math.inf:
        raise EmptyDistribution("all probabilities are zero")
    weights = [(t, math.exp(lp - peak)) for t, lp in scaled_logs]
    return TokenDistribution(tuple(weights)).normalized()


def nucleus_filter(pmf: TokenDistribution, nucleus: float) -> TokenDistribution:
    """Keep the smallest highest-probability prefix whose mass strictly
    exceeds ``nucleus``, then renormalize.

    Entries are sorted by descending probability with ties broken by token
    text so results are platform-independent. If no prefix strictly
    exceeds the threshold (e.g. nucleus = 1.0), every token is kept.
    """
    if not (0.0 < nucleus <= 1.0):
        raise ValueError(f"nucleus must be in (0, 1], got {nucleus}")
    ordered = sorted(pmf.entries, key=lambda e: (-e[1], e[0]))
    kept: list[tuple[str, float]] = []
    cumulative = 0.0
    for token, p in ordered:
        kept.append((token, p))
        cumulative += p
        if cumulative > nucleus:
            break
    else:
        kept = ordered
    return TokenDistribution(tuple(kept)).normalized()


def sample_token(pmf: TokenDistribution, rng: random.Random) -> str:
    """One multinomial draw; deterministic given the RNG state."""
    if not pmf.entries:
        raise EmptyDistribution("cannot sample from an empty distribution")
    r = rng.random() * pmf.total()
    cumulative = 0.0
    for token, p in pmf.entries:
        cumulative += p
        if r < cumulative:
            return token
    return pmf.entries[-1][0]


def generate(backend: NextTokenBackend, cfg: SamplerConfig) -> GenerationResult:
    """Sample one candidate model: seed, then draw token by token until the
    end-of-text token appears (completed) or the budget runs out."""
    rng = random.Random(cfg.rng_seed)
    joiner = getattr(backend, "token_joiner", " ")
    text = cfg.seed_text
    emitted = 0
    while emitted < cfg.max_tokens:
        try:
            pmf = backend.next_distribution(text)
        except BackendFailure as exc:
            exc.partial = GenerationResult(text, False, emitted)
            raise
        pmf = apply_temperature(pmf, cfg.temperature)
        pmf = nucleus_filter(pmf, cfg.nucleus)
        token = sample_token(pmf, rng)
        if token == cfg.eot_token:
            return GenerationResult(text, True, emitted)
        text = text + joiner + token
        emitted += 1
    return GenerationResult(text, False, emitted)


# ---------------------------------------------------------------------------
# N-gram backend
# ---------------------------------------------------------------------------

@dataclass
class NGramModel:
    """Count-based n-gram model with stupid-backoff scoring.

    ``tables[n]`` maps an (n-1)-token context tuple to successor counts.
    Scores back off to shorter contexts with a constant factor, then the
    whole vocabulary is renormalized into a proper distribution.
    """

    order: int
    tables: dict[int, dict[tuple[str, ...], Counter]]
    vocab: tuple[str, ...]
    eot_token: str = DEFAULT_EOT
    backoff: float = 0.4
    token_joiner: str = " "
    _totals: dict[int, dict[tuple[str, ...], int]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self._totals:
            self._totals = {n: {ctx: sum(succ.values()) for ctx, succ in table.items()}
                            for n, table in self.tables.items()}

    def next_distribution(self, context: str) -> TokenDistribution:
        return ngram_next_dist(self, list(tokenize(context)))

    def save(self, path: str) -> None:
        payload = {
            "order": self.order,
            "backoff": self.backoff,
            "eot_token": self.eot_token,
            "vocab": list(self.vocab),
            "tables": {
                str(n): {" ".join(ctx): dict(succ) for ctx, succ in table.items()}
                for n, table in self.tables.items()
            },
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)

    @staticmethod
    def load(path: str) -> "NGramModel":
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        tables = {
            int(n): {tuple(ctx.split(" ")) if ctx else (): Counter(succ)
                     for ctx, succ in table.items()}
            for n, table in payload["tables"].items()
        }
        return NGramModel(order=payload["order"], tables=tables,
                          vocab=tuple(payload["vocab"]),
                          eot_token=payload["eot_token"], backoff=payload["backoff"])


def ngram_train(corpus: Iterable[TokenSeq | list[str]], k: int,
                eot_token: str = DEFAULT_EOT) -> NGramModel:
    """Count n-grams of all orders 1..k over the corpus.

    Each document gets the end-of-text token appended so the model learns
    where files stop. Raises EmptyCorpus when no documents are given.
    """
    if k < 1:
        raise ValueError(f"order must be >= 1, got {k}")
    tables: dict[int, dict[tuple[str, ...], Counter]] = {n: {} for n in range(1, k + 1)}
    vocab: set[str] = set()
    n_docs = 0
    for doc in corpus:
        tokens = list(doc) + [eot_token]
        n_docs += 1
        vocab.update(tokens)
        for n in range(1, k + 1):
            table = tables[n]
            for i in range(n - 1, len(tokens)):
                ctx = tuple(tokens[i - n + 1:i])
                table.setdefault(ctx, Counter())[tokens[i]] += 1
    if n_docs == 0:
        raise EmptyCorpus("no documents to train on")
    return NGramModel(order=k, tables=tables, vocab=tuple(sorted(vocab)),
                      eot_token=eot_token)


def _backoff_score(model: NGramModel, context: tuple[str, ...], token: str) -> float:
    """Stupid-backoff score of one continuation: relative frequency at the
    deepest level that observed it, discounted by the backoff factor per
    level descended. Not a probability."""
    factor = 1.0
    for n in range(min(model.order, len(context) + 1), 0, -1):
        ctx = context[len(context) - (n - 1):] if n > 1 else ()
        succ = model.tables.get(n, {}).get(ctx)
        if succ is not None and token in succ:
            return factor * succ[token] / model._totals[n][ctx]
        factor *= model.backoff
    return 0.0


def ngram_score(model: NGramModel, tokens: list[str]) -> float:
    """Stupid-backoff log-score of a token sequence (natural log).

    Tokens never observed anywhere score as one occurrence against the
    unigram total, so the result stays finite.
    """
    total_unigrams = model._totals[1][()]
    score = 0.0
    for i, token in enumerate(tokens):
        s = _backoff_score(model, tuple(tokens[:i]), token)
        if s <= 0.0:
            s = model.backoff ** model.order / total_unigrams
        score += math.log(s)
    return score


def ngram_next_dist(model: NGramModel, context: list[str]) -> TokenDistribution:
    """Normalized next-token distribution from the longest context suffix
    the model has seen.

    The count table of the deepest matching order supplies the whole
    distribution; an entirely unseen context falls back to unigram counts.
    Entries are token-sorted so results are platform-independent.
    """
    context_t = tuple(context)
    for n in range(min(model.order, len(context_t) + 1), 0, -1):
        ctx = context_t[len(context_t) - (n - 1):] if n > 1 else ()
        succ = model.tables.get(n, {}).get(ctx)
        if succ:
            total = model._totals[n][ctx]
            entries = tuple((tok, cnt / total) for tok, cnt in sorted(succ.items()))
            return TokenDistribution(entries).normalized()
    raise EmptyDistribution("model has no unigram counts")


# ---------------------------------------------------------------------------
# External LM bridge client
# ---------------------------------------------------------------------------

class BridgeBackend:
    """Client for a next-token server speaking line-delimited JSON over the
    child process's stdin/stdout.

    Request:  {"id": <int>, "context": "<string>", "top_k": <int>}
    Response: {"id": <int>, "tokens": ["<t1>", ...], "probs": [<p1>, ...]}

    Responses must echo the id, keep the arrays the same length (at most
    top_k entries), and have probs summing to 1 within 1e-6; anything else
    raises BackendFailure. Served tokens carry their own spacing, so the
    joiner is empty. Requests are serialized per connection.
    """

    token_joiner = ""

    def __init__(self, command: list[str], top_k: int = 1000):
        self.top_k = top_k
        self._lock = threading.Lock()
        self._next_id = 0
        try:
            self._proc = subprocess.Popen(
                command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                text=True, bufsize=1)
        except (OSError, ValueError) as exc:
            raise BackendFailure(f"failed to start bridge: {exc}") from exc

    def next_distribution(self, context: str) -> TokenDistribution:
        with self._lock:
            self._next_id += 1
            request_id = self._next_id
            request = json.dumps({"id": request_id, "context": context,
                                  "top_k": self.top_k})
            try:
                assert self._proc.stdin is not None and self._proc.stdout is not None
                self._proc.stdin.write(request + "\n")
                self._proc.stdin.flush()
                line = self._proc.stdout.readline()
            except (OSError, BrokenPipeError) as exc:
                raise BackendFailure(f"bridge I/O failed: {exc}") from exc
        if not line:
            raise BackendFailure("bridge closed its output stream")
        try:
            response = json.loads(line)
        except json.JSONDecodeError as exc:
            raise BackendFailure(f"bridge sent invalid JSON: {line!r}") from exc
        if response.get("error"):
            raise BackendFailure(f"bridge error: {response['error']}")
        if response.get("id") != request_id:
            raise BackendFailure(
                f"bridge answered id {response.get('id')} to request {request_id}")
        tokens = response.get("tokens")
        probs = response.get("probs")
        if not isinstance(tokens, list) or not isinstance(probs, list) \
                or len(tokens) != len(probs):
            raise BackendFailure("bridge response arrays missing or of unequal length")
        if len(tokens) > self.top_k:
            raise BackendFailure(f"bridge sent {len(tokens)} tokens, more than top_k")
        total = sum(probs)
        if abs(total - 1.0) > 1e-6:
            raise BackendFailure(f"bridge probs sum to {total}, expected 1 +/- 1e-6")
        merged: dict[str, float] = {}
        for tok, p in zip(tokens, probs):
            merged[tok] = merged.get(tok, 0.0) + float(p)
        return TokenDistribution(tuple(merged.items())).normalized()

    def close(self) -> None:
        if self._proc.stdin is not None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
        self._proc.wait(timeout=30)

    def __enter__(self) -> "BridgeBackend":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
