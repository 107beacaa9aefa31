"""Autoregressive language-model backends over whitespace tokens.

Three implementations share one contract:

* :class:`TrigramBackend` is the deterministic add-k smoothed trigram used
  for desk-scale runs; training takes milliseconds and every distribution is
  a pure function of the accumulated counts.
* :class:`ScriptedBackend` replays a fixed table of distributions, which is
  what the decoding and synthesis test suites are built on.
* :class:`RemoteBackend` speaks the JSON-over-HTTP wire protocol to an
  external inference service.

Tokens are whitespace-level words.  Ties everywhere break toward the lowest
vocabulary index.
"""

from __future__ import annotations

import hashlib
import time
from abc import ABC, abstractmethod
from collections import Counter
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
import requests

__all__ = [
    "BOS",
    "EOS",
    "UNK",
    "Vocabulary",
    "TokenDistribution",
    "SamplingParams",
    "TrainConfig",
    "BackendError",
    "BackendStateError",
    "TransportError",
    "Backend",
    "TrigramBackend",
    "ScriptedBackend",
    "RemoteBackend",
    "apply_temperature_topk",
    "sample_sequence",
    "greedy_until",
    "sequence_log_prob",
    "LOG_ZERO",
]

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"

# Sentinel for log(0); comparisons and sums stay well defined.
LOG_ZERO = float("-inf")

_SUM_TOL = 1e-9


class BackendError(RuntimeError):
    """Base class for backend failures."""


class BackendStateError(BackendError):
    """Operation requires a trained (or scripted) backend."""


class TransportError(BackendError):
    """Remote backend request failed."""

    def __init__(self, message: str, job_id: str | None = None):
        super().__init__(message)
        self.job_id = job_id


class Vocabulary:
    """Ordered set of distinct tokens with a token <-> index bijection."""

    def __init__(self, tokens: Sequence[str]):
        tokens = tuple(tokens)
        if len(set(tokens)) != len(tokens):
            raise ValueError("vocabulary tokens must be distinct")
        if BOS not in tokens or EOS not in tokens:
            raise ValueError("vocabulary must include the reserved BOS/EOS markers")
        if len(tokens) < 2:
            raise ValueError("vocabulary needs at least 2 tokens")
        self._tokens = tokens
        self._index = {t: i for i, t in enumerate(tokens)}

    @classmethod
    def from_tokens(cls, tokens, reserved: Sequence[str] = (BOS, EOS, UNK)) -> "Vocabulary":
        """Reserved markers first, then the remaining tokens sorted."""
        rest = sorted(set(tokens) - set(reserved))
        return cls(tuple(reserved) + tuple(rest))

    @property
    def tokens(self) -> tuple[str, ...]:
        return self._tokens

    def index(self, token: str) -> int:
        return self._index[token]

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def __len__(self) -> int:
        return len(self._tokens)

    def __iter__(self):
        return iter(self._tokens)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self._tokens == other._tokens


@dataclass(frozen=True)
class TokenDistribution:
    """Probability vector over a vocabulary for one decoding step."""

    vocab: Vocabulary
    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.shape != (len(self.vocab),):
            raise ValueError("probability vector length must match vocabulary size")
        if np.any(probs < 0):
            raise ValueError("probabilities must be non-negative")
        if abs(float(probs.sum()) - 1.0) > _SUM_TOL:
            raise ValueError(f"probabilities must sum to 1 within {_SUM_TOL}")
        probs.flags.writeable = False
        object.__setattr__(self, "probs", probs)

    def prob(self, token: str) -> float:
        if token not in self.vocab:
            return 0.0
        return float(self.probs[self.vocab.index(token)])

    def argmax_token(self) -> str:
        # np.argmax returns the first maximum, i.e. the lowest index on ties.
        return self.vocab.tokens[int(np.argmax(self.probs))]

    def top_tokens(self, k: int) -> list[tuple[str, float]]:
        """Up to ``k`` highest-probability tokens with nonzero mass.

        Ordered by descending probability, ties by ascending vocabulary index.
        """
        order = np.lexsort((np.arange(len(self.probs)), -self.probs))
        out: list[tuple[str, float]] = []
        for idx in order[: max(k, 0)]:
            p = float(self.probs[idx])
            if p <= 0.0:
                break
            out.append((self.vocab.tokens[int(idx)], p))
        return out

    def masked(self, allowed: set[str]) -> "TokenDistribution":
        """Zero all tokens outside ``allowed`` and renormalize.

        If no allowed token carries mass, falls back to uniform over the
        allowed tokens present in the vocabulary.
        """
        keep = [self.vocab.index(t) for t in allowed if t in self.vocab]
        if not keep:
            raise ValueError("no allowed token exists in the vocabulary")
        probs = np.zeros_like(self.probs)
        probs[keep] = self.probs[keep]
        total = probs.sum()
        if total <= 0.0:
            probs[keep] = 1.0 / len(keep)
        else:
            probs /= total
        return TokenDistribution(self.vocab, probs)


@dataclass(frozen=True)
class SamplingParams:
    """Temperature / top-k sampling controls; defaults match production tuning."""

    temperature: float = 1.0
    top_k: int = 50
    max_len: int = 128

    def __post_init__(self) -> None:
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.top_k < 1:
            raise ValueError("top_k must be at least 1")
        if self.max_len < 1:
            raise ValueError("max_len must be at least 1")


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters, forwarded opaquely to remote backends.

    The trigram backend uses only ``epochs`` (as a count multiplier).
    """

    epochs: int = 5
    learning_rate: float = 3e-5
    warmup_fraction: float = 0.2
    batch_size: int = 128
    dropout: float = 0.1

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.learning_rate <= 0 or self.batch_size < 1:
            raise ValueError("training hyperparameters must be positive")
        if not 0 <= self.warmup_fraction <= 1 or not 0 <= self.dropout < 1:
            raise ValueError("warmup_fraction and dropout must lie in [0, 1)")

    def to_payload(self) -> dict:
        return {
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "warmup_fraction": self.warmup_fraction,
            "batch_size": self.batch_size,
            "dropout": self.dropout,
        }


def apply_temperature_topk(
    dist: TokenDistribution | np.ndarray | Sequence[float],
    params: SamplingParams,
) -> TokenDistribution | np.ndarray:
    """Temperature softmax followed by top-k truncation and renormalization.

    Accepts either a :class:`TokenDistribution` (whose probabilities are taken
    to log space first, so temperature 1 with full top-k is the identity) or a
    raw logit vector, returning the same kind.
    """
    if isinstance(dist, TokenDistribution):
        with np.errstate(divide="ignore"):
            logits = np.log(dist.probs)
        probs = _softmax_topk(logits, params)
        return TokenDistribution(dist.vocab, probs)
    logits = np.asarray(dist, dtype=np.float64)
    return _softmax_topk(logits, params)


def _softmax_topk(logits: np.ndarray, params: SamplingParams) -> np.ndarray:
    scaled = logits / params.temperature
    scaled = scaled - np.max(scaled)  # stability shift; softmax is invariant
    probs = np.exp(scaled)
    probs /= probs.sum()
    k = min(params.top_k, len(probs))
    if k < len(probs):
        # Keep the k best, ties resolved toward lower indices.
        order = np.lexsort((np.arange(len(probs)), -probs))
        drop = order[k:]
        probs[drop] = 0.0
        probs /= probs.sum()
    return probs


class Backend(ABC):
    """Autoregressive next-token model over whitespace tokens."""

    @property
    @abstractmethod
    def vocab(self) -> Vocabulary: ...

    @abstractmethod
    def next_distribution(self, prefix: Sequence[str]) -> TokenDistribution:
        """Distribution over the next token given the prefix."""

    @abstractmethod
    def train(self, corpus: Sequence[str], config: TrainConfig | None = None) -> None:
        """Fit (or keep fine-tuning) the backend on whitespace-tokenized texts."""

    def state_hash(self) -> str:
        raise NotImplementedError(f"{type(self).__name__} does not expose a state hash")

    def generate(
        self,
        prefix: Sequence[str],
        mode: str = "greedy",
        params: SamplingParams | None = None,
        stop: Sequence[str] | None = None,
        seed: int = 0,
    ) -> list[str]:
        """Decode a continuation; the default implementation loops locally.

        Generation stops after the stop subsequence (kept in the output),
        on EOS (dropped from the output), or at ``params.max_len`` tokens.
        """
        params = params or SamplingParams()
        if mode not in ("greedy", "sample"):
            raise ValueError(f"unknown generation mode {mode!r}")
        stop = tuple(stop) if stop else ()
        rng = np.random.default_rng(seed) if mode == "sample" else None
        out: list[str] = []
        while len(out) < params.max_len:
            dist = self.next_distribution(tuple(prefix) + tuple(out))
            if mode == "greedy":
                token = dist.argmax_token()
            else:
                shaped = apply_temperature_topk(dist, params)
                p = np.asarray(shaped.probs, dtype=np.float64)
                p = p / p.sum()
                token = shaped.vocab.tokens[int(rng.choice(len(p), p=p))]
            if token == EOS:
                break
            out.append(token)
            if stop and len(out) >= len(stop) and tuple(out[-len(stop):]) == stop:
                break
        return out


def sample_sequence(
    backend: Backend,
    prefix: Sequence[str],
    params: SamplingParams,
    stop: Sequence[str] | None = None,
    rng_seed: int = 0,
) -> list[str]:
    """Seeded temperature/top-k sampling until stop, EOS, or max_len."""
    return backend.generate(prefix, mode="sample", params=params, stop=stop, seed=rng_seed)


def greedy_until(
    backend: Backend,
    prefix: Sequence[str],
    stop: Sequence[str] | None = None,
    max_len: int = 128,
) -> list[str]:
    """Greedy decoding (argmax, ties to the lowest vocabulary index)."""
    return backend.generate(
        prefix, mode="greedy", params=SamplingParams(max_len=max_len), stop=stop
    )


def sequence_log_prob(
    backend: Backend, prefix: Sequence[str], continuation: Sequence[str]
) -> float:
    """Sum of per-step log probabilities of ``continuation`` after ``prefix``.

    Any zero-probability step makes the result ``LOG_ZERO``.
    """
    total = 0.0
    context = list(prefix)
    for token in continuation:
        p = backend.next_distribution(context).prob(token)
        if p <= 0.0:
            return LOG_ZERO
        total += float(np.log(p))
        context.append(token)
    return total


class TrigramBackend(Backend):
    """Add-k smoothed trigram over whitespace tokens.

    Sequences are padded with two BOS tokens and one EOS token.  Repeated
    ``train`` calls accumulate counts, which models sequential fine-tuning
    stages.  Unknown query tokens map to UNK so decoding over novel text
    never aborts; reserved markers appearing inside training text are
    ordinary tokens.
    """

    def __init__(self, k: float = 0.1):
        if k <= 0:
            raise ValueError("smoothing constant k must be positive")
        self.k = k
        self._counts: dict[tuple[str, str], Counter] = {}
        self._vocab: Vocabulary | None = None
        self._dist_cache: dict[tuple[str, str], TokenDistribution] = {}

    @property
    def vocab(self) -> Vocabulary:
        if self._vocab is None:
            raise BackendStateError("trigram backend is untrained")
        return self._vocab

    @property
    def trained(self) -> bool:
        return self._vocab is not None

    def train(self, corpus: Sequence[str], config: TrainConfig | None = None) -> None:
        if not corpus:
            raise ValueError("training corpus must be non-empty")
        weight = config.epochs if config is not None else 1
        tokens_seen: set[str] = set()
        for text in corpus:
            toks = text.split()
            tokens_seen.update(toks)
            padded = [BOS, BOS] + toks + [EOS]
            for i in range(len(padded) - 2):
                ctx = (padded[i], padded[i + 1])
                self._counts.setdefault(ctx, Counter())[padded[i + 2]] += weight
        existing = set(self._vocab.tokens) if self._vocab else set()
        self._vocab = Vocabulary.from_tokens(existing | tokens_seen)
        self._dist_cache.clear()

    def _map(self, token: str) -> str:
        return token if token in self.vocab else UNK

    def next_distribution(self, prefix: Sequence[str]) -> TokenDistribution:
        if self._vocab is None:
            raise BackendStateError("trigram backend is untrained")
        padded = [BOS, BOS] + [self._map(t) for t in prefix]
        ctx = (padded[-2], padded[-1])
        cached = self._dist_cache.get(ctx)
        if cached is not None:
            return cached
        probs = np.full(len(self._vocab), self.k, dtype=np.float64)
        for token, count in self._counts.get(ctx, {}).items():
            probs[self._vocab.index(token)] += count
        probs /= probs.sum()
        dist = TokenDistribution(self._vocab, probs)
        self._dist_cache[ctx] = dist
        return dist

    def state_hash(self) -> str:
        h = hashlib.blake2b(digest_size=16)
        h.update(repr(self.k).encode())
        for ctx in sorted(self._counts):
            for token, count in sorted(self._counts[ctx].items()):
                h.update(f"{ctx[0]}\x1f{ctx[1]}\x1f{token}\x1f{count}\x1e".encode())
        return h.hexdigest()


class ScriptedBackend(Backend):
    """Replays a fixed table mapping prefixes to next-token distributions.

    ``table`` is either a mapping from prefix tuples to ``{token: prob}``
    dicts or a callable with that signature; either way it must be
    deterministic, since distributions are cached per prefix.  Prefixes
    without an entry fall back to ``default`` (point mass on EOS if omitted),
    so every generation terminates.  ``train`` records its calls and changes
    nothing, which makes the class double as a probe for pipeline
    orchestration tests.
    """

    def __init__(
        self,
        tokens: Sequence[str] | Vocabulary,
        table: Mapping[tuple[str, ...], Mapping[str, float]]
        | Callable[[tuple[str, ...]], Mapping[str, float] | None],
        default: Mapping[str, float] | None = None,
    ):
        self._vocab = tokens if isinstance(tokens, Vocabulary) else Vocabulary.from_tokens(tokens)
        self._table = table
        self._default = dict(default) if default is not None else {EOS: 1.0}
        self._dist_cache: dict[tuple[str, ...], TokenDistribution] = {}
        self.train_calls: list[tuple[tuple[str, ...], TrainConfig | None]] = []

    @property
    def vocab(self) -> Vocabulary:
        return self._vocab

    def _lookup(self, prefix: tuple[str, ...]) -> Mapping[str, float]:
        if callable(self._table):
            entry = self._table(prefix)
        else:
            entry = self._table.get(prefix)
        return entry if entry is not None else self._default

    def next_distribution(self, prefix: Sequence[str]) -> TokenDistribution:
        key = tuple(prefix)
        cached = self._dist_cache.get(key)
        if cached is not None:
            return cached
        entry = self._lookup(key)
        probs = np.zeros(len(self._vocab), dtype=np.float64)
        for token, p in entry.items():
            if token not in self._vocab:
                raise BackendError(f"scripted token {token!r} missing from vocabulary")
            probs[self._vocab.index(token)] += float(p)
        total = probs.sum()
        if total <= 0:
            raise BackendError(f"scripted distribution for {key!r} has no mass")
        probs /= total
        dist = TokenDistribution(self._vocab, probs)
        self._dist_cache[key] = dist
        return dist

    def train(self, corpus: Sequence[str], config: TrainConfig | None = None) -> None:
        self.train_calls.append((tuple(corpus), config))

    def state_hash(self) -> str:
        h = hashlib.blake2b(digest_size=16)
        h.update(str(len(self.train_calls)).encode())
        return h.hexdigest()


class RemoteBackend(Backend):
    """Client for the JSON-over-HTTP backend protocol.

    One instance targets one model slot ("generator" or "extractor") on the
    server.  Training blocks while polling the job status endpoint; the
    cached vocabulary is refreshed after every completed job because training
    may introduce new word-level tokens.
    """

    def __init__(
        self,
        base_url: str,
        model: str = "generator",
        timeout: float = 60.0,
        poll_interval: float = 0.2,
        session: requests.Session | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.timeout = timeout
        self.poll_interval = poll_interval
        self._session = session or requests.Session()
        self._vocab: Vocabulary | None = None

    def _post(self, path: str, payload: dict) -> dict:
        try:
            resp = self._session.post(
                f"{self.base_url}{path}", json=payload, timeout=self.timeout
            )
        except requests.RequestException as e:
            raise TransportError(f"POST {path} failed: {e}") from e
        if resp.status_code != 200:
            raise TransportError(f"POST {path} returned {resp.status_code}: {resp.text}")
        return resp.json()

    def _get(self, path: str, params: dict | None = None) -> dict:
        try:
            resp = self._session.get(
                f"{self.base_url}{path}", params=params, timeout=self.timeout
            )
        except requests.RequestException as e:
            raise TransportError(f"GET {path} failed: {e}") from e
        if resp.status_code != 200:
            raise TransportError(f"GET {path} returned {resp.status_code}: {resp.text}")
        return resp.json()

    @property
    def vocab(self) -> Vocabulary:
        if self._vocab is None:
            data = self._get("/v1/vocab", params={"model": self.model})
            self._vocab = Vocabulary(tuple(data["tokens"]))
        return self._vocab

    def refresh_vocab(self) -> None:
        self._vocab = None

    def next_distribution(self, prefix: Sequence[str]) -> TokenDistribution:
        data = self._post(
            "/v1/distribution", {"model": self.model, "prefix": list(prefix)}
        )
        probs_by_token = data["probs"]
        if any(t not in self.vocab for t in probs_by_token):
            self.refresh_vocab()
        probs = np.zeros(len(self.vocab), dtype=np.float64)
        for token, p in probs_by_token.items():
            probs[self.vocab.index(token)] = float(p)
        total = probs.sum()
        if total <= 0:
            raise TransportError("remote distribution carries no probability mass")
        probs /= total
        return TokenDistribution(self.vocab, probs)

    def generate(
        self,
        prefix: Sequence[str],
        mode: str = "greedy",
        params: SamplingParams | None = None,
        stop: Sequence[str] | None = None,
        seed: int = 0,
    ) -> list[str]:
        params = params or SamplingParams()
        data = self._post(
            "/v1/generate",
            {
                "model": self.model,
                "prefix": list(prefix),
                "mode": mode,
                "temperature": params.temperature,
                "top_k": params.top_k,
                "max_len": params.max_len,
                "stop": list(stop) if stop else [],
                "seed": seed,
            },
        )
        return list(data["tokens"])

    def train(self, corpus: Sequence[str], config: TrainConfig | None = None) -> None:
        if not corpus:
            raise ValueError("training corpus must be non-empty")
        config = config or TrainConfig()
        data = self._post(
            "/v1/train",
            {"model": self.model, "sequences": list(corpus), "config": config.to_payload()},
        )
        job_id = str(data["job_id"])
        while True:
            status = self._get(f"/v1/train/{job_id}")["status"]
            if status == "done":
                break
            if status == "failed":
                raise TransportError(f"remote training job {job_id} failed", job_id=job_id)
            time.sleep(self.poll_interval)
        self.refresh_vocab()
