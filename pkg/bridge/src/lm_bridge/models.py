"""Model slots: tokenizer, transformer, fine-tuning, and word-level decoding.

Each slot wraps one transformer (causal for the generator role, seq2seq for
the extractor role) behind a word-level token interface.  The subword
tokenizer is a byte-level BPE trained in-service on the first training
request, so later requests can always encode novel words; pretrained
checkpoints are not required (and are unavailable in offline deployments),
the architectures are constructed fresh and all learning happens through
the train endpoint.

Word-level next-token distributions are computed from the next-subword
distribution: by default each word is scored by the probability of its first
subword piece (first-subword approximation), optionally by the product over
all its pieces (exact mode, batched teacher forcing).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np
import torch
from tokenizers import Tokenizer
from tokenizers.decoders import ByteLevel as ByteLevelDecoder
from tokenizers.models import BPE
from tokenizers.pre_tokenizers import ByteLevel
from tokenizers.trainers import BpeTrainer
from transformers import (
    BartConfig,
    BartForConditionalGeneration,
    GPT2Config,
    GPT2LMHeadModel,
)

PAD, BOS, EOS, UNK = "<pad>", "<s>", "</s>", "<unk>"
SPECIALS = (PAD, BOS, EOS, UNK)

HEAD_MARKER_WORDS = ("Head", "Entity:")


@dataclass(frozen=True)
class SlotConfig:
    role: str  # "generator" | "extractor"
    d_model: int = 128
    layers: int = 2
    heads: int = 4
    ffn: int = 256
    max_positions: int = 512
    bpe_vocab_size: int = 800
    distribution_mode: str = "first_subword"  # or "exact"
    device: str = "cpu"
    seed: int = 0


@dataclass(frozen=True)
class TrainSettings:
    epochs: int = 5
    learning_rate: float = 3e-5
    warmup_fraction: float = 0.2
    batch_size: int = 128
    dropout: float = 0.1
    validation_fraction: float = 0.1

    @classmethod
    def from_payload(cls, payload: dict) -> "TrainSettings":
        known = {k: payload[k] for k in
                 ("epochs", "learning_rate", "warmup_fraction", "batch_size", "dropout")
                 if k in payload}
        return cls(**known)


class ModelSlot:
    """One servable model with its tokenizer and word-level view."""

    def __init__(self, config: SlotConfig):
        self.config = config
        self.tokenizer: Tokenizer | None = None
        self.model = None
        self.words: list[str] = list(SPECIALS[1:])  # word vocab: <s> </s> <unk> first
        self._word_pieces: dict[str, list[int]] = {}
        self._boundary_cache: np.ndarray | None = None
        self.lock = threading.RLock()  # serializes forwards; training holds it per batch
        self.training = threading.Event()

    # ---------------------------------------------------------------- setup

    def _train_tokenizer(self, sequences: list[str]) -> None:
        tokenizer = Tokenizer(BPE(unk_token=None))
        tokenizer.pre_tokenizer = ByteLevel(add_prefix_space=False)
        tokenizer.decoder = ByteLevelDecoder()
        trainer = BpeTrainer(
            vocab_size=self.config.bpe_vocab_size,
            min_frequency=1,
            special_tokens=list(SPECIALS),
            show_progress=False,
        )
        tokenizer.train_from_iterator(sequences, trainer=trainer)
        self.tokenizer = tokenizer

    def _build_model(self, dropout: float) -> None:
        vocab_size = self.tokenizer.get_vocab_size()
        torch.manual_seed(self.config.seed)
        if self.config.role == "generator":
            cfg = GPT2Config(
                vocab_size=vocab_size,
                n_positions=self.config.max_positions,
                n_embd=self.config.d_model,
                n_layer=self.config.layers,
                n_head=self.config.heads,
                n_inner=self.config.ffn,
                resid_pdrop=dropout,
                embd_pdrop=dropout,
                attn_pdrop=dropout,
                bos_token_id=self._id(BOS),
                eos_token_id=self._id(EOS),
            )
            self.model = GPT2LMHeadModel(cfg)
        else:
            cfg = BartConfig(
                vocab_size=vocab_size,
                max_position_embeddings=self.config.max_positions,
                d_model=self.config.d_model,
                encoder_layers=self.config.layers,
                decoder_layers=self.config.layers,
                encoder_attention_heads=self.config.heads,
                decoder_attention_heads=self.config.heads,
                encoder_ffn_dim=self.config.ffn,
                decoder_ffn_dim=self.config.ffn,
                dropout=dropout,
                pad_token_id=self._id(PAD),
                bos_token_id=self._id(BOS),
                eos_token_id=self._id(EOS),
                decoder_start_token_id=self._id(BOS),
                forced_eos_token_id=None,
            )
            self.model = BartForConditionalGeneration(cfg)
        self.model.to(self.config.device)
        self.model.eval()

    def _id(self, token: str) -> int:
        return self.tokenizer.token_to_id(token)

    @property
    def ready(self) -> bool:
        return self.model is not None

    # ------------------------------------------------------------ word view

    def _register_words(self, sequences: list[str]) -> None:
        known = set(self.words)
        fresh = sorted({w for text in sequences for w in text.split()} - known)
        if fresh:
            self.words = list(SPECIALS[1:]) + sorted(
                set(self.words[len(SPECIALS) - 1:]) | set(fresh)
            )
            self._word_pieces.clear()

    def pieces_of(self, word: str) -> list[int]:
        """Subword ids of a word in continuation position (space-prefixed)."""
        cached = self._word_pieces.get(word)
        if cached is None:
            cached = self.tokenizer.encode(" " + word).ids
            self._word_pieces[word] = cached
        return cached

    def encode_words(self, words: list[str]) -> list[int]:
        if not words:
            return []
        return self.encode_text(" ".join(words))

    def encode_text(self, text: str) -> list[int]:
        # Always encode with a leading space so every word's pieces match the
        # space-prefixed forms used by pieces_of(), including segment starts.
        return self.tokenizer.encode(" " + text).ids

    # ------------------------------------------------------------- training

    def fit(self, sequences: list[str], settings: TrainSettings) -> None:
        """Fine-tune on the given texts (building tokenizer/model on first call)."""
        if not sequences:
            raise ValueError("training requires at least one sequence")
        if self.tokenizer is None:
            self._train_tokenizer(sequences)
        if self.model is None:
            self._build_model(settings.dropout)
        self._register_words(sequences)

        if len(sequences) >= 10 and settings.validation_fraction > 0:
            n_val = max(1, int(len(sequences) * settings.validation_fraction))
            train_seqs, val_seqs = sequences[:-n_val], sequences[-n_val:]
        else:
            train_seqs, val_seqs = list(sequences), []

        batches = self._make_batches(train_seqs, settings.batch_size)
        total_steps = max(1, len(batches) * settings.epochs)
        warmup = max(1, int(total_steps * settings.warmup_fraction))
        optimizer = torch.optim.AdamW(self.model.parameters(), lr=settings.learning_rate)

        def lr_lambda(step: int) -> float:
            if step < warmup:
                return (step + 1) / warmup
            return max(0.05, 1.0 - (step - warmup) / max(1, total_steps - warmup))

        scheduler = torch.optim.lr_scheduler.LambdaLR(optimizer, lr_lambda)
        torch.manual_seed(self.config.seed + len(sequences))

        best_val = float("inf")
        step = 0
        for _ in range(settings.epochs):
            self.model.train()
            for batch in batches:
                with self.lock:
                    loss = self._loss(batch)
                    optimizer.zero_grad()
                    loss.backward()
                    optimizer.step()
                scheduler.step()
                step += 1
            if val_seqs:
                val_loss = self._evaluate(val_seqs, settings.batch_size)
                if val_loss >= best_val:  # early stop once validation degrades
                    break
                best_val = val_loss
        self.model.eval()

    def _make_batches(self, sequences: list[str], batch_size: int) -> list[list[str]]:
        return [sequences[i: i + batch_size] for i in range(0, len(sequences), batch_size)]

    def _pad(self, rows: list[list[int]]) -> tuple[torch.Tensor, torch.Tensor]:
        width = max(len(r) for r in rows)
        pad_id = self._id(PAD)
        ids = torch.full((len(rows), width), pad_id, dtype=torch.long)
        mask = torch.zeros((len(rows), width), dtype=torch.long)
        for i, row in enumerate(rows):
            ids[i, : len(row)] = torch.tensor(row, dtype=torch.long)
            mask[i, : len(row)] = 1
        return ids.to(self.config.device), mask.to(self.config.device)

    def _loss(self, batch: list[str]) -> torch.Tensor:
        if self.config.role == "generator":
            rows = [
                [self._id(BOS)] + self.encode_text(text) + [self._id(EOS)]
                for text in batch
            ]
            ids, mask = self._pad(rows)
            labels = ids.masked_fill(mask == 0, -100)
            return self.model(input_ids=ids, attention_mask=mask, labels=labels).loss
        sources, targets = zip(*(self._split_extractor(text) for text in batch))
        src_ids, src_mask = self._pad([self.encode_text(s) for s in sources])
        tgt_rows = [self.encode_text(t) + [self._id(EOS)] for t in targets]
        tgt_ids, tgt_mask = self._pad(tgt_rows)
        labels = tgt_ids.masked_fill(tgt_mask == 0, -100)
        return self.model(input_ids=src_ids, attention_mask=src_mask, labels=labels).loss

    def _evaluate(self, sequences: list[str], batch_size: int) -> float:
        self.model.eval()
        losses = []
        with torch.no_grad():
            for batch in self._make_batches(sequences, batch_size):
                with self.lock:
                    losses.append(float(self._loss(batch)))
        self.model.train()
        return float(np.mean(losses))

    @staticmethod
    def _split_extractor(text: str) -> tuple[str, str]:
        """Split a full training sequence at the wire template's target start."""
        words = text.split()
        for i in range(len(words) - 1):
            if (words[i], words[i + 1]) == HEAD_MARKER_WORDS:
                return " ".join(words[:i]), " ".join(words[i:])
        return text, text  # degenerate rows learn to echo

    # ------------------------------------------------------------- serving

    def _next_subword_probs(self, prefix_words: list[str]) -> np.ndarray:
        if self.config.role == "generator":
            ids = [self._id(BOS)] + self.encode_words(prefix_words)
            ids = ids[-self.config.max_positions:]
            with self.lock, torch.no_grad():
                logits = self.model(input_ids=torch.tensor([ids], device=self.config.device)).logits
            return torch.softmax(logits[0, -1].double(), dim=-1).cpu().numpy()
        src_words, dec_words = self._split_prefix(prefix_words)
        src_ids = self.encode_words(src_words) or [self._id(BOS)]
        dec_ids = [self._id(BOS)] + self.encode_words(dec_words)
        with self.lock, torch.no_grad():
            logits = self.model(
                input_ids=torch.tensor([src_ids[-self.config.max_positions:]], device=self.config.device),
                decoder_input_ids=torch.tensor([dec_ids[-self.config.max_positions:]], device=self.config.device),
            ).logits
        return torch.softmax(logits[0, -1].double(), dim=-1).cpu().numpy()

    @staticmethod
    def _split_prefix(prefix_words: list[str]) -> tuple[list[str], list[str]]:
        for i in range(len(prefix_words) - 1):
            if (prefix_words[i], prefix_words[i + 1]) == HEAD_MARKER_WORDS:
                return prefix_words[:i], prefix_words[i:]
        # A bare trailing "Head" is a partially decoded marker: it belongs to
        # the decoder segment (source sentences always end in an attached
        # period, so the sentence itself cannot end with this token).
        if prefix_words and prefix_words[-1] == HEAD_MARKER_WORDS[0]:
            return prefix_words[:-1], prefix_words[-1:]
        return prefix_words, []

    def word_distribution(self, prefix_words: list[str]) -> dict[str, float]:
        """Normalized next-word probabilities over the word vocabulary."""
        if not self.ready:
            raise RuntimeError("slot has not been trained yet")
        subword = self._next_subword_probs(prefix_words)
        probs = np.zeros(len(self.words), dtype=np.float64)
        if self.config.distribution_mode == "exact":
            probs = self._exact_word_probs(prefix_words, subword)
        else:
            for i, word in enumerate(self.words):
                if word == EOS:
                    probs[i] = subword[self._id(EOS)]
                elif word in (BOS, UNK):
                    probs[i] = 0.0
                else:
                    pieces = self.pieces_of(word)
                    probs[i] = subword[pieces[0]] if pieces else 0.0
        total = probs.sum()
        if total <= 0:
            probs[:] = 1.0 / len(probs)
        else:
            probs /= total
        return {w: float(p) for w, p in zip(self.words, probs) if p > 0.0}

    def _boundary_ids(self) -> np.ndarray:
        """Subword ids that can only start a new word (space-marked or EOS)."""
        if getattr(self, "_boundary_cache", None) is None:
            vocab = self.tokenizer.get_vocab()
            ids = [i for piece, i in vocab.items() if piece.startswith("Ġ")]
            ids.append(self._id(EOS))
            self._boundary_cache = np.array(sorted(set(ids)), dtype=np.int64)
        return self._boundary_cache

    def _exact_word_probs(self, prefix_words: list[str], first_step: np.ndarray) -> np.ndarray:
        """Exact next-word marginalization via batched teacher forcing.

        p(word) = product over the word's subword pieces times the mass of a
        word boundary (a space-marked piece or EOS) right after the last
        piece; without the boundary factor a word would always outrank its
        own extensions ("alice" vs "alice,").
        """
        probs = np.zeros(len(self.words), dtype=np.float64)
        scored: list[tuple[int, list[int]]] = []
        for i, word in enumerate(self.words):
            if word == EOS:
                probs[i] = first_step[self._id(EOS)]
                continue
            if word in (BOS, UNK):
                continue
            pieces = self.pieces_of(word)
            if pieces:
                scored.append((i, pieces))
        if not scored:
            return probs
        if self.config.role == "generator":
            base = [self._id(BOS)] + self.encode_words(prefix_words)
            src_ids = None
        else:
            src_words, dec_words = self._split_prefix(prefix_words)
            src_ids = self.encode_words(src_words) or [self._id(BOS)]
            base = [self._id(BOS)] + self.encode_words(dec_words)
        rows = [base + pieces for _, pieces in scored]
        ids, mask = self._pad(rows)
        with self.lock, torch.no_grad():
            if src_ids is None:
                logits = self.model(input_ids=ids, attention_mask=mask).logits
            else:
                src_batch, src_mask = self._pad([src_ids] * len(rows))
                logits = self.model(
                    input_ids=src_batch, attention_mask=src_mask, decoder_input_ids=ids
                ).logits
        log_probs = torch.log_softmax(logits.double(), dim=-1).cpu().numpy()
        base_len = len(base)
        boundary = self._boundary_ids()
        for row, (i, pieces) in enumerate(scored):
            total = np.log(max(first_step[pieces[0]], 1e-300))
            for k, piece in enumerate(pieces[1:], start=1):
                total += log_probs[row, base_len + k - 1, piece]
            after_last = np.exp(log_probs[row, base_len + len(pieces) - 1, boundary]).sum()
            total += np.log(max(after_last, 1e-300))
            probs[i] = float(np.exp(total))
        return probs

    def generate_words(
        self,
        prefix_words: list[str],
        mode: str,
        temperature: float,
        top_k: int,
        max_len: int,
        stop: list[str],
        seed: int,
    ) -> list[str]:
        """Word-level decoding loop mirroring the client-side semantics."""
        rng = np.random.default_rng(seed)
        out: list[str] = []
        stop = list(stop)
        while len(out) < max_len:
            dist = self.word_distribution(prefix_words + out)
            words = sorted(dist)
            p = np.array([dist[w] for w in words], dtype=np.float64)
            if mode == "greedy":
                word = words[int(np.argmax(p))]
            else:
                logits = np.log(np.maximum(p, 1e-300)) / max(temperature, 1e-9)
                shaped = np.exp(logits - logits.max())
                if top_k < len(shaped):
                    keep = np.lexsort((np.arange(len(shaped)), -shaped))[:top_k]
                    mask = np.zeros_like(shaped)
                    mask[keep] = shaped[keep]
                    shaped = mask
                shaped /= shaped.sum()
                word = words[int(rng.choice(len(shaped), p=shaped))]
            if word == EOS:
                break
            out.append(word)
            if stop and len(out) >= len(stop) and out[-len(stop):] == stop:
                break
        return out
