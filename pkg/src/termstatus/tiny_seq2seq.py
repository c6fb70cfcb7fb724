"""A small trainable seq2seq adapter for offline runs and smoke tests.

Word-level GRU encoder-decoder with dot-product attention over encoder
states, trained with teacher forcing under a decoupled-weight-decay
optimizer and linear warmup. It exists so the whole pipeline (prepare ->
train -> predict -> evaluate) runs end to end on a CPU in minutes; swap in
a real pretrained encoder-decoder through the same adapter surface for
actual experiments.

Requires torch (``pip install termstatus[tiny]``).
"""

from __future__ import annotations

import re
from pathlib import Path
from typing import Sequence

import torch
from torch import nn

from .backend import GenerationRequest, Hyperparams, TrainingError
from .samples import Sample

_TOKEN_RE = re.compile(r"\[SOS\]|\[SEP\]|\w+|[^\w\s]")

PAD, UNK, BOS, EOS = 0, 1, 2, 3
_SPECIALS = ("<pad>", "<unk>", "<bos>", "<eos>")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text)


class _Seq2Seq(nn.Module):
    def __init__(self, vocab_size: int, embed_dim: int, hidden_dim: int):
        super().__init__()
        self.embed = nn.Embedding(vocab_size, embed_dim, padding_idx=PAD)
        self.encoder = nn.GRU(embed_dim, hidden_dim, batch_first=True)
        self.decoder = nn.GRU(embed_dim, hidden_dim, batch_first=True)
        self.out = nn.Linear(hidden_dim * 2, vocab_size)

    def encode(self, src: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        enc_out, enc_h = self.encoder(self.embed(src))
        return enc_out, enc_h

    def decode(
        self,
        tgt_in: torch.Tensor,
        enc_out: torch.Tensor,
        enc_h: torch.Tensor,
        src_mask: torch.Tensor,
    ) -> tuple[torch.Tensor, torch.Tensor]:
        dec_out, dec_h = self.decoder(self.embed(tgt_in), enc_h)
        scores = torch.bmm(dec_out, enc_out.transpose(1, 2))
        scores = scores.masked_fill(~src_mask.unsqueeze(1), float("-inf"))
        context = torch.bmm(torch.softmax(scores, dim=-1), enc_out)
        logits = self.out(torch.cat([dec_out, context], dim=-1))
        return logits, dec_h


class TinySeq2Seq:
    """Trainable adapter satisfying the generation and training contracts."""

    def __init__(self, embed_dim: int = 64, hidden_dim: int = 96, max_input_tokens: int = 256, seed: int = 0):
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        self.max_input_tokens = max_input_tokens
        self.seed = seed
        self._vocab: dict[str, int] = {}
        self._words: list[str] = []
        self._model: _Seq2Seq | None = None
        self._optimizer = None
        self._scheduler = None

    # -- vocabulary ---------------------------------------------------------

    def fit(self, samples: Sequence[Sample]) -> "TinySeq2Seq":
        """Build the vocabulary from training samples and initialize weights."""
        words: set[str] = set()
        for sample in samples:
            words.update(tokenize(sample.input_text))
            words.update(tokenize(sample.target_text))
        self._words = list(_SPECIALS) + sorted(words)
        self._vocab = {w: i for i, w in enumerate(self._words)}
        torch.manual_seed(self.seed)
        self._model = _Seq2Seq(len(self._words), self.embed_dim, self.hidden_dim)
        return self

    def _ids(self, text: str, truncate: bool = True) -> list[int]:
        tokens = tokenize(text)
        if truncate and len(tokens) > self.max_input_tokens:
            # Keep the tail: the task prompt rides at the end of the input.
            tokens = tokens[-self.max_input_tokens:]
        return [self._vocab.get(t, UNK) for t in tokens]

    def _pad(self, rows: list[list[int]]) -> torch.Tensor:
        width = max(len(r) for r in rows)
        return torch.tensor([r + [PAD] * (width - len(r)) for r in rows], dtype=torch.long)

    # -- training -----------------------------------------------------------

    def prepare_training(self, hp: Hyperparams) -> None:
        if self._model is None:
            raise TrainingError("adapter is not fitted; call fit(samples) first")
        self._optimizer = torch.optim.AdamW(
            self._model.parameters(), lr=hp.learning_rate, weight_decay=hp.weight_decay)
        warmup = max(1, hp.warmup_steps)
        self._scheduler = torch.optim.lr_scheduler.LambdaLR(
            self._optimizer, lambda step: min(1.0, (step + 1) / warmup))

    def train_step(self, batch: Sequence[Sample]) -> float:
        if self._model is None or self._optimizer is None:
            raise TrainingError("prepare_training was not called")
        self._model.train()
        src = self._pad([self._ids(s.input_text) for s in batch])
        tgt = [self._ids(s.target_text, truncate=False) for s in batch]
        tgt_in = self._pad([[BOS] + t for t in tgt])
        labels = self._pad([t + [EOS] for t in tgt])

        enc_out, enc_h = self._model.encode(src)
        logits, _ = self._model.decode(tgt_in, enc_out, enc_h, src != PAD)
        loss = nn.functional.cross_entropy(
            logits.reshape(-1, logits.size(-1)), labels.reshape(-1), ignore_index=PAD)

        self._optimizer.zero_grad()
        loss.backward()
        nn.utils.clip_grad_norm_(self._model.parameters(), 1.0)
        self._optimizer.step()
        self._scheduler.step()
        return float(loss.item())

    # -- inference ----------------------------------------------------------

    def generate(self, request: GenerationRequest) -> str:
        if self._model is None:
            raise TrainingError("adapter is not fitted")
        self._model.eval()
        with torch.no_grad():
            src = self._pad([self._ids(request.input_text)])
            mask = src != PAD
            enc_out, hidden = self._model.encode(src)
            token = torch.tensor([[BOS]], dtype=torch.long)
            words: list[str] = []
            for _ in range(request.max_new_tokens):
                logits, hidden = self._model.decode(token, enc_out, hidden, mask)
                next_id = int(logits[0, -1].argmax().item())
                if next_id == EOS:
                    break
                words.append(self._words[next_id] if next_id < len(self._words) else "<unk>")
                token = torch.tensor([[next_id]], dtype=torch.long)
        return " ".join(words)

    # -- persistence --------------------------------------------------------

    def save(self, path: str | Path) -> None:
        if self._model is None:
            raise TrainingError("nothing to save; adapter is not fitted")
        torch.save({
            "state": self._model.state_dict(),
            "words": self._words,
            "embed_dim": self.embed_dim,
            "hidden_dim": self.hidden_dim,
            "max_input_tokens": self.max_input_tokens,
            "seed": self.seed,
        }, path)

    def load(self, path: str | Path) -> None:
        payload = torch.load(path, map_location="cpu", weights_only=True)
        self.embed_dim = payload["embed_dim"]
        self.hidden_dim = payload["hidden_dim"]
        self.max_input_tokens = payload["max_input_tokens"]
        self.seed = payload["seed"]
        self._words = list(payload["words"])
        self._vocab = {w: i for i, w in enumerate(self._words)}
        self._model = _Seq2Seq(len(self._words), self.embed_dim, self.hidden_dim)
        self._model.load_state_dict(payload["state"])
