"""Toy frozen encoders and a toy frozen decoder LLM.

Everything here is a small fixed-seed float64 network so training tests run
in seconds on CPU.  All parameters are created with ``requires_grad=False``:
gradients still flow through them to whatever embeddings are spliced into
the decoder input, which is the only path training is allowed to use.
"""

from __future__ import annotations

import math

import numpy as np
import torch
from torch import nn

from .. import media
from ..errors import InputError
from ..types import Modality, ModalityInput
from .tokenizer import WordTokenizer

DTYPE = torch.float64


def _frozen(tensor: torch.Tensor) -> nn.Parameter:
    return nn.Parameter(tensor, requires_grad=False)


def _randn(shape: tuple[int, ...], seed: int, scale: float = 1.0) -> torch.Tensor:
    gen = torch.Generator().manual_seed(seed)
    return torch.randn(shape, generator=gen, dtype=DTYPE) * scale


def sinusoid_table(length: int, dim: int) -> torch.Tensor:
    pos = np.arange(length)[:, None]
    idx = np.arange(dim)[None, :]
    angle = pos / np.power(10000.0, (2 * (idx // 2)) / dim)
    table = np.where(idx % 2 == 0, np.sin(angle), np.cos(angle))
    return torch.from_numpy(table.astype(np.float64))


class ToyImageEncoder(nn.Module):
    """RGB resize + patch flatten + frozen random linear features."""

    modality = Modality.IMAGE

    def __init__(self, d_enc: int = 64, resolution: int = 16, patch: int = 4, seed: int = 0):
        super().__init__()
        if resolution % patch != 0:
            raise ValueError("resolution must be a multiple of patch size")
        self.d_enc = d_enc
        self.resolution = resolution
        self.patch = patch
        in_dim = patch * patch * 3
        self.weight = _frozen(_randn((in_dim, d_enc), seed, scale=1.0 / math.sqrt(in_dim)))
        # Per-patch positional rows keep features full-rank even for a
        # uniform image; without them a blank input collapses every row to
        # the same vector and the Q-Former head loses its capacity.
        count = (resolution // patch) ** 2
        self.pos = _frozen(_randn((count, d_enc), seed + 7))

    @property
    def feature_count(self) -> int:
        return (self.resolution // self.patch) ** 2

    def features(self, inp: ModalityInput) -> torch.Tensor:
        if inp.kind is not Modality.IMAGE:
            raise InputError(f"image encoder got {inp.kind.value} input")
        img = media.decode_image(inp).resize(
            (self.resolution, self.resolution), resample=media.BILINEAR
        )
        arr = np.asarray(img, dtype=np.float64) / 255.0 * 2.0 - 1.0
        n = self.resolution // self.patch
        patches = (
            arr.reshape(n, self.patch, n, self.patch, 3)
            .transpose(0, 2, 1, 3, 4)
            .reshape(n * n, -1)
        )
        return torch.from_numpy(patches) @ self.weight + self.pos


class ToyAudioEncoder(nn.Module):
    """Mono 16 kHz resample + log-mel frames + frozen random linear features."""

    modality = Modality.AUDIO

    SAMPLE_RATE = 16000
    FRAME_LEN = 400
    HOP = 160
    N_FFT = 512

    def __init__(self, d_enc: int = 64, n_mels: int = 16, n_frames: int = 16, seed: int = 1):
        super().__init__()
        self.d_enc = d_enc
        self.n_mels = n_mels
        self.n_frames = n_frames
        self.weight = _frozen(_randn((n_mels, d_enc), seed, scale=1.0 / math.sqrt(n_mels)))
        # Same full-rank guarantee as the image encoder: a stationary tone
        # yields identical frames, so stamp each pooled frame with position.
        self.pos = _frozen(_randn((n_frames, d_enc), seed + 7))
        bank = _mel_filterbank(self.N_FFT, self.SAMPLE_RATE, n_mels)
        self.register_buffer("mel_bank", torch.from_numpy(bank))

    @property
    def feature_count(self) -> int:
        return self.n_frames

    def features(self, inp: ModalityInput) -> torch.Tensor:
        if inp.kind is not Modality.AUDIO:
            raise InputError(f"audio encoder got {inp.kind.value} input")
        rate, samples = media.decode_audio(inp)
        samples = _resample(samples, rate, self.SAMPLE_RATE)
        frames = _frame(samples, self.FRAME_LEN, self.HOP)
        window = np.hanning(self.FRAME_LEN)
        spectrum = np.abs(np.fft.rfft(frames * window, n=self.N_FFT, axis=1)) ** 2
        mel = np.log10(spectrum @ self.mel_bank.numpy().T + 1e-10)
        pooled = np.stack([c.mean(axis=0) for c in np.array_split(mel, self.n_frames)])
        return torch.from_numpy(pooled) @ self.weight + self.pos


def _resample(samples: np.ndarray, rate: int, target: int) -> np.ndarray:
    if rate == target:
        return samples
    length = max(1, int(round(len(samples) * target / rate)))
    old_t = np.arange(len(samples)) / rate
    new_t = np.arange(length) / target
    return np.interp(new_t, old_t, samples)


def _frame(samples: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    if len(samples) < frame_len:
        samples = np.pad(samples, (0, frame_len - len(samples)))
    count = 1 + (len(samples) - frame_len) // hop
    idx = np.arange(frame_len)[None, :] + hop * np.arange(count)[:, None]
    return samples[idx]


def _mel_filterbank(n_fft: int, rate: int, n_mels: int) -> np.ndarray:
    def to_mel(hz):
        return 2595.0 * np.log10(1.0 + hz / 700.0)

    def to_hz(mel):
        return 700.0 * (10.0 ** (mel / 2595.0) - 1.0)

    n_bins = n_fft // 2 + 1
    mel_pts = np.linspace(to_mel(0.0), to_mel(rate / 2.0), n_mels + 2)
    bin_pts = np.floor((n_fft + 1) * to_hz(mel_pts) / rate).astype(int)
    bank = np.zeros((n_mels, n_bins))
    for m in range(1, n_mels + 1):
        lo, mid, hi = bin_pts[m - 1], bin_pts[m], bin_pts[m + 1]
        mid = max(mid, lo + 1)
        hi = max(hi, mid + 1)
        for k in range(lo, min(mid, n_bins)):
            bank[m - 1, k] = (k - lo) / (mid - lo)
        for k in range(mid, min(hi, n_bins)):
            bank[m - 1, k] = (hi - k) / (hi - mid)
    return bank


class DecoderBlock(nn.Module):
    """Multi-head causal self-attention + tanh MLP, all weights frozen.

    Queries and keys come from the layer-normed stream (stable attention
    weights); values read the raw stream so spliced modality rows steer the
    output direction freely.  The attention output is layer-normed before
    the residual add, which bounds its magnitude: conditioning information
    travels as direction, and cannot drown the positional or token signal.
    """

    N_HEADS = 4
    ATTN_GAIN = 3.0

    def __init__(self, d_model: int, seed: int):
        super().__init__()
        if d_model % self.N_HEADS != 0:
            raise ValueError("d_model must be divisible by head count")
        s = 1.0 / math.sqrt(d_model)
        self.wq = _frozen(_randn((d_model, d_model), seed, s))
        self.wk = _frozen(_randn((d_model, d_model), seed + 1, s))
        self.wv = _frozen(_randn((d_model, d_model), seed + 2, s))
        self.wo = _frozen(_randn((d_model, d_model), seed + 3, s))
        self.w1 = _frozen(_randn((d_model, 4 * d_model), seed + 4, s))
        self.w2 = _frozen(_randn((4 * d_model, d_model), seed + 5, 0.5 / math.sqrt(4 * d_model)))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        t, d = x.shape
        heads = self.N_HEADS
        d_head = d // heads
        h = torch.nn.functional.layer_norm(x, (d,))
        q = (h @ self.wq).reshape(t, heads, d_head).transpose(0, 1)
        k = (h @ self.wk).reshape(t, heads, d_head).transpose(0, 1)
        v = (x @ self.wv).reshape(t, heads, d_head).transpose(0, 1)
        scores = q @ k.transpose(1, 2) / math.sqrt(d_head)
        mask = torch.triu(torch.ones(t, t, dtype=torch.bool), diagonal=1)
        scores = scores.masked_fill(mask, float("-inf"))
        attn = (torch.softmax(scores, dim=-1) @ v).transpose(0, 1).reshape(t, d)
        attn = attn @ self.wo
        x = x + torch.nn.functional.layer_norm(attn, (d,)) * self.ATTN_GAIN
        h = torch.nn.functional.layer_norm(x, (d,))
        return x + torch.tanh(h @ self.w1) @ self.w2


class ToyLLM(nn.Module):
    """Frozen random causal decoder over a word vocabulary.

    forward() maps an embedding sequence (T, d_model) to logits (T, vocab);
    row t is conditioned on rows 0..t.  Inputs may mix word embeddings and
    spliced modality embeddings; the decoder does not care which is which.
    """

    def __init__(
        self,
        tokenizer: WordTokenizer,
        d_model: int = 128,
        n_layers: int = 2,
        max_context: int = 256,
        seed: int = 7,
    ):
        super().__init__()
        self.tokenizer = tokenizer
        self.d_model = d_model
        self.max_context = max_context
        self.tok_emb = _frozen(_randn((tokenizer.size, d_model), seed))
        self.register_buffer("pos", sinusoid_table(max_context, d_model))
        self.blocks = nn.ModuleList(
            DecoderBlock(d_model, seed=seed + 100 * (i + 1)) for i in range(n_layers)
        )
        # Direct previous-token pathway: position p always sees a projection
        # of input row p-1, so local word order survives whatever the
        # attention layers choose to look at.
        self.w_prev = _frozen(_randn((d_model, d_model), seed + 11, 1.0 / math.sqrt(d_model)))
        self.w_out = _frozen(_randn((d_model, tokenizer.size), seed + 13, 1.0 / math.sqrt(d_model)))

    def embed_tokens(self, ids: list[int]) -> torch.Tensor:
        return self.tok_emb[ids]

    def forward(self, embeds: torch.Tensor) -> torch.Tensor:
        t, d = embeds.shape
        if t > self.max_context:
            raise InputError(
                f"sequence length {t} exceeds decoder context {self.max_context}"
            )
        norm = torch.nn.functional.layer_norm
        shifted = norm(embeds[:-1], (d,)) @ self.w_prev
        prev = torch.cat([torch.zeros(1, d, dtype=embeds.dtype), shifted], dim=0)
        x = embeds + self.pos[:t] + prev
        for block in self.blocks:
            x = block(x)
        return norm(x, (d,)) @ self.w_out
