"""Character-level encoder-decoder inflection model.

Architecture: embeddings feed two bidirectional LSTM encoder layers
(each direction hidden_dim/2 wide so concatenation restores hidden_dim);
two LSTM decoder layers are initialised from the per-layer encoder
summaries; additive attention over the top encoder layer's per-timestep
states produces a context vector that is concatenated with the top
decoder state before the output projection.  The output distribution
ranges over phonemes plus the end symbol; the padding and begin symbols
are masked out of the softmax support.

Everything is built from the tape primitives, so one code path serves
training (tape active) and decoding/scoring (no tape).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import rng as rng_mod
from .data import PhonemeSequence, VerbEntry
from .errors import ValidationError
from .optim import DEFAULT_EPS, DEFAULT_RHO, AdadeltaState, adadelta_step
from .tensor import (Tape, Tensor, add, concat, dropout_apply, dropout_mask,
                     embedding_lookup, log, matmul, mul, sigmoid, slice_last,
                     softmax, tanh)
from .vocab import BOS_ID, EOS_ID, PAD_ID, Vocabulary

INIT_RANGE = 0.1
MASKED_LOGIT = -1e30
LENGTH_CAP_SLACK = 8


@dataclass(frozen=True)
class HyperParams:
    embed_dim: int = 300
    hidden_dim: int = 100
    encoder_layers: int = 2
    decoder_layers: int = 2
    batch_size: int = 20
    dropout_p: float = 0.3
    epochs: int = 100
    beam_width: int = 12
    seed: int = 0
    opt_rho: float = DEFAULT_RHO
    opt_eps: float = DEFAULT_EPS

    def __post_init__(self):
        if self.hidden_dim < 2 or self.hidden_dim % 2 != 0:
            raise ValidationError(
                f"hidden_dim must be even (split across encoder directions),"
                f" got {self.hidden_dim}")
        if self.embed_dim < 1:
            raise ValidationError(f"embed_dim must be >= 1: {self.embed_dim}")
        if self.encoder_layers < 1 or self.decoder_layers < 1:
            raise ValidationError("layer counts must be >= 1")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValidationError(
                f"dropout_p must be in [0,1): {self.dropout_p}")
        if self.beam_width < 1:
            raise ValidationError(f"beam_width must be >= 1: {self.beam_width}")
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be >= 1: {self.batch_size}")
        if self.epochs < 1:
            raise ValidationError(f"epochs must be >= 1: {self.epochs}")
        if not 0.0 < self.opt_rho < 1.0 or self.opt_eps <= 0.0:
            raise ValidationError("bad optimizer constants")

    def with_seed(self, seed: int) -> "HyperParams":
        return replace(self, seed=seed)


@dataclass
class EncoderContext:
    """Frozen encoder outputs one decode consumes."""

    states: tuple[Tensor, ...]        # per position, (B, hidden)
    proj: tuple[Tensor, ...]          # per position, (B, attn) pre-projected
    attn_bias: Tensor | None          # (B, T) 0 / MASKED_LOGIT, None = no pad
    summaries: tuple[tuple[Tensor, Tensor], ...]   # per layer (h, c)

    @property
    def length(self) -> int:
        return len(self.states)


def _lstm_cell(x: Tensor, h: Tensor, c: Tensor, wx: Tensor, wh: Tensor,
               b: Tensor) -> tuple[Tensor, Tensor]:
    width = h.shape[-1]
    gates = add(add(matmul(x, wx), matmul(h, wh)), b)
    i = sigmoid(slice_last(gates, 0, width))
    f = sigmoid(slice_last(gates, width, 2 * width))
    g = tanh(slice_last(gates, 2 * width, 3 * width))
    o = sigmoid(slice_last(gates, 3 * width, 4 * width))
    c_new = add(mul(f, c), mul(i, g))
    h_new = mul(o, tanh(c_new))
    return h_new, c_new


class Model:
    """One inflection model instance: parameters, hyperparameters, vocab."""

    def __init__(self, vocab: Vocabulary, hp: HyperParams,
                 seed: int | None = None):
        if len(vocab) <= 3:
            raise ValidationError("vocabulary has no phonemes")
        self.vocab = vocab
        self.hp = hp
        self.seed = hp.seed if seed is None else seed
        self.epochs_completed = 0
        self.params: dict[str, Tensor] = {}
        self._opt: dict[str, AdadeltaState] | None = None
        init = rng_mod.stream(self.seed, "init")
        self._build_params(init)
        # Structural mask keeping <pad>/<bos> out of the output softmax.
        bias = np.zeros((1, len(vocab)))
        bias[0, PAD_ID] = MASKED_LOGIT
        bias[0, BOS_ID] = MASKED_LOGIT
        self._out_bias = Tensor(bias)
        self._ones_vocab = Tensor(np.ones((len(vocab), 1)))

    # -- parameters ------------------------------------------------------

    def _add_param(self, name: str, shape: tuple[int, ...],
                   init: np.random.Generator) -> None:
        self.params[name] = Tensor(
            init.uniform(-INIT_RANGE, INIT_RANGE, size=shape), track=True)

    def _build_params(self, init: np.random.Generator) -> None:
        hp = self.hp
        V, E, H = len(self.vocab), hp.embed_dim, hp.hidden_dim
        half = H // 2
        self._add_param("enc_embed", (V, E), init)
        self._add_param("dec_embed", (V, E), init)
        for layer in range(1, hp.encoder_layers + 1):
            in_dim = E if layer == 1 else H
            for d in ("fw", "bw"):
                self._add_param(f"enc{layer}_{d}_wx", (in_dim, 4 * half), init)
                self._add_param(f"enc{layer}_{d}_wh", (half, 4 * half), init)
                self._add_param(f"enc{layer}_{d}_b", (1, 4 * half), init)
        for layer in range(1, hp.decoder_layers + 1):
            in_dim = E if layer == 1 else H
            self._add_param(f"dec{layer}_wx", (in_dim, 4 * H), init)
            self._add_param(f"dec{layer}_wh", (H, 4 * H), init)
            self._add_param(f"dec{layer}_b", (1, 4 * H), init)
        self._add_param("attn_enc", (H, H), init)
        self._add_param("attn_dec", (H, H), init)
        self._add_param("attn_v", (H, 1), init)
        self._add_param("out_w", (2 * H, V), init)
        self._add_param("out_b", (1, V), init)

    @property
    def param_items(self) -> list[tuple[str, Tensor]]:
        return list(self.params.items())

    def checksum(self) -> float:
        return float(sum(np.abs(p.data).sum() for p in self.params.values()))

    def snap_to_float32(self) -> None:
        """Round every parameter to its float32 representation (the
        checkpoint storage precision)."""
        for p in self.params.values():
            p.data = p.data.astype("<f4").astype(np.float64)

    # -- encoder ---------------------------------------------------------

    def _scan(self, inputs: list[Tensor], masks, layer: int, direction: str,
              batch: int) -> tuple[list[Tensor], Tensor, Tensor]:
        """Run one LSTM direction over `inputs`; masked positions hold
        their previous state so the final state is the last real one."""
        half = self.hp.hidden_dim // 2
        wx = self.params[f"enc{layer}_{direction}_wx"]
        wh = self.params[f"enc{layer}_{direction}_wh"]
        b = self.params[f"enc{layer}_{direction}_b"]
        h = Tensor(np.zeros((batch, half)))
        c = Tensor(np.zeros((batch, half)))
        order = range(len(inputs))
        if direction == "bw":
            order = reversed(order)
        states: list[Tensor | None] = [None] * len(inputs)
        for t in order:
            h_new, c_new = _lstm_cell(inputs[t], h, c, wx, wh, b)
            if masks is not None:
                keep, drop = masks[t]
                h = add(mul(h_new, keep), mul(h, drop))
                c = add(mul(c_new, keep), mul(c, drop))
            else:
                h, c = h_new, c_new
            states[t] = h
        return states, h, c

    def encode(self, ids: np.ndarray, lengths: np.ndarray | None = None,
               train: bool = False,
               drop_rng: np.random.Generator | None = None) -> EncoderContext:
        """Encode padded id rows (B, T) into an attention-ready context."""
        hp = self.hp
        B, T = ids.shape
        masks = None
        attn_bias = None
        if lengths is not None and (lengths < T).any():
            grid = (np.arange(T)[None, :] < lengths[:, None]).astype(float)
            masks = [(Tensor(grid[:, t:t + 1]), Tensor(1.0 - grid[:, t:t + 1]))
                     for t in range(T)]
            attn_bias = Tensor((1.0 - grid) * MASKED_LOGIT)
        p = hp.dropout_p if train else 0.0
        inputs = []
        for t in range(T):
            x = embedding_lookup(self.params["enc_embed"], ids[:, t])
            if p > 0.0:
                x = dropout_apply(x, dropout_mask(x.shape, p, drop_rng))
            inputs.append(x)
        summaries = []
        for layer in range(1, hp.encoder_layers + 1):
            if layer > 1 and p > 0.0:
                inputs = [dropout_apply(x, dropout_mask(x.shape, p, drop_rng))
                          for x in inputs]
            fw, fw_h, fw_c = self._scan(inputs, masks, layer, "fw", B)
            bw, bw_h, bw_c = self._scan(inputs, masks, layer, "bw", B)
            inputs = [concat([fw[t], bw[t]]) for t in range(T)]
            summaries.append((concat([fw_h, bw_h]), concat([fw_c, bw_c])))
        proj = tuple(matmul(s, self.params["attn_enc"]) for s in inputs)
        return EncoderContext(tuple(inputs), proj, attn_bias, tuple(summaries))

    def encode_sequence(self, phonemes: PhonemeSequence) -> EncoderContext:
        ids = self.vocab.encode(phonemes)
        return self.encode(ids[None, :])

    def initial_decoder_states(self, ctx: EncoderContext) \
            -> list[tuple[Tensor, Tensor]]:
        if len(ctx.summaries) != self.hp.decoder_layers:
            raise ValidationError(
                "encoder/decoder layer counts differ; cannot seed decoder")
        return [(h, c) for h, c in ctx.summaries]

    # -- decoder ---------------------------------------------------------

    def decode_step(self, prev_ids: np.ndarray,
                    states: list[tuple[Tensor, Tensor]], ctx: EncoderContext,
                    train: bool = False,
                    drop_rng: np.random.Generator | None = None
                    ) -> tuple[Tensor, list[tuple[Tensor, Tensor]]]:
        """One teacher-forced / search step.  `prev_ids` has one id per
        row; rows broadcast against a single-row encoder context."""
        hp = self.hp
        p = hp.dropout_p if train else 0.0
        x = embedding_lookup(self.params["dec_embed"], prev_ids)
        if p > 0.0:
            x = dropout_apply(x, dropout_mask(x.shape, p, drop_rng))
        new_states = []
        inp = x
        for layer in range(1, hp.decoder_layers + 1):
            h, c = states[layer - 1]
            h, c = _lstm_cell(inp, h, c, self.params[f"dec{layer}_wx"],
                              self.params[f"dec{layer}_wh"],
                              self.params[f"dec{layer}_b"])
            new_states.append((h, c))
            inp = h
            if layer < hp.decoder_layers and p > 0.0:
                inp = dropout_apply(inp, dropout_mask(inp.shape, p, drop_rng))
        top = new_states[-1][0]
        dproj = matmul(top, self.params["attn_dec"])
        cols = [matmul(tanh(add(ep, dproj)), self.params["attn_v"])
                for ep in ctx.proj]
        scores = concat(cols)
        if ctx.attn_bias is not None:
            scores = add(scores, ctx.attn_bias)
        alpha = softmax(scores)
        context = None
        for t in range(ctx.length):
            term = mul(slice_last(alpha, t, t + 1), ctx.states[t])
            context = term if context is None else add(context, term)
        logits = add(add(matmul(concat([top, context]), self.params["out_w"]),
                         self.params["out_b"]), self._out_bias)
        return softmax(logits), new_states

    # -- training --------------------------------------------------------

    def _prepare_batch(self, pairs: Sequence[tuple[np.ndarray, np.ndarray]]):
        B = len(pairs)
        src_len = np.array([len(s) for s, _ in pairs])
        tgt_len = np.array([len(t) + 1 for _, t in pairs])  # +1 for <eos>
        S, D = src_len.max(), tgt_len.max()
        src = np.full((B, S), PAD_ID, dtype=np.int64)
        dec_in = np.full((B, D), PAD_ID, dtype=np.int64)
        dec_in[:, 0] = BOS_ID
        # Padded target rows point at <eos> (never zero probability) and
        # are masked out of the loss, keeping log() finite.
        target = np.full((B, D), EOS_ID, dtype=np.int64)
        for i, (s, t) in enumerate(pairs):
            src[i, :len(s)] = s
            dec_in[i, 1:len(t) + 1] = t
            target[i, :len(t)] = t
            target[i, len(t)] = EOS_ID
        tgt_mask = (np.arange(D)[None, :] < tgt_len[:, None]).astype(float)
        return src, src_len, dec_in, target, tgt_mask

    def sequence_loss(self, pairs: Sequence[tuple[np.ndarray, np.ndarray]],
                      train: bool = True,
                      drop_rng: np.random.Generator | None = None,
                      reduction: str = "mean") -> Tensor:
        """Negative log-likelihood of the gold symbols (incl. <eos>).

        reduction "mean" divides by the gold symbol count (the reported
        per-symbol loss); "sum" does not.  Training steps on the sum:
        Adadelta's published rule self-tunes once squared gradients clear
        its epsilon floor, and per-symbol averaging at desk-scale batch
        sizes leaves them below it for thousands of updates.
        """
        if reduction not in ("mean", "sum"):
            raise ValidationError(f"unknown reduction {reduction!r}")
        src, src_len, dec_in, target, tgt_mask = self._prepare_batch(pairs)
        B, D = target.shape
        V = len(self.vocab)
        ctx = self.encode(src, src_len, train=train, drop_rng=drop_rng)
        states = self.initial_decoder_states(ctx)
        ones_row = Tensor(np.ones((1, B)))
        total = None
        for j in range(D):
            probs, states = self.decode_step(dec_in[:, j], states, ctx,
                                             train=train, drop_rng=drop_rng)
            onehot = np.zeros((B, V))
            onehot[np.arange(B), target[:, j]] = 1.0
            picked = matmul(mul(probs, Tensor(onehot)), self._ones_vocab)
            step = mul(log(picked), Tensor(tgt_mask[:, j:j + 1]))
            summed = matmul(ones_row, step)
            total = summed if total is None else add(total, summed)
        scale = -1.0 if reduction == "sum" else -1.0 / float(tgt_mask.sum())
        return mul(total, Tensor(np.array([[scale]])))

    def _optimizer(self) -> dict[str, AdadeltaState]:
        if self._opt is None:
            self._opt = {
                name: AdadeltaState.fresh(p.data.shape, self.hp.opt_rho,
                                          self.hp.opt_eps)
                for name, p in self.params.items()
            }
        return self._opt


def init_model(vocab: Vocabulary, hp: HyperParams,
               seed: int | None = None) -> Model:
    """Build a model with all parameters drawn uniform(-0.1, 0.1) from the
    seed-derived init stream; equal seeds give bit-identical models."""
    return Model(vocab, hp, seed)


def train_epoch(model: Model, corpus: Sequence[VerbEntry],
                hp: HyperParams | None = None) -> float:
    """One epoch: shuffle, batch, teacher-forced cross-entropy, Adadelta.

    Returns the epoch's mean loss per gold symbol.  The shuffle and
    dropout streams are keyed by (seed, epoch index) so a rerun from the
    same seed replays bit-identically.
    """
    hp = hp or model.hp
    if not corpus:
        raise ValidationError("empty training corpus")
    encoded = [(model.vocab.encode(e.present), model.vocab.encode(e.past))
               for e in corpus]
    epoch = model.epochs_completed
    order = rng_mod.stream(model.seed, "shuffle", epoch).permutation(
        len(encoded))
    drop_rng = rng_mod.stream(model.seed, "dropout", epoch)
    opt = model._optimizer()
    names = list(model.params)
    tensors = [model.params[n] for n in names]
    total_loss = 0.0
    total_symbols = 0
    for start in range(0, len(encoded), hp.batch_size):
        batch = [encoded[i] for i in order[start:start + hp.batch_size]]
        with Tape() as tape:
            loss = model.sequence_loss(batch, train=True, drop_rng=drop_rng,
                                       reduction="sum")
        grads = tape.gradients(loss, tensors)
        for name, p, g in zip(names, tensors, grads):
            adadelta_step(p, g, opt[name], name)
        total_loss += loss.data.item()
        total_symbols += sum(len(t) + 1 for _, t in batch)
    model.epochs_completed += 1
    return total_loss / total_symbols
