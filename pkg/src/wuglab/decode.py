"""Beam search, forced-decoding scores, and ancestral sampling.

All sequence probabilities are raw products of per-step conditionals; no
length normalization anywhere.  Ties are broken by lexicographic order
of output ids so results are identical across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .data import PhonemeSequence, VerbEntry
from .errors import ValidationError
from .model import LENGTH_CAP_SLACK, Model
from .tensor import Tensor
from .vocab import BOS_ID, EOS_ID


@dataclass(frozen=True)
class BeamHypothesis:
    phonemes: PhonemeSequence
    log_prob: float
    terminated: bool


@dataclass(frozen=True)
class BeamResult:
    present: PhonemeSequence
    hypotheses: tuple[BeamHypothesis, ...]

    @property
    def top(self) -> BeamHypothesis:
        return self.hypotheses[0]

    def top_sequences(self, n: int) -> set[PhonemeSequence]:
        return {h.phonemes for h in self.hypotheses[:n]}


@dataclass(frozen=True)
class FormScore:
    candidate: PhonemeSequence
    log_probability: float

    @property
    def probability(self) -> float:
        return float(np.exp(self.log_probability))


class SampledForm(NamedTuple):
    phonemes: PhonemeSequence
    truncated: bool


def _sort_key(entry):
    logp, ids = entry[0], entry[1]
    return (-logp, ids)


def _gather_states(states, rows: np.ndarray):
    return [(Tensor(h.data[rows]), Tensor(c.data[rows])) for h, c in states]


def length_cap(present: PhonemeSequence) -> int:
    return len(present) + LENGTH_CAP_SLACK


def beam_decode(model: Model, present: PhonemeSequence,
                width: int | None = None) -> BeamResult:
    """Length-unnormalized beam search.

    Hypotheses that emit <eos> are retained as terminated; hypotheses
    still alive at the length cap are closed and flagged truncated (their
    log probability has no <eos> term).  Returns up to `width` hypotheses
    sorted by descending log probability, ties broken lexicographically.
    """
    ctx = model.encode_sequence(present)
    return _beam_search(model, ctx, tuple(present), length_cap(present),
                        width)


def _beam_search(model: Model, ctx, present: PhonemeSequence, cap: int,
                 width: int | None) -> BeamResult:
    width = model.hp.beam_width if width is None else width
    if width < 1:
        raise ValidationError(f"beam width must be >= 1: {width}")
    # Live rows: parallel arrays of id-tuples and log probs plus states.
    live_ids: list[tuple[int, ...]] = [()]
    live_lp = np.zeros(1)
    states = model.initial_decoder_states(ctx)
    prev = np.array([BOS_ID])
    finished: list[tuple[float, tuple[int, ...], bool]] = []
    symbols = range(3, len(model.vocab))
    for step in range(cap):
        probs, states = model.decode_step(prev, states, ctx)
        with np.errstate(divide="ignore"):
            step_lp = np.log(probs.data)
        cand_lp = live_lp[:, None] + step_lp
        if step == cap - 1:
            # Continuations would exceed the cap: <eos> candidates still
            # compete; everything else closes truncated, no <eos> term.
            for row, ids in enumerate(live_ids):
                finished.append((float(cand_lp[row, EOS_ID]),
                                 ids + (EOS_ID,), True))
                for s in symbols:
                    finished.append((float(cand_lp[row, s]), ids + (s,),
                                     False))
            finished.sort(key=_sort_key)
            finished = finished[:width]
            break
        # <eos> competes with phoneme continuations for the width slots:
        # at width 1 this is exactly greedy decoding.
        candidates = [(float(cand_lp[row, EOS_ID]),
                       live_ids[row] + (EOS_ID,), row, True)
                      for row in range(len(live_ids))]
        candidates += [(float(cand_lp[row, s]), live_ids[row] + (s,), row, False)
                       for row in range(len(live_ids)) for s in symbols]
        candidates.sort(key=_sort_key)
        selected = candidates[:width]
        keep = [c for c in selected if not c[3]]
        finished.extend((lp, ids, True) for lp, ids, _, is_eos in selected
                        if is_eos)
        finished.sort(key=_sort_key)
        finished = finished[:width]
        if not keep:
            break
        live_ids = [ids for _, ids, _, _ in keep]
        live_lp = np.array([lp for lp, _, _, _ in keep])
        rows = np.array([row for _, _, row, _ in keep])
        states = _gather_states(states, rows)
        prev = np.array([ids[-1] for ids in live_ids])
    finished.sort(key=_sort_key)
    hyps = []
    for lp, ids, terminated in finished[:width]:
        out_ids = ids[:-1] if terminated else ids
        hyps.append(BeamHypothesis(model.vocab.decode(out_ids), lp, terminated))
    return BeamResult(tuple(present), tuple(hyps))


def _row_context(ctx, i: int):
    """Single-row view of a batched encoder context.

    Bit-identical to encoding the row alone: padded positions carry an
    attention bias of -1e30, which zeroes their softmax weight exactly.
    """
    from .model import EncoderContext

    return EncoderContext(
        tuple(Tensor(s.data[i:i + 1]) for s in ctx.states),
        tuple(Tensor(p.data[i:i + 1]) for p in ctx.proj),
        None if ctx.attn_bias is None else Tensor(ctx.attn_bias.data[i:i + 1]),
        tuple((Tensor(h.data[i:i + 1]), Tensor(c.data[i:i + 1]))
              for h, c in ctx.summaries),
    )


def batched_beam_decode(model: Model, presents: Sequence[PhonemeSequence],
                        width: int | None = None,
                        chunk: int = 64) -> list[BeamResult]:
    """beam_decode over many inputs, sharing one encoder pass per chunk."""
    results: list[BeamResult] = []
    for start in range(0, len(presents), chunk):
        group = presents[start:start + chunk]
        ids = [model.vocab.encode(p) for p in group]
        lengths = np.array([len(x) for x in ids])
        padded = np.zeros((len(group), lengths.max()), dtype=np.int64)
        for i, x in enumerate(ids):
            padded[i, :len(x)] = x
        ctx = model.encode(padded, lengths)
        for i, present in enumerate(group):
            results.append(_beam_search(model, _row_context(ctx, i),
                                        tuple(present),
                                        length_cap(present), width))
    return results


def force_score(model: Model, present: PhonemeSequence,
                candidate: PhonemeSequence) -> FormScore:
    """Probability of producing exactly `candidate` (then <eos>) under
    teacher forcing on the candidate itself."""
    ctx = model.encode_sequence(present)
    states = model.initial_decoder_states(ctx)
    target_ids = list(model.vocab.encode(candidate)) + [EOS_ID]
    prev = np.array([BOS_ID])
    total = 0.0
    for tgt in target_ids:
        probs, states = model.decode_step(prev, states, ctx)
        with np.errstate(divide="ignore"):
            total += float(np.log(probs.data[0, tgt]))
        prev = np.array([tgt])
    return FormScore(tuple(candidate), total)


def sample_forms(model: Model, present: PhonemeSequence, n: int,
                 sample_rng: np.random.Generator) -> list[SampledForm]:
    """Draw `n` ancestral samples from the model's output distribution,
    each cut off at the length cap (and then flagged truncated)."""
    if n < 1:
        raise ValidationError(f"sample count must be >= 1: {n}")
    ctx = model.encode_sequence(present)
    cap = length_cap(present)
    states = [(Tensor(np.repeat(h.data, n, axis=0)),
               Tensor(np.repeat(c.data, n, axis=0)))
              for h, c in model.initial_decoder_states(ctx)]
    prev = np.full(n, BOS_ID)
    alive = np.ones(n, dtype=bool)
    drawn: list[np.ndarray] = []
    for _ in range(cap):
        probs, states = model.decode_step(prev, states, ctx)
        u = sample_rng.random(n)
        cum = np.cumsum(probs.data, axis=1)
        # >= so u=0.0 lands on the first positive-probability id; the clip
        # guards the ~1-ulp case where rounding leaves cum[-1] just under u.
        chosen = np.minimum((u[:, None] >= cum).sum(axis=1),
                            len(model.vocab) - 1)
        chosen[~alive] = EOS_ID
        drawn.append(chosen)
        alive &= chosen != EOS_ID
        prev = chosen
        if not alive.any():
            break
    out = []
    cols = np.stack(drawn, axis=1) if drawn else np.zeros((n, 0), dtype=int)
    for i in range(n):
        ids = []
        truncated = True
        for s in cols[i]:
            if s == EOS_ID:
                truncated = False
                break
            ids.append(int(s))
        out.append(SampledForm(model.vocab.decode(ids), truncated))
    return out


def sample_form(model: Model, present: PhonemeSequence,
                sample_rng: np.random.Generator) -> SampledForm:
    return sample_forms(model, present, 1, sample_rng)[0]


@dataclass(frozen=True)
class AccuracyReport:
    overall: float
    regular: float
    irregular: float
    n_overall: int
    n_regular: int
    n_irregular: int


def training_accuracy(model: Model, corpus: Sequence[VerbEntry],
                      width: int | None = None) -> AccuracyReport:
    """Percentage of corpus types whose top-ranked output equals the gold
    past tense exactly.  Homophones and doublets bound this below 100%."""
    seen: set[tuple[PhonemeSequence, PhonemeSequence]] = set()
    hits = {"regular": 0, "irregular": 0}
    totals = {"regular": 0, "irregular": 0}
    types = []
    for e in corpus:
        key = (e.present, e.past)
        if key in seen:
            continue
        seen.add(key)
        types.append(e)
    presents = sorted({e.present for e in types})
    results = batched_beam_decode(model, presents, width)
    decoded = {p: r.top.phonemes for p, r in zip(presents, results)}
    for e in types:
        totals[e.verb_class] += 1
        if decoded[e.present] == e.past:
            hits[e.verb_class] += 1
    n_all = totals["regular"] + totals["irregular"]
    if n_all == 0:
        raise ValidationError("empty corpus")

    def pct(h, t):
        return 100.0 * h / t if t else float("nan")

    return AccuracyReport(
        pct(hits["regular"] + hits["irregular"], n_all),
        pct(hits["regular"], totals["regular"]),
        pct(hits["irregular"], totals["irregular"]),
        n_all, totals["regular"], totals["irregular"],
    )
