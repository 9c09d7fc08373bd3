"""Representation probes: state clouds, PCA, neighbour listings.

The encoder cloud takes, per word, the concatenated final states of the
two top-layer directions.  The phoneme cloud runs one decoder step per
output phoneme from a zero state and keeps the top layer's hidden vector
(the decoder state does not depend on the encoder until the output
projection, so no input word is involved).
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from typing import Sequence

import numpy as np

from .data import PhonemeSequence, VerbEntry
from .errors import ValidationError
from .model import Model
from .tensor import Tensor

UNCLASSIFIED = "unclassified"
_STRESS_MARKS = '"\'%'


@dataclass(frozen=True)
class EmbeddingCloud:
    labels: tuple[str, ...]
    classes: tuple[str, ...]
    vectors: np.ndarray          # (n, width)
    source: str

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise ValidationError("cloud labels must be unique")
        if self.vectors.ndim != 2 or len(self.labels) != self.vectors.shape[0]:
            raise ValidationError("labels and vectors disagree")
        if len(self.classes) != len(self.labels):
            raise ValidationError("classes and labels disagree")


def encoder_cloud(model: Model,
                  words: Sequence[tuple[str, PhonemeSequence, str]]
                  ) -> EmbeddingCloud:
    """One summary vector per (label, phonemes, class) word triple."""
    labels, classes, vecs = [], [], []
    for label, phonemes, cls in words:
        ctx = model.encode_sequence(phonemes)
        h, _ = ctx.summaries[-1]
        labels.append(label)
        classes.append(cls)
        vecs.append(h.data[0].copy())
    if not vecs:
        raise ValidationError("no words given")
    return EmbeddingCloud(tuple(labels), tuple(classes), np.array(vecs),
                          "encoder-final")


def load_phoneme_classes(path=None) -> dict[str, str]:
    """The bundled (or a user-supplied) final-phoneme suffix-class table."""
    if path is None:
        text = resources.files("wuglab").joinpath(
            "phoneme_classes.tsv").read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    table = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        tok, cls = line.split("\t")
        table[tok] = cls
    return table


def suffix_class(token: str, table: dict[str, str]) -> str:
    stripped = token.lstrip(_STRESS_MARKS)
    return table.get(stripped, table.get(token, UNCLASSIFIED))


def decoder_phoneme_cloud(model: Model,
                          table: dict[str, str] | None = None,
                          contexts: Sequence[VerbEntry] | None = None
                          ) -> EmbeddingCloud:
    """Decoder hidden vectors per phoneme, labelled by suffix class.

    With `contexts` (suffixing paradigm entries, i.e. past starts with
    present), each vector is the top decoder layer's state at the step
    where the word-final phoneme has just been consumed and the suffix
    must be chosen, averaged over the entries ending in that phoneme;
    this is where the allomorphy decision lives.  Non-suffixing entries
    are skipped.  Without contexts, every vocabulary phoneme gets the
    state after one decoder step from zero state (a context-free probe).
    """
    if table is None:
        table = load_phoneme_classes()
    if contexts is not None:
        return _averaged_final_step_cloud(model, table, contexts)
    hp = model.hp
    phonemes = model.vocab.phonemes
    ids = model.vocab.encode(phonemes)
    zero = [(Tensor(np.zeros((len(ids), hp.hidden_dim))),
             Tensor(np.zeros((len(ids), hp.hidden_dim))))
            for _ in range(hp.decoder_layers)]
    # A single zero-vector "encoder state" satisfies decode_step's
    # attention plumbing; it cannot influence the hidden states.
    ctx_states = (Tensor(np.zeros((1, hp.hidden_dim))),)
    from .model import EncoderContext
    from .tensor import matmul
    ctx = EncoderContext(ctx_states,
                         (matmul(ctx_states[0], model.params["attn_enc"]),),
                         None, tuple((h, c) for h, c in zero[:1]))
    _, states = model.decode_step(ids, zero, ctx)
    vectors = states[-1][0].data.copy()
    classes = tuple(suffix_class(p, table) for p in phonemes)
    return EmbeddingCloud(tuple(phonemes), classes, vectors, "decoder-step")


def _averaged_final_step_cloud(model: Model, table: dict[str, str],
                               contexts: Sequence[VerbEntry]
                               ) -> EmbeddingCloud:
    from .vocab import BOS_ID, EOS_ID

    sums: dict[str, np.ndarray] = {}
    counts: dict[str, int] = {}
    used = 0
    for e in contexts:
        present, past = tuple(e.present), tuple(e.past)
        if past[:len(present)] != present:
            continue
        used += 1
        ctx = model.encode_sequence(present)
        states = model.initial_decoder_states(ctx)
        ids = list(model.vocab.encode(past))
        prev = BOS_ID
        for step in range(len(present) + 1):
            _, states = model.decode_step(np.array([prev]), states, ctx)
            prev = ids[step] if step < len(ids) else EOS_ID
        tok = present[-1]
        sums.setdefault(tok, np.zeros(model.hp.hidden_dim))
        counts[tok] = counts.get(tok, 0) + 1
        sums[tok] += states[-1][0].data[0]
    if not used:
        raise ValidationError(
            "no suffixing (past = present + suffix) contexts supplied")
    labels = sorted(sums)
    vectors = np.array([sums[t] / counts[t] for t in labels])
    classes = tuple(suffix_class(t, table) for t in labels)
    return EmbeddingCloud(tuple(labels), classes, vectors,
                          "decoder-final-step")


@dataclass(frozen=True)
class PcaResult:
    cloud: EmbeddingCloud
    explained_variance_ratio: np.ndarray


def pca_project(cloud: EmbeddingCloud, k: int) -> PcaResult:
    """Mean-centred projection onto the top-k principal axes (covariance
    eigendecomposition).  Degenerate directions (zero variance) are
    dropped, so fewer than k components can come back."""
    n, d = cloud.vectors.shape
    if k < 1 or k > d:
        raise ValidationError(f"k must be in [1, {d}], got {k}")
    if n < k + 1:
        raise ValidationError(f"need at least {k + 1} points, got {n}")
    centred = cloud.vectors - cloud.vectors.mean(axis=0)
    cov = centred.T @ centred / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.maximum(eigvals[order], 0.0)
    eigvecs = eigvecs[:, order]
    total = eigvals.sum()
    if total <= 0.0:
        raise ValidationError("cloud has zero variance; nothing to project")
    keep = [i for i in range(k) if eigvals[i] > 1e-12 * eigvals[0]]
    axes = eigvecs[:, keep]
    # Deterministic sign: largest-magnitude loading is positive.
    for j in range(axes.shape[1]):
        pivot = np.argmax(np.abs(axes[:, j]))
        if axes[pivot, j] < 0:
            axes[:, j] = -axes[:, j]
    projected = centred @ axes
    ratios = eigvals[keep] / total
    out = EmbeddingCloud(cloud.labels, cloud.classes, projected,
                         cloud.source + f"-pca{len(keep)}")
    return PcaResult(out, ratios)


def nearest_neighbors(cloud: EmbeddingCloud, k: int = 1
                      ) -> dict[str, tuple[str, ...]]:
    """Per label, its k nearest other labels by Euclidean distance."""
    n = cloud.vectors.shape[0]
    if k < 1 or k >= n:
        raise ValidationError(f"k must be in [1, {n - 1}]")
    diffs = cloud.vectors[:, None, :] - cloud.vectors[None, :, :]
    dist = np.sqrt((diffs * diffs).sum(axis=-1))
    np.fill_diagonal(dist, np.inf)
    out = {}
    for i, label in enumerate(cloud.labels):
        order = np.argsort(dist[i], kind="stable")[:k]
        out[label] = tuple(cloud.labels[j] for j in order)
    return out


def reverse_entries(corpus: Sequence[VerbEntry]) -> list[VerbEntry]:
    """The reversed-input control: both present and past phoneme orders
    flipped, classes kept."""
    return [VerbEntry(e.lemma, tuple(reversed(e.present)),
                      tuple(reversed(e.past)), e.verb_class, e.frequency)
            for e in corpus]
