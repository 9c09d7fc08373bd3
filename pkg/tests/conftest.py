"""Shared fixtures: toy vocabularies, oracle helpers, and one expensive
session-scoped trained model reused by convergence, probe, and skew tests."""

import time
from dataclasses import dataclass

import numpy as np
import pytest

from wuglab.data import VerbEntry
from wuglab.decode import training_accuracy
from wuglab.model import HyperParams, Model, init_model, train_epoch
from wuglab.synthetic import SynthSpec, make_synthetic_corpus
from wuglab.vocab import Vocabulary


def toy_vocab(n_phonemes=3):
    return Vocabulary("abcdefghij"[:n_phonemes])


def toy_model(n_phonemes=3, dims=6, seed=0, **hp_kwargs):
    hp = HyperParams(embed_dim=dims, hidden_dim=dims if dims % 2 == 0
                     else dims + 1, batch_size=4, dropout_p=0.0,
                     epochs=10, beam_width=4, seed=seed, **hp_kwargs)
    return init_model(toy_vocab(n_phonemes), hp)


def relative_error(a, b, floor=1e-6):
    return abs(a - b) / max(abs(a), abs(b), floor)


def finite_difference_gradients(loss_fn, params, h=1e-5):
    """Central finite differences, perturbing every scalar parameter."""
    grads = []
    for p in params:
        flat = p.data.reshape(-1)
        g = np.zeros(flat.size)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_fn()
            flat[i] = orig - h
            down = loss_fn()
            flat[i] = orig
            g[i] = (up - down) / (2.0 * h)
        grads.append(g.reshape(p.data.shape))
    return grads


@dataclass
class TrainedSynth:
    corpus: list
    items: list
    vocab: Vocabulary
    model: Model
    trajectory: list      # (epoch, loss, overall, regular, irregular)
    train_seconds: float
    converged_epoch: int | None


def _collect_tokens(corpus, items):
    toks = set()
    for e in corpus:
        toks.update(e.present)
        toks.update(e.past)
    for it in items:
        toks.update(it.present)
        for f in it.forms:
            toks.update(f.phonemes)
    return toks


@pytest.fixture(scope="session")
def synth_data():
    corpus, items = make_synthetic_corpus(SynthSpec(), seed=7)
    return corpus, items


@pytest.fixture(scope="session")
def trained_synth(synth_data):
    """The 200-regular + 20-irregular corpus trained at dims 32/32,
    batch 20, dropout 0.3 until >= 99% training accuracy (cap 200
    epochs), with the per-epoch accuracy trajectory."""
    corpus, items = synth_data
    vocab = Vocabulary(_collect_tokens(corpus, items))
    hp = HyperParams(embed_dim=32, hidden_dim=32, batch_size=20,
                     dropout_p=0.3, epochs=200, beam_width=12, seed=7)
    model = init_model(vocab, hp)
    trajectory = []
    converged = None
    t0 = time.monotonic()
    for epoch in range(1, hp.epochs + 1):
        loss = train_epoch(model, corpus)
        acc = training_accuracy(model, corpus)
        trajectory.append((epoch, loss, acc.overall, acc.regular,
                           acc.irregular))
        if acc.overall >= 99.0:
            converged = epoch
            break
    elapsed = time.monotonic() - t0
    return TrainedSynth(corpus, items, vocab, model, trajectory, elapsed,
                        converged)


@pytest.fixture()
def mini_corpus():
    """Six regular verbs over a 6-phoneme inventory; quick training."""
    rows = [
        ("kat", ("k", "a", "t"), ("k", "a", "t", "d")),
        ("nab", ("n", "a", "b"), ("n", "a", "b", "d")),
        ("dak", ("d", "a", "k"), ("d", "a", "k", "t")),
        ("tan", ("t", "a", "n"), ("t", "a", "n", "d")),
        ("bad", ("b", "a", "d"), ("b", "a", "d", "d")),
        ("kan", ("k", "a", "n"), ("k", "a", "n", "d")),
    ]
    return [VerbEntry(lemma, p, q, "regular") for lemma, p, q in rows]
