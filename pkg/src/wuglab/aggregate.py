"""Participant simulation: each trained seed is one simulated speaker.

Every seed contributes `n_samples` sampled past-tense forms per nonce
item; each sample is binned by exact phoneme-sequence match as the
item's regular form, one of its suggested irregulars, or "other".
Length-capped (truncated) samples always count as "other".
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from . import rng as rng_mod
from .data import NonceItem, VerbEntry
from .decode import sample_forms
from .errors import ValidationError
from .metrics import CorrelationReport, spearman
from .model import HyperParams, Model, init_model, train_epoch

ROLES = ("reg", "irr1", "irr2", "other")


@dataclass(frozen=True)
class ProductionTable:
    """Per-item production counts pooled over seeds, plus provenance."""

    counts: Mapping[str, Mapping[str, int]]   # item_id -> role -> count
    seeds: tuple[int, ...]
    samples_per_seed: int

    def shares(self, item_id: str) -> dict[str, float]:
        row = self.counts[item_id]
        total = len(self.seeds) * self.samples_per_seed
        return {role: row.get(role, 0) / total for role in ROLES}

    def shares_by_item(self) -> dict[str, dict[str, float]]:
        return {item_id: self.shares(item_id) for item_id in self.counts}


def categorize_samples(item: NonceItem, samples) -> dict[str, int]:
    """Bin sampled forms against the item's suggested forms."""
    targets = {f.phonemes: f.role for f in item.forms}
    row = {role: 0 for role in ROLES}
    for s in samples:
        role = "other" if s.truncated else targets.get(s.phonemes, "other")
        row[role] += 1
    return row


def simulate_participant(model: Model, items: Sequence[NonceItem],
                         n_samples: int) -> dict[str, dict[str, int]]:
    """Sample `n_samples` productions per item from one trained model."""
    out: dict[str, dict[str, int]] = {}
    for item in items:
        stream = rng_mod.stream(model.seed, "sample", n_samples,
                                _item_key(item.item_id))
        samples = sample_forms(model, item.present, n_samples, stream)
        out[item.item_id] = categorize_samples(item, samples)
    return out


def _item_key(item_id: str) -> int:
    import hashlib

    digest = hashlib.sha256(item_id.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def merge_counts(per_seed: Sequence[Mapping[str, Mapping[str, int]]]
                 ) -> dict[str, dict[str, int]]:
    merged: dict[str, dict[str, int]] = {}
    for table in per_seed:
        for item_id, row in table.items():
            dest = merged.setdefault(item_id, {role: 0 for role in ROLES})
            for role, n in row.items():
                dest[role] += n
    return merged


def run_participants(corpus: Sequence[VerbEntry], items: Sequence[NonceItem],
                     hp: HyperParams, n_seeds: int, n_samples: int,
                     models: Sequence[Model] | None = None) -> ProductionTable:
    """Train (or reuse) one model per seed, sample, and pool counts.

    Without `models`, seeds hp.seed .. hp.seed + n_seeds - 1 are trained
    for hp.epochs each.  Pre-trained models (e.g. loaded checkpoints) may
    be passed instead; they must number n_seeds and carry distinct seeds.
    """
    if n_seeds < 1 or n_samples < 1:
        raise ValidationError("need n_seeds >= 1 and n_samples >= 1")
    if models is not None:
        got = tuple(m.seed for m in models)
        if len(models) != n_seeds or len(set(got)) != len(got):
            from .errors import ProvenanceError
            raise ProvenanceError(
                f"need {n_seeds} models with distinct seeds, got seeds {got}")
        seeds = got
    else:
        seeds = tuple(hp.seed + i for i in range(n_seeds))
        models = [init_model_for_seed(corpus, hp, seed) for seed in seeds]
    per_seed = [simulate_participant(m, items, n_samples) for m in models]
    counts = merge_counts(per_seed)
    return ProductionTable(counts, seeds, n_samples)


def init_model_for_seed(corpus: Sequence[VerbEntry], hp: HyperParams,
                        seed: int) -> Model:
    from .vocab import Vocabulary

    vocab = Vocabulary.from_sequences(
        [e.present for e in corpus] + [e.past for e in corpus])
    model = init_model(vocab, hp.with_seed(seed))
    for _ in range(hp.epochs):
        train_epoch(model, corpus)
    return model


@dataclass(frozen=True)
class PreferenceFlags:
    item_id: str
    human_prefers_irregular: bool
    model_prefers_irregular: bool


def compare_to_humans(table: ProductionTable, items: Sequence[NonceItem]
                      ) -> tuple[CorrelationReport, list[PreferenceFlags]]:
    """Spearman correlation of pooled model shares against human
    production probabilities, plus per-item irregular-preference flags
    (any suggested irregular produced more often than the regular)."""
    missing = [i.item_id for i in items if i.item_id not in table.counts]
    if missing:
        raise ValidationError(f"table lacks items: {missing}")
    reg_model, reg_human, irr_model, irr_human = [], [], [], []
    flags = []
    for item in items:
        shares = table.shares(item.item_id)
        human = {f.role: f.production_p for f in item.forms}
        reg_model.append(shares["reg"])
        reg_human.append(human["reg"])
        for role in ("irr1", "irr2"):
            if role in human:
                irr_model.append(shares[role])
                irr_human.append(human[role])
        human_irr_best = max(v for r, v in human.items() if r != "reg")
        model_irr_best = max(shares[r] for r in ("irr1", "irr2"))
        flags.append(PreferenceFlags(
            item.item_id,
            human_irr_best > human["reg"],
            model_irr_best > shares["reg"],
        ))
    report = CorrelationReport(
        "spearman", "production",
        spearman(reg_model, reg_human) if len(reg_model) >= 3 else None,
        spearman(irr_model, irr_human) if len(irr_model) >= 3 else None,
        len(reg_model), len(irr_model),
    )
    return report, flags
