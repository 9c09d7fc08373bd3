"""Wug-test evaluation measures.

Correlations between model scores and human data are computed separately
for regular and irregular suggested forms: regular scores dwarf irregular
ones, so a pooled correlation would reward any model that merely tells
the two classes apart.  Undefined correlations (zero variance) are
reported as None, never silently as 0.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .data import NonceItem, PhonemeSequence
from .errors import ValidationError

MEASURES = ("spearman", "pearson")
TARGETS = ("production", "rating")


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks; tied values share the average of their positions."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    i = 0
    n = len(values)
    while i < n:
        j = i
        while j + 1 < n and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def pearson(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Pearson's r; None when either side has zero variance."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError("pearson needs two equal-length vectors")
    if len(x) < 3:
        raise ValidationError(f"need at least 3 pairs, got {len(x)}")
    xc = x - x.mean()
    yc = y - y.mean()
    denom = np.sqrt((xc * xc).sum() * (yc * yc).sum())
    if denom == 0.0:
        return None
    return float((xc * yc).sum() / denom)


def spearman(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Spearman's rho: Pearson correlation of average-tied ranks."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError("spearman needs two equal-length vectors")
    if len(x) < 3:
        raise ValidationError(f"need at least 3 pairs, got {len(x)}")
    return pearson(average_ranks(x), average_ranks(y))


@dataclass(frozen=True)
class CorrelationReport:
    measure: str
    target: str
    regular_value: float | None
    irregular_value: float | None
    n_regular: int
    n_irregular: int


ScoreLookup = Mapping[tuple[str, PhonemeSequence], float]


def correlate_forms(items: Sequence[NonceItem], scores: ScoreLookup,
                    measure: str = "spearman",
                    target: str = "production") -> CorrelationReport:
    """Correlate model scores with human data over two disjoint pools:
    the regular suggested forms of all items, and all suggested
    irregulars (first and second together)."""
    if measure not in MEASURES:
        raise ValidationError(f"unknown measure {measure!r}")
    if target not in TARGETS:
        raise ValidationError(f"unknown target {target!r}")
    corr: Callable = spearman if measure == "spearman" else pearson
    pools: dict[str, tuple[list[float], list[float]]] = {
        "regular": ([], []), "irregular": ([], [])}
    for item in items:
        for form in item.forms:
            key = (item.item_id, form.phonemes)
            if key not in scores:
                raise ValidationError(
                    f"missing model score for item {item.item_id!r} form"
                    f" {' '.join(form.phonemes)!r}")
            if target == "production":
                human = form.production_p
            else:
                if form.rating is None:
                    raise ValidationError(
                        f"item {item.item_id!r} form"
                        f" {' '.join(form.phonemes)!r} has no rating")
                human = form.rating
            pool = pools["regular" if form.is_regular else "irregular"]
            pool[0].append(float(scores[key]))
            pool[1].append(float(human))
    reg_model, reg_human = pools["regular"]
    irr_model, irr_human = pools["irregular"]
    return CorrelationReport(
        measure, target,
        corr(reg_model, reg_human),
        corr(irr_model, irr_human),
        len(reg_model), len(irr_model),
    )


@dataclass(frozen=True)
class Cr5Report:
    """Complete recall at 5: the fraction of items whose full suggested
    set appears among the top five distinct beam outputs."""

    item_flags: tuple[tuple[str, bool], ...]
    value: float

    @property
    def n_items(self) -> int:
        return len(self.item_flags)


def cr_at_5(items: Sequence[NonceItem], beams: Mapping[str, object],
            k: int = 5) -> Cr5Report:
    flags = []
    for item in items:
        try:
            beam = beams[item.item_id]
        except KeyError:
            raise ValidationError(f"no beam for item {item.item_id!r}")
        top = beam.top_sequences(k)
        suggested = {f.phonemes for f in item.forms}
        flags.append((item.item_id, suggested <= top))
    if not flags:
        raise ValidationError("no items")
    value = sum(ok for _, ok in flags) / len(flags)
    return Cr5Report(tuple(flags), value)


def second_place_agreement(
        beams_by_seed: Mapping[int, Mapping[str, object]]
) -> dict[tuple[str, PhonemeSequence], int]:
    """For every form any seed ranked second for an item, the number of
    seeds that ranked it second there."""
    if len(beams_by_seed) < 2:
        raise ValidationError("need beams from at least 2 seeds")
    item_ids = None
    for seed, beams in beams_by_seed.items():
        ids = set(beams)
        if item_ids is None:
            item_ids = ids
        elif ids != item_ids:
            raise ValidationError(f"seed {seed} covers a different item set")
    counts: dict[tuple[str, PhonemeSequence], int] = {}
    for beams in beams_by_seed.values():
        for item_id, beam in beams.items():
            if len(beam.hypotheses) < 2:
                raise ValidationError(
                    f"beam for {item_id!r} has no second place")
            key = (item_id, beam.hypotheses[1].phonemes)
            counts[key] = counts.get(key, 0) + 1
    return counts


RoleShares = Mapping[str, Mapping[str, float]]


@dataclass(frozen=True)
class CategoryMeans:
    category: str
    regular_mean: float
    irregular_mean: float
    n_items: int


def human_production_shares(items: Sequence[NonceItem]) -> dict[str, dict[str, float]]:
    """Per-item human shares in the same role keying the model tables use."""
    shares: dict[str, dict[str, float]] = {}
    for item in items:
        row = {f.role: f.production_p for f in item.forms}
        row["other"] = item.other_p
        shares[item.item_id] = row
    return shares


def category_means(items: Sequence[NonceItem],
                   shares: RoleShares) -> list[CategoryMeans]:
    """Mean regular share and mean combined suggested-irregular share per
    nonce category.  Empty categories are omitted with a warning."""
    from .data import CATEGORIES

    by_cat: dict[str, list[tuple[float, float]]] = {c: [] for c in CATEGORIES}
    for item in items:
        try:
            row = shares[item.item_id]
        except KeyError:
            raise ValidationError(f"no shares for item {item.item_id!r}")
        reg = float(row["reg"])
        irr = float(row.get("irr1", 0.0)) + float(row.get("irr2", 0.0))
        by_cat[item.category].append((reg, irr))
    out = []
    for cat in CATEGORIES:
        rows = by_cat[cat]
        if not rows:
            warnings.warn(f"category {cat!r} has no items; omitted")
            continue
        regs, irrs = zip(*rows)
        out.append(CategoryMeans(cat, float(np.mean(regs)),
                                 float(np.mean(irrs)), len(rows)))
    return out
