"""Deterministic synthetic paradigm + nonce fixtures.

Real CELEX-derived corpora and the human nonce data are licensed and not
bundled; this generator produces drop-in files with the same schemas so
every experiment runs at desk scale.  Regular pasts follow the
final-phoneme voicing rule (-Id after coronal stops, -d after voiced,
-t after voiceless); irregulars come in vowel-change families sharing a
trailing context.  "Human" responses for nonce items are drawn from a
declared noisy-rule process: category-specific base weights for regular
vs irregular vs other, jittered by gamma noise and normalized.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng as rng_mod
from .data import CATEGORIES, NonceItem, PhonemeSequence, SuggestedForm, VerbEntry
from .errors import ValidationError

VOWELS = ("a", "i", "u")
VOICED_CONS = ("b", "n", "l", "g", "z")
VOICELESS_CONS = ("p", "s", "k")
CORONAL_STOPS = ("t", "d")
ONSETS = VOICED_CONS + VOICELESS_CONS + CORONAL_STOPS

# Base (regular, irregular-total, other) weights of the noisy-rule
# process that fakes human production shares, per nonce category.
CATEGORY_WEIGHTS = {
    "IOR-regular": (0.88, 0.04, 0.08),
    "IOR-both": (0.62, 0.28, 0.10),
    "IOR-irregular": (0.48, 0.40, 0.12),
    "IOR-neither": (0.70, 0.10, 0.20),
    "burnt-like": (0.60, 0.32, 0.08),
    "analogy": (0.74, 0.16, 0.10),
}


@dataclass(frozen=True)
class IrregularFamily:
    vowel_from: str
    vowel_to: str
    trail: PhonemeSequence   # shared phonemes after the changing vowel


@dataclass(frozen=True)
class SynthSpec:
    """Sizes and inventory for one synthetic data set."""

    n_regular_coronal: int = 66
    n_regular_voiceless: int = 67
    n_regular_voiced: int = 67
    family_size: int = 5
    families: tuple[IrregularFamily, ...] = (
        IrregularFamily("i", "u", ("n",)),
        IrregularFamily("i", "a", ("g",)),
        IrregularFamily("a", "u", ("d",)),
        IrregularFamily("u", "a", ("l",)),
    )
    nonce_per_category: int = 2
    max_onset: int = 2

    @property
    def n_regular(self) -> int:
        return (self.n_regular_coronal + self.n_regular_voiceless
                + self.n_regular_voiced)

    @property
    def n_irregular(self) -> int:
        return self.family_size * len(self.families)


def regular_suffix(final: str) -> PhonemeSequence:
    if final in CORONAL_STOPS:
        return ("I", "d")
    if final in VOICELESS_CONS:
        return ("t",)
    return ("d",)


def _onset(gen: np.random.Generator, max_onset: int) -> PhonemeSequence:
    n = int(gen.integers(1, max_onset + 1))
    return tuple(str(gen.choice(ONSETS)) for _ in range(n))


def make_synthetic_corpus(spec: SynthSpec, seed: int
                          ) -> tuple[list[VerbEntry], list[NonceItem]]:
    """Pure function of (spec, seed): a corpus plus matching nonce items."""
    gen = rng_mod.stream(seed, "synth")
    presents: set[PhonemeSequence] = set()
    budget = spec.n_regular + spec.n_irregular + 6 * spec.nonce_per_category

    def fresh(maker, what: str) -> PhonemeSequence:
        for _ in range(200 * budget):
            s = maker()
            if s not in presents:
                presents.add(s)
                return s
        raise ValidationError(
            f"phoneme inventory too small to draw distinct {what}")

    entries: list[VerbEntry] = []
    for pool, count in ((CORONAL_STOPS, spec.n_regular_coronal),
                        (VOICELESS_CONS, spec.n_regular_voiceless),
                        (VOICED_CONS, spec.n_regular_voiced)):
        for _ in range(count):
            s = fresh(lambda: _onset(gen, spec.max_onset)
                      + (str(gen.choice(VOWELS)),)
                      + (str(gen.choice(pool)),), "regular stems")
            entries.append(VerbEntry("".join(s), s,
                                     s + regular_suffix(s[-1]), "regular"))
    for fam in spec.families:
        for _ in range(spec.family_size):
            s = fresh(lambda: _onset(gen, spec.max_onset)
                      + (fam.vowel_from,) + fam.trail, "irregular stems")
            past = s[:-1 - len(fam.trail)] + (fam.vowel_to,) + fam.trail
            entries.append(VerbEntry("".join(s), s, past, "irregular"))

    items = _make_nonce_items(spec, gen, presents)
    return entries, items


def _noisy_shares(gen: np.random.Generator, category: str,
                  n_irregulars: int) -> tuple[list[float], float]:
    """Suggested-form production shares from the noisy-rule process."""
    base_reg, base_irr, base_other = CATEGORY_WEIGHTS[category]
    weights = [base_reg]
    for j in range(n_irregulars):
        weights.append(base_irr / n_irregulars * (1.0 if j == 0 else 0.6))
    weights.append(base_other)
    noisy = [w * gen.gamma(8.0, 1.0 / 8.0) for w in weights]
    total = sum(noisy)
    shares = [w / total for w in noisy]
    return shares[:-1], shares[-1]


def _make_nonce_items(spec: SynthSpec, gen: np.random.Generator,
                      presents: set[PhonemeSequence]) -> list[NonceItem]:
    items = []
    counter = 0
    for category in CATEGORIES:
        for _ in range(spec.nonce_per_category):
            counter += 1
            item_id = f"nonce{counter:03d}"
            fam = spec.families[counter % len(spec.families)]
            if category in ("IOR-both", "IOR-irregular"):
                # Inside a family island: same vowel and trailing context.
                present = None
                for _ in range(1000):
                    cand = (_onset(gen, spec.max_onset) + (fam.vowel_from,)
                            + fam.trail)
                    if cand not in presents:
                        present = cand
                        break
                if present is None:
                    raise ValidationError("cannot draw fresh nonce stem")
                presents.add(present)
                irr1 = present[:-1 - len(fam.trail)] + (fam.vowel_to,) + fam.trail
                irregulars = [irr1]
                if category == "IOR-both":
                    other_vowel = next(v for v in VOWELS
                                       if v not in (fam.vowel_from, fam.vowel_to))
                    irregulars.append(
                        present[:-1 - len(fam.trail)] + (other_vowel,) + fam.trail)
            elif category == "burnt-like":
                present = _fresh_regularish(gen, spec, presents,
                                            final_pool=("n", "l"))
                irregulars = [present + ("t",)]
            else:
                final_pool = {"IOR-regular": CORONAL_STOPS,
                              "IOR-neither": ("z",),
                              "analogy": VOICELESS_CONS}[category]
                present = _fresh_regularish(gen, spec, presents, final_pool)
                swap = next(v for v in VOWELS if v != present[-2])
                irregulars = [present[:-2] + (swap, present[-1])]
            regular = present + regular_suffix(present[-1])
            shares, other_p = _noisy_shares(gen, category, len(irregulars))
            forms = [SuggestedForm("reg", regular, shares[0],
                                   _rating(gen, shares[0]))]
            for j, irr in enumerate(irregulars):
                forms.append(SuggestedForm(f"irr{j + 1}", irr, shares[j + 1],
                                           _rating(gen, shares[j + 1])))
            items.append(NonceItem(item_id, present, category,
                                   tuple(forms), other_p))
    return items


def _fresh_regularish(gen: np.random.Generator, spec: SynthSpec,
                      presents: set[PhonemeSequence],
                      final_pool) -> PhonemeSequence:
    for _ in range(1000):
        cand = (_onset(gen, spec.max_onset) + (str(gen.choice(VOWELS)),)
                + (str(gen.choice(list(final_pool))),))
        if cand not in presents:
            presents.add(cand)
            return cand
    raise ValidationError("cannot draw fresh nonce stem")


def _rating(gen: np.random.Generator, share: float) -> float:
    """Mean acceptability on a 1..7 scale, correlated with production."""
    r = 1.0 + 6.0 * share + gen.normal(0.0, 0.35)
    return float(min(7.0, max(1.0, round(r, 3))))
