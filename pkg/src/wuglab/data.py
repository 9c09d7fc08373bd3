"""Corpus and nonce-item schemas plus their tab-separated loaders.

Loaders reject rather than repair: any malformed line raises with the
file and line number.  Phonemes are whitespace-delimited tokens within a
tab-separated field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DataFormatError, ValidationError

PhonemeSequence = tuple[str, ...]

VERB_CLASSES = ("regular", "irregular")
FORM_ROLES = ("reg", "irr1", "irr2")
CATEGORIES = (
    "IOR-regular",
    "IOR-both",
    "IOR-irregular",
    "IOR-neither",
    "burnt-like",
    "analogy",
)
FREQ_MODES = ("type", "token", "log-token")

PROB_TOL = 1e-6


@dataclass(frozen=True)
class VerbEntry:
    lemma: str
    present: PhonemeSequence
    past: PhonemeSequence
    verb_class: str
    frequency: int | None = None

    def __post_init__(self):
        if not self.present or not self.past:
            raise ValidationError(f"empty phoneme sequence for {self.lemma!r}")
        if self.verb_class not in VERB_CLASSES:
            raise ValidationError(f"unknown verb class: {self.verb_class!r}")
        if self.frequency is not None and self.frequency < 1:
            raise ValidationError(
                f"frequency must be >= 1, got {self.frequency} for {self.lemma!r}"
            )


@dataclass(frozen=True)
class SuggestedForm:
    role: str
    phonemes: PhonemeSequence
    production_p: float
    rating: float | None = None

    @property
    def orthography(self) -> str:
        # No spelling column in the data files; display the phoneme string.
        return "".join(self.phonemes)

    @property
    def is_regular(self) -> bool:
        return self.role == "reg"


@dataclass(frozen=True)
class NonceItem:
    item_id: str
    present: PhonemeSequence
    category: str
    forms: tuple[SuggestedForm, ...]
    other_p: float

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValidationError(
                f"unknown category {self.category!r} for item {self.item_id!r}"
            )
        # suggested forms may be empty (a model can produce the empty
        # string); the present form cannot
        if not self.present:
            raise ValidationError(
                f"item {self.item_id!r} has an empty present form")
        regs = [f for f in self.forms if f.is_regular]
        irrs = [f for f in self.forms if not f.is_regular]
        if len(regs) != 1:
            raise ValidationError(
                f"item {self.item_id!r} needs exactly one regular form"
            )
        if not 1 <= len(irrs) <= 2:
            raise ValidationError(
                f"item {self.item_id!r} needs one or two irregular forms"
            )
        total = sum(f.production_p for f in self.forms) + self.other_p
        if abs(total - 1.0) > PROB_TOL:
            raise ValidationError(
                f"item {self.item_id!r}: production probabilities sum to"
                f" {total:.8f}, expected 1"
            )

    @property
    def regular(self) -> SuggestedForm:
        return next(f for f in self.forms if f.is_regular)

    @property
    def irregulars(self) -> tuple[SuggestedForm, ...]:
        return tuple(f for f in self.forms if not f.is_regular)

    @property
    def has_ratings(self) -> bool:
        return all(f.rating is not None for f in self.forms)


def _tokens(field: str) -> PhonemeSequence:
    return tuple(field.split())


def load_corpus(path, freq_mode: str = "type") -> list[VerbEntry]:
    """Read a verb paradigm file.

    Columns: lemma TAB present phonemes TAB past phonemes TAB class
    [TAB frequency].  Duplicate (present, past) types are collapsed to a
    single entry (their frequencies summed); multiplicity for the token
    and log-token training variants is applied later by `expand_corpus`.
    """
    if freq_mode not in FREQ_MODES:
        raise ValidationError(f"unknown frequency mode: {freq_mode!r}")
    path = Path(path)
    entries: dict[tuple[PhonemeSequence, PhonemeSequence], VerbEntry] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) not in (4, 5):
                raise DataFormatError(
                    f"expected 4 or 5 tab-separated fields, got {len(fields)}",
                    path, lineno)
            lemma, present_f, past_f, cls = fields[:4]
            if cls not in VERB_CLASSES:
                raise DataFormatError(
                    f"unknown class label {cls!r}", path, lineno)
            freq = None
            if len(fields) == 5 and fields[4] != "":
                try:
                    freq = int(fields[4])
                except ValueError:
                    raise DataFormatError(
                        f"bad frequency {fields[4]!r}", path, lineno) from None
            if freq_mode != "type" and freq is None:
                raise DataFormatError(
                    f"frequency column required in {freq_mode!r} mode",
                    path, lineno)
            try:
                entry = VerbEntry(lemma, _tokens(present_f), _tokens(past_f),
                                  cls, freq)
            except ValidationError as e:
                raise DataFormatError(str(e), path, lineno) from None
            key = (entry.present, entry.past)
            prev = entries.get(key)
            if prev is None:
                entries[key] = entry
            else:
                merged = None
                if prev.frequency is not None or entry.frequency is not None:
                    merged = (prev.frequency or 0) + (entry.frequency or 0)
                entries[key] = VerbEntry(prev.lemma, prev.present, prev.past,
                                         prev.verb_class, merged)
    if not entries:
        raise DataFormatError("empty corpus", path)
    return list(entries.values())


def multiplicity(entry: VerbEntry, freq_mode: str) -> int:
    """How many times an entry occurs in one training epoch."""
    if freq_mode == "type":
        return 1
    if entry.frequency is None:
        raise ValidationError(
            f"{entry.lemma!r} has no frequency but mode is {freq_mode!r}")
    if freq_mode == "token":
        return entry.frequency
    if freq_mode == "log-token":
        return max(1, round(math.log(entry.frequency)))
    raise ValidationError(f"unknown frequency mode: {freq_mode!r}")


def expand_corpus(entries: Sequence[VerbEntry],
                  freq_mode: str = "type") -> list[VerbEntry]:
    """Expand entries into the epoch stream with per-mode multiplicities."""
    out: list[VerbEntry] = []
    for e in entries:
        out.extend([e] * multiplicity(e, freq_mode))
    return out


def load_nonce(path) -> list[NonceItem]:
    """Read a nonce-item file.

    Columns: item id TAB present phonemes TAB category, then for each
    suggested form a group of four fields: role (reg/irr1/irr2) TAB
    phonemes TAB production probability TAB rating (empty if absent),
    and one trailing "other" production probability.
    """
    path = Path(path)
    items: list[NonceItem] = []
    seen: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) < 12 or (len(fields) - 4) % 4 != 0:
                raise DataFormatError(
                    f"expected 3 + 4*k + 1 fields (k forms), got {len(fields)}",
                    path, lineno)
            item_id, present_f, category = fields[:3]
            n_forms = (len(fields) - 4) // 4
            forms = []
            for k in range(n_forms):
                role, ph, prob_f, rating_f = fields[3 + 4 * k: 7 + 4 * k]
                if role not in FORM_ROLES:
                    raise DataFormatError(f"unknown form role {role!r}",
                                          path, lineno)
                try:
                    prob = float(prob_f)
                    rating = float(rating_f) if rating_f != "" else None
                except ValueError:
                    raise DataFormatError(
                        f"bad number in form {role!r}", path, lineno) from None
                if not 0.0 <= prob <= 1.0:
                    raise DataFormatError(
                        f"production probability out of [0,1]: {prob}",
                        path, lineno)
                forms.append(SuggestedForm(role, _tokens(ph), prob, rating))
            try:
                other_p = float(fields[-1])
            except ValueError:
                raise DataFormatError(
                    f"bad other-probability {fields[-1]!r}", path,
                    lineno) from None
            if item_id in seen:
                raise DataFormatError(f"duplicate item id {item_id!r}",
                                      path, lineno)
            seen.add(item_id)
            try:
                items.append(NonceItem(item_id, _tokens(present_f), category,
                                       tuple(forms), other_p))
            except ValidationError as e:
                raise DataFormatError(str(e), path, lineno) from None
    if not items:
        raise DataFormatError("empty nonce file", path)
    return items


def write_corpus(path, entries: Iterable[VerbEntry]) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for e in entries:
            fields = [e.lemma, " ".join(e.present), " ".join(e.past),
                      e.verb_class]
            if e.frequency is not None:
                fields.append(str(e.frequency))
            fh.write("\t".join(fields) + "\n")


def write_nonce(path, items: Iterable[NonceItem]) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for it in items:
            fields = [it.item_id, " ".join(it.present), it.category]
            for f in it.forms:
                fields += [f.role, " ".join(f.phonemes),
                           repr(f.production_p),
                           "" if f.rating is None else repr(f.rating)]
            fields.append(repr(it.other_p))
            fh.write("\t".join(fields) + "\n")
