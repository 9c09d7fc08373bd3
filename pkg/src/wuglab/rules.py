"""Minimal-generalization rule learner over phoneme strings.

Each (present, past) pair yields a word-specific change rule; one pass of
pairwise generalization within same-change groups abstracts shared
context into a variable plus literal residue.  A rule's confidence is a
lower confidence bound on its reliability (hits/scope), so narrow rules
with perfect records still score below 1 and broad reliable rules win.

This is a deliberately literal-context learner: no phonological feature
classes, and a single generalization pass rather than a closure to
fixpoint.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass
from statistics import NormalDist
from typing import Sequence

from .data import PhonemeSequence, VerbEntry
from .errors import ValidationError

LITERAL = "literal"
VARIABLE = "variable"

CONFIDENCE_LEVEL = 0.75


def _common_prefix(a: PhonemeSequence, b: PhonemeSequence) -> PhonemeSequence:
    n = 0
    for x, y in zip(a, b):
        if x != y:
            break
        n += 1
    return a[:n]


def _common_suffix(a: PhonemeSequence, b: PhonemeSequence) -> PhonemeSequence:
    n = 0
    for x, y in zip(reversed(a), reversed(b)):
        if x != y:
            break
        n += 1
    return a[len(a) - n:] if n else ()


@dataclass(frozen=True)
class Rule:
    """A context-conditioned string change.

    `left_kind` is "literal" (the left context is the exact prefix) or
    "variable" (arbitrary material X followed by the literal `left`).
    The right context is always literal and word-final.
    """

    change_from: PhonemeSequence
    change_to: PhonemeSequence
    left_kind: str
    left: PhonemeSequence
    right: PhonemeSequence
    scope: int = 1
    hits: int = 1
    confidence: float = 0.0

    def __post_init__(self):
        if self.left_kind not in (LITERAL, VARIABLE):
            raise ValidationError(f"bad left context kind: {self.left_kind!r}")
        if self.hits > self.scope or self.scope < 1:
            raise ValidationError(
                f"rule needs hits <= scope and scope >= 1,"
                f" got {self.hits}/{self.scope}")

    @property
    def key(self) -> tuple:
        return (self.change_from, self.change_to, self.left_kind, self.left,
                self.right)

    def matches(self, present: PhonemeSequence) -> bool:
        present = tuple(present)
        tail = self.left + self.change_from + self.right
        if self.left_kind == LITERAL:
            return present == tail
        if not tail:
            return True
        return len(present) >= len(tail) and present[-len(tail):] == tail

    def apply(self, present: PhonemeSequence) -> PhonemeSequence | None:
        if not self.matches(present):
            return None
        present = tuple(present)
        cut = len(present) - len(self.change_from) - len(self.right)
        head = present[:cut]
        return head + self.change_to + self.right

    def describe(self) -> str:
        def seg(s):
            return "/" + " ".join(s) + "/" if s else "/0/"

        left = seg(self.left) if self.left_kind == LITERAL else (
            "X " + seg(self.left) if self.left else "X")
        return (f"{seg(self.change_from)} -> {seg(self.change_to)}"
                f" in [{left} ___ {seg(self.right)}]")


@dataclass(frozen=True)
class RuleGrammar:
    rules: tuple[Rule, ...]
    corpus_fingerprint: str

    def __len__(self) -> int:
        return len(self.rules)


def word_rule(present: PhonemeSequence, past: PhonemeSequence) -> Rule:
    """Factor a pair as L.A.R / L.B.R with maximal literal L and R.

    Identical present and past give the identity rule (no-change pasts
    like hit-hit are legal).
    """
    present, past = tuple(present), tuple(past)
    if not present or not past:
        raise ValidationError("word_rule needs non-empty sequences")
    left = _common_prefix(present, past)
    rest_p, rest_q = present[len(left):], past[len(left):]
    right = _common_suffix(rest_p, rest_q)
    a = rest_p[:len(rest_p) - len(right)]
    b = rest_q[:len(rest_q) - len(right)]
    return Rule(a, b, LITERAL, left, right)


def generalize(r1: Rule, r2: Rule) -> Rule | None:
    """Merge two word rules with the same change into a variable-context
    rule: X plus the shared left-context suffix, and the shared
    right-context prefix.  Returns None on incompatible changes."""
    if (r1.change_from, r1.change_to) != (r2.change_from, r2.change_to):
        return None
    left = _common_suffix(r1.left, r2.left)
    right = _common_prefix(r1.right, r2.right)
    return Rule(r1.change_from, r1.change_to, VARIABLE, left, right)


def confidence_lower_bound(hits: int, scope: int,
                           level: float = CONFIDENCE_LEVEL) -> float:
    """Lower bound of the normal-approximation confidence interval on
    hits/scope, on the smoothed estimate (hits+0.5)/(scope+1) so perfect
    small-sample records stay below 1.  Floored at 0."""
    if not 0 <= hits <= scope or scope < 1:
        raise ValidationError(f"bad counts: {hits}/{scope}")
    z = NormalDist().inv_cdf((1.0 + level) / 2.0)
    p = (hits + 0.5) / (scope + 1.0)
    sigma = (p * (1.0 - p) / scope) ** 0.5
    return max(0.0, p - z * sigma)


def _score_rule(rule: Rule, presents: set[PhonemeSequence],
                attested: set[tuple[PhonemeSequence, PhonemeSequence]],
                level: float) -> Rule:
    scope = sum(1 for p in presents if rule.matches(p))
    hits = sum(1 for p in presents if (p, rule.apply(p)) in attested)
    if scope < 1:
        raise ValidationError(f"rule matches nothing: {rule.describe()}")
    conf = confidence_lower_bound(hits, scope, level)
    return Rule(rule.change_from, rule.change_to, rule.left_kind, rule.left,
                rule.right, scope, hits, conf)


def induce_grammar(corpus: Sequence[VerbEntry],
                   level: float = CONFIDENCE_LEVEL) -> RuleGrammar:
    """All word rules plus one pairwise generalization pass within
    same-change groups; scope and hits counted against the full corpus.

    Deterministic and order-independent: the result is a set keyed by
    (change, contexts), sorted for stable iteration.
    """
    if not corpus:
        raise ValidationError("empty corpus")
    word_rules: dict[tuple, Rule] = {}
    for e in corpus:
        r = word_rule(e.present, e.past)
        word_rules.setdefault(r.key, r)
    by_change: dict[tuple, list[Rule]] = {}
    for r in word_rules.values():
        by_change.setdefault((r.change_from, r.change_to), []).append(r)
    candidates: dict[tuple, Rule] = dict(word_rules)
    for group in by_change.values():
        group = sorted(group, key=lambda r: r.key)
        for r1, r2 in itertools.combinations(group, 2):
            g = generalize(r1, r2)
            if g is not None:
                candidates.setdefault(g.key, g)
    presents = {tuple(e.present) for e in corpus}
    attested = {(tuple(e.present), tuple(e.past)) for e in corpus}
    scored = [_score_rule(r, presents, attested, level)
              for r in candidates.values()]
    scored.sort(key=lambda r: r.key)
    digest = hashlib.sha256(
        repr(sorted((e.present, e.past) for e in corpus)).encode()
    ).hexdigest()[:16]
    return RuleGrammar(tuple(scored), digest)


def score_form(grammar: RuleGrammar, present: PhonemeSequence,
               candidate: PhonemeSequence) -> float:
    """Best confidence among rules that match `present` and whose change
    produces exactly `candidate`; 0.0 when no rule produces it.  Scores
    are unnormalized: rank-comparable, not probabilities."""
    candidate = tuple(candidate)
    best = 0.0
    for rule in grammar.rules:
        if rule.confidence > best and rule.apply(present) == candidate:
            best = rule.confidence
    return best


def format_grammar(grammar: RuleGrammar) -> str:
    """Human-readable table: change, contexts, scope, hits, confidence."""
    lines = ["# rule\tscope\thits\tconfidence",
             f"# corpus fingerprint: {grammar.corpus_fingerprint}"]
    ordered = sorted(grammar.rules, key=lambda r: -r.confidence)
    for r in ordered:
        lines.append(f"{r.describe()}\t{r.scope}\t{r.hits}\t{r.confidence:.6f}")
    return "\n".join(lines) + "\n"
