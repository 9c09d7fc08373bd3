"""Correlation measures against naive O(n^2) oracles, plus the CR@5,
second-place, and category-mean machinery on hand fixtures."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wuglab.data import NonceItem, SuggestedForm
from wuglab.decode import BeamHypothesis, BeamResult
from wuglab.errors import ValidationError
from wuglab.metrics import (average_ranks, category_means, correlate_forms,
                            cr_at_5, human_production_shares, pearson,
                            second_place_agreement, spearman)


def naive_ranks(values):
    """O(n^2) average ranks: 1 + (# smaller) + (# equal others)/2."""
    out = []
    for i, v in enumerate(values):
        smaller = sum(1 for w in values if w < v)
        equal = sum(1 for j, w in enumerate(values) if w == v and j != i)
        out.append(1.0 + smaller + equal / 2.0)
    return np.array(out)


def naive_pearson(x, y):
    n = len(x)
    mx, my = sum(x) / n, sum(y) / n
    num = sum((a - mx) * (b - my) for a, b in zip(x, y))
    den = (sum((a - mx) ** 2 for a in x) * sum((b - my) ** 2 for b in y)) ** 0.5
    return None if den == 0 else num / den


def naive_spearman(x, y):
    return naive_pearson(list(naive_ranks(x)), list(naive_ranks(y)))


class TestRankCorrelations:
    def test_identity_is_one(self):
        assert spearman([1, 2, 3, 4], [1, 2, 3, 4]) == pytest.approx(1.0)

    def test_reversal_is_minus_one(self):
        assert spearman([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)

    def test_pearson_affine(self):
        x = [0.2, 1.4, -0.5, 2.2]
        assert pearson(x, [2 * v + 1 for v in x]) == pytest.approx(1.0)
        assert pearson(x, [-v for v in x]) == pytest.approx(-1.0)

    def test_matches_naive_oracle_with_ties(self):
        rng = np.random.default_rng(0)
        for _ in range(300):
            n = rng.integers(3, 11)
            # small integer grid forces ties
            x = rng.integers(0, 4, size=n).astype(float)
            y = rng.integers(0, 4, size=n).astype(float)
            np.testing.assert_array_equal(average_ranks(x), naive_ranks(x))
            expected = naive_spearman(list(x), list(y))
            got = spearman(x, y)
            if expected is None:
                assert got is None
            else:
                assert got == pytest.approx(expected, abs=1e-12)
            expected_r = naive_pearson(list(x), list(y))
            got_r = pearson(x, y)
            if expected_r is None:
                assert got_r is None
            else:
                assert got_r == pytest.approx(expected_r, abs=1e-12)

    def test_zero_variance_reported_undefined(self):
        assert spearman([1.0, 1.0, 1.0], [1, 2, 3]) is None
        assert pearson([1, 2, 3], [5.0, 5.0, 5.0]) is None

    def test_short_input_rejected(self):
        with pytest.raises(ValidationError):
            spearman([1, 2], [3, 4])

    # integer grids scaled to floats: distinct values stay distinct under
    # the transforms (hypothesis otherwise finds denormals that collapse)
    _vectors = st.lists(st.integers(-500, 500), min_size=3, max_size=9,
                        unique=True).map(lambda xs: [v / 10.0 for v in xs])

    @settings(max_examples=60, deadline=None)
    @given(_vectors, st.floats(0.1, 4.0), st.floats(0.1, 5.0))
    def test_spearman_monotone_invariance(self, x, a, b):
        y = list(reversed(x))
        base = spearman(x, y)
        # a*v^3 + b*v with a,b > 0 is strictly increasing
        transformed = [a * v ** 3 + b * v for v in x]
        assert spearman(transformed, y) == pytest.approx(base, abs=1e-9)

    @settings(max_examples=60, deadline=None)
    @given(_vectors, st.floats(0.1, 4.0), st.floats(-5.0, 5.0))
    def test_pearson_affine_invariance(self, x, a, b):
        y = [((i * 37) % 11) - 5.0 for i in range(len(x))]
        base = pearson(x, y)
        if base is None:
            return
        assert pearson([a * v + b for v in x], y) == pytest.approx(
            base, abs=1e-9)


def make_item(item_id, category="IOR-regular", reg_p=0.7, irr_ps=(0.2,),
              ratings=None):
    forms = [SuggestedForm("reg", (item_id, "d"), reg_p,
                           None if ratings is None else ratings[0])]
    for j, p in enumerate(irr_ps):
        forms.append(SuggestedForm(f"irr{j + 1}", (item_id, f"i{j}"), p,
                                   None if ratings is None else ratings[j + 1]))
    other = 1.0 - reg_p - sum(irr_ps)
    return NonceItem(item_id, (item_id,), category, tuple(forms), other)


class TestCorrelateForms:
    def test_scores_equal_to_humans_give_rho_one(self):
        items = [make_item("a", reg_p=0.9, irr_ps=(0.05,)),
                 make_item("b", reg_p=0.7, irr_ps=(0.2,)),
                 make_item("c", reg_p=0.5, irr_ps=(0.4,))]
        scores = {(i.item_id, f.phonemes): f.production_p
                  for i in items for f in i.forms}
        rep = correlate_forms(items, scores)
        assert rep.regular_value == pytest.approx(1.0)
        assert rep.irregular_value == pytest.approx(1.0)
        assert rep.n_regular == 3 and rep.n_irregular == 3

    def test_three_item_hand_ranked_fixture(self):
        items = [make_item("a", reg_p=0.8, irr_ps=(0.1,)),
                 make_item("b", reg_p=0.6, irr_ps=(0.3,)),
                 make_item("c", reg_p=0.5, irr_ps=(0.2,))]
        # model ranks regulars b < c < a where humans have c < b < a:
        # rank vectors (3,1,2) vs (3,2,1) -> rho = 1 - 6*(0+1+1)/ (3*8) = 0.5
        scores = {("a", ("a", "d")): 0.9, ("b", ("b", "d")): 0.2,
                  ("c", ("c", "d")): 0.4,
                  # irregulars tie the human order exactly
                  ("a", ("a", "i0")): 0.01, ("b", ("b", "i0")): 0.3,
                  ("c", ("c", "i0")): 0.15}
        rep = correlate_forms(items, scores)
        assert rep.regular_value == pytest.approx(0.5, abs=1e-12)
        assert rep.irregular_value == pytest.approx(1.0)

    def test_pools_are_disjoint(self):
        items = [make_item(x, irr_ps=(0.2, 0.05), reg_p=0.7)
                 for x in ("a", "b", "c")]
        scores = {(i.item_id, f.phonemes): 0.1 * k
                  for i in items for k, f in enumerate(i.forms, 1)}
        rep = correlate_forms(items, scores)
        assert rep.n_regular == 3
        assert rep.n_irregular == 6       # first and second pooled together
        assert rep.n_regular + rep.n_irregular == sum(
            len(i.forms) for i in items)

    def test_missing_score_names_item_and_form(self):
        items = [make_item("a"), make_item("b"), make_item("c")]
        scores = {(i.item_id, f.phonemes): 0.5
                  for i in items for f in i.forms}
        del scores[("b", ("b", "i0"))]
        with pytest.raises(ValidationError, match="b"):
            correlate_forms(items, scores)

    def test_rating_target_requires_ratings(self):
        items = [make_item("a"), make_item("b"), make_item("c")]
        scores = {(i.item_id, f.phonemes): 0.5
                  for i in items for f in i.forms}
        with pytest.raises(ValidationError, match="rating"):
            correlate_forms(items, scores, target="rating")

    def test_rating_target_works_when_present(self):
        items = [make_item("a", reg_p=0.9, irr_ps=(0.05,), ratings=(6.0, 2.0)),
                 make_item("b", reg_p=0.7, irr_ps=(0.2,), ratings=(5.0, 3.0)),
                 make_item("c", reg_p=0.5, irr_ps=(0.4,), ratings=(4.0, 3.5))]
        scores = {(i.item_id, f.phonemes): f.rating
                  for i in items for f in i.forms}
        rep = correlate_forms(items, scores, measure="pearson",
                              target="rating")
        assert rep.regular_value == pytest.approx(1.0)
        assert rep.irregular_value == pytest.approx(1.0)


def beam_of(present, *entries):
    hyps = tuple(BeamHypothesis(tuple(ph.split()), lp, True)
                 for ph, lp in entries)
    return BeamResult(tuple(present.split()), hyps)


class TestCr5:
    def table1_fixture(self):
        """The two-verb beams with bolded suggested forms: the first verb
        misses one suggested form from its top 5, the second has all."""
        nold = make_item("nold", reg_p=0.6, irr_ps=(0.2, 0.1))
        nold = NonceItem("nold", ("n", '"oU', "l", "d"), "IOR-both", (
            SuggestedForm("reg", ("n", '"oU', "l", "d", "@", "d"), 0.6, None),
            SuggestedForm("irr1", ("n", '"oU', "l", "d"), 0.2, None),
            SuggestedForm("irr2", ("n", '"E', "l", "d"), 0.1, None),
        ), 0.1)
        murn = NonceItem("murn", ("m", '"@', "r", "n"), "burnt-like", (
            SuggestedForm("reg", ("m", '"@', "r", "n", "d"), 0.7, None),
            SuggestedForm("irr1", ("m", '"@', "r", "n", "t"), 0.2, None),
        ), 0.1)
        beams = {
            "nold": beam_of('n "oU l d',
                            ('n "oU l d @ d', np.log(.9869)),
                            ('n "E l t', np.log(.0120)),
                            ('n i: l d @ d', np.log(.0004)),
                            ('n "E l d @ d', np.log(.0004)),
                            ('n "E l d', np.log(.0001)),
                            ('n u: d', np.log(.00001))),
            "murn": beam_of('m "@ r n',
                            ('m "@ r n d', np.log(.8636)),
                            ('m "@ r n t', np.log(.1363)),
                            ('m "@ r n', np.log(.00004)),
                            ('m "@ r n eI d', np.log(.00003)),
                            ('m "@ r n u:', np.log(.00002))),
        }
        return [nold, murn], beams

    def test_table1_two_verb_fixture_is_half(self):
        items, beams = self.table1_fixture()
        rep = cr_at_5(items, beams)
        assert rep.value == 0.5
        flags = dict(rep.item_flags)
        # nold: suggested no-change form sits outside the top five
        assert flags["nold"] is False
        assert flags["murn"] is True

    def test_all_suggested_in_beam_gives_one(self):
        items = [make_item("a"), make_item("b")]
        beams = {
            i.item_id: beam_of(i.item_id,
                               *[(" ".join(f.phonemes), -0.1 * k)
                                 for k, f in enumerate(i.forms)],
                               ("x y z", -9.0))
            for i in items
        }
        assert cr_at_5(items, beams).value == 1.0

    def test_invariant_to_order_below_rank_five(self):
        items, beams = self.table1_fixture()
        base = cr_at_5(items, beams)
        shuffled = dict(beams)
        hyps = list(shuffled["nold"].hypotheses)
        hyps[5:] = reversed(hyps[5:])
        shuffled["nold"] = BeamResult(shuffled["nold"].present, tuple(hyps))
        assert cr_at_5(items, shuffled).value == base.value

    def test_invariant_to_probability_values(self):
        items, beams = self.table1_fixture()
        rescaled = {
            key: BeamResult(b.present, tuple(
                BeamHypothesis(h.phonemes, h.log_prob * 3 - 1, h.terminated)
                for h in b.hypotheses))
            for key, b in beams.items()
        }
        assert cr_at_5(items, rescaled).value == cr_at_5(items, beams).value

    def test_aggregate_is_mean_of_flags(self):
        items, beams = self.table1_fixture()
        rep = cr_at_5(items, beams)
        assert rep.value == sum(ok for _, ok in rep.item_flags) / rep.n_items


class TestSecondPlace:
    def test_identical_models_count_all_seeds(self):
        items = [make_item("a"), make_item("b")]
        beams = {i.item_id: beam_of(i.item_id, ("p q", -0.1), ("r s", -0.5))
                 for i in items}
        counts = second_place_agreement({1: beams, 2: beams, 3: beams})
        assert set(counts.values()) == {3}
        assert sum(counts.values()) == 3 * len(items)

    def test_disjoint_second_choices_count_one(self):
        def beams(second):
            return {"a": beam_of("a", ("top form", -0.1), (second, -0.9))}

        counts = second_place_agreement({1: beams("x x"), 2: beams("y y")})
        assert set(counts.values()) == {1}
        assert len(counts) == 2

    def test_requires_two_seeds_and_shared_items(self):
        beams = {"a": beam_of("a", ("x", -0.1), ("y", -0.2))}
        with pytest.raises(ValidationError):
            second_place_agreement({1: beams})
        other = {"b": beam_of("b", ("x", -0.1), ("y", -0.2))}
        with pytest.raises(ValidationError):
            second_place_agreement({1: beams, 2: other})


class TestCategoryMeans:
    def test_all_regular_productions_mean_one(self):
        items = [make_item(f"i{k}", category=cat, reg_p=0.7, irr_ps=(0.2,))
                 for k, cat in enumerate(
                     ("IOR-regular", "IOR-both", "IOR-irregular",
                      "IOR-neither", "burnt-like", "analogy"))]
        shares = {i.item_id: {"reg": 1.0, "irr1": 0.0, "other": 0.0}
                  for i in items}
        means = category_means(items, shares)
        assert len(means) == 6
        assert all(m.regular_mean == 1.0 for m in means)
        assert all(m.irregular_mean == 0.0 for m in means)

    def test_single_item_category_mean_is_value(self):
        items = [make_item("only", category="analogy", reg_p=0.55,
                           irr_ps=(0.3,))]
        with pytest.warns(UserWarning):   # five categories are empty
            means = category_means(items, human_production_shares(items))
        assert len(means) == 1
        assert means[0].category == "analogy"
        assert means[0].regular_mean == pytest.approx(0.55)
        assert means[0].irregular_mean == pytest.approx(0.3)

    def test_hand_built_six_item_fixture(self):
        items = [
            make_item("a", category="IOR-regular", reg_p=0.8, irr_ps=(0.1,)),
            make_item("b", category="IOR-regular", reg_p=0.6, irr_ps=(0.2,)),
            make_item("c", category="IOR-both", reg_p=0.5, irr_ps=(0.3, 0.1)),
            make_item("d", category="IOR-both", reg_p=0.7, irr_ps=(0.1, 0.1)),
            make_item("e", category="burnt-like", reg_p=0.4, irr_ps=(0.5,)),
            make_item("f", category="burnt-like", reg_p=0.6, irr_ps=(0.3,)),
        ]
        shares = human_production_shares(items)
        with pytest.warns(UserWarning):   # three categories are empty
            means = {m.category: m for m in category_means(items, shares)}
        assert means["IOR-regular"].regular_mean == pytest.approx(0.7)
        assert means["IOR-regular"].irregular_mean == pytest.approx(0.15)
        # irregular share per item is the SUM of its suggested irregulars
        assert means["IOR-both"].regular_mean == pytest.approx(0.6)
        assert means["IOR-both"].irregular_mean == pytest.approx(0.3)
        assert means["burnt-like"].irregular_mean == pytest.approx(0.4)
