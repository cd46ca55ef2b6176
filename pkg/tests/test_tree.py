import itertools
import math
import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from htkoop.tree import (
    Automaton,
    BernoulliWeights,
    CylinderFunction,
    Portrait,
    act_word,
    activity,
    activity_profile,
    compose,
    element_from_dict,
    element_to_dict,
    grigorchuk,
    koopman_inner_cylinders,
    level_permutation,
    level_transitive_check,
    load_element,
    parse_word,
    rn_on_cylinder,
    subexp_report,
    support_in_subtree,
    to_automaton,
)

G = grigorchuk()
GENS = [G[x] for x in "abcd"]
P13 = BernoulliWeights((F(1, 3), F(2, 3)))

# hand-written wreath recursion, independent of the Automaton class
RECURSION = {"e": ("e", "e"), "a": ("e", "e"), "b": ("a", "c"), "c": ("a", "d"), "d": ("e", "b")}
SWAPS = {"a"}


def oracle_act(name, word):
    out = []
    for x in word:
        out.append(1 - x if name in SWAPS else x)
        name = RECURSION[name][x]
    return tuple(out), name


def oracle_activity(name, n):
    level = [name]
    for _ in range(n):
        level = [RECURSION[s][x] for s in level for x in (0, 1)]
    return sum(1 for s in level if s != "e")


def random_portrait(d, depth, rng):
    if depth == 0 or rng.random() < 0.25:
        return None
    perm = list(range(d))
    rng.shuffle(perm)
    return Portrait(d, tuple(perm), tuple(random_portrait(d, depth - 1, rng) for _ in range(d)))


def portrait_or_identity(d, depth, rng):
    p = random_portrait(d, depth, rng)
    return p if p is not None else Portrait.identity(d)


def random_automaton(d, k, rng):
    perms = []
    for _ in range(k):
        p = list(range(d))
        rng.shuffle(p)
        perms.append(tuple(p))
    succ = [tuple(rng.randrange(k) for _ in range(d)) for _ in range(k)]
    return Automaton(d, tuple(perms), tuple(succ)).state(0)


def all_words(d, n):
    return itertools.product(range(d), repeat=n)


# act_word -----------------------------------------------------------------------


def test_act_word_examples():
    assert act_word(G["e"], parse_word("1212", 2)) == (parse_word("1212", 2), G["e"])
    image, sec = act_word(G["a"], parse_word("12", 2))
    assert image == parse_word("22", 2) and sec.is_trivial()
    image, sec = act_word(G["b"], parse_word("1", 2))
    assert image == parse_word("1", 2) and sec == G["a"]


@pytest.mark.parametrize("name", "abcd")
def test_act_word_matches_recursion(name):
    for n in range(1, 9):
        for w in all_words(2, n):
            image, sec = act_word(G[name], w)
            exp_image, exp_name = oracle_act(name, w)
            assert image == exp_image and sec == G[exp_name]


def test_parse_word_errors():
    assert parse_word("root", 3) == ()
    with pytest.raises(ValueError):
        parse_word("13", 2)
    with pytest.raises(ValueError):
        parse_word("1x", 2)


# activity ------------------------------------------------------------------------


def test_activity_examples():
    assert activity(G["e"], 5) == 0
    assert activity(G["a"], 1) == 0
    assert activity(G["b"], 1) == 2
    assert activity(G["b"], 3) == 1
    assert activity(G["b"], 0) == 1
    with pytest.raises(ValueError):
        activity(G["b"], -1)


@pytest.mark.parametrize("name", "abcd")
def test_activity_matches_recursion(name):
    prof = activity_profile(G[name], 14)
    assert prof == [oracle_activity(name, n) for n in range(15)]
    assert all(activity(G[name], n) == prof[n] for n in range(15))


def test_grigorchuk_bounded():
    for g in GENS:
        assert max(activity_profile(g, 20)) <= 2


def test_subexp_report():
    rep = subexp_report(G["b"], 20, F(1, 2))
    assert rep.max_activity == 2 and rep.bounded_on_range
    assert [k for _, k, _ in rep.rows][:3] == [2, 2, 1]
    assert all(w == k * F(1, 2) ** n for n, k, w in rep.rows)
    rep = subexp_report(G["e"], 10, F(9, 10))
    assert rep.max_activity == 0
    with pytest.raises(ValueError):
        subexp_report(G["b"], 5, 1)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 5))
def test_finitary_activity_vanishes_below_depth(seed, depth):
    p = portrait_or_identity(3, depth, random.Random(seed))
    assert p.depth <= depth
    assert all(activity(p, n) == 0 for n in range(p.depth, p.depth + 3))
    if p.depth:
        assert activity(p, p.depth - 1) > 0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 3))
def test_activity_subadditive(seed, d):
    rng = random.Random(seed)
    g, h = random_automaton(d, 4, rng), random_automaton(d, 4, rng)
    gh = compose(g, h)
    for n in range(6):
        bound = 0
        for w in all_words(d, n):
            hw, hs = act_word(h, w)
            _, gs = act_word(g, hw)
            bound += (not hs.is_trivial()) or (not gs.is_trivial())
        assert activity(gh, n) <= bound


# composition ----------------------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 3))
def test_composition_consistency(seed, d):
    rng = random.Random(seed)
    g, h = random_automaton(d, 5, rng), random_automaton(d, 5, rng)
    gh = compose(g, h)
    for _ in range(20):
        w = tuple(rng.randrange(d) for _ in range(rng.randint(0, 12)))
        hw, hs = act_word(h, w)
        ghw, gs = act_word(g, hw)
        image, sec = act_word(gh, w)
        assert image == ghw
        # sections compose: (gh)|_w = g|_{h(w)} h|_w, compared on further words
        v = tuple(rng.randrange(d) for _ in range(6))
        assert act_word(sec, v)[0] == act_word(gs, act_word(hs, v)[0])[0]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_portrait_composition_and_conversion(seed):
    rng = random.Random(seed)
    g, h = portrait_or_identity(2, 4, rng), portrait_or_identity(2, 4, rng)
    gh = compose(g, h)
    assert isinstance(gh, Portrait)
    ga = to_automaton(g)
    assert ga.machine.is_finitary(ga.sid)
    for w in all_words(2, 6):
        assert act_word(gh, w)[0] == act_word(g, act_word(h, w)[0])[0]
        assert act_word(ga, w)[0] == act_word(g, w)[0]
        assert act_word(compose(ga, h), w)[0] == act_word(gh, w)[0]


def test_grigorchuk_relations():
    a, b, c, d = GENS
    for x in GENS:
        assert compose(x, x).is_trivial()
    assert all(act_word(compose(b, c), w)[0] == act_word(d, w)[0] for w in all_words(2, 10))
    assert not G["b"].machine.is_finitary(G["b"].sid)


# measures ---------------------------------------------------------------------------


def test_rn_examples():
    assert rn_on_cylinder(G["e"], parse_word("121", 2), P13) == 1
    assert rn_on_cylinder(G["a"], parse_word("1", 2), P13) == 2
    assert rn_on_cylinder(G["b"], parse_word("1", 2), P13) == 1
    assert rn_on_cylinder(G["b"], parse_word("1", 2), BernoulliWeights((F(1, 5), F(4, 5)))) == 1


def test_bernoulli_validation():
    with pytest.raises(ValueError):
        BernoulliWeights((F(1, 2), F(1, 3)))
    with pytest.raises(ValueError):
        BernoulliWeights((F(0), F(1)))
    assert BernoulliWeights.parse("1/3,2/3").distinct
    assert not BernoulliWeights.parse("1/2,1/2").distinct


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([2, 3]))
def test_pushforward_mass(seed, d):
    rng = random.Random(seed)
    raw = [rng.randint(1, 9) for _ in range(d)]
    p = BernoulliWeights(tuple(F(x, sum(raw)) for x in raw))
    g = portrait_or_identity(d, 8 if d == 2 else 5, rng)
    for level in {g.depth, g.depth + 1}:
        total = sum(rn_on_cylinder(g, w, p) * p.cylinder(w) for w in all_words(d, level))
        assert total == 1


# Koopman inner products -----------------------------------------------------------------


def test_koopman_examples():
    one = CylinderFunction.one()
    assert koopman_inner_cylinders(G["e"], P13, one, one, 0).as_tuple() == (1.0, 0.0)
    est = koopman_inner_cylinders(G["a"], P13, one, one, 5)
    assert est.value == pytest.approx(2 * math.sqrt(2) / 3, abs=1e-12)
    assert est.unresolved_bound == 0
    with pytest.raises(ValueError):
        koopman_inner_cylinders(G["a"], P13, CylinderFunction.parse("12", 2), one, 1)


def test_koopman_cylinder_example():
    # a maps C_1 onto C_2: <kappa(a) 1_{C_1}, 1_{C_2}> = integral over C_1 of sqrt(p2/p1) = sqrt(p1 p2)
    xi = CylinderFunction.parse("1", 2)
    eta = CylinderFunction.parse("2", 2)
    est = koopman_inner_cylinders(G["a"], P13, xi, eta, 3)
    assert est.value == pytest.approx(math.sqrt(2) / 3, abs=1e-15)
    assert koopman_inner_cylinders(G["a"], P13, xi, xi, 3).value == 0


def bounded_elements():
    a, b, c, d = GENS
    return [a, b, c, d, compose(a, b), compose(compose(a, b), compose(a, c)), compose(d, compose(a, d))]


@pytest.mark.parametrize("idx", range(7))
def test_koopman_bound_honest(idx):
    g = bounded_elements()[idx]
    xi = CylinderFunction.parse("1:2,21:-1,122", 2)
    eta = CylinderFunction.parse("root,11:3", 2)
    ests = [koopman_inner_cylinders(g, P13, xi, eta, D) for D in range(3, 13)]
    for e0, e2 in zip(ests, ests[2:]):
        assert abs(e0.value - e2.value) <= e0.unresolved_bound


def test_koopman_unitary_on_resolved_portrait(rng):
    # for finitary g, <kappa(g) 1, kappa(g) 1> = 1 is the statement sum sqrt(ratio)^2 * mu = 1
    g = portrait_or_identity(2, 6, rng)
    one = CylinderFunction.one()
    est = koopman_inner_cylinders(g, P13, one, one, g.depth)
    assert est.unresolved_bound == 0
    assert sum(r * w for r, w in est.exact_terms.items()) == 1


# supports and transitivity ------------------------------------------------------------


def test_support_examples():
    assert support_in_subtree(G["e"], parse_word("12", 2))
    assert support_in_subtree(G["a"], ())
    assert not support_in_subtree(G["a"], parse_word("1", 2))
    swap = Portrait(2, (1, 0))
    h = Portrait(2, (0, 1), (Portrait(2, (0, 1), (None, swap)), None))  # supported on T_"12"
    assert support_in_subtree(h, parse_word("12", 2))
    assert support_in_subtree(h, parse_word("1", 2))
    assert not support_in_subtree(h, parse_word("2", 2))
    assert not support_in_subtree(h, parse_word("11", 2))
    # d = (1, b) is supported on T_"2"
    assert support_in_subtree(G["d"], parse_word("2", 2))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_support_matches_brute_force(seed):
    rng = random.Random(seed)
    g = portrait_or_identity(2, 4, rng)
    for n in range(3):
        for v in all_words(2, n):
            brute = True
            for w in all_words(2, 5):
                if w[:n] != v and act_word(g, w)[0] != w:
                    brute = False
            assert support_in_subtree(g, v) == brute


def test_level_permutation_matches_act_word():
    for g in GENS:
        perm = level_permutation(g, 6)
        for i, w in enumerate(all_words(2, 6)):
            image = act_word(g, w)[0]
            assert perm[i] == int("".join(map(str, image)), 2)


def test_transitivity_examples():
    assert all(level_transitive_check(GENS, n) for n in range(1, 9))
    assert not level_transitive_check([G["e"]], 1)
    assert level_transitive_check([G["a"]], 1)
    assert not level_transitive_check([G["a"]], 2)
    assert not level_transitive_check([G["b"], G["c"], G["d"]], 3)


def test_transitivity_orbit_oracle():
    # exhaustive orbit by closing words under the generators one step at a time
    for n in range(1, 6):
        orbit = {(0,) * n}
        frontier = list(orbit)
        while frontier:
            w = frontier.pop()
            for g in GENS:
                image = act_word(g, w)[0]
                if image not in orbit:
                    orbit.add(image)
                    frontier.append(image)
        assert (len(orbit) == 2**n) == level_transitive_check(GENS, n)


def test_vertex_cap():
    with pytest.raises(ValueError, match="cap"):
        level_transitive_check(GENS, 17)
    assert level_transitive_check(GENS, 10, cap=2**10)
    with pytest.raises(ValueError):
        level_transitive_check(GENS, 11, cap=2**10)


# JSON -------------------------------------------------------------------------------


def test_json_round_trip(rng):
    for g in GENS:
        back = element_from_dict(element_to_dict(g))
        assert all(act_word(back, w)[0] == act_word(g, w)[0] for w in all_words(2, 8))
        assert element_to_dict(back) == element_to_dict(g)
    p = portrait_or_identity(3, 4, rng)
    assert element_from_dict(element_to_dict(p)) == p


def test_load_element(tmp_path):
    assert load_element("grigorchuk:b") == G["b"]
    path = tmp_path / "swap.json"
    path.write_text('{"d": 2, "portrait": {"perm": [1, 0]}}')
    assert load_element(str(path)) == Portrait(2, (1, 0))
    assert load_element('{"d": 2, "portrait": null}').is_trivial()
    with pytest.raises(ValueError):
        load_element("grigorchuk:z")
