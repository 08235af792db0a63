import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ipmlab import agents
from ipmlab.distributions import Exponential, Pareto, Uniform, builtin_families, c_of_lambda
from ipmlab.errors import ParseError
from ipmlab.mechanisms import build_menu


def test_structure_constructors():
    c = agents.competition(4)
    assert c.m == 4 and c.groups() == [[0], [1], [2], [3]]
    m = agents.monopsony(4)
    assert m.m == 1 and m.groups() == [[0, 1, 2, 3]]
    b = agents.balanced(5, 2)
    sizes = sorted(len(g) for g in b.groups())
    assert sizes == [2, 3]


def test_random_partition_deterministic_and_surjective():
    a = agents.random_partition(9, 3, 7)
    b = agents.random_partition(9, 3, 7)
    assert a.partition == b.partition
    assert all(len(g) >= 1 for g in a.groups())


def test_structure_descriptor_roundtrip():
    for s in agents.canonical_structures(8):
        again = agents.parse_structure(s.descriptor, 8)
        assert again.partition == s.partition


def test_parse_structure_rejects_unknown():
    with pytest.raises(ParseError):
        agents.parse_structure("oligopoly:2", 4)


def test_behavior_parsing():
    assert agents.parse_behavior("surplus").kind is agents.Kind.SURPLUS_MAX
    assert agents.parse_behavior("monopolist").kind is agents.Kind.MONOPOLIST
    a = agents.parse_behavior("alpha:0.3")
    assert a.kind is agents.Kind.ALPHA_BARGAIN and a.alpha == 0.3
    with pytest.raises(ParseError):
        agents.parse_behavior("altruist")


def test_purchase_thresholds():
    d = Exponential(1.0)
    sm = agents.BehaviorModel(agents.Kind.SURPLUS_MAX)
    mono = agents.BehaviorModel(agents.Kind.MONOPOLIST)
    assert agents.purchase_threshold(sm, d, 1.5) == 1.5
    # Monopolist marks the price up by the inverse virtual value: p + 1 here.
    assert agents.purchase_threshold(mono, d, 1.5) == pytest.approx(2.5, abs=1e-7)


def test_uniform_price_purchase_counts():
    d = Exponential(1.0)
    sm = agents.BehaviorModel(agents.Kind.SURPLUS_MAX)
    mono = agents.BehaviorModel(agents.Kind.MONOPOLIST)
    vals = [0.5, 1.2, 2.3, 3.0]
    assert agents.uniform_price_purchases(sm, d, 1.0, vals) == 3
    # Monopolist needs phi(v) = v - 1 >= 1, i.e. v >= 2.
    assert agents.uniform_price_purchases(mono, d, 1.0, vals) == 2
    alpha = agents.BehaviorModel(agents.Kind.ALPHA_BARGAIN, 0.5)
    assert agents.uniform_price_purchases(alpha, d, 1.0, vals) == 3


def test_monopolist_tau_closed_forms():
    # Memoryless: tau is exactly 1/e at every price.
    d = Exponential(1.0)
    for p in (0.0, 0.5, 1.0, 2.0):
        assert agents.monopolist_tau_analytic(d, p) == pytest.approx(1 / math.e, abs=1e-9)
    # Pareto(2,1): the markup doubles the price, tau = (2p)^-2 / p^-2 = 1/4.
    d2 = Pareto(2.0, 1.0)
    for p in (1.0, 2.0, 5.0):
        assert agents.monopolist_tau_analytic(d2, p) == pytest.approx(0.25, abs=1e-8)


def test_estimate_tau_surplus_is_one():
    sm = agents.BehaviorModel(agents.Kind.SURPLUS_MAX)
    assert agents.estimate_tau(sm, Exponential(1.0), [0.5, 1.0]) == 1.0


def test_estimate_tau_monopolist_matches_analytic():
    mono = agents.BehaviorModel(agents.Kind.MONOPOLIST)
    got = agents.estimate_tau(mono, Exponential(1.0), [0.5, 1.0, 2.0], reps=400_000, rng_seed=1)
    assert got == pytest.approx(1 / math.e, abs=3e-3)


def test_estimate_tau_dominates_c_lambda():
    mono = agents.BehaviorModel(agents.Kind.MONOPOLIST)
    for d in builtin_families():
        if d.lambda_claimed >= 1.0:
            continue  # c(1) = 0: vacuous
        grid = [float(d.quantile(q)) for q in (0.1, 0.5, 0.8)]
        got = agents.estimate_tau(mono, d, grid, reps=150_000, rng_seed=2)
        se = math.sqrt(0.25 / 150_000)
        assert got >= c_of_lambda(d.lambda_claimed) - 2 * se


# ---------------------------------------------------------------------------
# Menu purchasing


MENU = build_menu(Exponential(1.0), 6, (1.0, 0.5, 0.25))


def test_menu_purchase_matches_brute_force_on_grid():
    grid = [0.0, 0.5, 1.0, 1.6, 2.2, 4.0]
    menu3 = build_menu(Exponential(1.0), 3, (1.0, 0.6, 0.2))
    for nb in (1, 2, 3):
        for vals in itertools.product(grid, repeat=nb):
            fast = agents.surplus_max_menu_purchase(menu3, range(3), vals)
            brute = agents.brute_force_menu_purchase(menu3, range(3), vals)
            assert fast[2] == pytest.approx(brute[2], abs=1e-9), vals


def test_menu_purchase_respects_availability():
    purchase, assignment, surplus = agents.surplus_max_menu_purchase(MENU, [2], [10.0])
    assert purchase == {2}
    assert assignment == {0: 2}
    assert surplus == pytest.approx(0.25 * 10.0 - MENU.rs[2])


def test_demand_set_thresholds():
    vals = [MENU.us[0] + 0.1, MENU.us[2] + 0.01, 0.0]
    assert agents.demand_set(MENU, vals) == [0, 2, None]


def test_demand_band_buyer_forces_sale():
    # A buyer valued inside [u_j, u_{j-1}) guarantees item j sells when it is
    # the only thing on the table.
    for j in range(1, MENU.k):
        v = (MENU.us[j] + MENU.us[j - 1]) / 2
        purchase, _, _ = agents.surplus_max_menu_purchase(MENU, [j], [v])
        assert j in purchase


def test_matching_route_agrees_with_exhaustive():
    big = build_menu(Exponential(1.0), 12, tuple(1.0 / (j + 1) for j in range(10)))
    rng = np.random.default_rng(0)
    for _ in range(25):
        vals = rng.exponential(size=4)
        ex_val = agents.surplus_max_menu_purchase(big, range(8), vals)[2]
        match_val = agents._matching_menu_purchase(
            big, list(range(8)), np.asarray(vals), np.argsort(-vals)
        )[2]
        assert match_val == pytest.approx(ex_val, abs=1e-9)


@given(vals=st.lists(st.floats(0.0, 6.0), min_size=1, max_size=4))
@settings(max_examples=50, deadline=None)
def test_menu_purchase_surplus_nonnegative_and_feasible(vals):
    purchase, assignment, surplus = agents.surplus_max_menu_purchase(MENU, range(3), vals)
    assert surplus >= -1e-12
    assert set(assignment.values()) <= purchase
    assert len(set(assignment.values())) == len(assignment)
    gross = sum(vals[b] * MENU.etas[j] for b, j in assignment.items())
    cost = sum(MENU.rs[j] for j in purchase)
    assert surplus == pytest.approx(gross - cost, abs=1e-9)
