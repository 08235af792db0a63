"""Demand structures and intermediary purchase behavior.

An intermediary either passes prices through (surplus maximizer, possibly
with a bargaining split that rescales payoffs but not decisions) or
re-prices to its captive buyers (monopolist), in which case it buys for a
buyer only when the buyer's virtual value clears the posted price.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .distributions import Distribution, inverse_virtual_value, virtual_value
from .errors import ParseError
from .mechanisms import Menu


@dataclass(frozen=True)
class DemandStructure:
    n: int
    m: int
    partition: tuple  # buyer index -> intermediary index
    label: str = ""

    def __post_init__(self):
        if len(self.partition) != self.n:
            raise ValueError("partition must assign every buyer")
        seen = set(self.partition)
        if seen != set(range(self.m)):
            raise ValueError("partition must be surjective onto the intermediaries")

    def groups(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.m)]
        for buyer, ell in enumerate(self.partition):
            out[ell].append(buyer)
        return out

    @property
    def descriptor(self) -> str:
        return self.label or f"custom:{self.m}"


class Kind(Enum):
    SURPLUS_MAX = "surplus"
    MONOPOLIST = "monopolist"
    ALPHA_BARGAIN = "alpha"


@dataclass(frozen=True)
class BehaviorModel:
    kind: Kind
    alpha: float = 1.0

    def __post_init__(self):
        if self.kind is Kind.ALPHA_BARGAIN and not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")

    @property
    def descriptor(self) -> str:
        if self.kind is Kind.ALPHA_BARGAIN:
            return f"alpha:{self.alpha:g}"
        return self.kind.value


def parse_behavior(descriptor: str) -> BehaviorModel:
    s = descriptor.strip().lower()
    if s in ("surplus", "surplusmax", "surplus_max"):
        return BehaviorModel(Kind.SURPLUS_MAX)
    if s in ("monopolist", "monopoly"):
        return BehaviorModel(Kind.MONOPOLIST)
    if s.startswith("alpha:"):
        return BehaviorModel(Kind.ALPHA_BARGAIN, float(s.split(":", 1)[1]))
    raise ParseError(f"unknown behavior model {descriptor!r}")


def competition(n: int) -> DemandStructure:
    return DemandStructure(n, n, tuple(range(n)), "competition")


def monopsony(n: int) -> DemandStructure:
    return DemandStructure(n, 1, (0,) * n, "monopsony")


def balanced(n: int, m: int) -> DemandStructure:
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got m={m}")
    part = tuple(i * m // n for i in range(n))
    return DemandStructure(n, m, part, f"balanced:{m}")


def random_partition(n: int, m: int, seed: int) -> DemandStructure:
    """Seeded random partition; every intermediary keeps at least one buyer."""
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got m={m}")
    rng = np.random.default_rng(seed)
    part = np.concatenate([np.arange(m), rng.integers(0, m, size=n - m)])
    rng.shuffle(part)
    return DemandStructure(n, m, tuple(int(x) for x in part), f"random:{m}:{seed}")


def parse_structure(descriptor: str, n: int) -> DemandStructure:
    s = descriptor.strip().lower()
    if s == "competition":
        return competition(n)
    if s == "monopsony":
        return monopsony(n)
    if s.startswith("balanced:"):
        return balanced(n, int(s.split(":")[1]))
    if s.startswith("random:"):
        _, m, seed = s.split(":")
        return random_partition(n, int(m), int(seed))
    raise ParseError(f"unknown demand structure {descriptor!r}")


def canonical_structures(n: int, seed: int = 7) -> list[DemandStructure]:
    """Competition, monopsony, balanced halves, and a seeded random split."""
    out = [competition(n), monopsony(n)]
    if n >= 2:
        out.append(balanced(n, 2))
        out.append(random_partition(n, min(3, n), seed))
    return out


# ---------------------------------------------------------------------------
# Uniform-price purchasing


def purchase_threshold(model: BehaviorModel, d: Distribution, price: float) -> float:
    """Valuation cutoff above which the intermediary buys for a buyer.

    Surplus maximizers pass the price through; a monopolist marks it up to
    the inverse virtual value (it resells at its own optimal reserve).
    """
    if model.kind is Kind.MONOPOLIST:
        return inverse_virtual_value(d, price)
    return price


def uniform_price_purchases(model: BehaviorModel, d: Distribution, price: float, valuations) -> int:
    """Number of units the intermediary requests at a uniform per-item price."""
    if price < 0:
        raise ValueError("price must be nonnegative")
    vals = np.asarray(valuations, dtype=float)
    if model.kind is Kind.MONOPOLIST:
        return int(np.sum(virtual_value(d, vals) >= price))
    # Alpha-bargaining rescales the payoff split, not the argmax.
    return int(np.sum(vals >= price))


def monopolist_tau_analytic(d: Distribution, price: float) -> float:
    """P[intermediary buys | buyer value >= price] for a monopolist, in
    closed form: (1 - F(phi^-1(p))) / (1 - F(p))."""
    thr = inverse_virtual_value(d, price)
    return float((1.0 - d.cdf(thr)) / (1.0 - d.cdf(price)))


def estimate_tau(
    model: BehaviorModel,
    d: Distribution,
    price_grid,
    reps: int = 200_000,
    rng_seed: int = 0,
) -> float:
    """Monte Carlo estimate of min over the grid of P[buy | v >= p].

    Surplus maximizers (and bargainers) always pass through, so the answer
    is exactly 1.  For the monopolist we sample v conditioned on v >= p and
    count virtual values clearing p; `monopolist_tau_analytic` gives the
    noise-free counterpart.
    """
    if reps < 100_000:
        raise ValueError("need reps >= 100_000 for a stable estimate")
    if model.kind is not Kind.MONOPOLIST:
        return 1.0
    rng = np.random.default_rng(rng_seed)
    worst = 1.0
    for p in price_grid:
        f_p = float(d.cdf(p))
        u = f_p + (1.0 - f_p) * rng.random(reps)
        v = np.asarray(d.quantile(u), dtype=float)
        frac = float(np.mean(virtual_value(d, v) >= p))
        worst = min(worst, frac)
    return worst


# ---------------------------------------------------------------------------
# Menu purchasing (weighted items)

EXHAUSTIVE_MAX_ITEMS = 8


def _assignment_surplus(menu: Menu, items: tuple, vals_sorted_desc: np.ndarray):
    """Surplus of buying exactly `items` (ascending index = descending eta),
    matched greedily to the top buyers; returns (surplus, assignment)."""
    take = min(len(items), len(vals_sorted_desc))
    gross = 0.0
    assignment = {}
    for t in range(take):
        gross += vals_sorted_desc[t] * menu.etas[items[t]]
        assignment[t] = items[t]
    return gross - float(sum(menu.rs[j] for j in items)), assignment


def surplus_max_menu_purchase(menu: Menu, available, valuations):
    """Exact surplus-maximizing purchase over the available items.

    Returns (purchase set, {buyer index -> item}, surplus).  Ties resolve to
    the larger purchase set, then the lexicographically smallest item tuple,
    which keeps the demand-set preference deterministic.
    """
    available = sorted(available)
    vals = np.asarray(valuations, dtype=float)
    order = np.argsort(-vals, kind="stable")
    vals_sorted = vals[order]
    if len(available) <= EXHAUSTIVE_MAX_ITEMS:
        best_surplus = 0.0
        best_items: tuple = ()
        for size in range(len(available) + 1):
            for items in itertools.combinations(available, size):
                surplus, _ = _assignment_surplus(menu, items, vals_sorted)
                if surplus > best_surplus + 1e-12:
                    best_surplus, best_items = surplus, items
                elif abs(surplus - best_surplus) <= 1e-12 and (
                    len(items) > len(best_items)
                    or (len(items) == len(best_items) and items < best_items)
                ):
                    best_surplus, best_items = max(surplus, best_surplus), items
        _, raw = _assignment_surplus(menu, best_items, vals_sorted)
        assignment = {int(order[t]): j for t, j in raw.items()}
        return set(best_items), assignment, float(best_surplus)
    return _matching_menu_purchase(menu, available, vals, order)


def _matching_menu_purchase(menu: Menu, available, vals, order):
    """Assignment-solver route for larger menus; agrees with the exhaustive
    optimum on surplus (tie-breaking may differ)."""
    from scipy.optimize import linear_sum_assignment

    nb, ni = len(vals), len(available)
    weights = np.zeros((nb, ni))
    for col, j in enumerate(available):
        weights[:, col] = vals * menu.etas[j] - menu.rs[j]
    padded = np.maximum(weights, 0.0)
    rows, cols = linear_sum_assignment(-padded)
    purchase = set()
    assignment = {}
    surplus = 0.0
    for r, c in zip(rows, cols):
        if weights[r, c] > 0.0:
            j = available[c]
            purchase.add(j)
            assignment[int(r)] = j
            surplus += weights[r, c]
    return purchase, assignment, float(surplus)


def brute_force_menu_purchase(menu: Menu, available, valuations):
    """Independent oracle: enumerate every purchase set and every injective
    assignment of purchased items to buyers.  Exponential; small cases only."""
    available = sorted(available)
    vals = np.asarray(valuations, dtype=float)
    nb = len(vals)
    best_surplus = 0.0
    best = (set(), {})
    for size in range(len(available) + 1):
        for items in itertools.combinations(available, size):
            cost = float(sum(menu.rs[j] for j in items))
            take = min(len(items), nb)
            for chosen in itertools.permutations(range(nb), take):
                for placed in itertools.combinations(items, take):
                    gross = sum(vals[b] * menu.etas[j] for b, j in zip(chosen, placed))
                    surplus = gross - cost
                    if surplus > best_surplus + 1e-12:
                        best_surplus = surplus
                        best = (set(items), dict(zip(chosen, placed)))
    return best[0], best[1], float(best_surplus)


def demand_set(menu: Menu, valuations):
    """Lowest-indexed item each buyer can 'afford' by the u_j thresholds:
    B(i) = min{ j : v_i >= u_j }, or None below u_k."""
    vals = np.asarray(valuations, dtype=float)
    out = []
    for v in vals:
        hit = None
        for j in range(menu.k):
            if v >= menu.us[j]:
                hit = j
                break
        out.append(hit)
    return out
