"""Umbrella oracle suites behind the ``verify`` CLI command.

Each suite returns (passed, detail) and is deliberately built on the
independent routes in :mod:`hemiflow.oracles`.
"""

from __future__ import annotations

import numpy as np

from . import census as census_mod
from . import constants as constants_mod
from . import oracles
from .bubbles import BubbleParam, epsilon, epsilon_dlambda
from .geometry import SpherePoint


def _suite_counting(cfg) -> tuple:
    checked = 0
    for length in range(1, 13):
        for odd in range(0, length + 1):
            idx = [2] * (length - odd) + [1] * odd
            a1, a2, a3, a4 = census_mod.counting_A(idx)
            for depth, val in ((1, a1), (2, a2), (3, a3), (4, a4)):
                if val != oracles.brute_force_alternating_sums(idx, depth):
                    return False, f"subset sum mismatch at {length=} {odd=} {depth=}"
            if a1 == 1:
                k = odd
                if length != 2 * k + 1 or (a2, a3, a4) != census_mod.counting_A_closed_forms(k):
                    return False, f"closed form mismatch at {length=} {odd=}"
            b1, b2 = census_mod.counting_B(idx)
            if b1 <= 0 and length == 2 * ((length + b1) // 2) - b1:
                k = -b1
                r = (length - k) // 2
                if b2 != census_mod.counting_B_closed_form(k, r):
                    return False, f"pair sum mismatch at {length=} {odd=}"
            checked += 1
    return True, f"{checked} parity profiles, subset sums exact"


def _suite_constants(cfg) -> tuple:
    n = cfg.n if cfg is not None else 5
    tol = cfg.quadrature_tol if cfg is not None else 1e-8
    worst = 0.0
    for dim in sorted({n, 5, 6, 7}):
        table = constants_mod.compute_constants(dim, tol)
        closed = constants_mod.closed_forms(dim)
        for key, ref in closed.items():
            rel = abs(table.values[key] - ref) / max(abs(ref), 1e-300)
            worst = max(worst, rel)
            if rel > 1e-6:
                return False, f"{key} at n={dim}: relative error {rel}"
    rng = np.random.default_rng(cfg.seed if cfg is not None else 0)
    radii = rng.uniform(0.3, 3.0, 100)
    res = oracles.flat_bubble_pde_residual(n, radii)
    if res > 1e-8:
        return False, f"profile equation residual {res}"
    return True, f"closed forms within {worst:.2e}, equation residual {res:.2e}"


def _suite_interaction(cfg) -> tuple:
    n = cfg.n if cfg is not None else 5
    rng = np.random.default_rng(cfg.seed if cfg is not None else 0)
    viol_sum = viol_rate = 0
    for _ in range(10_000):
        u = rng.standard_normal(n + 1); u[-1] = abs(u[-1]); u /= np.linalg.norm(u)
        v = rng.standard_normal(n + 1); v[-1] = abs(v[-1]); v /= np.linalg.norm(v)
        li, lj = np.exp(rng.uniform(0.0, 6.0, 2))
        bi = BubbleParam(SpherePoint(u), max(li, 1.0))
        bj = BubbleParam(SpherePoint(v), max(lj, 1.0))
        di, dj = epsilon_dlambda(bi, bj)
        if -(di + dj) < -1e-12 * epsilon(bi, bj):
            viol_sum += 1
        d = float(np.arccos(np.clip(u @ v, -1, 1)))
        if bi.lam * d >= 2.0 and -di < 0.1 * epsilon(bi, bj):
            viol_rate += 1
    ok = viol_sum == 0 and viol_rate == 0
    return ok, f"violations: sum-inequality {viol_sum}, rate-inequality {viol_rate}"


def available_suites() -> dict:
    return {
        "counting": _suite_counting,
        "constants": _suite_constants,
        "interaction": _suite_interaction,
    }
