"""Census of asymptotic critical collections, energy bands, counting
formulas, and the combinatorial existence tests.

An entry of the census is a choice of q distinct admissible boundary points
(local maxima of the trace with positive normal derivative, or points with
vanishing normal derivative and negative Laplacian) together with p
distinct interior points with negative Laplacian.  Its limiting energy and
index are

    level = s_n^{2/n} (sum K(z)^{-(n-2)/2} + 2 sum K(y)^{-(n-2)/2})^{2/n}
    index = q+p-1 + sum (n-1 - morse(trace, z)) + sum (n - morse(K, y)),

and the relative homology across the level is rank one exactly in degree
``index``.  The three existence tests compare alternating index sums
against the Euler characteristic of contractible sublevels under pinching
bounds of the form ((k+1)/k)^{1/(n-2)}.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from .errors import LevelInsideBand
from .landscape import AssumptionReport, classify


# ---------------------------------------------------------------------------
# Level bands
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LevelBand:
    mass: int
    lo: float   # (mass s_n)^{2/n} / K_max^{(n-2)/n}
    hi: float   # (mass s_n)^{2/n} / K_min^{(n-2)/n}


def level_bands(k_min: float, k_max: float, s_n: float, n: int, ell_max: int):
    """Energy bands per total mass, with the two disjointness reports.

    ``plain_disjoint``: hi(l) < lo(l+1); ``deformation_disjoint``: the
    stronger condition hi(l) * (K_max/K_min)^{(n-2)/n} < lo(l+1) used by the
    retraction argument, equivalent to pinch < ((l+1)/l)^{1/(n-2)}.
    """
    bands = []
    for ell in range(1, ell_max + 1):
        base = (ell * s_n) ** (2.0 / n)
        bands.append(LevelBand(ell, base / k_max ** ((n - 2) / n), base / k_min ** ((n - 2) / n)))
    pinch = k_max / k_min
    plain, deform = [], []
    for ell in range(1, ell_max):
        plain.append(bands[ell - 1].hi < bands[ell].lo)
        deform.append(bands[ell - 1].hi * pinch ** ((n - 2.0) / n) < bands[ell].lo)
    return bands, plain, deform


def pinch_threshold(k: int, n: int) -> float:
    """((k+1)/k)^{1/(n-2)}, the pinching gate that keeps bands 1..k+1 apart."""
    return ((k + 1.0) / k) ** (1.0 / (n - 2))


# ---------------------------------------------------------------------------
# Census
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CensusEntry:
    boundary_points: tuple
    interior_points: tuple
    level: float
    index: int

    @property
    def mass(self) -> int:
        return len(self.boundary_points) + 2 * len(self.interior_points)

    @property
    def q(self) -> int:
        return len(self.boundary_points)

    @property
    def p(self) -> int:
        return len(self.interior_points)

    def to_json(self) -> dict:
        return {
            "boundary_points": [list(map(float, r.location.coords)) for r in self.boundary_points],
            "interior_points": [list(map(float, r.location.coords)) for r in self.interior_points],
            "level": self.level, "index": self.index, "mass": self.mass,
        }


def admissible_boundary(records) -> list:
    """Boundary points that can carry a simple asymptotic profile: local
    maxima of the trace with positive normal derivative, or vanishing normal
    derivative with negative Laplacian."""
    out = []
    for r in records:
        if not r.is_boundary:
            continue
        if r.classification == "K_b_0_minus":
            out.append(r)
        elif r.classification == "K_b_plus" and r.is_local_max():
            out.append(r)
    return out


def a1_boundary_set(records) -> list:
    """The full sign-condition set entering the first alternating sum (no
    local-maximum restriction)."""
    return [r for r in records if r.is_boundary and r.classification in ("K_b_plus", "K_b_0_minus")]


def entry_level(boundary, interior, s_n: float, n: int) -> float:
    qsum = sum(r.value ** (-(n - 2) / 2.0) for r in boundary)
    qsum += 2.0 * sum(r.value ** (-(n - 2) / 2.0) for r in interior)
    return s_n ** (2.0 / n) * qsum ** (2.0 / n)


def entry_index(boundary, interior, n: int) -> int:
    idx = len(boundary) + len(interior) - 1
    idx += sum(n - 1 - r.morse_index for r in boundary)
    idx += sum(n - r.morse_index for r in interior)
    return idx


def enumerate_census(records, mass_max: int, s_n: float, n: int) -> list:
    """All admissible collections of total mass q + 2p <= mass_max, sorted by level."""
    bnd = admissible_boundary(records)
    inn = [r for r in records if r.classification == "K_in_minus"]
    entries = []
    for q in range(0, min(len(bnd), mass_max) + 1):
        for p in range(0, (mass_max - q) // 2 + 1):
            if q + p < 1 or p > len(inn):
                continue
            for zs in itertools.combinations(bnd, q):
                for ys in itertools.combinations(inn, p):
                    entries.append(CensusEntry(
                        boundary_points=zs, interior_points=ys,
                        level=entry_level(zs, ys, s_n, n),
                        index=entry_index(zs, ys, n),
                    ))
    entries.sort(key=lambda e: (e.level, e.mass, e.index))
    return entries


def homology_contribution(entry: CensusEntry) -> int:
    """Degree at which crossing the entry's level adds one generator."""
    return entry.index


def chi_below(census, level: float, bands) -> int:
    """Alternating index sum over entries strictly below a gap level.

    The level must lie outside every band up to the largest census mass;
    inside a band the sum has no topological meaning and the call fails.
    """
    for band in bands:
        if band.lo <= level <= band.hi:
            raise LevelInsideBand(f"level {level} lies inside the mass-{band.mass} band")
    return int(sum((-1) ** e.index for e in census if e.level < level))


# ---------------------------------------------------------------------------
# Counting formulas
# ---------------------------------------------------------------------------

def counting_A(indices):
    """Alternating subset sums of sizes 1..4 over (-1)^{iota}."""
    sgn = [(-1) ** (int(i) % 2) for i in indices]
    a1 = sum(sgn)
    a2 = sum(si * sj for si, sj in itertools.combinations(sgn, 2))
    a3 = sum(si * sj * sk for si, sj, sk in itertools.combinations(sgn, 3))
    a4 = sum(math.prod(c) for c in itertools.combinations(sgn, 4))
    return a1, a2, a3, a4


def counting_B(indices):
    """Alternating subset sums of sizes 1..2."""
    sgn = [(-1) ** (int(i) % 2) for i in indices]
    b1 = sum(sgn)
    b2 = sum(si * sj for si, sj in itertools.combinations(sgn, 2))
    return b1, b2


def counting_A_closed_forms(k: int):
    """(A2, A3, A4) predicted when A1 = 1 with k+1 even and k odd entries."""
    return -k, -k, k * (k - 1) // 2


def counting_B_closed_form(k: int, r: int) -> int:
    """B2 predicted when B1 = -k with r even and r+k odd entries."""
    return -r + k * (k - 1) // 2


# ---------------------------------------------------------------------------
# Existence verdicts
# ---------------------------------------------------------------------------

@dataclass
class ExistenceVerdict:
    theorem: str
    hypotheses: dict
    conclusion: str   # "solution_exists" | "inconclusive"

    def to_json(self) -> dict:
        return {"theorem": self.theorem, "hypotheses": self.hypotheses,
                "conclusion": self.conclusion}


def _verdict(theorem, checks) -> ExistenceVerdict:
    ok = all(v["holds"] for v in checks.values())
    return ExistenceVerdict(theorem=theorem, hypotheses=checks,
                            conclusion="solution_exists" if ok else "inconclusive")


def existence_check(records, report: AssumptionReport, k_min: float, k_max: float,
                    n: int, which: str = "auto"):
    """Evaluate the three combinatorial existence tests.

    T1_1: assumptions + pinch < (5/4)^{1/(n-2)} + at least two admissible points.
    T1_2: trace nondegeneracy + the flat-trace condition + pinch < 2^{1/(n-2)}
          + first alternating sum != 1.
    T1_3: assumptions + pinch < (3/2)^{1/(n-2)} + first sum == 1 + interior
          alternating sum != -k where the boundary set has 2k+1 points.

    ``auto`` evaluates all three (weakest pinch first) and reports the first
    conclusive one, together with the full table.
    """
    families = classify(records)
    pinch = k_max / k_min
    bset = a1_boundary_set(records)
    a1 = counting_A([n - 1 - r.morse_index for r in bset])[0]
    b1 = counting_B([n - r.morse_index for r in families["K_in_minus"]])[0]
    n_inf = len(families["K_infinity"])

    trace_nondeg = all(r.nondegenerate for r in records if r.is_boundary)

    t12 = _verdict("T1_2", {
        "trace_nondegenerate": {"holds": trace_nondeg, "value": trace_nondeg},
        "H3": {"holds": report.h3, "value": report.h3},
        "pinch_below_threshold": {
            "holds": pinch < pinch_threshold(1, n),
            "value": pinch, "threshold": pinch_threshold(1, n)},
        "A1_not_one": {"holds": a1 != 1, "value": a1},
    })

    count_b = len(bset)
    k_par = (count_b - 1) // 2 if count_b % 2 == 1 else None
    t13_checks = {
        "H1": {"holds": report.h1, "value": report.h1},
        "H2": {"holds": report.h2, "value": report.h2},
        "H3": {"holds": report.h3, "value": report.h3},
        "pinch_below_threshold": {
            "holds": pinch < pinch_threshold(2, n),
            "value": pinch, "threshold": pinch_threshold(2, n)},
        "A1_equals_one": {"holds": a1 == 1, "value": a1},
        "B1_not_minus_k": {
            "holds": (k_par is not None and b1 != -k_par),
            "value": b1, "k": k_par},
    }
    t13 = _verdict("T1_3", t13_checks)

    t11 = _verdict("T1_1", {
        "H1": {"holds": report.h1, "value": report.h1},
        "H2": {"holds": report.h2, "value": report.h2},
        "H3": {"holds": report.h3, "value": report.h3},
        "pinch_below_threshold": {
            "holds": pinch < pinch_threshold(4, n),
            "value": pinch, "threshold": pinch_threshold(4, n)},
        "at_least_two_admissible": {"holds": n_inf >= 2, "value": n_inf},
    })

    table = {"T1_1": t11, "T1_2": t12, "T1_3": t13}
    if which != "auto":
        return table[which]
    for name in ("T1_2", "T1_3", "T1_1"):
        if table[name].conclusion == "solution_exists":
            verdict = table[name]
            break
    else:
        verdict = ExistenceVerdict(
            theorem="auto", conclusion="inconclusive",
            hypotheses={k: v.to_json() for k, v in table.items()})
        return verdict, table
    return verdict, table


def census_report(records, report, k_min, k_max, s_n, n, mass_max=4) -> dict:
    """Machine-readable bundle: census, bands, counts, verdicts."""
    census = enumerate_census(records, mass_max, s_n, n)
    bands, plain, deform = level_bands(k_min, k_max, s_n, n, mass_max)
    bset = a1_boundary_set(records)
    families = classify(records)
    a_vals = counting_A([n - 1 - r.morse_index for r in bset])
    b_vals = counting_B([n - r.morse_index for r in families["K_in_minus"]])
    verdict, table = existence_check(records, report, k_min, k_max, n)
    admissible = admissible_boundary(records)
    return {
        "census": [e.to_json() for e in census],
        "bands": [{"mass": b.mass, "lo": b.lo, "hi": b.hi} for b in bands],
        "bands_plain_disjoint": plain,
        "bands_deformation_disjoint": deform,
        "A": list(a_vals),
        "B": list(b_vals),
        "a1_set_size": len(bset),
        "admissible_boundary_size": len(admissible),
        "sign_set_minus_admissible": len(bset) - len(admissible),
        "verdict": verdict.to_json(),
        "theorems": {k: v.to_json() for k, v in table.items()},
    }
