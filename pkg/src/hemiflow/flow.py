"""Region-classified descent field on configuration space and its flow.

The neighborhood of highly concentrated states splits into regions by the
size of the dimensionless ratios Gamma (weight imbalance, point gradient,
self-interaction, mutual interaction, each against its expected decay) and
by the spread of the scales mu_i (lam_i^2 for interior bubbles, gradient
corrected for boundary ones).  Each region carries an explicit descent
field; overlaps are resolved by piecewise-linear partition-of-unity
weights.  Away from admissible critical collections every component either
moves points along the curvature gradient, rebalances weights, or shrinks
rates; only inside the matched-collection region do the rates grow.

Velocities use the correspondence: a rate direction contributes
dlog(lam)/dt = +-1, a point direction da/dt = e/lam, a weight direction
dalpha/dt = +-1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .bubbles import BubbleParam
from .errors import (ConfigError, InvalidConfiguration, OutsideNeighborhood,
                     StepFailure, UnclassifiableState)
from .geometry import BoundarySpherePoint, SpherePoint, geodesic_distance, geodesic_step
from .intervals import Bar
from .model import Configuration, ReducedModel


def psi1(t: float) -> float:
    """Quintic smoothstep gate: 0 below 1, 1 above 2, C^2 monotone between."""
    if t <= 1.0:
        return 0.0
    if t >= 2.0:
        return 1.0
    u = t - 1.0
    return u**3 * (10.0 - 15.0 * u + 6.0 * u * u)


def ramp(x: float, lo: float, hi: float) -> float:
    """Piecewise-linear partition weight on the overlap margin [lo, hi]."""
    if x <= lo:
        return 0.0
    if x >= hi:
        return 1.0
    return (x - lo) / (hi - lo)


@dataclass(frozen=True)
class FlowParams:
    M0: float = 1.0e4
    M2: float = 10.0
    M4: float = 1.0e3
    eta: float = 0.1
    eps: float = 0.1
    max_qp: int = 2
    M_drift: float = 50.0   # gate for pairing drift with rate shrink
    strict_lambda_sign: bool = True
    smallness: float = 0.01
    dt_init: float = 0.05
    dt_max: float = 0.25
    stagnation_tol: float = 1e-10
    max_rejects: int = 10

    def validate(self):
        n_free = max(self.max_qp - 1, 1)
        checks = {
            "M0_over_M4sq": self.M0 / self.M4**2,
            "M2_over_M0root": self.M2 / self.M0 ** (1.0 / n_free),
        }
        if checks["M0_over_M4sq"] > self.smallness + 1e-12:
            raise ConfigError(f"M0/M4^2 = {checks['M0_over_M4sq']} exceeds {self.smallness}")
        if checks["M2_over_M0root"] > self.smallness + 1e-12:
            raise ConfigError("M2 too large against M0^{1/(q+p-1)}")
        return checks

    def validate_full(self, n: int):
        self.validate()
        n_free = max(self.max_qp - 1, 1)
        second = self.M2 ** ((n - 1.0) / (n - 2.0)) / self.M0 ** ((0.5 + 1.0 / (n - 2.0)) / n_free)
        if second > self.smallness + 1e-12:
            raise ConfigError("M2^{(n-1)/(n-2)} too large against the M0 root")
        return second

    @staticmethod
    def for_mass(max_qp: int, n: int = 5) -> "FlowParams":
        """Scale the large constants so the smallness budget holds for max_qp."""
        if max_qp <= 2:
            return FlowParams(max_qp=max_qp)
        n_free = max_qp - 1
        m2 = 10.0
        need = max((100.0 * m2) ** n_free,
                   (100.0 * m2 ** ((n - 1.0) / (n - 2.0))) ** (n_free / (0.5 + 1.0 / (n - 2.0))))
        m0 = 10.0 ** math.ceil(math.log10(need))
        m4 = 10.0 ** math.ceil(0.5 * math.log10(m0 / 0.01))
        p = FlowParams(M0=m0, M2=m2, M4=m4, max_qp=max_qp)
        p.validate_full(n)
        return p


@dataclass
class IndexDiagnostics:
    mu: float
    gamma_lambda: float
    gamma_alpha: float
    gamma_a: float      # point ratio (trace version for boundary indices)
    gamma_h: float      # interior self-interaction ratio (0 for boundary)


@dataclass
class RegionLabel:
    tag: str
    weights: dict
    per_index: list
    clusters: dict       # anchor key -> list of bubble indices
    tower_set: tuple     # comparable-scale index set in the spread regime
    mu_ratio: float

    def weight(self, name: str) -> float:
        return self.weights.get(name, 0.0)


@dataclass
class Velocity:
    alpha_dot: np.ndarray
    a_dot: list
    loglam_dot: np.ndarray

    def scaled(self, w: float) -> "Velocity":
        return Velocity(self.alpha_dot * w, [v * w for v in self.a_dot], self.loglam_dot * w)

    def add(self, other: "Velocity"):
        self.alpha_dot += other.alpha_dot
        for k in range(len(self.a_dot)):
            self.a_dot[k] = self.a_dot[k] + other.a_dot[k]
        self.loglam_dot += other.loglam_dot

    def norm(self) -> float:
        total = float(np.sum(self.alpha_dot**2) + np.sum(self.loglam_dot**2))
        total += sum(float(v @ v) for v in self.a_dot)
        return math.sqrt(total)

    @staticmethod
    def zero(size: int, dim: int) -> "Velocity":
        return Velocity(np.zeros(size), [np.zeros(dim) for _ in range(size)], np.zeros(size))


@dataclass
class TrajectoryPoint:
    t: float
    cfg: Configuration
    label_tag: str
    j_value: Bar
    loglam_dot: tuple
    mus: tuple


@dataclass
class Trajectory:
    points: list
    reason: str

    def csv_rows(self):
        rows = []
        for pt in self.points:
            row = {"t": pt.t, "region": pt.label_tag,
                   "J_center": pt.j_value.center, "J_halfwidth": pt.j_value.halfwidth,
                   "mu_max": max(pt.mus)}
            for k, (a, b) in enumerate(zip(pt.cfg.alphas, pt.cfg.bubbles)):
                row[f"alpha{k}"] = a
                row[f"lambda{k}"] = b.lam
                for m, c in enumerate(b.a.coords):
                    row[f"a{k}_{m}"] = c
            rows.append(row)
        return rows


class PseudogradientFlow:
    """Assembles and integrates the descent field over a fixed landscape."""

    def __init__(self, model: ReducedModel, records, params: FlowParams | None = None):
        self.model = model
        self.K = model.K
        self.n = model.n
        self.records = list(records)
        self.params = params if params is not None else FlowParams()
        self.params.validate_full(self.n)
        self.trace_crit = [r for r in self.records if r.is_boundary]
        self.interior_crit = [r for r in self.records if not r.is_boundary]

    # -- scalar diagnostics ----------------------------------------------------

    def mu(self, cfg: Configuration, i: int) -> float:
        b = cfg.bubbles[i]
        if cfg.is_boundary_index(i):
            g = float(np.linalg.norm(self.K.tangent_gradient(b.a)))
            return 1.0 / (g / b.lam + 1.0 / b.lam**2)
        return b.lam**2

    def mus(self, cfg: Configuration) -> np.ndarray:
        return np.array([self.mu(cfg, i) for i in range(cfg.size)])

    def gamma_quantities(self, cfg: Configuration, i: int, asm=None) -> IndexDiagnostics:
        asm = asm or self.model.assemble(cfg)
        m2 = self.params.M2
        b = cfg.bubbles[i]
        eps_sum = float(np.sum(asm.eps_mat[i]))
        mu_i = self.mu(cfg, i)
        imb = abs(self.model.imbalances(cfg, asm)[i])
        g_alpha = imb / (m2 * (eps_sum + 1.0 / mu_i))
        g_lambda = mu_i * eps_sum / m2
        f = asm.frames[i]
        if cfg.is_boundary_index(i):
            g_a = (f.grad_k1_norm / b.lam) / (m2 / b.lam**2 + eps_sum / m2**2)
            g_h = 0.0
        else:
            ld = b.lam * b.boundary_distance()
            g_a = (f.grad_norm / b.lam) / (m2 * (eps_sum + ld ** (2 - self.n) + 1.0 / b.lam**2))
            g_h = f.h_self / (m2 * f.rate ** (self.n - 4))
        return IndexDiagnostics(mu=mu_i, gamma_lambda=g_lambda, gamma_alpha=g_alpha,
                                gamma_a=g_a, gamma_h=g_h)

    # -- anchors and clusters ----------------------------------------------------

    def _nearest_record(self, point, pool, radius):
        best, best_d = None, radius
        for r in pool:
            d = geodesic_distance(point, r.location)
            if d <= best_d:
                best, best_d = r, d
        return best, best_d

    def clusters(self, cfg: Configuration, radius: float):
        """Map from nearby landscape anchors to the bubble indices they attract."""
        by_anchor = {}
        for i in range(cfg.size):
            pool = self.trace_crit if cfg.is_boundary_index(i) else self.interior_crit
            rec, _ = self._nearest_record(cfg.bubbles[i].a, pool, radius)
            if rec is None:
                continue
            key = tuple(np.round(rec.location.coords, 9))
            by_anchor.setdefault(key, {"record": rec, "members": []})
            by_anchor[key]["members"].append(i)
        return by_anchor

    # -- region classification -----------------------------------------------------

    def classify_region(self, cfg: Configuration, asm=None) -> RegionLabel:
        if cfg.eps_scale > self.params.eps * 1.5 + 1e-12:
            raise OutsideNeighborhood("configuration scale exceeds the flow neighborhood")
        asm = asm or self.model.assemble(cfg)
        params = self.params
        diags = [self.gamma_quantities(cfg, i, asm) for i in range(cfg.size)]
        mus = np.array([d.mu for d in diags])
        mu_ratio = float(np.max(mus) / np.min(mus))

        w4 = ramp(mu_ratio, params.M0, 2.0 * params.M0)
        g_in = [diags[i].gamma_h + diags[i].gamma_a + diags[i].gamma_lambda
                for i in range(cfg.q, cfg.size)]
        r1 = ramp(max(g_in), 6.0, 8.0) if g_in else 0.0

        if cfg.q:
            b_gam = max(diags[i].gamma_alpha + diags[i].gamma_lambda for i in range(cfg.q))
            d_trace = 0.0
            for i in range(cfg.q):
                _, d = self._nearest_record(cfg.bubbles[i].a, self.trace_crit, math.pi)
                d_trace = max(d_trace, d)
            r2 = max(ramp(b_gam, 4.0, 6.0), ramp(d_trace, params.eta, 2.0 * params.eta))
        else:
            r2 = 0.0

        w1 = (1.0 - w4) * r1
        w2 = (1.0 - w4) * (1.0 - r1) * r2
        w3g = (1.0 - w4) * (1.0 - r1) * (1.0 - r2)

        cl = self.clusters(cfg, 2.0 * params.eta)
        weights = {}
        if w4 > 0:
            weights["V4"] = w4
        if w1 > 0:
            weights["V1"] = w1
        if w2 > 0:
            weights["V2"] = w2

        sub = None
        if w3g > 0:
            sub = self._v3_subtag(cfg, cl, params.eta)
            if sub is not None:
                weights[sub] = w3g
            elif cfg.q:
                # gap between the overlap margins: the trace-distance and
                # rebalancing components still apply there
                weights["V2"] = weights.get("V2", 0.0) + w3g
            else:
                # interior-only state without a matched critical point: the
                # gated base components own it (possibly with zero drive)
                weights["V1"] = weights.get("V1", 0.0) + w3g
        if not weights:
            raise UnclassifiableState("no region predicate covers the state")

        tower = self._tower_set(mus) if w4 > 0 else tuple()
        tag = max(weights, key=weights.get)
        if weights[tag] < 1.0 - 1e-9:
            tag_out = "mixed" if len(weights) > 1 else tag
        else:
            tag_out = tag
        return RegionLabel(tag=tag_out, weights=weights, per_index=diags,
                           clusters={k: v["members"] for k, v in cl.items()},
                           tower_set=tower, mu_ratio=mu_ratio)

    def _v3_subtag(self, cfg: Configuration, cl: dict, eta: float):
        zero_tol = 1e-9
        has_v31 = has_v32 = has_v33 = False
        for key, info in cl.items():
            rec, members = info["record"], info["members"]
            if rec.is_boundary:
                nu = rec.normal_derivative
                if abs(nu) < zero_tol and len(members) >= 2:
                    has_v31 = True
                elif nu < -zero_tol and members:
                    has_v32 = True
                elif abs(nu) < zero_tol and rec.laplacian > 0 and members:
                    has_v32 = True
                elif nu > zero_tol and len(members) >= 2:
                    has_v33 = True
            else:
                if rec.laplacian > 0 and members:
                    has_v32 = True
        if has_v31:
            return "V3_1"
        if has_v32:
            return "V3_2"
        if has_v33:
            return "V3_3"
        return "W" if self._in_w_set(cfg, eta) else None

    def _in_w_set(self, cfg: Configuration, eta: float) -> bool:
        used = set()
        for i in range(cfg.size):
            boundary = cfg.is_boundary_index(i)
            pool = self.trace_crit if boundary else self.interior_crit
            rec, d = self._nearest_record(cfg.bubbles[i].a, pool, eta)
            if rec is None:
                return False
            if boundary:
                nu = rec.normal_derivative
                ok = nu > 1e-9 or (abs(nu) <= 1e-9 and rec.laplacian < 0)
            else:
                ok = rec.laplacian < 0
            if not ok:
                return False
            key = tuple(np.round(rec.location.coords, 9))
            if key in used:
                return False
            used.add(key)
        return True

    def _tower_set(self, mus) -> tuple:
        order = np.argsort(mus)
        size = len(mus)
        cut = self.params.M0 ** (1.0 / max(size - 1, 1))
        kept = [int(order[0])]
        for pos in range(1, size):
            if mus[order[pos]] <= cut * mus[order[pos - 1]]:
                kept.append(int(order[pos]))
            else:
                break
        return tuple(kept)

    # -- field components -----------------------------------------------------------

    def _unit_drift(self, vec, lam):
        nrm = float(np.linalg.norm(vec))
        if nrm < 1e-300:
            return vec * 0.0
        return vec / (lam * nrm)

    def _component_base(self, cfg, asm, diags, interior_rates=True, boundary_rates=True,
                        alpha_moves=True, interior_points=True,
                        boundary_rate_scale=1.0) -> Velocity:
        """The shared gated components: rate shrinking, interior point drift,
        weight rebalancing."""
        vel = Velocity.zero(cfg.size, self.n + 1)
        imb = self.model.imbalances(cfg, asm)
        for i in range(cfg.size):
            f = asm.frames[i]
            d = diags[i]
            if cfg.is_boundary_index(i):
                if boundary_rates:
                    vel.loglam_dot[i] -= psi1(d.gamma_lambda) * boundary_rate_scale
                if alpha_moves:
                    vel.alpha_dot[i] -= psi1(d.gamma_alpha) * math.copysign(1.0, imb[i])
            else:
                if interior_rates:
                    vel.loglam_dot[i] -= psi1(d.gamma_lambda) + psi1(d.gamma_h)
                if interior_points:
                    gate = psi1(d.gamma_a)
                    if gate > 0:
                        vel.a_dot[i] = vel.a_dot[i] + gate * self._unit_drift(
                            f.grad_sphere, cfg.bubbles[i].lam)
                        if interior_rates:
                            # far from critical points the drift is paired with
                            # a rate shrink; the large gate keeps the pair
                            # descending against the Laplacian term
                            far = psi1(cfg.bubbles[i].lam * f.grad_norm / self.params.M_drift)
                            vel.loglam_dot[i] -= gate * far
        return vel

    def _field_v1(self, cfg, asm, diags) -> Velocity:
        return self._component_base(cfg, asm, diags, boundary_rate_scale=1.0 / self.params.M2)

    def _field_v2(self, cfg, asm, diags) -> Velocity:
        vel = self._component_base(cfg, asm, diags, interior_rates=False, interior_points=False)
        for i in range(cfg.q):
            _, d = self._nearest_record(cfg.bubbles[i].a, self.trace_crit, math.pi)
            gate = ramp(d, self.params.eta, 2.0 * self.params.eta)
            if gate > 0:
                g1 = self.K.boundary_gradient(cfg.bubbles[i].a)
                vel.a_dot[i] = vel.a_dot[i] + gate * self._unit_drift(g1, cfg.bubbles[i].lam)
        return vel

    def _field_v31(self, cfg, asm, diags) -> Velocity:
        vel = self._component_base(cfg, asm, diags, interior_rates=False,
                                   interior_points=False, boundary_rates=False)
        for i in range(cfg.q):
            gate = psi1(2.0 * diags[i].gamma_a)
            if gate > 0:
                g1 = self.K.boundary_gradient(cfg.bubbles[i].a)
                vel.a_dot[i] = vel.a_dot[i] + gate * self._unit_drift(g1, cfg.bubbles[i].lam)
        return vel

    def _field_v32(self, cfg, asm, diags, cl) -> Velocity:
        vel = self._component_base(cfg, asm, diags, interior_rates=False, interior_points=False)
        for key, info in cl.items():
            rec, members = info["record"], info["members"]
            if rec.is_boundary:
                nu = rec.normal_derivative
                if nu < -1e-9:
                    for i in members:
                        vel.loglam_dot[i] -= 1.0
                elif abs(nu) <= 1e-9 and rec.laplacian > 0:
                    for i in members:
                        vel.loglam_dot[i] -= 1.0
                        g1 = self.K.boundary_gradient(cfg.bubbles[i].a)
                        gate = psi1(cfg.bubbles[i].lam * float(np.linalg.norm(g1)) / self.params.M2)
                        vel.a_dot[i] = vel.a_dot[i] + gate * self._unit_drift(g1, cfg.bubbles[i].lam)
            elif rec.laplacian > 0:
                for i in members:
                    vel.loglam_dot[i] -= 1.0
        return vel

    def _cluster_field(self, cfg, members) -> Velocity:
        """Barycentric contraction of a group of boundary points."""
        vel = Velocity.zero(cfg.size, self.n + 1)
        if len(members) < 2:
            return vel
        pairs = [(i, j) for i in members for j in members if i < j]
        seed_i, seed_j = min(pairs, key=lambda ij: geodesic_distance(
            cfg.bubbles[ij[0]].a, cfg.bubbles[ij[1]].a))
        group = {seed_i, seed_j}
        diam = geodesic_distance(cfg.bubbles[seed_i].a, cfg.bubbles[seed_j].a)
        while True:
            added = False
            for k in members:
                if k in group:
                    continue
                if any(geodesic_distance(cfg.bubbles[k].a, cfg.bubbles[g].a)
                       <= self.params.M4 * diam for g in group):
                    group.add(k)
                    added = True
            if not added:
                break
            diam = max(geodesic_distance(cfg.bubbles[r].a, cfg.bubbles[t].a)
                       for r in group for t in group if r != t)
        bary = np.mean([cfg.bubbles[k].a.coords for k in group], axis=0)
        bary[-1] = 0.0
        bary /= np.linalg.norm(bary)
        gamma_i = max(geodesic_distance(cfg.bubbles[seed_i].a, cfg.bubbles[k].a) for k in group)
        lam_seed = cfg.bubbles[seed_i].lam
        for k in group:
            ak = cfg.bubbles[k].a.coords
            v = bary - float(np.dot(ak, bary)) * ak
            vel.a_dot[k] = vel.a_dot[k] + v / (lam_seed * max(gamma_i, 1e-300))
        return vel

    def _field_v33(self, cfg, asm, diags, cl) -> Velocity:
        vel = self._component_base(cfg, asm, diags, interior_rates=False,
                                   interior_points=False, boundary_rates=False)
        for key, info in cl.items():
            rec, members = info["record"], info["members"]
            if rec.is_boundary and rec.normal_derivative > 1e-9 and len(members) >= 2:
                vel.add(self._cluster_field(cfg, members))
        return vel

    def _field_w(self, cfg, asm, diags) -> Velocity:
        vel = self._component_base(cfg, asm, diags, interior_rates=False, boundary_rates=False)
        for i in range(cfg.q):
            g1 = self.K.boundary_gradient(cfg.bubbles[i].a)
            gate = psi1(cfg.bubbles[i].lam * float(np.linalg.norm(g1)) / self.params.M2)
            if gate > 0:
                vel.a_dot[i] = vel.a_dot[i] + gate * self._unit_drift(g1, cfg.bubbles[i].lam)
        for i in range(cfg.size):
            vel.loglam_dot[i] += 1.0
        return vel

    def _field_v4(self, cfg, asm, diags, label, depth=0) -> Velocity:
        params = self.params
        vel = self._component_base(cfg, asm, diags, interior_rates=False, boundary_rates=False)
        mus = np.array([d.mu for d in diags])
        order = list(np.argsort(mus))
        rank = {int(idx): pos for pos, idx in enumerate(order)}
        size = cfg.size
        tower = set(label.tower_set)

        d41 = [i for i in range(cfg.q, size)
               if diags[i].gamma_h + diags[i].gamma_a + diags[i].gamma_lambda >= 6.0]
        d42 = [i for i in range(cfg.q)
               if diags[i].gamma_lambda + diags[i].gamma_alpha >= 4.0]
        i0 = min((rank[i] for i in d41), default=None)
        j0 = min((rank[i] for i in d42), default=None)
        top = size - 1
        for i in range(size):
            w = 2.0 ** (rank[i] - top)
            if i >= cfg.q and i0 is not None and rank[i] >= i0:
                vel.loglam_dot[i] -= w
            if i < cfg.q and j0 is not None and rank[i] >= j0:
                vel.loglam_dot[i] -= w / params.M2

        # the comparable-scale lower tower gets its own (recursive) descent
        if tower and len(tower) < size and depth == 0:
            sub = self._restrict(cfg, sorted(tower))
            if sub is not None:
                sub_cfg, back = sub
                k0 = len(label.tower_set)
                m0_bar = params.M0 ** (max(k0 - 1, 1) / max(size - 1, 1))
                sub_params = replace(params, M0=max(m0_bar, 4.0),
                                     M4=max(math.sqrt(m0_bar / params.smallness), 10.0),
                                     max_qp=max(len(back), 2))
                try:
                    sub_flow = PseudogradientFlow(self.model, self.records, sub_params)
                    sub_label = sub_flow.classify_region(sub_cfg)
                    sub_vel = sub_flow.pseudogradient(sub_cfg, sub_label, depth=depth + 1)
                    for si, gi in enumerate(back):
                        vel.alpha_dot[gi] += sub_vel.alpha_dot[si] / params.M2**2
                        vel.a_dot[gi] = vel.a_dot[gi] + sub_vel.a_dot[si] / params.M2**2
                        extra = sub_vel.loglam_dot[si] / params.M2**2
                        if params.strict_lambda_sign:
                            extra = min(extra, 0.0)
                        vel.loglam_dot[gi] += extra
                except (ConfigError, InvalidConfiguration, UnclassifiableState,
                        OutsideNeighborhood):
                    # an inadmissible sub-problem forfeits its extra descent
                    # content; the ranked components above still apply
                    pass
        return vel

    def _restrict(self, cfg: Configuration, indices):
        try:
            q_sub = sum(1 for i in indices if i < cfg.q)
            alphas = [cfg.alphas[i] for i in indices]
            bubbles = [cfg.bubbles[i] for i in indices]
            sub = Configuration(tuple(alphas), tuple(bubbles), q_sub,
                                len(indices) - q_sub, cfg.eps_scale)
            return sub, list(indices)
        except InvalidConfiguration:
            return None

    # -- assembled field -----------------------------------------------------------

    def pseudogradient(self, cfg: Configuration, label: RegionLabel | None = None,
                       asm=None, depth: int = 0) -> Velocity:
        asm = asm or self.model.assemble(cfg)
        label = label or self.classify_region(cfg, asm)
        diags = label.per_index
        cl = {k: {"record": self._anchor_record(k), "members": v}
              for k, v in label.clusters.items()}
        total = Velocity.zero(cfg.size, self.n + 1)
        for name, w in label.weights.items():
            if w <= 0:
                continue
            if name == "V1":
                part = self._field_v1(cfg, asm, diags)
            elif name == "V2":
                part = self._field_v2(cfg, asm, diags)
            elif name == "V3_1":
                part = self._field_v31(cfg, asm, diags)
            elif name == "V3_2":
                part = self._field_v32(cfg, asm, diags, cl)
            elif name == "V3_3":
                part = self._field_v33(cfg, asm, diags, cl)
            elif name == "W":
                part = self._field_w(cfg, asm, diags)
            elif name == "V4":
                part = self._field_v4(cfg, asm, diags, label, depth=depth)
            else:
                raise UnclassifiableState(f"unknown region weight {name}")
            if self.params.strict_lambda_sign and name != "W":
                part.loglam_dot = np.minimum(part.loglam_dot, 0.0)
            total.add(part.scaled(w))
        return total

    def _anchor_record(self, key):
        for r in self.records:
            if tuple(np.round(r.location.coords, 9)) == key:
                return r
        raise UnclassifiableState("anchor record disappeared")

    # -- descent certificate ----------------------------------------------------------

    def decrease_certificate(self, cfg: Configuration, velocity: Velocity | None = None,
                             c_fit: float = 0.1) -> dict:
        asm = self.model.assemble(cfg)
        vel = velocity if velocity is not None else self.pseudogradient(cfg, asm=asm)
        n = self.n
        lhs = Bar(0.0, 0.0)
        for i in range(cfg.size):
            ga = self.model.grad_alpha(cfg, i, asm)
            lhs = lhs + ga * (-float(vel.alpha_dot[i]))
            if cfg.is_boundary_index(i):
                gl = self.model.grad_lambda_boundary(cfg, i, asm)
            else:
                gl = self.model.grad_lambda_interior(cfg, i, asm)
            lhs = lhs + gl * (-float(vel.loglam_dot[i]) * cfg.alphas[i])
            gv, gbar = self.model.grad_a(cfg, i, asm)
            move = cfg.bubbles[i].lam * vel.a_dot[i]
            lhs = lhs + Bar(-float(gv @ move) * cfg.alphas[i],
                            gbar * float(np.linalg.norm(move)) * cfg.alphas[i])

        imb = self.model.imbalances(cfg, asm)
        expo = 2.0 - 1.0 / (n - 2)
        agg = 0.0
        for i in range(cfg.size):
            agg += self.mu(cfg, i) ** (-expo)
            if cfg.is_boundary_index(i):
                agg += abs(imb[i]) ** expo
            else:
                b = cfg.bubbles[i]
                ld = b.lam * b.boundary_distance()
                agg += ld ** (1 - n) + (asm.frames[i].grad_norm / b.lam) ** expo
        m = cfg.size
        for i in range(m):
            for j in range(i + 1, m):
                agg += 2.0 * asm.eps_mat[i, j] ** ((n - 1.0) / (n - 2.0))
        return {
            "lhs": lhs,
            "rhs_lower_bound": c_fit * agg,
            "aggregate": agg,
            "c_fit": c_fit,
            "satisfied": bool(lhs.lo >= c_fit * agg),
        }

    # -- integration ---------------------------------------------------------------

    def integrate(self, cfg0: Configuration, t_max: float,
                  record_every: int = 1) -> Trajectory:
        """Adaptive explicit descent with step rejection on energy increase."""
        params = self.params
        cfg = cfg0
        asm = self.model.assemble(cfg)
        label = self.classify_region(cfg, asm)
        j_val = asm.j_bar
        t = 0.0
        dt = params.dt_init
        points = [TrajectoryPoint(t, cfg, label.tag, j_val,
                                  tuple(), tuple(self.mus(cfg)))]
        reason = "t_max"
        step_index = 0
        while t < t_max - 1e-12:
            vel = self.pseudogradient(cfg, label, asm)
            points[-1] = replace(points[-1], loglam_dot=tuple(vel.loglam_dot))
            if vel.norm() < params.stagnation_tol:
                reason = "stagnation"
                break
            rejects = 0
            while True:
                dt_step = min(dt, t_max - t)
                try:
                    new_cfg = self._advance(cfg, vel, dt_step)
                except InvalidConfiguration:
                    reason = "neighborhood_exit"
                    new_cfg = None
                    break
                new_asm = self.model.assemble(new_cfg)
                slack = max(1e-10, 0.5 * (j_val.halfwidth + new_asm.j_bar.halfwidth) * 1e-3)
                if new_asm.j_bar.center <= j_val.center + slack:
                    break
                rejects += 1
                dt *= 0.5
                if rejects >= params.max_rejects:
                    raise StepFailure(
                        f"{rejects} consecutive rejected steps at t = {t}")
            if new_cfg is None:
                break
            t += dt_step
            cfg, asm, j_val = new_cfg, new_asm, new_asm.j_bar
            try:
                label = self.classify_region(cfg, asm)
            except OutsideNeighborhood:
                reason = "neighborhood_exit"
                break
            step_index += 1
            if step_index % record_every == 0:
                points.append(TrajectoryPoint(t, cfg, label.tag, j_val,
                                              tuple(vel.loglam_dot), tuple(self.mus(cfg))))
            if rejects == 0:
                dt = min(dt * 1.4, params.dt_max)
        if points[-1].t < t - 1e-12:
            points.append(TrajectoryPoint(t, cfg, label.tag, j_val,
                                          tuple(), tuple(self.mus(cfg))))
        return Trajectory(points=points, reason=reason)

    def _advance(self, cfg: Configuration, vel: Velocity, dt: float) -> Configuration:
        alphas = [a + dt * float(da) for a, da in zip(cfg.alphas, vel.alpha_dot)]
        bubbles = []
        for i, b in enumerate(cfg.bubbles):
            coords = geodesic_step(b.a.coords, vel.a_dot[i], dt)
            if cfg.is_boundary_index(i):
                coords = coords.copy()
                coords[-1] = 0.0
                coords /= np.linalg.norm(coords)
                pt = BoundarySpherePoint(coords)
            else:
                pt = SpherePoint(coords)
            lam = b.lam * math.exp(dt * float(vel.loglam_dot[i]))
            bubbles.append(BubbleParam(pt, lam))
        return cfg.replace(alphas=alphas, bubbles=bubbles)
