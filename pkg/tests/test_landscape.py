import json

import numpy as np
import pytest

from hemiflow.errors import AmbiguousSign, DegenerateCriticalPoint
from hemiflow.fields import ScalarField, hemisphere_grid
from hemiflow.landscape import (CriticalPointRecord, _classify_boundary,
                                check_assumptions, classify, find_critical_points,
                                hemisphere_index_tally, load_records,
                                poincare_hopf_boundary, save_records)

from _fixtures import (E, N, field_boundary_max, field_diag, field_h3_quadratic_flat,
                       field_linear)


@pytest.fixture(scope="module")
def linear_records():
    return find_critical_points(field_linear(), 8)


@pytest.fixture(scope="module")
def diag_records():
    return find_critical_points(field_diag(), 8)


class TestLinearField:
    def test_exactly_two_roots_on_equator(self, linear_records):
        assert len(linear_records) == 2
        locs = sorted(tuple(np.round(r.location.coords, 8)) for r in linear_records)
        assert np.allclose(locs[0], -E[0])
        assert np.allclose(locs[1], E[0])
        assert all(r.is_boundary for r in linear_records)

    def test_laplacian_values(self, linear_records):
        # coordinate restrictions satisfy lap x1 = -n x1
        for r in linear_records:
            expected = -N * 0.05 * r.location.coords[0]
            assert abs(r.laplacian - expected) < 1e-10

    def test_classification(self, linear_records):
        families = classify(linear_records)
        assert len(families["K_b_0_minus"]) == 1
        assert np.allclose(families["K_b_0_minus"][0].location.coords, E[0])
        assert len(families["K_infinity"]) == 1
        assert len(families["K_b_plus"]) == 0  # field independent of the height
        assert len(families["other"]) == 1

    def test_morse_index_of_trace_maximum(self, linear_records):
        top = max(linear_records, key=lambda r: r.value)
        assert top.morse_index == N - 1
        assert top.is_local_max()
        assert top.iota(N) == 0

    def test_gradient_norm_small(self, linear_records):
        K = field_linear()
        for r in linear_records:
            assert np.linalg.norm(K.boundary_gradient(r.location)) <= 1e-9


class TestDegenerateField:
    def test_constant_raises(self):
        with pytest.raises(DegenerateCriticalPoint):
            find_critical_points(ScalarField.constant(N), 8)

    def test_seed_floor(self):
        with pytest.raises(ValueError):
            find_critical_points(field_linear(), 4)


class TestCraftedQuadratic:
    def test_full_root_list_against_grid_scan(self, diag_records):
        # every dense-scan cluster contains exactly one found root and
        # every found root is hit by the scan
        K = field_diag()
        pts = hemisphere_grid(N, 40)
        g = K.linear + pts @ (2.0 * K.quadratic)
        rad = np.einsum("ki,ki->k", g, pts)
        gt = g - rad[:, None] * pts
        # treat near-boundary points through the trace gradient as well
        cand = pts[np.linalg.norm(gt, axis=1) < 2e-3]
        found = np.array([r.location.coords for r in diag_records])
        dist = np.arccos(np.clip(cand @ found.T, -1, 1))
        assert dist.min(axis=1).max() < 2e-3
        hit = np.zeros(len(found), dtype=bool)
        hit[np.unique(np.argmin(dist, axis=1))] = True
        assert hit.all()

    def test_expected_count_and_kinds(self, diag_records):
        assert len(diag_records) == 11
        boundary = [r for r in diag_records if r.is_boundary]
        interior = [r for r in diag_records if not r.is_boundary]
        assert len(boundary) == 10 and len(interior) == 1
        assert np.allclose(np.abs(interior[0].location.coords), E[-1])
        assert interior[0].morse_index == N
        assert interior[0].classification == "K_in_minus"

    def test_admissible_families(self, diag_records):
        families = classify(diag_records)
        assert len(families["K_b_0_minus"]) == 2
        assert len(families["K_in_minus"]) == 1
        assert len(families["K_infinity"]) == 3


class TestAssumptions:
    def test_linear_field_satisfies_all(self, linear_records):
        rep = check_assumptions(linear_records, field_linear())
        assert rep.all_hold()
        assert rep.violations == []
        # the field has no height dependence: both branch reports hold with
        # the ratio chain identically zero
        for info in rep.h3_branches.values():
            assert info["branch_i"] and info["branch_ii"]
            assert max(info["ratios"]) == 0.0

    def test_boundary_max_field(self):
        K = field_boundary_max()
        recs = find_critical_points(K, 8)
        rep = check_assumptions(recs, K)
        assert rep.all_hold()
        families = classify(recs)
        assert len(families["K_b_plus"]) == 1
        assert families["K_b_plus"][0].is_local_max()

    def test_non_maximum_with_positive_normal_derivative_violates(self):
        # tilting the height linearly makes the trace minimum carry a
        # positive outward derivative
        K = ScalarField(N, 1.0, [("x1", 0.05), ("x6", -0.02)])
        recs = find_critical_points(K, 8)
        rep = check_assumptions(recs, K)
        assert not rep.h2
        assert any("non-maximum" in v for v in rep.violations)

    def test_quadratically_flat_normal_derivative_branch(self):
        K = field_h3_quadratic_flat()
        recs = find_critical_points(K, 8)
        rep = check_assumptions(recs, K)
        assert rep.h3
        z_key = tuple(np.round(E[0], 6))
        info = rep.h3_branches[z_key]
        assert info["branch_ii"]
        ratios = info["ratios"]
        assert ratios[-1] <= 0.01 * ratios[0] + 1e-12
        # the sampled ratio scales linearly with the radius
        assert ratios[1] < 0.75 * ratios[0]


class TestClassification:
    def test_positive_rescale_invariance(self, diag_records):
        K = field_diag()
        for t in (0.5, 3.0):
            K2 = ScalarField(N, t * K.kappa0, [
                (m["monomial"], t * m["coeff"]) for m in K.to_config()["terms"]])
            recs2 = find_critical_points(K2, 8)
            f1 = classify(diag_records)
            f2 = classify(recs2)
            for key in ("K_in_minus", "K_b_plus", "K_b_0_minus"):
                assert len(f1[key]) == len(f2[key])

    def test_dead_band_raises(self):
        with pytest.raises(AmbiguousSign):
            _classify_boundary(5e-9, -1.0)

    def test_exact_zero_and_clear_signs(self):
        assert _classify_boundary(0.0, -1.0) == "K_b_0_minus"
        assert _classify_boundary(0.0, 1.0) == "other"
        assert _classify_boundary(0.5, -1.0) == "K_b_plus"
        assert _classify_boundary(-0.5, -1.0) == "other"


class TestIndexSums:
    def test_equator_euler_characteristic(self, linear_records, diag_records):
        expected = 1 + (-1) ** (N - 1)
        assert poincare_hopf_boundary(linear_records, N) == expected
        assert poincare_hopf_boundary(diag_records, N) == expected

    def test_interior_tally_reported(self, diag_records):
        assert hemisphere_index_tally(diag_records) == (-1) ** N


class TestSerialization:
    def test_roundtrip_reverifies_gradient(self, tmp_path, diag_records):
        path = tmp_path / "records.json"
        save_records(diag_records, path)
        K = field_diag()
        loaded = load_records(path)
        assert len(loaded) == len(diag_records)
        for r in loaded:
            g = (K.boundary_gradient(r.location) if r.is_boundary
                 else K.tangent_gradient(r.location))
            assert np.linalg.norm(g) <= 1e-9

    def test_json_fields(self, linear_records):
        doc = linear_records[0].to_json()
        back = CriticalPointRecord.from_json(json.loads(json.dumps(doc)))
        assert back.kind == linear_records[0].kind
        assert back.morse_index == linear_records[0].morse_index
        assert np.allclose(back.location.coords, linear_records[0].location.coords)
