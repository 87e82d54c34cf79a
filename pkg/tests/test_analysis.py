"""Error measures, bound evaluators, and the error-matrix spectrum."""

import cmath
import math
from array import array

import pytest

from egt.analysis import (
    ErrorReport,
    error_report,
    error_spectrum,
    frobenius_bound,
    frobenius_bound_half_budget,
    off_norm,
    operator_norm_bound,
)
from egt.errors import DomainError, ShapeError, ValidationError
from egt.factorizer import FactorizerConfig, GivensProduct, factorize
from egt.fastapply import dense_operator
from egt.givens2x2 import ExtendedGivens, ROTATION
from egt.matcore import (
    DenseMatrix,
    DiagonalWeights,
    Rng,
    haar_orthogonal,
    matmul,
)

np = pytest.importorskip("numpy")


def to_np(m):
    return np.array(m.to_rows())


def rotation_product(d, p, pairs_and_angles):
    transforms = [
        ExtendedGivens(i, j, math.cos(t), math.sin(t), ROTATION)
        for (i, j, t) in pairs_and_angles
    ]
    return GivensProduct(d, p, transforms, DiagonalWeights.ones(d, p))


def negation_product(d):
    # Product equal to -I for even d: rotations by pi on disjoint pairs.
    pairs = [(2 * k, 2 * k + 1, math.pi) for k in range(d // 2)]
    return rotation_product(d, d, pairs)


def power_opnorm(e, iters=3000, seed=0):
    """Largest singular value via power iteration on E^T E."""
    rng = np.random.default_rng(seed)
    m = e.T @ e
    v = rng.standard_normal(e.shape[1])
    for _ in range(iters):
        w = m @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
    return math.sqrt(float(v @ (m @ v)))


class TestErrorReport:
    def test_exact_match_gives_zero_errors(self):
        prod = rotation_product(6, 6, [(0, 3, 0.4), (1, 2, 1.1), (2, 5, 2.0)])
        u = dense_operator(prod)
        rep = error_report(u, prod, DiagonalWeights.ones(6, 6))
        assert rep.frobenius_sq == 0.0
        assert rep.normalized_frobenius == 0.0
        assert rep.operator_norm <= 1e-12
        assert rep.principal_angle_rad <= 1e-6
        assert all(abs(c - 1.0) <= 1e-12 for c in rep.cosines)
        assert rep.off_norm <= 1e-12

    def test_antipodal_pair(self):
        d = 6
        u = DenseMatrix.identity(d)
        prod = negation_product(d)
        rep = error_report(u, prod, DiagonalWeights.ones(d, d))
        assert abs(rep.frobenius_sq - 4.0 * d) <= 1e-12
        assert abs(rep.operator_norm - 2.0) <= 1e-12
        assert all(abs(c + 1.0) <= 1e-12 for c in rep.cosines)
        assert rep.cosine_min == rep.cosine_max == -1.0
        # -I aligns the same subspace, so the principal angle stays zero.
        assert rep.principal_angle_rad <= 1e-7
        assert abs(rep.normalized_frobenius - 4.0 * d / (2.0 * d)) <= 1e-12

    def test_operator_norm_matches_power_iteration(self):
        for seed in (3, 7, 11):
            u = haar_orthogonal(10, seed=seed)
            cfg = FactorizerConfig(g=18, max_sweeps=3, seed=seed)
            u_p = u.first_columns(6)
            prod = factorize(u_p, [1.0] * 6, cfg)
            rep = error_report(u_p, prod, [1.0] * 6)
            u_bar = dense_operator(prod).first_columns(6)
            e = np.eye(6) - to_np(u_p).T @ to_np(u_bar)
            assert abs(rep.operator_norm - power_opnorm(e)) <= 1e-8

    def test_weighted_identity_with_squared_weights(self):
        # ||(U - Ubar) diag(s)||^2 == 2 sum s_t^2 (1 - cos_t), exactly by
        # expansion; checked to 1e-9 relative on random factorizations.
        u = haar_orthogonal(8, seed=5)
        cfg = FactorizerConfig(g=10, max_sweeps=3)
        prod = factorize(u, [1.0] * 8, cfg)
        sig = [0.5 + 0.3 * t for t in range(8)]
        rep = error_report(u, prod, sig)
        rhs = 2.0 * sum(s * s * (1.0 - c) for s, c in zip(sig, rep.cosines))
        assert abs(rep.frobenius_sq - rhs) <= 1e-9 * max(1.0, rhs)

    def test_weighted_identity_prose_form(self):
        # With sqrt weights the cosine sum carries the raw sigmas.
        u = haar_orthogonal(8, seed=6)
        cfg = FactorizerConfig(g=12, max_sweeps=3)
        prod = factorize(u, [1.0] * 8, cfg)
        sig = [1.0 + 0.25 * t for t in range(8)]
        rep = error_report(u, prod, [math.sqrt(s) for s in sig])
        rhs = 2.0 * sum(s * (1.0 - c) for s, c in zip(sig, rep.cosines))
        assert abs(rep.frobenius_sq - rhs) <= 1e-9 * max(1.0, rhs)

    def test_matches_factorizer_objective(self):
        u = haar_orthogonal(9, seed=13)
        u_p = u.first_columns(4)
        sig = [3.0, 2.0, 1.5, 1.0]
        cfg = FactorizerConfig(g=12, sigma_rule="original", max_sweeps=4)
        prod = factorize(u_p, sig, cfg)
        rep = error_report(u_p, prod, sig)
        assert abs(rep.frobenius_sq - prod.metadata["objective"]) <= 1e-9

    def test_invariant_ranges(self):
        for seed in range(6):
            u = haar_orthogonal(7, seed=100 + seed)
            p = 1 + seed
            u_p = u.first_columns(p)
            cfg = FactorizerConfig(g=9, max_sweeps=2, seed=seed)
            prod = factorize(u_p, [1.0] * p, cfg)
            rep = error_report(u_p, prod, [1.0] * p)
            assert 0.0 <= rep.operator_norm <= 2.0 + 1e-12
            assert all(-1.0 - 1e-12 <= c <= 1.0 + 1e-12 for c in rep.cosines)
            assert 0.0 <= rep.principal_angle_rad <= math.pi / 2.0 + 1e-12
            assert rep.cosine_min <= rep.cosine_mean <= rep.cosine_max

    def test_shape_mismatch_rejected(self):
        u = haar_orthogonal(6, seed=1)
        prod = negation_product(6)
        with pytest.raises(ShapeError):
            error_report(u.first_columns(3), prod, [1.0] * 3)
        with pytest.raises(ShapeError):
            error_report(u, prod, [1.0] * 3)

    def test_json_round_trip_field_names(self):
        import json

        u = haar_orthogonal(5, seed=2)
        prod = factorize(u, [1.0] * 5, FactorizerConfig(g=6, max_sweeps=2))
        rep = error_report(u, prod, [1.0] * 5)
        doc = json.loads(rep.to_json())
        assert set(doc) == {
            "frobenius_sq", "normalized_frobenius", "operator_norm",
            "principal_angle_rad", "cosines", "cosine_min", "cosine_mean",
            "cosine_max", "off_norm",
        }
        assert doc["cosines"] == list(rep.cosines)
        assert isinstance(ErrorReport(**{**doc, "cosines": tuple(doc["cosines"])}), ErrorReport)


class TestOffNorm:
    def test_identity_zero(self):
        assert off_norm(DenseMatrix.identity(7)) == 0.0

    def test_swap_matrix(self):
        m = DenseMatrix.from_rows([[0.0, 1.0], [1.0, 0.0]])
        assert abs(off_norm(m) - math.sqrt(2.0)) <= 1e-15

    def test_matches_double_sum_oracle(self):
        u = haar_orthogonal(50, seed=9)
        direct = math.sqrt(
            sum(
                u.get(t, q) ** 2
                for t in range(50)
                for q in range(50)
                if q != t
            )
        )
        assert abs(off_norm(u) - direct) <= 1e-12

    def test_rejects_non_square(self):
        with pytest.raises(ShapeError):
            off_norm(DenseMatrix(3, 2))


class TestFrobeniusBounds:
    def test_half_budget_frozen_values(self):
        assert abs(frobenius_bound_half_budget(50) - 82.27546149) <= 1e-6
        assert abs(frobenius_bound_half_budget(2) - 0.4550922982) <= 1e-9

    def test_half_budget_monotone(self):
        prev = frobenius_bound_half_budget(2)
        for d in range(3, 200):
            cur = frobenius_bound_half_budget(d)
            assert cur > prev
            prev = cur

    def test_full_budget_frozen_value(self):
        for d in (4, 10, 31):
            g_max = d * (d - 1) // 2
            got = frobenius_bound(d, g_max)
            want = 2.0 - 2.0 * math.sqrt(2.0) / math.sqrt(math.pi)
            assert abs(got - want) <= 1e-12
        assert abs(frobenius_bound(10, 45) - 0.4042309) <= 1e-6

    def test_non_increasing_in_g(self):
        for d in (8, 20, 50):
            prev = None
            for g in range(1, d * (d - 1) // 2 + 1):
                cur = frobenius_bound(d, g)
                if prev is not None:
                    assert cur <= prev + 1e-12
                prev = cur

    def test_domain_error_past_max_budget(self):
        with pytest.raises(DomainError):
            frobenius_bound(6, 16)
        with pytest.raises(ValidationError):
            frobenius_bound(6, 0)
        with pytest.raises(ValidationError):
            frobenius_bound(1, 1)

    def test_reference_point_is_finite(self):
        val = frobenius_bound(100, 1328)
        assert math.isfinite(val) and val > 0.0


class TestOperatorNormBound:
    def test_perfect_alignment(self):
        val, ok = operator_norm_bound([1.0, 1.0, 1.0], 3)
        assert val == 0.0 and ok

    def test_d2_orthogonal_columns(self):
        val, ok = operator_norm_bound([0.0, 0.5], 2)
        assert abs(val - 2.0) <= 1e-15 and ok

    def test_cap_at_two(self):
        val, ok = operator_norm_bound([0.1] * 4, 50)
        assert val == 2.0 and ok

    def test_negative_cosine_clears_flag(self):
        val, ok = operator_norm_bound([0.9, -0.2, 0.8], 10)
        assert val == 2.0 and not ok

    def test_out_of_range_rejected(self):
        with pytest.raises(ValidationError):
            operator_norm_bound([1.5], 4)
        with pytest.raises(ValidationError):
            operator_norm_bound([], 4)

    def test_dominates_measured_norm(self):
        hits = 0
        for seed in range(10):
            u = haar_orthogonal(8, seed=300 + seed)
            cfg = FactorizerConfig(g=24, max_sweeps=6, seed=seed)
            prod = factorize(u, [1.0] * 8, cfg)
            rep = error_report(u, prod, [1.0] * 8)
            val, ok = operator_norm_bound(rep.cosines, 8)
            if ok:
                hits += 1
                assert rep.operator_norm <= val + 1e-10
        assert hits > 0


class TestErrorSpectrum:
    def test_identical_inputs_give_zero(self):
        u = haar_orthogonal(8, seed=4)
        zs = error_spectrum(u, u)
        assert all(abs(z) <= 1e-7 for z in zs)
        assert len(zs) == 8

    def test_negated_inputs_give_two(self):
        u = haar_orthogonal(8, seed=4)
        neg = u.scaled_columns([-1.0] * 8)
        zs = error_spectrum(u, neg)
        assert all(abs(z - 2.0) <= 1e-7 for z in zs)

    def test_circle_invariant_random_pairs(self):
        for seed in range(10):
            u = haar_orthogonal(20, seed=2 * seed)
            v = haar_orthogonal(20, seed=2 * seed + 1)
            zs = error_spectrum(u, v)
            assert len(zs) == 20
            for z in zs:
                assert abs(abs(z - 1.0) - 1.0) <= 1e-8

    def test_matches_numpy_eigenvalues(self):
        for seed in range(6):
            d = 12
            u = haar_orthogonal(d, seed=50 + seed)
            v = haar_orthogonal(d, seed=90 + seed)
            zs = error_spectrum(u, v)
            e = np.eye(d) - to_np(u).T @ to_np(v)
            # Conjugate pairs tie on the real part, so sorted order is not
            # stable across implementations; match greedily by distance.
            ref = [complex(z) for z in np.linalg.eigvals(e)]
            for a in zs:
                b = min(ref, key=lambda z: abs(a - z))
                assert abs(a - b) <= 1e-7
                ref.remove(b)
            assert not ref

    def test_known_rotation_angles(self):
        # Ubar built from two disjoint plane rotations: Q = Ubar has
        # eigenvalues exp(+-i 0.3) and exp(+-i 1.2).
        d = 4
        u = DenseMatrix.identity(d)
        prod = rotation_product(d, d, [(0, 1, 0.3), (2, 3, 1.2)])
        ubar = dense_operator(prod)
        zs = error_spectrum(u, ubar)
        want = sorted(
            (
                1.0 - cmath.exp(1j * 0.3),
                1.0 - cmath.exp(-1j * 0.3),
                1.0 - cmath.exp(1j * 1.2),
                1.0 - cmath.exp(-1j * 1.2),
            ),
            key=lambda z: (z.real, z.imag),
        )
        for a, b in zip(zs, want):
            assert abs(a - b) <= 1e-12

    def test_odd_dimension_has_real_eigenvalue(self):
        u = haar_orthogonal(7, seed=17)
        v = haar_orthogonal(7, seed=18)
        zs = error_spectrum(u, v)
        assert len(zs) == 7
        reals = [z for z in zs if z.imag == 0.0]
        assert len(reals) >= 1
        for z in reals:
            assert min(abs(z), abs(z - 2.0)) <= 1e-9

    def test_rejects_non_orthonormal(self):
        m = DenseMatrix.identity(5)
        m.set(0, 0, 2.0)
        with pytest.raises(ValidationError):
            error_spectrum(m, DenseMatrix.identity(5))
        with pytest.raises(ShapeError):
            error_spectrum(DenseMatrix.identity(5), DenseMatrix.identity(4))
