import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aflab import constellation as C
from aflab.errors import AssumptionViolationError, InvalidArgumentError


def _moment_oracle(points, probs):
    """Plain-loop moments, independent of the vectorized implementation."""
    mean = sum(p * s for s, p in zip(points, probs))
    power = sum(p * abs(s) ** 2 for s, p in zip(points, probs))
    pseudo = sum(p * s * s for s, p in zip(points, probs))
    fourth = sum(p * abs(s) ** 4 for s, p in zip(points, probs))
    return mean, power, pseudo, fourth / power ** 2


class TestConstructors:
    def test_qpsk_points(self):
        c = C.make_qam(4)
        expected = {complex(a, b) / np.sqrt(2) for a, b in itertools.product((1, -1), repeat=2)}
        assert len(c.points) == 4
        for p in c.points:
            assert min(abs(p - e) for e in expected) < 1e-15
        assert C.kurtosis(c) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("order", [4, 16, 64, 256])
    def test_qam_matches_moment_oracle(self, order):
        c = C.make_qam(order)
        mean, power, pseudo, kappa = _moment_oracle(c.points, c.probs)
        assert c.size == order
        assert abs(mean) < 1e-12 and abs(power - 1) < 1e-12 and abs(pseudo) < 1e-12
        assert C.kurtosis(c) == pytest.approx(kappa, abs=1e-12)

    def test_qam16_kurtosis(self):
        assert C.kurtosis(C.make_qam(16)) == pytest.approx(1.32, abs=1e-12)

    @pytest.mark.parametrize("order", [8, 2, 32, 5])
    def test_qam_rejects_unsupported(self, order):
        with pytest.raises(InvalidArgumentError):
            C.make_qam(order)

    @pytest.mark.parametrize("order", [3, 4, 8, 16])
    def test_psk_moments(self, order):
        s = C.stats(C.make_psk(order))
        assert abs(s.mean) < 1e-12 and abs(s.pseudo_variance) < 1e-12
        assert s.power == pytest.approx(1.0, abs=1e-12)
        assert s.kurtosis == pytest.approx(1.0, abs=1e-12)

    def test_bpsk_is_assumption_violation(self):
        with pytest.raises(AssumptionViolationError):
            C.make_psk(2)

    def test_psk_order_too_small(self):
        with pytest.raises(InvalidArgumentError):
            C.make_psk(1)

    def test_gaussian_marker(self):
        g = C.make_gaussian()
        assert g.is_gaussian and g.size == 0
        assert C.kurtosis(g) == 2.0
        assert C.stats(g).category == "gaussian"

    def test_gaussian_sample_moments(self):
        z = C.sample(C.make_gaussian(), 10**6, seed=3).values
        assert abs(z.mean()) < 5e-3
        assert abs(np.mean(z * z)) < 5e-3

    @pytest.mark.parametrize(
        "r1sq, r2sq, p, kappa",
        [(1.0, 1.0, 0.3, 1.0), (0.2, 1.8, 0.5, 1.64), (1 / 3, 7.0, 0.9, 5.0)],
    )
    def test_two_ring_kurtosis(self, r1sq, r2sq, p, kappa):
        c = C.make_two_ring(np.sqrt(r1sq), np.sqrt(r2sq), p, 6)
        # direct formula p r1^4 + (1-p) r2^4 with unit power
        assert p * r1sq**2 + (1 - p) * r2sq**2 == pytest.approx(kappa, abs=1e-12)
        assert C.kurtosis(c) == pytest.approx(kappa, abs=1e-12)

    def test_two_ring_monte_carlo(self):
        c = C.make_two_ring(np.sqrt(0.2), np.sqrt(1.8), 0.5, 4)
        s = C.sample(c, 10**6, seed=1).values
        assert np.mean(np.abs(s) ** 4) / np.mean(np.abs(s) ** 2) ** 2 == pytest.approx(1.64, rel=1e-2)

    def test_two_ring_rescales_power(self):
        c = C.make_two_ring(1.0, 3.0, 0.5, 4)
        assert C.stats(c).power == pytest.approx(1.0, abs=1e-12)

    def test_two_ring_bad_params(self):
        with pytest.raises(InvalidArgumentError):
            C.make_two_ring(1.0, 2.0, 1.5, 4)
        with pytest.raises(InvalidArgumentError):
            C.make_two_ring(1.0, 2.0, 0.5, 2)


class TestStatsAndSampling:
    def test_categories(self, qam16, two_ring):
        assert C.stats(qam16).category == "sub-gaussian"
        assert C.stats(two_ring).category == "super-gaussian"

    def test_sample_deterministic(self, qam16):
        a = C.sample(qam16, (8, 4), seed=7).values
        b = C.sample(qam16, (8, 4), seed=7).values
        c = C.sample(qam16, (8, 4), seed=8).values
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_sample_members(self, qam16):
        block = C.sample(qam16, 500, seed=0)
        assert block.constellation_label == "qam16"
        assert np.all(np.min(np.abs(block.values[:, None] - qam16.points[None, :]), axis=1) == 0)

    def test_qpsk_empirical_power(self, qpsk):
        s = C.sample(qpsk, 10**5, seed=2).values
        assert 0.99 <= np.mean(np.abs(s) ** 2) <= 1.01

    def test_gaussian_empirical_kurtosis(self):
        s = C.sample(C.make_gaussian(), 10**5, seed=2).values
        k = np.mean(np.abs(s) ** 4) / np.mean(np.abs(s) ** 2) ** 2
        assert 1.95 <= k <= 2.05

    def test_empty_shape_rejected(self, qpsk):
        with pytest.raises(InvalidArgumentError):
            C.sample(qpsk, (0, 3), seed=0)

    @given(st.lists(st.floats(0.2, 3.0), min_size=1, max_size=3), st.integers(3, 9))
    @settings(max_examples=40, deadline=None)
    def test_kurtosis_at_least_one(self, radii, phases):
        """Power-mean inequality: kappa >= 1, with equality for equal moduli."""
        pts, probs = [], []
        for r in radii:
            pts += [r * np.exp(2j * np.pi * k / phases) for k in range(phases)]
            probs += [1.0 / (len(radii) * phases)] * phases
        pts = np.array(pts)
        pts /= np.sqrt(np.mean(np.abs(pts) ** 2))
        c = C.Constellation(pts, np.array(probs), "rings", tol=1e-9)
        kappa = C.kurtosis(c)
        assert kappa >= 1 - 1e-12
        if np.ptp(radii) == 0:
            assert kappa == pytest.approx(1.0, abs=1e-9)


class TestValidation:
    def test_rejects_nonzero_mean(self):
        with pytest.raises(AssumptionViolationError):
            C.Constellation(np.array([1.0 + 0j, 1j]), np.array([0.5, 0.5]), "bad")

    def test_rejects_bad_probs(self):
        with pytest.raises(InvalidArgumentError):
            C.Constellation(np.array([1.0, -1.0, 1j, -1j]), np.array([0.3, 0.3, 0.3, 0.3]), "bad")

    def test_json_round_trip(self, tmp_path, qam16):
        path = tmp_path / "c.json"
        qam16.save(path)
        back = C.Constellation.load(path)
        assert np.array_equal(back.points, qam16.points)
        assert np.array_equal(back.probs, qam16.probs)
        assert back.label == qam16.label

    @pytest.mark.parametrize(
        "text, label",
        [("qpsk", "qpsk"), ("qam16", "qam16"), ("qam64", "qam64"), ("psk8", "psk8"), ("gaussian", "gaussian")],
    )
    def test_parse(self, text, label):
        assert C.parse_constellation(text).label == label

    def test_parse_two_ring(self):
        c = C.parse_constellation("two-ring:0.57735,2.64575,0.9,8")
        assert C.kurtosis(c) == pytest.approx(5.0, rel=1e-4)

    def test_parse_file(self, tmp_path, qpsk):
        qpsk.save(tmp_path / "q.json")
        assert C.parse_constellation(f"file:{tmp_path / 'q.json'}").size == 4

    def test_parse_unknown(self):
        with pytest.raises(InvalidArgumentError):
            C.parse_constellation("qam12x")


class TestFourthMoment:
    def test_qpsk_exhaustive(self, qpsk):
        res = C.fourth_moment_matrix(qpsk, 2)
        assert res.exhaustive and res.deviation < 1e-12

    def test_structure_matches_loop_oracle(self, qam16):
        """Exhaustive n=2 expectation computed entry by entry with explicit loops."""
        n = 2
        seqs, w = C.all_sequences(qam16, n)
        oracle = np.zeros((n * n, n * n), dtype=complex)
        for s, p in zip(seqs, w):
            v = np.array([s[a] * np.conj(s[b]) for b in range(n) for a in range(n)])
            oracle += p * np.outer(v, v.conj())
        assert np.max(np.abs(oracle - C.fourth_moment_structure(n, 1.32))) < 1e-12

    def test_diagonal_entry_is_kappa(self):
        m = C.fourth_moment_structure(3, 1.32)
        assert m[0, 0] == pytest.approx(1.32)
        assert m[4, 4] == pytest.approx(1.32)
        assert m[1, 1] == pytest.approx(1.0)

    def test_gaussian_monte_carlo(self):
        res = C.fourth_moment_matrix(C.make_gaussian(), 2, trials=10**6, seed=4)
        assert not res.exhaustive and not res.low_trials_warning
        assert res.deviation < 2e-2

    def test_low_trials_flag(self, qpsk):
        assert C.fourth_moment_matrix(qpsk, 2, trials=100, seed=0).low_trials_warning

    def test_size_limit(self, qpsk):
        with pytest.raises(InvalidArgumentError):
            C.fourth_moment_matrix(qpsk, 5)

    def test_gaussian_not_enumerable(self):
        with pytest.raises(InvalidArgumentError):
            C.fourth_moment_matrix(C.make_gaussian(), 2)
