import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aflab import bases as B
from aflab import constellation as C
from aflab import dpaf as D
from aflab import whgroup as W
from aflab.errors import InvalidArgumentError, StateSpaceTooLargeError

from conftest import complex_normal

WAVEFORMS = {
    "sc": {},
    "ofdm": {},
    "otfs": {"n1": 2, "n2": 2},
    "afdm": {"c1": "1/8"},
}


def _basis(kind, n, params):
    if kind == "sc":
        return B.sc_basis(n)
    if kind == "ofdm":
        return B.ofdm_basis(n)
    if kind == "otfs":
        return B.otfs_basis(params["n1"], params["n2"])
    return B.afdm_basis(n, params["c1"])


def _grid_rel_err(a, b):
    return np.max(np.abs(a - b)) / np.max(np.abs(b))


class TestRealized:
    def test_hand_examples(self):
        x = np.array([1.0, 1.0])
        assert abs(D.dpaf_value(x, 1, 0) - 2) < 1e-15
        assert abs(D.dpaf_value(x, 0, 1)) < 1e-15

    def test_origin_is_energy(self, rng):
        x = complex_normal(rng, 9)
        v = D.dpaf_value(x, 0, 0)
        assert abs(v.imag) < 1e-12 and abs(v.real - np.linalg.norm(x) ** 2) < 1e-12
        assert abs(D.dpaf_squared_grid(x).mainlobe - np.linalg.norm(x) ** 4) < 1e-10

    def test_impulse(self):
        x = np.zeros(6)
        x[1] = 1
        grid = D.dpaf_squared_grid(x).values
        assert np.all(grid[1:] == 0)
        np.testing.assert_allclose(grid[0], 1.0)

    def test_fast_matches_naive(self, rng):
        x = complex_normal(rng, 32)
        fast = D.dpaf_complex_grid(x)
        naive = D.dpaf_complex_grid_naive(x)
        assert _grid_rel_err(fast, naive) < 1e-9

    def test_pointwise_matches_grid(self, rng):
        x = complex_normal(rng, 5)
        grid = D.dpaf_complex_grid(x)
        for k in range(5):
            for q in range(5):
                assert abs(grid[k, q] - D.dpaf_value(x, k, q)) < 1e-12

    @given(st.integers(1, 24), st.integers(0, 2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_volume_identity(self, n, seed):
        x = complex_normal(np.random.default_rng(seed), n)
        grid = D.dpaf_squared_grid(x).values
        expected = n * np.linalg.norm(x) ** 4
        assert abs(grid.sum() - expected) <= 1e-10 * expected
        assert np.all(grid >= 0)

    def test_grid_read_only(self, rng):
        grid = D.dpaf_squared_grid(complex_normal(rng, 4))
        with pytest.raises(ValueError):
            grid.values[0, 0] = 1

    def test_eisl_refuses_realized(self, rng):
        with pytest.raises(InvalidArgumentError, match="expectation"):
            D.eisl_dp(D.dpaf_squared_grid(complex_normal(rng, 4)))


class TestMonteCarlo:
    def test_single_trial_is_realization(self, qam16):
        basis = B.ofdm_basis(8)
        mc = D.mc_expected_dp_grid(basis, qam16, 1, seed=5)
        from aflab.rng import substream
        s = C.draw(qam16, substream(5, 0), (1, 8))[0]
        np.testing.assert_allclose(mc.values, D.dpaf_squared_grid(basis.matrix @ s).values, rtol=1e-12)
        assert np.all(mc.meta["stderr"] == 0)

    def test_ofdm_16qam_converges(self, qam16):
        mc = D.mc_expected_dp_grid(B.ofdm_basis(64), qam16, 10_000, seed=11)
        ref = D.closed_form_dp_waveform("ofdm", 64, qam16).values
        assert abs(mc.values[5, 0] - 20.48) <= 0.05 * 20.48
        # every bin, no statistical allowance
        assert np.max(np.abs(mc.values - ref) / ref) <= 0.05

    def test_sc_qpsk_zero_delay(self, qpsk):
        mc = D.mc_expected_dp_grid(B.sc_basis(8), qpsk, 10_000, seed=2)
        assert abs(mc.values[0, 3]) <= 0.5

    def test_stderr_tracks_spread(self, qam16):
        mc = D.mc_expected_dp_grid(B.ofdm_basis(16), qam16, 4000, seed=1)
        se = mc.meta["stderr"]
        assert se.shape == (16, 16) and np.all(se[1:, 1:] > 0)
        ref = D.closed_form_dp_waveform("ofdm", 16, qam16).values
        assert np.max(np.abs(mc.values - ref)[1:, 1:] / se[1:, 1:]) < 6

    def test_thread_count_invariant(self, qam16):
        basis = B.afdm_basis(16, "1/32")
        one = D.mc_expected_dp_grid(basis, qam16, 1200, seed=3, threads=1)
        four = D.mc_expected_dp_grid(basis, qam16, 1200, seed=3, threads=4)
        assert np.array_equal(one.values, four.values)

    def test_rejects_zero_trials(self, qpsk):
        with pytest.raises(InvalidArgumentError):
            D.mc_expected_dp_grid(B.sc_basis(4), qpsk, 0, seed=0)

    def test_gaussian_allowed(self):
        mc = D.mc_expected_dp_grid(B.ofdm_basis(8), C.make_gaussian(), 3000, seed=4)
        assert abs(mc.mainlobe / D.mainlobe_formula(8, 2.0) - 1) < 0.1


class TestEnumeration:
    def test_ofdm_qpsk_n4(self, qpsk):
        g = D.enumerated_expected_dp_grid(B.ofdm_basis(4), qpsk).values
        assert abs(g[0, 0] - 16) < 1e-12
        assert np.max(np.abs(g[1:, 0])) < 1e-12
        np.testing.assert_allclose(g[:, 1:], 4.0, atol=1e-12)

    def test_sc_is_transpose_of_ofdm(self, qpsk):
        sc = D.enumerated_expected_dp_grid(B.sc_basis(4), qpsk).values
        ofdm = D.enumerated_expected_dp_grid(B.ofdm_basis(4), qpsk).values
        np.testing.assert_allclose(sc, ofdm.T, atol=1e-12)

    @pytest.mark.parametrize("kind", list(WAVEFORMS))
    @pytest.mark.parametrize("const", ["qpsk", "qam16"])
    def test_closed_forms_n4(self, kind, const, request):
        c = request.getfixturevalue(const)
        basis = _basis(kind, 4, WAVEFORMS[kind])
        enum = D.enumerated_expected_dp_grid(basis, c).values
        general = D.closed_form_dp_grid(basis, c).values
        pattern = D.closed_form_dp_waveform(kind, 4, c, WAVEFORMS[kind]).values
        assert _grid_rel_err(general, enum) < 1e-9
        assert _grid_rel_err(pattern, enum) < 1e-9
        assert abs(D.eisl_dp(D.AFGrid(enum, "enumerated"))["normalized_eisl"] - 3) < 1e-9

    @pytest.mark.parametrize("kind, params", [("sc", {}), ("ofdm", {}), ("otfs", {"n1": 2, "n2": 4}), ("afdm", {"c1": "1/16"})])
    def test_closed_forms_n8(self, kind, params, qpsk):
        basis = _basis(kind, 8, params)
        enum = D.enumerated_expected_dp_grid(basis, qpsk).values
        assert _grid_rel_err(D.closed_form_dp_waveform(kind, 8, qpsk, params).values, enum) < 1e-9

    def test_haar_basis(self, qam16):
        basis = B.haar_basis(4, 8)
        enum = D.enumerated_expected_dp_grid(basis, qam16).values
        assert _grid_rel_err(D.closed_form_dp_grid(basis, qam16).values, enum) < 1e-9

    def test_state_space_limit(self, qam16):
        with pytest.raises(StateSpaceTooLargeError, match="16\\^8"):
            D.enumerated_expected_dp_grid(B.ofdm_basis(8), qam16)

    def test_gaussian_rejected(self):
        with pytest.raises(InvalidArgumentError, match="finite"):
            D.enumerated_expected_dp_grid(B.ofdm_basis(2), C.make_gaussian())


class TestClosedForm:
    def test_mainlobe(self):
        g = D.closed_form_dp_grid(B.haar_basis(8, 1), 1.32)
        assert abs(g.mainlobe - (64 + 0.32 * 8)) < 1e-10

    def test_haar_bounds(self):
        g = D.closed_form_dp_grid(B.haar_basis(8, 2), 1.32)
        side = g.sidelobes()
        assert np.all(side >= 0.32 * 8 - 1e-10) and np.all(side <= 8 + 1e-10)

    def test_bounds_flip_above_two(self):
        side = D.closed_form_dp_grid(B.haar_basis(8, 2), 5.0).sidelobes()
        assert np.all(side <= 4.0 * 8 + 1e-10) and np.all(side >= 8 - 1e-10)

    def test_ofdm_examples(self):
        g = D.closed_form_dp_grid(B.ofdm_basis(64), 1.32).values
        assert abs(g[5, 0] - 20.48) < 1e-9
        assert abs(g[3, 7] - 64) < 1e-9

    def test_dense_route_agrees(self):
        basis = B.haar_basis(8, 5)
        fast = D.closed_form_dp_grid(basis, 1.32).values
        dense = D.closed_form_dp_grid(basis, 1.32, dense=True).values
        assert np.max(np.abs(fast - dense)) < 1e-10

    def test_otfs_64(self):
        g = D.closed_form_dp_waveform("otfs", 64, 1.32, {"n1": 4, "n2": 16}).values
        k, q = np.indices((64, 64))
        low = (k % 16 == 0) & (q % 4 == 0)
        low[0, 0] = False
        np.testing.assert_allclose(g[low], 20.48)
        high = ~low
        high[0, 0] = False
        np.testing.assert_allclose(g[high], 64.0)

    def test_afdm_line(self):
        g = D.closed_form_dp_waveform("afdm", 64, 1.32, {"c1": "1/32", "c2": "1/16"}).values
        k, q = np.indices((64, 64))
        line = (q - 4 * k) % 64 == 0
        line[0, 0] = False
        np.testing.assert_allclose(g[line], 20.48)
        assert np.count_nonzero(np.isclose(g, 20.48)) == 63

    def test_afdm_slope_multiple_of_n_is_ofdm(self):
        afdm = D.closed_form_dp_waveform("afdm", 16, 1.32, {"c1": "1/2"}).values
        np.testing.assert_array_equal(afdm, D.closed_form_dp_waveform("ofdm", 16, 1.32).values)

    @pytest.mark.parametrize("kind, params", [("sc", {}), ("ofdm", {}), ("otfs", {"n1": 4, "n2": 4}), ("afdm", {"c1": "1/32"})])
    def test_binary_and_low_set_is_index_set(self, kind, params):
        n, kappa = 16, 1.32
        g = D.closed_form_dp_waveform(kind, n, kappa, params)
        side = g.values.copy()
        side[0, 0] = np.nan
        low = np.isclose(side, (kappa - 1) * n)
        assert np.all(low | np.isclose(side, n) | np.isnan(side))
        assert np.count_nonzero(low) == n - 1
        members = W.index_set(_basis(kind, n, params)).members - {(0, 0)}
        assert set(zip(*map(lambda a: a.tolist(), np.nonzero(low)))) == members
        # pattern route agrees with the general formula on the real basis
        general = D.closed_form_dp_grid(_basis(kind, n, params), kappa).values
        assert np.max(np.abs(general - g.values)) < 1e-9

    def test_unknown_kind(self):
        with pytest.raises(InvalidArgumentError):
            D.closed_form_dp_waveform("chirp", 8, 1.0)


class TestEisl:
    def test_normalized_ofdm(self):
        assert abs(D.eisl_dp(D.closed_form_dp_waveform("ofdm", 64, 1.32))["normalized_eisl"] - 63) < 1e-9

    def test_formula_example(self):
        assert D.eisl_dp_formula(4, 1.0) == 48.0
        assert abs(D.eisl_dp(D.closed_form_dp_waveform("ofdm", 4, 1.0))["eisl"] - 48) < 1e-12

    def test_invariant_across_waveforms(self):
        vals = [D.eisl_dp(D.closed_form_dp_waveform(kind, 16, 1.32, p))["eisl"]
                for kind, p in [("sc", {}), ("ofdm", {}), ("otfs", {"n1": 4, "n2": 4}), ("afdm", {"c1": "1/32"})]]
        vals.append(D.eisl_dp(D.closed_form_dp_grid(B.haar_basis(16, 0), 1.32))["eisl"])
        np.testing.assert_allclose(vals, D.eisl_dp_formula(16, 1.32), rtol=1e-12)
