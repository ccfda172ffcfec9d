import numpy as np
import pytest
from hypothesis import given, strategies as st

from futureguided.errors import DegenerateRangeError, DomainError
from futureguided.quantizer import (
    BinSpec,
    dequantize_argmax,
    dequantize_expectation,
    fit_bins,
    one_hot,
    quantize,
    quantize_array,
    readout_values,
)

UNIT4 = BinSpec(n_bins=4, lo=0.0, hi=1.0)


class TestFitBins:
    def test_unit_range(self):
        spec = fit_bins([0.0, 1.0], 4)
        assert (spec.lo, spec.hi, spec.width) == (0.0, 1.0, 0.25)

    def test_fractional_width(self):
        spec = fit_bins([0.4, 1.4], 25)
        assert spec.width == pytest.approx(0.04)

    def test_constant_series(self):
        with pytest.raises(DegenerateRangeError):
            fit_bins([3.0, 3.0, 3.0], 4)

    def test_finer_bins_halve_width(self):
        values = np.linspace(-1.3, 2.7, 100)
        assert fit_bins(values, 50).width == pytest.approx(fit_bins(values, 25).width / 2)


class TestQuantize:
    def test_interior(self):
        assert quantize(0.3, UNIT4) == 1

    def test_upper_boundary_clamps(self):
        assert quantize(1.0, UNIT4) == 3

    def test_below_range_clamps(self):
        assert quantize(-0.5, UNIT4) == 0
        assert quantize(7.5, UNIT4) == 3

    def test_nonfinite(self):
        with pytest.raises(DomainError):
            quantize(float("inf"), UNIT4)

    def test_array_matches_scalar(self):
        xs = np.linspace(-0.2, 1.2, 57)
        np.testing.assert_array_equal(
            quantize_array(xs, UNIT4), [quantize(float(x), UNIT4) for x in xs]
        )


class TestDequantize:
    def test_argmax_one_hot(self):
        assert dequantize_argmax(one_hot(1, 4), UNIT4) == pytest.approx(0.375)

    def test_argmax_uniform_tie_breaks_low(self):
        assert dequantize_argmax(np.full(4, 0.25), UNIT4) == pytest.approx(0.125)

    def test_argmax_plain(self):
        assert dequantize_argmax([0.2, 0.3, 0.5, 0.0], UNIT4) == pytest.approx(0.625)

    def test_expectation_one_hot_matches_argmax(self):
        p = one_hot(1, 4)
        assert dequantize_expectation(p, UNIT4) == dequantize_argmax(p, UNIT4)

    def test_expectation_uniform_is_midpoint(self):
        assert dequantize_expectation(np.full(4, 0.25), UNIT4) == pytest.approx(0.5)

    def test_expectation_bimodal(self):
        # 0.5 * 0.125 + 0.5 * 0.875
        assert dequantize_expectation([0.5, 0, 0, 0.5], UNIT4) == pytest.approx(0.5)

    def test_invalid_probs(self):
        with pytest.raises(DomainError):
            dequantize_argmax([0.5, 0.6, 0.0, 0.0], UNIT4)

    def test_readout_matrix(self):
        probs = np.array([[0.2, 0.3, 0.5, 0.0], [1.0, 0.0, 0.0, 0.0]])
        np.testing.assert_allclose(readout_values(probs, UNIT4, "argmax"), [0.625, 0.125])
        with pytest.raises(DomainError):
            readout_values(probs, UNIT4, "nearest")


class TestProperties:
    @given(st.floats(min_value=0.0, max_value=1.0, allow_nan=False))
    def test_roundtrip_within_half_width(self, x):
        decoded = dequantize_argmax(one_hot(quantize(x, UNIT4), 4), UNIT4)
        assert abs(decoded - x) <= UNIT4.width / 2 + 1e-12

    @given(
        st.floats(min_value=-2, max_value=2, allow_nan=False),
        st.floats(min_value=-2, max_value=2, allow_nan=False),
    )
    def test_monotone(self, x, y):
        if x > y:
            x, y = y, x
        assert quantize(x, UNIT4) <= quantize(y, UNIT4)

    @pytest.mark.parametrize("n_bins", [25, 50])
    def test_roundtrip_bulk(self, n_bins):
        rng = np.random.default_rng(7)
        spec = BinSpec(n_bins=n_bins, lo=-0.7, hi=2.1)
        xs = rng.uniform(spec.lo, spec.hi, size=10_000)
        labels = quantize_array(xs, spec)
        decoded = spec.centers()[labels]
        assert np.max(np.abs(decoded - xs)) <= spec.width / 2 + 1e-12

    def test_monotone_on_sorted_inputs(self):
        rng = np.random.default_rng(3)
        xs = np.sort(rng.uniform(-1, 2, size=1000))
        labels = quantize_array(xs, UNIT4)
        assert (np.diff(labels) >= 0).all()
