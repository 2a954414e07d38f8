import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from evomsn.errors import LengthMismatch, NoData, SignalTooShort
from evomsn.spectral import (
    dft_amplitudes,
    extract_global_periods,
    local_amplitudes,
    select_periods,
)

from oracles import direct_dft_amplitudes

j96 = np.arange(96)


def sine(period, n=96, amp=1.0, phase=0.0):
    return amp * np.sin(2 * np.pi * np.arange(n) / period + phase)


def test_single_tone_dominates():
    a = dft_amplitudes(np.sin(2 * np.pi * 4 * j96 / 96))
    ref = direct_dft_amplitudes(np.sin(2 * np.pi * 4 * j96 / 96))
    np.testing.assert_allclose(a, ref, atol=1e-9)
    others = np.delete(a, 3)
    assert np.all(a[3] >= 100 * others)


def test_constant_signal_has_no_amplitude():
    assert np.allclose(dft_amplitudes(np.full(96, 3.7)), 0.0, atol=1e-9)


def test_two_tone_ratio():
    s = 2 * np.sin(2 * np.pi * 4 * j96 / 96) + np.sin(2 * np.pi * 8 * j96 / 96)
    ref = direct_dft_amplitudes(s)
    assert ref[3] / ref[7] == pytest.approx(2.0, rel=1e-9)
    a = dft_amplitudes(s)
    assert a[3] / a[7] == pytest.approx(2.0, rel=1e-9)


def test_length_one_signal():
    with pytest.raises(SignalTooShort):
        dft_amplitudes(np.ones(1))


@pytest.mark.parametrize("t", [2, 3, 7, 64, 97, 128])
def test_fast_matches_direct(t):
    s = np.random.default_rng(t).normal(size=t)
    np.testing.assert_allclose(dft_amplitudes(s), direct_dft_amplitudes(s), rtol=0, atol=1e-9)


def test_pure_period_24():
    ps = extract_global_periods([sine(24)[:, None]], k=1)
    assert ps.periods == [24] and ps.frequencies == [4]


def test_two_periods_in_amplitude_order():
    w = (sine(24) + 0.4 * sine(12, phase=1.0))[:, None]
    ps = extract_global_periods([w], k=2)
    assert ps.periods == [24, 12]
    assert ps.mean_amplitudes[0] > ps.mean_amplitudes[1]


def test_top1_is_argmax_of_oracle():
    rng = np.random.default_rng(3)
    ws = rng.normal(size=(5, 96, 2))
    ref = np.mean([[direct_dft_amplitudes(ws[n, :, c]) for c in range(2)] for n in range(5)], axis=(0, 1))
    ps = extract_global_periods(ws, k=1)
    assert ps.k == 1 and ps.frequencies == [int(np.argmax(ref)) + 1]


def test_tie_goes_to_lower_frequency():
    ps = select_periods(np.array([0.0, 1.0, 1.0, 0.5]), t=8, k=1)
    assert ps.frequencies == [2]


def test_duplicate_periods_skipped():
    # t=100: f=34 and f=35 both map to period 3
    amps = np.zeros(50)
    amps[[33, 34]] = [5.0, 4.0]
    amps[9] = 1.0
    ps = select_periods(amps, t=100, k=2)
    assert ps.periods == [3, 10]
    assert ps.frequencies == [34, 10]


def test_periods_clamped_and_distinct():
    ws = np.random.default_rng(9).normal(size=(20, 30, 3))
    ps = extract_global_periods(ws, k=6)
    assert len(set(ps.periods)) == len(ps.periods)
    assert all(1 <= p <= 30 for p in ps.periods)
    assert ps.mean_amplitudes == sorted(ps.mean_amplitudes, reverse=True)


def test_no_windows():
    with pytest.raises(NoData):
        extract_global_periods([], k=2)


def test_local_amplitude_examples():
    ps = extract_global_periods([(sine(24) + 0.5 * sine(12))[:, None]], k=2)
    assert ps.periods == [24, 12]
    a = local_amplitudes(sine(24)[:, None], ps)
    assert a[0, 0] >= 100 * a[1, 0]
    assert np.all(local_amplitudes(np.zeros((96, 1)), ps) == 0)
    two = np.stack([sine(24), sine(12)], axis=1)
    amps = local_amplitudes(two, ps)
    assert list(np.argmax(amps, axis=0)) == [0, 1]


def test_local_amplitudes_length_mismatch():
    ps = extract_global_periods([sine(24)[:, None]], k=1)
    with pytest.raises(LengthMismatch):
        local_amplitudes(np.zeros((48, 1)), ps)


@settings(max_examples=50)
@given(seed=st.integers(0, 10_000), scale=st.floats(1e-3, 1e3))
def test_scale_invariance_and_nonnegativity(seed, scale):
    w = np.random.default_rng(seed).normal(size=(48, 2))
    ps = extract_global_periods([w], k=3)
    a = local_amplitudes(w, ps)
    assert np.all(a >= 0)
    np.testing.assert_allclose(local_amplitudes(scale * w, ps), scale * a, rtol=1e-10, atol=1e-12)
