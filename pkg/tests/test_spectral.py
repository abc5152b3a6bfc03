from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import eigh_tridiagonal

from pinlat.errors import DegenerateEigenvalue, NonHyperbolic
from pinlat.profile import solve_standing_wave
from pinlat.spectral import (
    Linearization,
    assemble,
    count_below,
    decay_rate,
    kernel_vector,
    kth_largest,
    lambda0,
    positive_spectrum_check,
)


def const(d, N):
    return Linearization(np.full(2 * N + 1, d), N, 0.0)


@pytest.fixture(scope="module")
def wave0(f):
    return solve_standing_wave(f, 0.0)


def test_assemble_constant_profile(f):
    lin = assemble(np.ones(41), f, a=0.1)
    assert lin.size == 41
    np.testing.assert_array_equal(lin.diag, -2 - f.du(1.0, 0.1))


def test_assemble_symmetry(f, wave0):
    lin = assemble(wave0, f)
    assert lin.size == 401
    d = lin.diag[:-1]
    np.testing.assert_allclose(d, d[::-1], atol=1e-14)


def test_constant_diag_limit():
    N = 400
    lam = lambda0(const(-3.0, N))  # f' = d = 1
    assert abs(lam + 1.0) < 1e-3
    assert lam == pytest.approx(-1.0 - 2 * (1 - np.cos(np.pi / (2 * N + 2))), abs=1e-12)


def test_constant_diag_ground_mode():
    N = 30
    kv = kernel_vector(const(-3.0, N))
    n = np.arange(-N, N + 1)
    mode = np.cos(np.pi * n / (2 * N + 2))
    mode /= np.linalg.norm(mode)
    np.testing.assert_allclose(kv.values, mode, atol=1e-12)


@given(seed=st.integers(0, 2**31 - 1), N=st.integers(5, 60))
@settings(max_examples=30, deadline=None)
def test_top_eigenvalues_against_lapack(seed, N):
    rng = np.random.default_rng(seed)
    diag = rng.uniform(-5, 1, 2 * N + 1)
    lin = Linearization(diag, N, 0.0)
    ref = eigh_tridiagonal(diag, np.ones(2 * N), eigvals_only=True)
    assert lambda0(lin) == pytest.approx(ref[-1], abs=1e-11)
    assert kth_largest(lin, 1) == pytest.approx(ref[-2], abs=1e-11)
    x = 0.5 * (ref[3] + ref[4])
    assert count_below(diag, 1.0, x) == 4


def test_interior_wave(f, wave0):
    lin = assemble(wave0, f)
    kv = kernel_vector(lin)
    assert kv.lambda0 < -1e-3
    assert positive_spectrum_check(lin)
    v = kv.values[:-1]
    np.testing.assert_allclose(v, v[::-1], atol=1e-14)


def test_fold_kernel_structure(f, upper_fold, fold_kernel):
    kv = fold_kernel
    lin = assemble(upper_fold.profile_at_fold, f)
    v = kv.values
    assert abs(kv.lambda0) < 1e-6
    assert v.min() > 0
    assert abs(v @ v - 1) < 1e-12
    res = lin.matvec(v) - kv.lambda0 * v
    assert np.max(np.abs(res)) < 1e-10 * np.max(np.abs(v))
    a = upper_fold.a_fold
    assert kv.decay_ratio_estimate == pytest.approx(decay_rate(f, a, kv.lambda0, 1), rel=0.05)
    assert kv.left_decay_ratio_estimate == pytest.approx(decay_rate(f, a, kv.lambda0, -1), rel=0.05)
    # Fredholm gate
    assert kv.lambda0 + min(f.du(1.0, a), f.du(-1.0, a)) > 0
    assert positive_spectrum_check(lin)


def test_fold_lambda0_truncation(f, upper_fold_400, fold_kernel):
    lam400 = lambda0(assemble(upper_fold_400.profile_at_fold, f))
    assert abs(lam400 - fold_kernel.lambda0) < 1e-8


def test_positive_spectrum_detected():
    assert not positive_spectrum_check(const(1.0, 50))


def test_degenerate_gap():
    # two identical blocks separated by a huge barrier: near-double top eigenvalue
    diag = np.array([-1.0, -1.0, -1e12, -1.0, -1.0])
    with pytest.raises(DegenerateEigenvalue):
        kernel_vector(Linearization(diag, 2, 0.0))


def test_decay_rate(f):
    assert decay_rate(f, 0.0, 0.0, 1) == pytest.approx(2 - np.sqrt(3), abs=1e-15)
    assert decay_rate(f, 0.0, -2.0 + 1e-12, 1) == pytest.approx(1.0, abs=1e-5)
    with pytest.raises(NonHyperbolic):
        decay_rate(f, 0.2, -f.du(1.0, 0.2), 1)


def test_kernel_csv(fold_kernel):
    lines = fold_kernel.to_csv().splitlines()
    assert lines[0] == "n,v"
    assert len(lines) == 402
