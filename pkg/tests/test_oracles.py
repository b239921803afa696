import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from latentbench import encoders as enc
from latentbench.dgp import DgpSpec, sample
from latentbench.metrics import mcc
from latentbench.numstats import Rng, pearson_matrix
from latentbench.oracles import (SymmetricMixingParams, brute_force_mcc,
                                 generic_mixing_correlations,
                                 generic_mixing_dataset, generic_mixing_mcc,
                                 mcc_closed_form, null_mcc_floor, r22,
                                 r22_derivative_sign,
                                 symmetric_mixing_dataset)


def test_params_validation():
    with pytest.raises(ValueError):
        SymmetricMixingParams(rho=1.0, eps=0.5)
    with pytest.raises(ValueError):
        SymmetricMixingParams(rho=0.0, eps=0.0)
    with pytest.raises(ValueError):
        SymmetricMixingParams(rho=0.0, eps=1.5)


def test_closed_form_spot_values():
    # independent factors, full redundancy: r22 = 1/sqrt(2)
    p = SymmetricMixingParams(rho=0.0, eps=1.0)
    assert r22(p) == pytest.approx(1.0 / math.sqrt(2.0))
    assert mcc_closed_form(p) == pytest.approx((1.0 + math.sqrt(2.0)) / 3.0)
    # vanishing mixing recovers a perfect score in the limit
    weak = SymmetricMixingParams(rho=0.0, eps=1e-9)
    assert mcc_closed_form(weak) == pytest.approx(1.0, abs=1e-8)
    # duplicate codes of correlated factors approach 1 as rho -> 1
    near_dup = SymmetricMixingParams(rho=0.99, eps=1.0)
    assert mcc_closed_form(near_dup) == pytest.approx(
        (1.0 + 2.0 * math.sqrt(1.99 / 2.0)) / 3.0)


@given(rho=st.floats(-0.95, 0.95), eps=st.floats(0.05, 1.0))
def test_r22_minimum_sits_at_rho_equals_minus_eps(rho, eps):
    p = SymmetricMixingParams(rho=rho, eps=eps)
    assert 0.0 < r22(p) <= 1.0
    sign = r22_derivative_sign(p)
    at_min = SymmetricMixingParams(rho=max(-0.999, -eps), eps=eps)
    assert r22(p) >= r22(at_min) - 1e-12
    if rho > -eps:
        assert sign == 1
    elif rho < -eps:
        assert sign == -1


@given(rho=st.floats(-0.9, 0.9), eps=st.floats(0.1, 1.0))
def test_generic_reduces_to_symmetric(rho, eps):
    r_22, r_32, r_23, r_33 = generic_mixing_correlations(rho, 1.0, eps,
                                                         eps, 1.0)
    p = SymmetricMixingParams(rho=rho, eps=eps)
    assert r_22 == pytest.approx(r22(p), abs=1e-14)
    assert r_33 == pytest.approx(r22(p), abs=1e-14)
    assert generic_mixing_mcc(rho, 1.0, eps, eps, 1.0) == pytest.approx(
        mcc_closed_form(p), abs=1e-14)


def test_empirical_mixing_matches_closed_form():
    n = 4000
    for rho, eps in [(0.0, 0.5), (0.6, 1.0), (-0.5, 0.75), (0.9, 0.25)]:
        ds = symmetric_mixing_dataset(rho, eps, n, Rng(17))
        got = mcc(ds).value
        want = mcc_closed_form(SymmetricMixingParams(rho, eps))
        assert abs(got - want) < 5.0 / math.sqrt(n)
        # the sampled code correlation tracks the population r22
        cm = pearson_matrix(ds.zhat, ds.z)
        assert cm.entries[1, 1] == pytest.approx(
            r22(SymmetricMixingParams(rho, eps)), abs=0.05)


def test_mixing_dataset_structure():
    ds = symmetric_mixing_dataset(0.3, 0.5, 100, Rng(1), s=-2.0)
    assert ds.equivalence == "aff"
    assert ds.alignment == [(0,), (1, 2), (1, 2)]
    assert np.array_equal(ds.zhat[:, 0], -2.0 * ds.z[:, 0])
    with pytest.raises(ValueError):
        symmetric_mixing_dataset(0.3, 0.5, 100, Rng(1), s=0.0)


def test_generic_dataset_matches_its_own_oracle():
    ds = generic_mixing_dataset(0.4, 1.0, 0.8, 0.2, 1.0, 4000, Rng(2))
    got = mcc(ds).value
    want = generic_mixing_mcc(0.4, 1.0, 0.8, 0.2, 1.0)
    assert abs(got - want) < 5.0 / math.sqrt(4000)
    with pytest.raises(ValueError):
        # an all-zero second code has no variance to correlate
        generic_mixing_dataset(0.0, 1.0, 0.5, 0.0, 0.0, 100, Rng(0))


def test_null_floor_formula_and_validation():
    assert null_mcc_floor(10, 20) == pytest.approx(
        math.sqrt(2.0 * math.log(10) / 20))
    assert null_mcc_floor(2, 10_000) < 0.02
    with pytest.raises(ValueError):
        null_mcc_floor(1, 100)
    with pytest.raises(ValueError):
        null_mcc_floor(5, 2)


def _random_dataset(g):
    d = int(g.integers(1, 8))
    m = int(g.integers(1, 8))
    n = int(g.integers(20, 60))
    z = g.standard_normal((n, d))
    w = g.standard_normal((d, m))
    zhat = z @ w + 0.5 * g.standard_normal((n, m))
    spec = enc.EncoderSpec("external", m, {})
    return enc.EncodedDataset(z, zhat, spec, [()] * m, "none")


def test_brute_force_agrees_with_hungarian_on_random_cases():
    g = Rng(23).generator()
    for _ in range(40):
        ds = _random_dataset(g)
        for kind in ("pearson", "spearman"):
            assert brute_force_mcc(ds, kind=kind) == mcc(ds, kind=kind).value


def test_brute_force_refuses_large_sides():
    g = Rng(5).generator()
    z = g.standard_normal((30, 9))
    ds = enc.EncodedDataset(z, z, enc.EncoderSpec("external", 9, {}),
                            [()] * 9, "none")
    with pytest.raises(ValueError):
        brute_force_mcc(ds)
