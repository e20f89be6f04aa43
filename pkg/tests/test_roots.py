import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chabauty_lab.lie import bracket, group_exp, in_K, is_algebra_member

from conftest import ALL_MODELS, proper_subsets, rs_of

seeds = st.integers(0, 2**32 - 1)


@pytest.mark.parametrize("spec", ALL_MODELS)
def test_positive_half_and_negatives(spec):
    rs = rs_of(spec)
    assert 2 * len(rs.positive_roots) == len(rs.roots)
    for a in rs.roots:
        b = rs.negative(a)
        assert b.coeffs == tuple(-c for c in a.coeffs)
        assert np.allclose(b.vector, a.vector.T)
    with pytest.raises(NotImplementedError):
        -rs.roots[0]


@pytest.mark.parametrize("spec", ALL_MODELS)
def test_base_coefficients(spec):
    rs = rs_of(spec)
    for i, a in enumerate(rs.base):
        assert a.coeffs == tuple(int(j == i) for j in range(rs.rank))
    # every root is a nonnegative or nonpositive integer combination
    for a in rs.roots:
        assert all(c >= 0 for c in a.coeffs) or all(c <= 0 for c in a.coeffs)
        w = sum(c * b.weight for c, b in zip(a.coeffs, rs.base))
        assert np.allclose(w, a.weight)


@pytest.mark.parametrize("spec", ALL_MODELS)
def test_root_vectors_lie_in_algebra(spec):
    rs = rs_of(spec)
    for a in rs.roots:
        assert is_algebra_member(a.vector, rs.model)


def test_sopp_weights_follow_the_antidiagonal_form():
    rs = rs_of("sopp:2")
    weights = sorted(tuple(a.weight[:2]) for a in rs.positive_roots)
    assert weights == [(1.0, -1.0), (1.0, 1.0)]


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(ALL_MODELS), seeds)
def test_coords_round_trip(spec, seed):
    rs = rs_of(spec)
    c = np.random.default_rng(seed).standard_normal(len(rs.basis))
    X = rs.from_coords(c)
    assert np.allclose(rs.coords(X), c)
    assert is_algebra_member(X, rs.model)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(ALL_MODELS), seeds)
def test_chamber_and_simple_values(spec, seed):
    rs = rs_of(spec)
    rng = np.random.default_rng(seed)
    H = rs.cartan_element(rng.standard_normal(rs.rank))
    v = rs.simple_values(H)
    assert np.allclose(v, [a(H) for a in rs.base])
    assert rs.chamber_test(H) == bool(np.all(v > 0))
    assert np.allclose(rs.cartan_element(rs.cartan_coords(H)), H)


def test_chamber_examples():
    rs = rs_of("sl:3")
    assert rs.chamber_test(np.diag([2.0, 0.0, -2.0]))
    assert not rs.chamber_test(np.diag([1.0, 1.0, -2.0]))
    assert rs.chamber_test(np.diag([1.0, 1.0, -2.0]), closed=True)
    sopp = rs_of("sopp:2")
    # h1 > |h2|, so a negative last coordinate is allowed
    assert sopp.chamber_test(np.diag([2.0, -1.0, 1.0, -2.0]))
    assert not sopp.chamber_test(np.diag([1.0, -2.0, 2.0, -1.0]))


@pytest.mark.parametrize("spec", ALL_MODELS)
def test_subset_data(spec):
    rs = rs_of(spec)
    for I in proper_subsets(rs) + [tuple(range(rs.rank))]:
        sd = rs.subset(I)
        assert len(sd.a_I_basis) + len(sd.aI_basis) == rs.rank
        for Z in sd.a_I_basis:
            assert all(abs(rs.base[i](Z)) < 1e-12 for i in I)
            for H in sd.aI_basis:
                assert abs(np.trace(Z @ H)) < 1e-12
        for X in sd.k_I_basis:
            assert np.allclose(X, -X.T)
            for Z in sd.a_I_basis:
                assert np.linalg.norm(bracket(X, Z)) < 1e-10
        for m in sd.M_elements:
            assert in_K(m, rs.model)
            for H in rs.a_basis:
                assert np.allclose(m @ H @ m.T, H)
        assert len(sd.sigma_I_plus) + len(sd.sigma_sup_I_plus) == len(rs.positive_roots)
        # n_I is an ideal of the parabolic: bracket with n^I stays inside n_I
        nI = np.array([B.ravel() for B in sd.n_I_basis]).T if sd.n_I_basis else np.zeros((rs.model.dim ** 2, 0))
        for X, Y in itertools.product(sd.n_sup_I_basis, sd.n_I_basis):
            B = bracket(X, Y).ravel()
            if nI.shape[1]:
                r = B - nI @ np.linalg.lstsq(nI, B, rcond=None)[0]
                assert np.linalg.norm(r) < 1e-10
        Z = sd.integral_direction()
        v = rs.simple_values(Z)
        assert all(abs(v[i]) < 1e-12 for i in sd.I)
        assert all(v[i] > 0 for i in range(rs.rank) if i not in sd.I)


def test_d_I_dimensions():
    rs = rs_of("sl:3")
    assert len(rs.subset(()).d_I_basis) == 3
    assert len(rs.subset((0,)).d_I_basis) == 3
    assert len(rs.subset((0, 1)).d_I_basis) == 3
    rs4 = rs_of("sl:4")
    # so(2) + n_I of dimension 5
    assert len(rs4.subset((0,)).d_I_basis) == 6


def test_subset_rejects_out_of_range():
    with pytest.raises(ValueError):
        rs_of("sl:3").subset((2,))


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(ALL_MODELS), seeds)
def test_k_I_rotations_are_periodic(spec, seed):
    rs = rs_of(spec)
    subsets = proper_subsets(rs)
    sd = rs.subset(subsets[seed % len(subsets)])
    for R in sd.k_I_rotations:
        assert np.allclose(group_exp(2 * np.pi * R), np.eye(rs.model.dim), atol=1e-9)
