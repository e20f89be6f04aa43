import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chabauty_lab.chabauty import BallSpec, SequenceError
from chabauty_lab.lie import group_exp
from chabauty_lab.limits import LimitGroupDescriptor, LimitGroupError, descriptors_equal
from chabauty_lab.polyhedral import (
    CompactifiedPoint,
    PolyhedralPoint,
    certify_facet,
    continuity_experiment_f,
    corner_coords,
    equivalent,
    f_descriptor,
    facet_of_vector,
    from_corner_coords,
    phi,
    polyhedral_limit,
)

from conftest import ALL_MODELS, MODELS, random_K, rs_of

seeds = st.integers(0, 2**32 - 1)


def test_facets_of_sl3():
    rs = rs_of("sl:3")
    F = facet_of_vector(np.diag([2.0, 1.0, -3.0]), rs)
    assert len(F.sigma0) == 0 and len(F.sigma_plus) == 3 and certify_facet(F, rs)
    F = facet_of_vector(np.diag([1.0, 1.0, -2.0]), rs)
    assert {a.coeffs for a in F.sigma0} == {(1, 0), (-1, 0)} and certify_facet(F, rs)
    assert len(F.span_basis) == 1
    F = facet_of_vector(np.zeros((3, 3)), rs)
    assert len(F.sigma0) == 6 and certify_facet(F, rs)
    assert F.contains(np.zeros((3, 3)))


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(ALL_MODELS), seeds)
def test_facet_of_random_vector_is_consistent(spec, seed):
    rs = rs_of(spec)
    rng = np.random.default_rng(seed)
    c = rng.integers(-2, 3, rs.rank).astype(float)
    H = rs.cartan_element(c)
    F = facet_of_vector(H, rs)
    assert certify_facet(F, rs)
    assert F.contains(H) or not np.any(H)
    for B in F.span_basis:
        assert all(abs(a(B)) < 1e-9 for a in F.sigma0)


def test_corner_examples():
    rs = rs_of("sl:3")
    H = np.diag([1.0, 0.0, -1.0])
    assert np.allclose(corner_coords(PolyhedralPoint((0, 1), H), rs), [1.0, 1.0])
    x = corner_coords(PolyhedralPoint((0,), np.zeros((3, 3))), rs)
    assert x[0] == 0.0 and np.isinf(x[1])
    p = from_corner_coords([1.0, np.inf], rs)
    assert p.I == (0,) and rs.base[0](p.rep) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        from_corner_coords([-np.inf, 0.0], rs)
    with pytest.raises(ValueError):
        from_corner_coords([1.0], rs)


def test_point_validation():
    rs = rs_of("sl:3")
    with pytest.raises(LimitGroupError):
        PolyhedralPoint((0,), np.diag([1.0, 1.0, -2.0])).validate(rs)  # component along a_I
    with pytest.raises(LimitGroupError):
        PolyhedralPoint((0,), np.diag([-1.0, 1.0, 0.0])).validate(rs)  # outside the corner
    with pytest.raises(LimitGroupError):
        CompactifiedPoint(np.diag([2.0, 1.0, 1.0]), PolyhedralPoint((), np.zeros((3, 3)))).validate(rs)
    p = PolyhedralPoint.from_vector(rs, (0,), np.diag([2.0, 1.0, -3.0]))
    assert np.allclose(p.rep, np.diag([0.5, -0.5, 0.0]))


def test_polyhedral_limit_examples():
    rs = rs_of("sl:3")
    H0 = np.diag([2.0, 1.0, -3.0])
    const = [PolyhedralPoint((0, 1), H0)] * 8
    L = polyhedral_limit(const, rs)
    assert L.I == (0, 1) and np.allclose(L.rep, H0)
    L = polyhedral_limit(lambda n: PolyhedralPoint((0, 1), n * H0), rs)
    assert L.I == () and np.allclose(L.rep, 0.0)
    L = polyhedral_limit(lambda n: from_corner_coords([2.0 + 4.0 ** -n, float(n)], rs), rs)
    assert L.I == (0,) and rs.base[0](L.rep) == pytest.approx(2.0)
    with pytest.raises(SequenceError):
        polyhedral_limit(lambda n: from_corner_coords([1.0 + n % 2, float(n)], rs), rs)


def test_phi_examples():
    rs = rs_of("sl:3")
    e = np.eye(3)
    d = phi(CompactifiedPoint(e, PolyhedralPoint((0,), np.zeros((3, 3)))), rs)
    assert descriptors_equal(d, LimitGroupDescriptor.identity(rs, (0,)), rs)
    k0 = random_K(rs, np.random.default_rng(3))
    H = np.diag([0.7, -0.7, 0.0])
    d = phi(CompactifiedPoint(k0, PolyhedralPoint((0,), H)), rs)
    assert descriptors_equal(d, LimitGroupDescriptor((0,), group_exp(H), k0), rs, 1e-6)
    # an interior point is the conjugate exp(H) K exp(-H)
    H = np.diag([1.0, 0.2, -1.2])
    d = phi(CompactifiedPoint(e, PolyhedralPoint((0, 1), H)), rs)
    assert d.I == (0, 1) and np.allclose(d.a, group_exp(H))


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(MODELS), seeds)
def test_equivalence_invariances(spec, seed):
    rs = rs_of(spec)
    rng = np.random.default_rng(seed)
    I = tuple(i for i in range(rs.rank) if rng.random() < 0.5)
    if len(I) == rs.rank:
        I = I[:-1]
    sd = rs.subset(I)
    x = np.full(rs.rank, np.inf)
    x[list(I)] = rng.uniform(0, 1.5, len(I))
    pt = from_corner_coords(x, rs) if I else PolyhedralPoint((), np.zeros((rs.model.dim,) * 2))
    g = group_exp(0.5 * sum(rng.standard_normal() * B for B in rs.basis))
    cp = CompactifiedPoint(g, pt)
    Z = sum(rng.standard_normal() * B for B in sd.a_I_basis)
    assert equivalent(cp, CompactifiedPoint(g @ group_exp(Z), pt), rs)
    m = sd.M_elements[rng.integers(len(sd.M_elements))]
    assert equivalent(cp, CompactifiedPoint(g @ m, pt), rs)
    interior = PolyhedralPoint(tuple(range(rs.rank)), np.zeros((rs.model.dim,) * 2))
    assert not equivalent(cp, CompactifiedPoint(g, interior), rs)


def test_f_descriptor():
    rs = rs_of("sopp:2")
    p = from_corner_coords([np.inf, 0.5], rs)
    d = f_descriptor(p, rs)
    assert d.I == (1,) and np.allclose(d.a, group_exp(p.rep)) and np.allclose(d.k, np.eye(4))


def test_continuity_of_constant_sequence():
    rs = rs_of("sl:2")
    ball = BallSpec(R=3.0, mesh=0.3, max_points=1500)
    p = from_corner_coords([0.5], rs)
    table = continuity_experiment_f(rs, [p] * 3, ball)
    assert max(table.distances) < 2 * ball.mesh
    assert table.to_csv().splitlines()[0] == "n,distance"
