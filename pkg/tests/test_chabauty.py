import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chabauty_lab.chabauty import (
    BallSpec,
    SampledSubgroup,
    SequenceError,
    ToySubgroupR,
    ToySubgroupZ,
    check_tending,
    convergence_experiment,
    geometric_sequence,
    hausdorff,
    metric,
    one_sided,
    sample,
    toy_limit_R,
    toy_limit_Z,
    trivial_sample,
)
from chabauty_lab.lie import GroupModel
from chabauty_lab.limits import LimitGroupDescriptor, build_limit_group

from conftest import rs_of

SMALL = BallSpec(R=3.0, mesh=0.3, max_points=1500)


def group(spec, I):
    rs = rs_of(spec)
    return rs, build_limit_group(rs, LimitGroupDescriptor.identity(rs, I))


def test_ball_spec_validation():
    with pytest.raises(ValueError):
        BallSpec(R=1.0, mesh=2.0)
    with pytest.raises(ValueError):
        BallSpec(R=-1.0)
    with pytest.raises(ValueError):
        BallSpec(max_points=10)
    assert BallSpec(R=6.0, mesh=0.15).inner == pytest.approx(5.7)


def test_samples_are_in_the_group_and_the_ball():
    rs, sg = group("sl:3", (0,))
    S = sample(sg, SMALL, seed=0)
    assert len(S) > 10
    assert np.all(S.radii <= SMALL.R + 1e-12)
    assert all(sg.member(g, 1e-6) for g in S.points[:200])
    assert np.allclose(S.inverses, np.linalg.inv(S.points))
    assert 0.0 <= S.coverage_estimate <= 1.0


def test_sampling_is_deterministic():
    _, sg = group("sopp:2", (1,))
    A, B = sample(sg, SMALL, seed=4), sample(sg, SMALL, seed=4)
    assert np.array_equal(A.points, B.points)


@pytest.mark.parametrize("spec,I", [("sl:2", ()), ("sl:2", (0,))])
def test_independent_samples_of_one_group_are_close(spec, I):
    # only for groups of dimension at most 2, where the point budget covers the ball
    _, sg = group(spec, I)
    A, B = sample(sg, SMALL, seed=1), sample(sg, SMALL, seed=2)
    assert hausdorff(A, B) < 2 * SMALL.mesh


def test_hausdorff_basic_properties():
    rs, sg = group("sl:3", ())
    _, sg2 = group("sl:3", (0,))
    A, B = sample(sg, SMALL, seed=0), sample(sg2, SMALL, seed=0)
    assert hausdorff(A, A) == 0.0
    assert hausdorff(A, B) == pytest.approx(hausdorff(B, A))
    assert hausdorff(A, B) == max(one_sided(A, B), one_sided(B, A))
    T = trivial_sample(rs.model, SMALL)
    assert hausdorff(A, T) > 0.5


def test_hausdorff_rejects_mismatched_inputs():
    _, sg = group("sl:3", ())
    _, other = group("sl:2", ())
    A = sample(sg, SMALL, seed=0)
    with pytest.raises(ValueError):
        hausdorff(A, sample(other, SMALL, seed=0))
    with pytest.raises(ValueError):
        hausdorff(A, sample(sg, BallSpec(R=4.0, mesh=0.3, max_points=1500), seed=0))


def test_json_persistence(tmp_path):
    _, sg = group("sl:2", ())
    S = sample(sg, SMALL, seed=0)
    path = tmp_path / "s.json"
    S.save(path)
    T = SampledSubgroup.load(path)
    assert T.model == S.model and T.ball == S.ball
    assert np.allclose(T.points, S.points)
    assert hausdorff(S, T) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_metric_is_conjugation_sensitive_but_inversion_symmetric(seed):
    rng = np.random.default_rng(seed)
    g = np.eye(3) + 0.3 * rng.standard_normal((3, 3))
    h = np.eye(3) + 0.3 * rng.standard_normal((3, 3))
    assert metric(g, h) == pytest.approx(metric(np.linalg.inv(g), np.linalg.inv(h)))


def test_geometric_sequence_and_tending():
    rs = rs_of("sl:3")
    sd = rs.subset((0,))
    seq = geometric_sequence(sd, ratio=2.0, horizon=6)
    vals = np.array([rs.simple_values(np.diag(np.log(np.diag(a)))) for a in seq])
    assert np.allclose(vals[:, 0], 0.0)
    assert np.allclose(np.diff(vals[:, 1]), np.log(2.0))
    check_tending(rs, (0,), seq)
    with pytest.raises(SequenceError):
        check_tending(rs, (1,), seq)


def test_convergence_experiment_small():
    rs = rs_of("sl:2")
    table = convergence_experiment(rs, (), ball=SMALL, horizon=6)
    assert table.ns == list(range(1, 7))
    assert table.distances[-1] < table.distances[0]
    assert table.to_csv().startswith("n,distance\n1,")
    with pytest.raises(SequenceError):
        convergence_experiment(rs, (0,), ball=SMALL, horizon=3)


# -- toy spaces -------------------------------------------------------------------------


def test_toy_R_coordinate_is_a_homeomorphism():
    for c in (0.1, 1.0, 7.5):
        L = ToySubgroupR.lattice(c)
        back = ToySubgroupR.from_coordinate(L.coordinate)
        assert back.kind == "lattice" and back.c == pytest.approx(c, rel=1e-12)
    assert ToySubgroupR("trivial").coordinate == 0.0
    assert ToySubgroupR("full").coordinate == 1.0
    with pytest.raises(ValueError):
        ToySubgroupR.lattice(0.0)
    with pytest.raises(ValueError):
        ToySubgroupR("circle")


def test_toy_limits():
    L = toy_limit_R(lambda n: ToySubgroupR.lattice(2.0 + 1.0 / n))
    assert L.kind == "lattice" and L.c == pytest.approx(2.0, rel=1e-9)
    assert toy_limit_R(lambda n: ToySubgroupR.lattice(1.0 / n)).kind == "full"
    assert toy_limit_R(lambda n: ToySubgroupR.lattice(float(n))).kind == "trivial"
    assert toy_limit_Z(lambda n: ToySubgroupZ(3)) == ToySubgroupZ(3)
    assert toy_limit_Z(lambda n: ToySubgroupZ(n)) == ToySubgroupZ(None)
    with pytest.raises(SequenceError):
        toy_limit_R(lambda n: ToySubgroupR.lattice(1.0 + n % 2))
    with pytest.raises(SequenceError):
        toy_limit_Z(lambda n: ToySubgroupZ(1 + n % 2))
    with pytest.raises(ValueError):
        ToySubgroupZ(0)


def test_trivial_sample_is_the_identity():
    T = trivial_sample(GroupModel.parse("sl:2"), SMALL)
    assert len(T) == 1 and np.allclose(T.points[0], np.eye(2))
