"""Finite nets of closed subgroups in a ball, pointed Hausdorff distance, and toy Chabauty spaces.

A subgroup ``H`` is represented by finitely many points of ``H ∩ B_R`` where
``B_R`` is the ball of radius ``R`` around the identity for the metric
``d(g, h) = max(|g - h|_F, |g^-1 - h^-1|_F)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import qmc

from .lie import GroupModel, group_distance, group_exp
from .limits import LimitGroupDescriptor, StructuredSubgroup, build_limit_group
from .roots import RootSystem, SubsetData

metric = group_distance


class SequenceError(ValueError):
    """A sequence violates the hypotheses of the experiment it was given to."""


@dataclass(frozen=True)
class BallSpec:
    R: float = 6.0
    mesh: float = 0.15
    max_points: int = 6000

    def __post_init__(self):
        if not (self.R > 0 and self.mesh > 0):
            raise ValueError("R and mesh must be positive")
        if self.mesh >= self.R:
            raise ValueError("mesh must be smaller than R")
        if self.max_points < 100:
            raise ValueError("max_points must be at least 100")

    @property
    def inner(self) -> float:
        """Radius of the region over which Hausdorff suprema are taken."""
        return self.R - 2 * self.mesh


def _identity_radius(P: np.ndarray, Pinv: np.ndarray) -> np.ndarray:
    n = P.shape[-1]
    e = np.eye(n)
    return np.maximum(np.linalg.norm(P - e, axis=(1, 2)), np.linalg.norm(Pinv - e, axis=(1, 2)))


def _features(P: np.ndarray, Pinv: np.ndarray) -> np.ndarray:
    N = len(P)
    return np.hstack([P.reshape(N, -1), Pinv.reshape(N, -1)])


@dataclass
class SampledSubgroup:
    """Finite stand-in for ``H ∩ B_R``.  The first ``n_own`` points are the group's own net."""

    model: GroupModel
    points: np.ndarray = field(repr=False)
    inverses: np.ndarray = field(repr=False)
    ball: BallSpec
    source: str
    coverage_estimate: float = float("nan")
    n_own: int = -1

    def __post_init__(self):
        if self.n_own < 0:
            self.n_own = len(self.points)

    def __len__(self):
        return len(self.points)

    @property
    def radii(self) -> np.ndarray:
        return _identity_radius(self.points, self.inverses)

    @property
    def own(self) -> "SampledSubgroup":
        k = self.n_own
        return SampledSubgroup(self.model, self.points[:k], self.inverses[:k], self.ball, self.source, self.coverage_estimate)

    def _tree(self):
        if not hasattr(self, "_kd"):
            self._kd = cKDTree(_features(self.points, self.inverses))
        return self._kd

    def nearest_distances(self, P: np.ndarray, Pinv: np.ndarray) -> np.ndarray:
        """Exact metric distance from each of ``P`` to this point set."""
        if len(self) == 0:
            raise ValueError("empty point set")
        F = _features(P, Pinv)
        tree = self._tree()
        k = min(8, len(self))
        dE, idx = tree.query(F, k=k)
        dE, idx = dE.reshape(len(F), k), idx.reshape(len(F), k)
        d = np.maximum(
            np.linalg.norm(self.points[idx] - P[:, None], axis=(2, 3)),
            np.linalg.norm(self.inverses[idx] - Pinv[:, None], axis=(2, 3)),
        )
        out = d.min(axis=1)
        # the Euclidean feature distance is at most sqrt(2) times the metric,
        # so a closer point may hide beyond the k-th feature neighbour
        if k < len(self):
            for i in np.flatnonzero(dE[:, -1] < math.sqrt(2) * out):
                c = np.array(tree.query_ball_point(F[i], math.sqrt(2) * out[i] + 1e-15))
                dd = np.maximum(
                    np.linalg.norm(self.points[c] - P[i], axis=(1, 2)),
                    np.linalg.norm(self.inverses[c] - Pinv[i], axis=(1, 2)),
                )
                out[i] = min(out[i], dd.min())
        return out

    def conjugate(self, g: np.ndarray) -> "SampledSubgroup":
        """Point set ``g S g^{-1}`` (not re-filtered to the ball)."""
        gi = np.linalg.inv(g)
        return SampledSubgroup(self.model, g @ self.points @ gi, g @ self.inverses @ gi, self.ball,
                               f"conjugated({self.source})", self.coverage_estimate, self.n_own)

    def to_json(self) -> dict:
        return {
            "model": self.model.to_json(),
            "ball": {"R": self.ball.R, "mesh": self.ball.mesh, "max_points": self.ball.max_points},
            "source": self.source,
            "coverage_estimate": self.coverage_estimate,
            "n_own": self.n_own,
            "points": self.points.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SampledSubgroup":
        P = np.array(obj["points"], dtype=float)
        return cls(GroupModel.from_json(obj["model"]), P, np.linalg.inv(P), BallSpec(**obj["ball"]),
                   obj["source"], float(obj["coverage_estimate"]), int(obj["n_own"]))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path) -> "SampledSubgroup":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def trivial_sample(model: GroupModel, ball: BallSpec) -> SampledSubgroup:
    e = np.eye(model.dim)[None]
    return SampledSubgroup(model, e.copy(), e.copy(), ball, "trivial", 0.0)


# -- nets ----------------------------------------------------------------------------


def _dedup(P: np.ndarray, Pinv: np.ndarray, r: float) -> np.ndarray:
    """Greedy indices of points pairwise farther than ``r`` in feature distance (metric >= r / sqrt 2)."""
    pairs = cKDTree(_features(P, Pinv)).query_pairs(r, output_type="ndarray")
    keep = np.ones(len(P), dtype=bool)
    if len(pairs):
        pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
        for i, j in pairs:
            if keep[i]:
                keep[j] = False
    return np.flatnonzero(keep)


def _unipotent(sd: SubsetData, Y: np.ndarray) -> np.ndarray:
    """``N_I`` element with coordinates ``Y`` (stacked): affine for SL, exponential for SO_0(p, p)."""
    if sd.model.family == "sl":
        return np.eye(sd.model.dim) + Y
    out = np.empty_like(Y)
    for i, y in enumerate(Y):
        out[i] = group_exp(y)
    return out


def _axis_cap(sg: StructuredSubgroup, B: np.ndarray, R: float) -> float:
    """Largest ``t`` with ``c u(tB) c^{-1}`` in the ball, by doubling then bisection."""
    c, ci, sd = sg.conj, sg.conj_inv, sg.subset

    def inside(t):
        u = _unipotent(sd, (t * B)[None])[0]
        x = c @ u @ ci
        return metric(x, np.eye(len(x))) <= R

    hi = 1.0
    while inside(hi) and hi < 1e6:
        hi *= 2
    lo = 0.0
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if inside(mid) else (lo, mid)
    return lo


def _net_coordinates(sg: StructuredSubgroup, ball: BallSpec, rng: np.random.Generator):
    sd = sg.subset
    comp = sd.k_I_rotations
    nil = sd.n_I_basis
    c, ci = sg.conj, sg.conj_inv
    nonabelian = any(np.linalg.norm(X @ Y - Y @ X) > 1e-12 for X in nil for Y in nil)
    caps = []
    for B in nil:
        hi = _axis_cap(sg, B, ball.R)
        lo = _axis_cap(sg, -B, ball.R)
        f = 2.0 if nonabelian and sd.model.family == "sopp" else 1.0
        caps.append((-f * lo, f * hi))
    lengths = [2 * np.pi] * len(comp) + [b - a for a, b in caps]
    weights = [np.linalg.norm(c @ X @ ci) for X in list(comp) + list(nil)]
    d = len(lengths)
    budget = 2 * ball.max_points / len(sd.M_elements)
    if d == 0:
        return np.zeros((1, 0)), np.zeros((1, 0))
    scaled = [max(L * w, 1e-12) for L, w in zip(lengths, weights)]
    h = max((np.prod(scaled) / budget) ** (1.0 / d), ball.mesh / (4 * math.sqrt(d)))
    counts = [max(1, int(math.ceil(s / h))) | 1 for s in scaled]
    while np.prod(counts, dtype=float) > budget and h < 1e6:
        h *= 1.1
        counts = [max(1, int(math.ceil(s / h))) | 1 for s in scaled]
    # compact coordinates: a grid in one dimension, scrambled Sobol plus random draws otherwise
    m = len(comp)
    if m == 0:
        theta = np.zeros((1, 0))
    elif m == 1:
        theta = np.linspace(-np.pi, np.pi, counts[0] + 1)[:-1, None]
    else:
        nk = int(np.prod(counts[:m]))
        nsob = 2 ** max(1, int(math.floor(math.log2(max(nk, 2)))))
        sob = qmc.Sobol(m, scramble=True, seed=rng).random(nsob)
        extra = rng.random((max(1, nsob // 16), m))
        theta = np.vstack([np.zeros((1, m)), 2 * np.pi * np.vstack([sob, extra]) - np.pi])
    axes = [np.linspace(a, b, k) for (a, b), k in zip(caps, counts[m:])]
    if axes:
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
    else:
        grid = np.zeros((1, 0))
    return theta, grid


def _structured_net(sg: StructuredSubgroup, ball: BallSpec, rng: np.random.Generator):
    sd = sg.subset
    n = sd.model.dim
    theta, grid = _net_coordinates(sg, ball, rng)
    comp = np.array(sd.k_I_rotations) if sd.k_I_rotations else np.zeros((0, n, n))
    nil = np.array(sd.n_I_basis) if sd.n_I_basis else np.zeros((0, n, n))
    Ks = np.array([group_exp(np.tensordot(t, comp, axes=1)) if len(t) else np.eye(n) for t in theta])
    Ys = np.tensordot(grid, nil, axes=1) if grid.shape[1] else np.zeros((1, n, n))
    Ns = _unipotent(sd, Ys)
    Ninv = np.linalg.inv(Ns)
    Ms = np.array(sd.M_elements)
    KM = (Ks[:, None] @ Ms[None]).reshape(-1, n, n)
    c, ci = sg.conj, sg.conj_inv
    P, Pinv = [], []
    # chunk over the compact factor to bound memory
    for km in KM:
        X = c @ km @ Ns @ ci
        Xi = c @ Ninv @ km.T @ ci
        r = _identity_radius(X, Xi)
        sel = r <= ball.R
        P.append(X[sel])
        Pinv.append(Xi[sel])
    P, Pinv = np.concatenate(P), np.concatenate(Pinv)
    return P, Pinv


def _random_probes(sg: StructuredSubgroup, ball: BallSpec, rng, count=256):
    sd = sg.subset
    n = sd.model.dim
    caps = [(-_axis_cap(sg, -B, ball.R), _axis_cap(sg, B, ball.R)) for B in sd.n_I_basis]
    out = []
    for _ in range(count * 4):
        X = sum((rng.uniform(-np.pi, np.pi) * R for R in sd.k_I_rotations), np.zeros((n, n)))
        Y = sum((rng.uniform(a, b) * B for (a, b), B in zip(caps, sd.n_I_basis)), np.zeros((n, n)))
        m = sd.M_elements[rng.integers(len(sd.M_elements))]
        x = sg.conj @ group_exp(X) @ m @ _unipotent(sd, Y[None])[0] @ sg.conj_inv
        if metric(x, np.eye(n)) <= ball.inner:
            out.append(x)
        if len(out) >= count:
            break
    return np.array(out) if out else np.zeros((0, n, n))


def sample(
    sg: StructuredSubgroup,
    ball: BallSpec = BallSpec(),
    seed: int = 0,
    anchors: np.ndarray | SampledSubgroup | None = None,
    estimate_coverage: bool = True,
) -> SampledSubgroup:
    """Net of ``sg ∩ B_R``.

    Points are ``(k a) k_I m u (k a)^{-1}`` over a quasi-random set of ``K^I``
    factors, all of ``M`` and a grid of ``N_I`` coordinates capped per axis so
    the image stays in the ball; the result is filtered to the ball and thinned
    at ``mesh / 2``.  The grid is coarsened to respect ``max_points`` and the
    fineness actually achieved is estimated from random probes.

    ``anchors`` (points of another group) are retracted onto ``sg`` and
    appended after the own net.  Coupling two samples this way makes their
    Hausdorff distance track the distance between the groups rather than the
    mismatch of two independent nets.
    """
    rng = np.random.default_rng(seed)
    model = sg.model
    P, Pinv = _structured_net(sg, ball, rng)
    keep = _dedup(P, Pinv, ball.mesh / 2)
    if len(keep) > ball.max_points:
        keep = np.sort(rng.choice(keep, ball.max_points, replace=False))
    P, Pinv = P[keep], Pinv[keep]
    tag = f"D^I I={list(sg.I)}"
    S = SampledSubgroup(model, P, Pinv, ball, tag)
    if estimate_coverage:
        probes = _random_probes(sg, ball, rng)
        S.coverage_estimate = float(S.nearest_distances(probes, np.linalg.inv(probes)).max()) if len(probes) else 0.0
    if anchors is not None:
        A = anchors.own.points if isinstance(anchors, SampledSubgroup) else np.asarray(anchors)
        Q = sg.project_many(A)
        Qi = np.linalg.inv(Q)
        sel = _identity_radius(Q, Qi) <= ball.R
        S = SampledSubgroup(model, np.concatenate([P, Q[sel]]), np.concatenate([Pinv, Qi[sel]]), ball, tag,
                            S.coverage_estimate, n_own=len(P))
    return S


def coupled_samples(g1: StructuredSubgroup, g2: StructuredSubgroup, ball: BallSpec = BallSpec(), seed: int = 0):
    """Samples of two groups, each augmented with the retraction of the other's own net."""
    s1 = sample(g1, ball, seed, estimate_coverage=False)
    s2 = sample(g2, ball, seed + 1, estimate_coverage=False)
    return sample_with_anchors(g1, s1, s2), sample_with_anchors(g2, s2, s1)


def sample_with_anchors(sg: StructuredSubgroup, own: SampledSubgroup, other: SampledSubgroup) -> SampledSubgroup:
    Q = sg.project_many(other.own.points)
    Qi = np.linalg.inv(Q)
    sel = _identity_radius(Q, Qi) <= own.ball.R
    base = own.own
    return SampledSubgroup(own.model, np.concatenate([base.points, Q[sel]]), np.concatenate([base.inverses, Qi[sel]]),
                           own.ball, own.source, own.coverage_estimate, n_own=len(base))


# -- Hausdorff -----------------------------------------------------------------------


def one_sided(S1: SampledSubgroup, S2: SampledSubgroup) -> float:
    """``sup`` over points of ``S1`` within ``R - 2 mesh`` of the identity of the distance to ``S2``."""
    if len(S1) == 0 or len(S2) == 0:
        raise ValueError("empty point set")
    sel = S1.radii <= S1.ball.inner
    if not np.any(sel):
        return 0.0
    return float(S2.nearest_distances(S1.points[sel], S1.inverses[sel]).max())


def hausdorff(S1: SampledSubgroup, S2: SampledSubgroup) -> float:
    """Pointed Hausdorff distance of two samples over a common ball."""
    if S1.model != S2.model:
        raise ValueError("samples come from different models")
    if S1.ball.R != S2.ball.R:
        raise ValueError("samples use different balls")
    return max(one_sided(S1, S2), one_sided(S2, S1))


# -- convergence of a_n K a_n^{-1} ----------------------------------------------------


def geometric_sequence(sd: SubsetData, ratio: float = 2.0, horizon: int = 12) -> list[np.ndarray]:
    """``a_n`` in ``A_I^+`` with ``exp(alpha(log a_n)) = ratio**n`` for every simple root outside ``I``."""
    if sd.is_full:
        raise SequenceError("I must be a proper subset of the base")
    Z = sd.integral_direction()
    c = min(a(Z) for i, a in enumerate(sd.rs.base) if i not in sd.I)
    H0 = Z / c
    return [group_exp(n * math.log(ratio) * H0) for n in range(1, horizon + 1)]


def check_tending(rs: RootSystem, I, a_seq: Sequence[np.ndarray], tol: float = 1e-9) -> None:
    """``alpha(log a_n)`` strictly increasing outside ``I`` and zero on ``I``."""
    logs = [np.diag(np.log(np.diag(a))) for a in a_seq]
    vals = np.array([rs.simple_values(H) for H in logs])
    for i in range(rs.rank):
        if i in I:
            if np.max(np.abs(vals[:, i])) > tol:
                raise SequenceError(f"simple root {i} is in I but does not vanish on log a_n")
        elif len(vals) < 2 or not np.all(np.diff(vals[:, i]) > 0):
            raise SequenceError(f"simple root {i} does not increase along the sequence")


@dataclass
class ConvergenceTable:
    model: GroupModel
    I: tuple
    ns: list
    distances: list
    samples: list = field(default_factory=list, repr=False)
    target: SampledSubgroup | None = field(default=None, repr=False)

    def decreasing_from(self, n0: int) -> bool:
        d = [x for n, x in zip(self.ns, self.distances) if n >= n0]
        return all(b < a for a, b in zip(d, d[1:]))

    @property
    def final(self) -> float:
        return self.distances[-1]

    def to_csv(self) -> str:
        return "n,distance\n" + "".join(f"{n},{d:.12g}\n" for n, d in zip(self.ns, self.distances))


def convergence_experiment(
    rs: RootSystem,
    I,
    a_seq: Sequence[np.ndarray] | None = None,
    ball: BallSpec = BallSpec(),
    seed: int = 0,
    ratio: float = 2.0,
    horizon: int = 12,
    keep_samples: bool = False,
) -> ConvergenceTable:
    """Hausdorff distance between samples of ``a_n K a_n^{-1}`` and ``D^I``, for each ``n``."""
    sd = rs.subset(I)
    if sd.is_full:
        raise SequenceError("I must be a proper subset of the base")
    if a_seq is None:
        a_seq = geometric_sequence(sd, ratio, horizon)
    check_tending(rs, sd.I, a_seq)
    D = build_limit_group(rs, LimitGroupDescriptor.identity(rs, sd.I))
    T_own = sample(D, ball, seed, estimate_coverage=False)
    full = tuple(range(rs.rank))
    table = ConvergenceTable(rs.model, sd.I, [], [])
    for n, a in enumerate(a_seq, start=1):
        G = build_limit_group(rs, LimitGroupDescriptor(full, a, np.eye(rs.model.dim)))
        S_own = sample(G, ball, seed + n, estimate_coverage=False)
        S = sample_with_anchors(G, S_own, T_own)
        T = sample_with_anchors(D, T_own, S_own)
        table.ns.append(n)
        table.distances.append(hausdorff(S, T))
        if keep_samples:
            table.samples.append(S)
            table.target = T
    return table


# -- the sequential criterion ----------------------------------------------------------


@dataclass
class SequentialReport:
    passed: bool
    clause1: float
    clause2: float
    witness: np.ndarray | None = field(default=None, repr=False)


def verify_sequential_limit(S_seq: Sequence[SampledSubgroup], L: SampledSubgroup, tol: float = 0.5) -> SequentialReport:
    """Both halves of the sequential description of Chabauty limits, at net resolution.

    (1) every point of ``L`` is within ``tol`` of ``S_n`` for every ``n`` in the
    tail (the last half); (2) every point of the final sample that stays within
    ``tol`` of all tail samples is within ``tol`` of ``L``.
    """
    if not S_seq:
        raise ValueError("empty sequence")
    tail = list(S_seq)[len(S_seq) // 2:]
    c1 = max(one_sided(L, S) for S in tail)
    last = tail[-1]
    sel = last.radii <= last.ball.inner
    P, Pi = last.points[sel], last.inverses[sel]
    persistent = np.ones(len(P), dtype=bool)
    for S in tail[:-1]:
        persistent &= S.nearest_distances(P, Pi) <= tol
    c2, witness = 0.0, None
    if np.any(persistent):
        d = L.nearest_distances(P[persistent], Pi[persistent])
        c2 = float(d.max())
        witness = P[persistent][int(np.argmax(d))]
    return SequentialReport(c1 <= tol and c2 <= tol, float(c1), c2, witness)


# -- toy spaces -----------------------------------------------------------------------


@dataclass(frozen=True)
class ToySubgroupR:
    """Closed subgroup of R: ``{0}``, ``c Z`` or ``R``."""

    kind: str
    c: float | None = None

    def __post_init__(self):
        if self.kind not in ("trivial", "lattice", "full"):
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.kind == "lattice" and not (self.c is not None and self.c > 0):
            raise ValueError("lattice spacing must be positive")

    @classmethod
    def lattice(cls, c: float) -> "ToySubgroupR":
        return cls("lattice", float(c))

    @property
    def coordinate(self) -> float:
        """Point of [0, 1] under ``cZ ↦ 1/(1+c)``, ``{0} ↦ 0``, ``R ↦ 1``."""
        return {"trivial": 0.0, "full": 1.0}.get(self.kind, 1.0 / (1.0 + self.c) if self.c else 0.0)

    @classmethod
    def from_coordinate(cls, s: float, tol: float = 1e-9) -> "ToySubgroupR":
        if s <= tol:
            return cls("trivial")
        if s >= 1 - tol:
            return cls("full")
        return cls.lattice(1.0 / s - 1.0)


@dataclass(frozen=True)
class ToySubgroupZ:
    """Closed subgroup of Z: ``nZ`` (``index = n >= 1``) or ``{0}`` (``index = None``)."""

    index: int | None

    def __post_init__(self):
        if self.index is not None and self.index < 1:
            raise ValueError("index must be a positive integer")

    @property
    def coordinate(self) -> float:
        """``nZ ↦ 1/n`` and ``{0} ↦ 0``."""
        return 0.0 if self.index is None else 1.0 / self.index


def _probe(seq, depth: int = 50) -> list:
    if callable(seq):
        ns = sorted({m for j in range(1, depth + 1) for m in (2 ** j, 2 ** j + 1)})
        return [seq(n) for n in ns]
    seq = list(seq)
    if not seq:
        raise ValueError("empty sequence")
    return seq


def _tail_limit(values: list, tol: float) -> float:
    v = np.asarray(values, dtype=float)
    tail = v[len(v) - max(2, len(v) // 4):]
    if np.max(tail) - np.min(tail) > tol:
        raise SequenceError(f"tail oscillates by {np.max(tail) - np.min(tail):.3g}; no limit")
    return float(tail[-1])


def toy_limit_R(seq: Callable[[int], ToySubgroupR] | Sequence[ToySubgroupR], tol: float = 1e-6) -> ToySubgroupR:
    """Limit in S(R) read through the coordinate ``cZ ↦ 1/(1+c)``.

    Spacings tending to infinity give ``{0}``, to zero give ``R``, to ``c0 > 0``
    give ``c0 Z``.  A callable is probed at ``n = 2^j`` and ``2^j + 1``.
    """
    s = _tail_limit([g.coordinate for g in _probe(seq)], tol)
    return ToySubgroupR.from_coordinate(s, tol)


def toy_limit_Z(seq: Callable[[int], ToySubgroupZ] | Sequence[ToySubgroupZ], tol: float = 1e-9) -> ToySubgroupZ:
    """Limit in S(Z): eventually constant index ``n`` gives ``nZ``, index tending to infinity gives ``{0}``."""
    terms = _probe(seq)
    s = _tail_limit([g.coordinate for g in terms], tol)
    if s <= tol:
        return ToySubgroupZ(None)
    m = round(1.0 / s)
    tail = terms[len(terms) - max(2, len(terms) // 4):]
    if any(g.index != m for g in tail):
        raise SequenceError("index is not eventually constant")
    return ToySubgroupZ(m)
