"""Polyhedral compactification of the Cartan subalgebra and its map onto Chabauty limit groups."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linprog

from .chabauty import BallSpec, SequenceError, hausdorff, sample, sample_with_anchors
from .lie import DEFAULT_TOL, group_exp, is_group_member
from .limits import LimitGroupDescriptor, LimitGroupError, build_limit_group, descriptor_of_conjugate, descriptors_equal
from .roots import RootSystem


@dataclass(frozen=True, eq=False)
class Facet:
    """Open cone cut out by the signs of the roots: zero on ``sigma0``, positive on ``sigma_plus``."""

    sigma0: tuple
    sigma_plus: tuple
    sigma_minus: tuple
    span_basis: list = field(repr=False)
    interior_point: np.ndarray = field(repr=False)

    def contains(self, H: np.ndarray, tol: float = DEFAULT_TOL.membership_tol) -> bool:
        return (
            all(abs(a(H)) <= tol for a in self.sigma0)
            and all(a(H) > tol for a in self.sigma_plus)
            and all(a(H) < -tol for a in self.sigma_minus)
        )


def _cone_point(rs: RootSystem, zero, plus, minus) -> np.ndarray | None:
    """A point of the open cone, by linear feasibility in Cartan coordinates (``None`` if empty)."""
    r = len(rs.a_basis)
    F = {a: rs.functional(a) for a in rs.roots}
    A_eq = np.array([F[a] for a in zero]) if zero else None
    rows = [-F[a] for a in plus] + [F[a] for a in minus]
    A_ub = np.array(rows) if rows else None
    b_ub = -np.ones(len(rows)) if rows else None
    res = linprog(np.zeros(r), A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=np.zeros(len(zero)) if zero else None,
                  bounds=[(None, None)] * r, method="highs")
    if res.status != 0:
        return None
    return rs.cartan_element(res.x)


def facet_of_vector(H: np.ndarray, rs: RootSystem, tol: float | None = None) -> Facet:
    """The facet containing ``H``; ``H = 0`` gives ``sigma0 = Σ``."""
    tol = rs.tol.membership_tol if tol is None else tol
    rs._require_cartan(H)
    scale = max(1.0, float(np.linalg.norm(H)))
    zero, plus, minus = [], [], []
    for a in rs.roots:
        v = a(H)
        (zero if abs(v) <= tol * scale else plus if v > 0 else minus).append(a)
    if zero:
        ker = null_space(np.array([rs.functional(a) for a in zero]))
        span = [rs.cartan_element(v) for v in ker.T]
    else:
        span = list(rs.a_basis)
    return Facet(tuple(zero), tuple(plus), tuple(minus), span, np.asarray(H, dtype=float).copy())


def certify_facet(F: Facet, rs: RootSystem) -> bool:
    """Consistency of the sign pattern (nonempty open cone) and its symmetry under negation."""
    z = set(F.sigma0)
    if any(rs.negative(a) not in z for a in F.sigma0):
        return False
    if {rs.negative(a) for a in F.sigma_plus} != set(F.sigma_minus):
        return False
    if len(z) == len(rs.roots):
        return True
    return _cone_point(rs, list(F.sigma0), list(F.sigma_plus), list(F.sigma_minus)) is not None


@dataclass(frozen=True, eq=False)
class PolyhedralPoint:
    """The coset ``rep + a_I`` of the corner at ``I``; ``rep`` is taken in ``a^I``.

    ``I`` equal to the whole base is the interior copy of ``a``.
    """

    I: tuple
    rep: np.ndarray = field(repr=False)

    @classmethod
    def from_vector(cls, rs: RootSystem, I, H: np.ndarray) -> "PolyhedralPoint":
        """Normalize ``H + a_I`` to its representative in ``a^I``."""
        sd = rs.subset(I)
        return cls(sd.I, sd.split_cartan(np.asarray(H, dtype=float))[1])

    def validate(self, rs: RootSystem, tol: float | None = None) -> "PolyhedralPoint":
        tol = rs.tol.membership_tol if tol is None else tol
        sd = rs.subset(self.I)
        rs._require_cartan(self.rep)
        scale = max(1.0, float(np.linalg.norm(self.rep)))
        if np.linalg.norm(sd.split_cartan(self.rep)[0]) > tol * scale:
            raise LimitGroupError("representative has a component along a_I")
        v = rs.simple_values(self.rep)
        if any(v[i] < -tol * scale for i in sd.I):
            raise LimitGroupError("representative is outside the chamber corner")
        return PolyhedralPoint(sd.I, self.rep)


@dataclass(frozen=True, eq=False)
class CompactifiedPoint:
    g: np.ndarray = field(repr=False)
    pt: PolyhedralPoint

    def validate(self, rs: RootSystem) -> "CompactifiedPoint":
        if not is_group_member(self.g, rs.model, 1e-6):
            raise LimitGroupError("g is not in the group")
        return CompactifiedPoint(np.asarray(self.g, dtype=float), self.pt.validate(rs))


def corner_coords(p: PolyhedralPoint, rs: RootSystem, tol: float | None = None) -> np.ndarray:
    """Coordinates in ``(-inf, +inf]^r``: ``alpha_i(rep)`` for ``i`` in ``I``, ``+inf`` otherwise."""
    p = p.validate(rs, tol)
    v = rs.simple_values(p.rep)
    return np.array([v[i] if i in p.I else np.inf for i in range(rs.rank)])


def from_corner_coords(x, rs: RootSystem) -> PolyhedralPoint:
    """Inverse of :func:`corner_coords`."""
    x = np.asarray(x, dtype=float)
    if x.shape != (rs.rank,) or np.any(np.isneginf(x)) or np.any(np.isnan(x)):
        raise ValueError("corner coordinates must be a vector of reals or +inf of length rank")
    I = tuple(int(i) for i in np.flatnonzero(np.isfinite(x)))
    sd = rs.subset(I)
    n = rs.model.dim
    if not I:
        return PolyhedralPoint(I, np.zeros((n, n)))
    A = np.array([[rs.base[i](B) for B in sd.aI_basis] for i in I])
    c = np.linalg.solve(A, x[list(I)])
    rep = sum((ci * B for ci, B in zip(c, sd.aI_basis)), np.zeros((n, n)))
    return PolyhedralPoint(I, rep).validate(rs)


def polyhedral_limit(
    seq: Sequence[PolyhedralPoint] | Callable[[int], PolyhedralPoint],
    rs: RootSystem,
    horizon: int = 40,
    tol: float = 1e-6,
) -> PolyhedralPoint:
    """Limit read in corner coordinates.

    A coordinate converges when it oscillates by less than ``tol`` over the
    last quarter, and tends to ``+inf`` when it is ``+inf`` or strictly
    increasing there; anything else raises :class:`SequenceError`.
    """
    terms = [seq(n) for n in range(1, horizon + 1)] if callable(seq) else list(seq)
    if not terms:
        raise ValueError("empty sequence")
    X = np.array([corner_coords(p, rs) for p in terms])
    tail = X[len(X) - max(2, len(X) // 4):]
    out = np.empty(rs.rank)
    for i in range(rs.rank):
        t = tail[:, i]
        if np.all(np.isinf(t)):
            out[i] = np.inf
        elif np.all(np.isfinite(t)) and t.max() - t.min() < tol:
            out[i] = t[-1]
        elif len(t) > 1 and np.all(np.diff(np.where(np.isinf(t), np.finfo(float).max, t)) > 0):
            out[i] = np.inf
        else:
            raise SequenceError(f"corner coordinate {i} neither converges nor tends to +inf")
    return from_corner_coords(out, rs)


# -- the map onto limit groups -----------------------------------------------------------


def phi(cp: CompactifiedPoint, rs: RootSystem) -> LimitGroupDescriptor:
    """Descriptor of ``g exp(rep) D^I exp(-rep) g^{-1}`` in canonical form."""
    cp = cp.validate(rs)
    x = cp.g @ group_exp(cp.pt.rep)
    return descriptor_of_conjugate(rs, cp.pt.I, x)


def equivalent(cp1: CompactifiedPoint, cp2: CompactifiedPoint, rs: RootSystem, tol: float = 1e-6) -> bool:
    return descriptors_equal(phi(cp1, rs), phi(cp2, rs), rs, tol)


def f_descriptor(p: PolyhedralPoint, rs: RootSystem) -> LimitGroupDescriptor:
    """``exp(rep) D^I exp(-rep)`` as a descriptor."""
    p = p.validate(rs)
    return LimitGroupDescriptor(p.I, group_exp(p.rep), np.eye(rs.model.dim))


@dataclass
class ContinuityTable:
    limit: PolyhedralPoint
    ns: list
    distances: list

    @property
    def final(self) -> float:
        return self.distances[-1]

    def to_csv(self) -> str:
        return "n,distance\n" + "".join(f"{n},{d:.12g}\n" for n, d in zip(self.ns, self.distances))


def continuity_experiment_f(
    rs: RootSystem,
    seq: Sequence[PolyhedralPoint],
    ball: BallSpec = BallSpec(),
    seed: int = 0,
    limit: PolyhedralPoint | None = None,
) -> ContinuityTable:
    """Hausdorff distances between samples of ``f(p_n)`` and ``f(lim p_n)``.

    The limit is read off the sequence unless given.
    """
    seq = list(seq)
    limit = polyhedral_limit(seq, rs) if limit is None else limit.validate(rs)
    target = build_limit_group(rs, f_descriptor(limit, rs))
    T_own = sample(target, ball, seed, estimate_coverage=False)
    table = ContinuityTable(limit, [], [])
    for n, p in enumerate(seq, start=1):
        G = build_limit_group(rs, f_descriptor(p, rs))
        S_own = sample(G, ball, seed + n, estimate_coverage=False)
        S = sample_with_anchors(G, S_own, T_own)
        T = sample_with_anchors(target, T_own, S_own)
        table.ns.append(n)
        table.distances.append(hausdorff(S, T))
    return table

