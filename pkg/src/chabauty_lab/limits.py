"""Limit groups ``D^I_{a,k} = (k a) K^I M N_I (k a)^{-1}`` and the tests built on them."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import subspace_angles

from .decompose import cartan_kak, iwasawa, polar, project_to_chamber
from .lie import (
    DEFAULT_TOL,
    GroupModel,
    Tolerances,
    group_distance,
    group_exp,
    group_log,
    in_K,
    is_group_member,
    is_orthogonal,
)
from .roots import RootSystem, SubsetData

INTERIOR = "interior"


class LimitGroupError(ValueError):
    """Invalid descriptor, or an algebra element outside the expected subalgebra."""


class ClassificationError(ArithmeticError):
    """A coordinate of the Cartan projection is neither convergent nor divergent on the tail.

    ``partial`` holds the :class:`ClassificationResult` computed so far.
    """

    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial


def _normalize_I(rs: RootSystem, I) -> tuple:
    I = tuple(sorted(set(int(i) for i in I)))
    if any(i < 0 or i >= rs.rank for i in I):
        raise LimitGroupError(f"I={I} is not a subset of the base of rank {rs.rank}")
    return I


@dataclass(frozen=True, eq=False)
class LimitGroupDescriptor:
    """``(I, a, k)``: ``I`` indexes the base, ``a`` lies in ``A^I`` with ``alpha(log a) >= 0`` on ``I``, ``k`` in K."""

    I: tuple
    a: np.ndarray = field(repr=False)
    k: np.ndarray = field(repr=False)

    @classmethod
    def identity(cls, rs: RootSystem, I) -> "LimitGroupDescriptor":
        n = rs.model.dim
        return cls(_normalize_I(rs, I), np.eye(n), np.eye(n))

    @property
    def log_a(self) -> np.ndarray:
        return np.diag(np.log(np.diag(self.a)))

    def validate(self, rs: RootSystem, tol: Tolerances = DEFAULT_TOL) -> "LimitGroupDescriptor":
        model = rs.model
        I = _normalize_I(rs, self.I)
        a, k = model.check_shape(self.a), model.check_shape(self.k)
        d = np.diag(a)
        if np.linalg.norm(a - np.diag(d)) > tol.membership_tol or np.any(d <= 0):
            raise LimitGroupError("a must be diagonal with positive entries")
        if not is_group_member(a, model, tol.membership_tol):
            raise LimitGroupError("a is not in the group")
        H = np.diag(np.log(d))
        sd = rs.subset(I)
        H_low, _ = sd.split_cartan(H)
        scale = max(1.0, float(np.linalg.norm(H)))
        if np.linalg.norm(H_low) > tol.membership_tol * scale:
            raise LimitGroupError("a is not in A^I: log a has a component along a_I")
        v = rs.simple_values(H)
        if any(v[i] < -tol.membership_tol * scale for i in I):
            raise LimitGroupError("log a is outside the closed positive chamber")
        if not in_K(k, model, tol.membership_tol * 10):
            raise LimitGroupError("k is not in K")
        return LimitGroupDescriptor(I, a, k)

    def to_json(self, rs: RootSystem) -> dict:
        return {
            "I": [list(rs.base[i].coeffs) for i in self.I],
            "a": np.asarray(self.a).tolist(),
            "k": np.asarray(self.k).tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict, rs: RootSystem) -> "LimitGroupDescriptor":
        idx = {tuple(r.coeffs): i for i, r in enumerate(rs.base)}
        try:
            I = tuple(sorted(idx[tuple(int(c) for c in coeffs)] for coeffs in obj["I"]))
        except KeyError as exc:
            raise LimitGroupError(f"{exc.args[0]} is not a simple root") from exc
        return cls(I, np.array(obj["a"], dtype=float), np.array(obj["k"], dtype=float))


def _levi_blocks(sd: SubsetData) -> tuple[np.ndarray, list]:
    """Index permutation sorting by degree along a_I, and the contiguous blocks of equal degree.

    In the permuted order ``N_I`` is block upper unipotent, ``Z_G(a_I)`` block
    diagonal and ``N_I^-`` block lower unipotent.
    """
    z = np.round(np.diag(sd.integral_direction()), 9)
    perm = np.argsort(-z, kind="stable")
    zs = z[perm]
    cuts = [0] + [i for i in range(1, len(zs)) if zs[i] != zs[i - 1]] + [len(zs)]
    return perm, [np.arange(a, b) for a, b in zip(cuts, cuts[1:])]


def _lower_positive_qr(L: np.ndarray) -> np.ndarray:
    """Lower-triangular ``T`` with positive diagonal and ``L = Q T``, ``Q`` orthogonal (stacked)."""
    F = L[..., ::-1, ::-1]
    Q, R = np.linalg.qr(F)
    s = np.sign(np.diagonal(R, axis1=-2, axis2=-1))
    s = np.where(s == 0, 1.0, s)
    R = s[..., :, None] * R
    return R[..., ::-1, ::-1]


class StructuredSubgroup:
    """The closed subgroup ``D^I_{a,k}`` with membership, retraction and sampling support.

    For ``I`` the full base this is ``(k a) K (k a)^{-1}``.
    """

    def __init__(self, rs: RootSystem, desc: LimitGroupDescriptor, tol: Tolerances = DEFAULT_TOL):
        self.rs = rs
        self.tol = tol
        self.descriptor = desc.validate(rs, tol)
        self.subset = rs.subset(self.descriptor.I)
        self.conj = self.descriptor.k @ self.descriptor.a
        self.conj_inv = np.linalg.inv(self.conj)
        self._aI = [Z / np.linalg.norm(Z) for Z in self.subset.a_I_basis]
        pos = {r: i for i, r in enumerate(rs.roots)}
        r = len(rs.a_basis)
        self._nsup_idx = np.array([r + pos[a] for a in self.subset.sigma_sup_I_plus], dtype=int)
        self._perm, self._blocks = _levi_blocks(self.subset)

    @property
    def model(self) -> GroupModel:
        return self.rs.model

    @property
    def I(self) -> tuple:
        return self.descriptor.I

    def __repr__(self):
        return f"StructuredSubgroup({self.model}, I={self.I})"

    def lie_algebra_basis(self) -> list[np.ndarray]:
        c, ci = self.conj, self.conj_inv
        return [c @ X @ ci for X in self.subset.d_I_basis]

    # -- membership ----------------------------------------------------------------

    def _factor(self, g):
        h = self.conj_inv @ np.asarray(g, dtype=float) @ self.conj
        f = iwasawa(h, self.model)
        return f, group_log(f.n)

    def residual(self, g: np.ndarray) -> float:
        """Largest violation among: A-part trivial, n^I part of log n trivial, K-part centralizing a_I."""
        f, L = self._factor(g)
        r_a = float(np.max(np.abs(np.log(np.diag(f.a)))))
        c = self.rs.coords(L)[self._nsup_idx] if len(self._nsup_idx) else np.zeros(1)
        r_n = float(np.linalg.norm(c)) / max(1.0, float(np.linalg.norm(L)))
        r_k = max((float(np.linalg.norm(f.k @ Z @ f.k.T - Z)) for Z in self._aI), default=0.0)
        return max(r_a, r_n, r_k)

    def member(self, g: np.ndarray, tol: float | None = None) -> bool:
        tol = self.tol.membership_tol if tol is None else tol
        g = self.model.check_shape(g)
        if not is_group_member(g, self.model, max(tol, 1e-6)):
            return False
        return self.residual(g) <= tol

    # -- retraction ----------------------------------------------------------------

    def _opposite_factor(self, H: np.ndarray) -> np.ndarray:
        """For stacked ``h`` (conjugated frame) return ``b`` in ``A N^-`` with ``h b^{-1}`` in ``D^I``.

        Block factorization ``h = U L V`` (``U`` in ``N_I``, ``L`` in the Levi
        factor, ``V`` in ``N_I^-``) followed by ``L = kappa T`` blockwise with
        ``T`` lower triangular; then ``b = T V``.
        """
        perm = self._perm
        W = H[:, perm][:, :, perm]
        n = W.shape[-1]
        V = np.broadcast_to(np.eye(n), W.shape).copy()
        T = np.zeros_like(W)
        blocks = self._blocks
        for bi in range(len(blocks) - 1, -1, -1):
            last = blocks[bi]
            rest = np.arange(0, last[0])
            D = W[:, last][:, :, last]
            T[:, last[:, None], last] = _lower_positive_qr(D)
            if len(rest):
                C = W[:, last][:, :, rest]
                B = W[:, rest][:, :, last]
                Y = np.linalg.solve(D, C)
                V[:, last[:, None], rest] = Y
                W = W[:, rest][:, :, rest] - B @ Y
        b = T @ V
        out = np.empty_like(b)
        out[:, perm[:, None], perm] = b
        return out

    def project_many(self, G: np.ndarray) -> np.ndarray:
        """Retract a stack of group elements onto the group; the identity on the group itself.

        With ``c = k a`` and ``h = c^{-1} g c = d b`` (``d`` in ``D^I``, ``b`` in
        ``A N^-``) the image is ``c d c^{-1} = g c b^{-1} c^{-1}``.  Conjugating
        the lower-triangular ``b^{-1}`` by ``a`` only shrinks it, which keeps the
        retraction accurate for strongly expanding ``a``.
        """
        G = np.asarray(G, dtype=float)
        single = G.ndim == 2
        G = G[None] if single else G
        H = self.conj_inv @ G @ self.conj
        binv = np.linalg.inv(self._opposite_factor(H))
        d = np.diag(self.descriptor.a)
        corr = binv * d[:, None] / d[None, :]
        k = self.descriptor.k
        out = G @ (k @ corr @ k.T)
        return out[0] if single else out

    def project(self, g: np.ndarray) -> np.ndarray:
        return self.project_many(g)

    def distance(self, g: np.ndarray) -> float:
        """Distance from ``g`` to its retraction onto the group (an upper bound for the true distance)."""
        return group_distance(g, self.project(g))

    # -- sampling ------------------------------------------------------------------

    def random_element(self, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
        sd = self.subset
        n = self.model.dim
        X = sum((rng.uniform(-np.pi, np.pi) * R for R in sd.k_I_rotations), np.zeros((n, n)))
        Y = sum((scale * rng.standard_normal() * B for B in sd.n_I_basis), np.zeros((n, n)))
        m = sd.M_elements[rng.integers(len(sd.M_elements))]
        d = group_exp(X) @ m @ group_exp(Y)
        return self.conj @ d @ self.conj_inv


def build_limit_group(rs: RootSystem, desc: LimitGroupDescriptor, tol: Tolerances = DEFAULT_TOL) -> StructuredSubgroup:
    return StructuredSubgroup(rs, desc, tol)


def member(g: np.ndarray, sg: StructuredSubgroup, tol: float | None = None) -> bool:
    return sg.member(g, tol)


# -- distality and nilpotency ------------------------------------------------------


def _cluster_log_moduli(g: np.ndarray) -> np.ndarray:
    """Mean ``log|lambda|`` per eigenvalue cluster.

    A rounded Jordan block of size m splits its eigenvalue by ``eps^(1/m)``,
    but the product over the cluster (a determinant) stays accurate.
    """
    ev = np.linalg.eigvals(g)
    n = len(ev)
    cond = max(1.0, float(np.linalg.norm(g) * np.linalg.norm(np.linalg.inv(g))))
    radius = 10.0 * (1e-15 * cond) ** (1.0 / n)
    label = list(range(n))

    def find(i):
        while label[i] != i:
            label[i] = label[label[i]]
            i = label[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(ev[i] - ev[j]) <= radius:
                label[find(i)] = find(j)
    roots = np.array([find(i) for i in range(n)])
    return np.array([np.log(np.abs(ev[roots == r])).mean() for r in np.unique(roots)])


def is_distal(g: np.ndarray, rs: RootSystem, tol: float | None = None) -> bool:
    """True iff ``Ad g`` has its spectrum on the unit circle.

    The spectrum of ``Ad g`` consists of the ratios (SL) or pairwise products
    (SO_0(p, p)) of eigenvalues of ``g``, so it lies on the unit circle exactly
    when all eigenvalues of ``g`` do.  Working with ``g`` keeps the Jordan
    blocks short; averaging log-moduli within clusters removes their rounding spread.
    """
    tol = rs.tol.spectrum_tol if tol is None else tol
    g = rs.model.check_shape(g)
    return bool(np.all(np.abs(_cluster_log_moduli(g)) <= tol))


def ad_spectrum(X: np.ndarray, rs: RootSystem) -> np.ndarray:
    return np.linalg.eigvals(rs.ad_matrix(X))


def _dI_coefficients(X: np.ndarray, sd: SubsetData):
    basis = sd.d_I_basis
    n = sd.model.dim
    if not basis:
        return np.zeros(0), float(np.linalg.norm(X))
    B = np.array([b.ravel() for b in basis]).T
    c, *_ = np.linalg.lstsq(B, np.asarray(X).ravel(), rcond=None)
    res = float(np.linalg.norm(B @ c - np.asarray(X).ravel()))
    return c, res


def graded_ad_spectrum(X: np.ndarray, sd: SubsetData) -> np.ndarray:
    """Spectrum of ``ad X`` for ``X`` in ``d^I``, block by block.

    Grading ``g`` by the values of the roots on the integral direction of
    ``a_I`` makes ``ad X`` block upper triangular (``X`` has only nonnegative
    degrees), so its spectrum is that of the diagonal blocks.  Those blocks are
    ``ad`` of the degree-zero part of ``X``, a normal operator, hence well
    conditioned.
    """
    rs = sd.rs
    Z = sd.integral_direction()
    deg = np.concatenate([np.zeros(len(rs.a_basis)), [a(Z) for a in rs.roots]])
    deg = np.round(deg, 9)
    coords = rs.coords(X)
    A = rs.ad_matrix(X)
    if np.linalg.norm(coords[deg < 0]) > 1e-12 * max(1.0, float(np.linalg.norm(coords))):
        return np.linalg.eigvals(A)
    out = [np.linalg.eigvals(A[np.ix_(deg == d, deg == d)]) for d in np.unique(deg)]
    return np.concatenate(out)


def nilpotent_in_dI(X: np.ndarray, sd: SubsetData, tol: float | None = None) -> bool:
    """True iff every eigenvalue of ``ad X`` has modulus below ``tol``; ``X`` must lie in ``d^I``."""
    tol = sd.rs.tol.spectrum_tol if tol is None else tol
    X = sd.model.check_shape(X)
    _, res = _dI_coefficients(X, sd)
    if res > sd.rs.tol.membership_tol * max(1.0, float(np.linalg.norm(X))):
        raise LimitGroupError("X is not in the Lie algebra d^I")
    return bool(np.max(np.abs(graded_ad_spectrum(X, sd)), initial=0.0) < tol)


@dataclass
class NilpotencyReport:
    """Outcome of a randomized check of an equivalence; ``counterexamples`` holds offending inputs."""

    trials: int
    agreements: int
    counterexamples: list = field(default_factory=list, repr=False)

    @property
    def passed(self) -> bool:
        return self.agreements == self.trials


def random_dI_element(sd: SubsetData, rng: np.random.Generator, compact_part: bool = True) -> np.ndarray:
    n = sd.model.dim
    X = np.zeros((n, n))
    if compact_part:
        for B in sd.k_I_basis:
            X += rng.standard_normal() * B
    for B in sd.n_I_basis:
        X += rng.standard_normal() * B
    return X


def verify_nilpotency_criterion(sd: SubsetData, trials: int = 1000, rng=None, tol: float | None = None) -> NilpotencyReport:
    """On random ``X`` in ``d^I``: ``ad X`` nilpotent iff the ``k^I + m`` component of ``X`` vanishes.

    Half the draws have no compact part (when ``k^I`` is nonzero).
    """
    rng = np.random.default_rng(rng)
    nk = len(sd.k_I_basis)
    rep = NilpotencyReport(trials, 0)
    for t in range(trials):
        X = random_dI_element(sd, rng, compact_part=bool(nk) and t % 2 == 0)
        c, _ = _dI_coefficients(X, sd)
        vanishes = float(np.linalg.norm(c[:nk])) <= 1e-12 * max(1.0, float(np.linalg.norm(c)))
        nil = nilpotent_in_dI(X, sd, tol)
        if nil == vanishes:
            rep.agreements += 1
        else:
            rep.counterexamples.append(X)
    return rep


# -- normalizers -------------------------------------------------------------------


def _max_angle(g: np.ndarray, basis: list) -> float:
    if not basis:
        return 0.0
    gi = np.linalg.inv(g)
    V = np.array([b.ravel() for b in basis]).T
    W = np.array([(g @ b @ gi).ravel() for b in basis]).T
    return float(np.max(subspace_angles(V, W)))


def normalizes(g: np.ndarray, which: str, sd: SubsetData, tol: float | None = None) -> bool:
    """Whether ``Ad g`` preserves ``n_I`` (``which="n_I"``) or both ``d^I`` and ``n_I`` (``which="D_I"``)."""
    tol = sd.rs.tol.spectrum_tol if tol is None else tol
    g = sd.model.check_shape(g)
    if which not in ("n_I", "D_I"):
        raise ValueError(f"unknown subalgebra {which!r}")
    ok = _max_angle(g, sd.n_I_basis) < tol
    if which == "D_I":
        ok = ok and _max_angle(g, sd.d_I_basis) < tol
    return ok


# -- equality ----------------------------------------------------------------------


def descriptors_equal(d1: LimitGroupDescriptor, d2: LimitGroupDescriptor, rs: RootSystem, tol: float | None = None) -> bool:
    """Whether two descriptors give the same subgroup.

    Requires equal ``I`` and ``a``; then ``k = k2^{-1} k1`` must centralize
    ``a_I`` and ``a^{-1} k a`` must be orthogonal.
    """
    tol = rs.tol.membership_tol if tol is None else tol
    if tuple(d1.I) != tuple(d2.I):
        return False
    a1, a2 = np.asarray(d1.a), np.asarray(d2.a)
    if np.linalg.norm(np.log(np.diag(a1)) - np.log(np.diag(a2))) >= tol:
        return False
    k = np.asarray(d2.k).T @ np.asarray(d1.k)
    sd = rs.subset(d1.I)
    for Z in sd.a_I_basis:
        Z = Z / np.linalg.norm(Z)
        if np.linalg.norm(k @ Z @ k.T - Z) >= tol:
            return False
    c = np.diag(a1)
    return is_orthogonal((k * c[None, :]) / c[:, None], tol * max(1.0, float(np.max(c) / np.min(c))))


def descriptor_of_conjugate(rs: RootSystem, I, x: np.ndarray) -> LimitGroupDescriptor:
    """Descriptor ``(I, a, k)`` with ``x D^I x^{-1} = D^I_{a,k}``.

    ``x = kappa b n``; the ``N_I`` and ``A_I`` parts of ``b n`` normalize
    ``D^I``, the rest ``h`` lies in ``G^I``.  Writing ``h = exp(X) k0`` and
    diagonalizing ``X`` by an element of ``Z_K(a_I)`` (forced by adding a large
    multiple of a regular direction of ``a_I``) gives the canonical form.
    """
    model = rs.model
    I = _normalize_I(rs, I)
    sd = rs.subset(I)
    f = iwasawa(np.asarray(x, dtype=float), model)
    L = group_log(f.n)
    u_up = group_exp(sd.project_n_sup(L)) if sd.sigma_sup_I_plus else np.eye(model.dim)
    _, H_up = sd.split_cartan(np.diag(np.log(np.diag(f.a))))
    h = group_exp(H_up) @ u_up
    X, _ = polar(h, model)
    Z = sd.integral_direction()
    vals = [a(Z) for i, a in enumerate(rs.base) if i not in I]
    c = (4.0 * np.linalg.norm(X) + 1.0) / min(vals) if vals else 0.0
    Ht, k = project_to_chamber(X + c * Z, model)
    _, H = sd.split_cartan(Ht - c * Z)
    v = rs.simple_values(H)
    if np.any(v[list(I)] < -1e-6):
        raise LimitGroupError("conjugate did not land in the closed chamber")
    return LimitGroupDescriptor(I, group_exp(np.diag(np.diag(H))), f.k @ k.T).validate(rs, Tolerances(membership_tol=1e-6))


# -- sequence classification --------------------------------------------------------


@dataclass
class ClassificationResult:
    """``limit`` is a :class:`LimitGroupDescriptor` or ``"interior"``."""

    limit: object
    I: tuple
    residual: float
    alpha_values: np.ndarray = field(repr=False)

    @property
    def interior(self) -> bool:
        return isinstance(self.limit, str)


def _sequence_terms(seq, horizon: int):
    if callable(seq):
        return [np.asarray(seq(n), dtype=float) for n in range(1, horizon + 1)]
    terms = [np.asarray(g, dtype=float) for g in seq]
    return terms[:horizon]


def classify_sequence(
    seq: Callable[[int], np.ndarray] | Sequence[np.ndarray],
    rs: RootSystem,
    horizon: int = 40,
    bound_threshold: float | None = None,
    cauchy_tol: float = 1e-4,
) -> ClassificationResult:
    """Chabauty limit of ``g_n K g_n^{-1}`` from the Cartan projections of ``g_n``.

    A simple root belongs to ``I`` when its values stay below
    ``bound_threshold`` (default ``10 log(horizon)``) and oscillate by less than
    ``cauchy_tol`` over the last quarter; it is left out when its values
    increase strictly over that tail.  Anything else raises
    :class:`ClassificationError`.
    """
    terms = _sequence_terms(seq, horizon)
    if len(terms) < 4:
        raise ValueError("need at least 4 terms")
    horizon = len(terms)
    if bound_threshold is None:
        bound_threshold = 10.0 * np.log(horizon)
    facs = [cartan_kak(g, rs.model) for g in terms]
    logs = [np.diag(np.log(np.diag(f.a))) for f in facs]
    vals = np.array([rs.simple_values(H) for H in logs])
    tail = slice(horizon - max(2, horizon // 4), horizon)
    I, bad = [], []
    residual = 0.0
    for i in range(rs.rank):
        t = vals[tail, i]
        osc = float(t.max() - t.min())
        if osc < cauchy_tol and vals[:, i].max() < bound_threshold:
            I.append(i)
            residual = max(residual, osc)
        elif not np.all(np.diff(t) > 0):
            bad.append(i)
    I = tuple(I)
    if len(I) == rs.rank:
        res = ClassificationResult(INTERIOR, I, residual, vals)
    else:
        sd = rs.subset(I)
        H = np.mean([sd.split_cartan(L)[1] for L in logs[tail]], axis=0)
        H = np.diag(np.diag(H))
        desc = LimitGroupDescriptor(I, group_exp(H), facs[-1].k1)
        res = ClassificationResult(desc, I, residual, vals)
    if bad:
        raise ClassificationError(f"simple roots {bad} neither converge nor diverge on the tail", res)
    return res
