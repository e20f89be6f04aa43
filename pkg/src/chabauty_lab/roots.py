"""Restricted root systems of sl(n) and so(p, p), and the objects attached to a subset I of the base."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import null_space, orth

from .lie import DEFAULT_TOL, GroupModel, ModelError, bracket, cartan_involution

# singular values below this are treated as zero in every rank decision here
RANK_CUTOFF = 1e-8


@dataclass(frozen=True, eq=False)
class Root:
    """A restricted root with its Δ-coordinates, diagonal weight and root vector.

    ``weight`` is a vector ``w`` with ``alpha(H) = w @ diag(H)``.
    """

    coeffs: tuple
    weight: np.ndarray = field(repr=False)
    vector: np.ndarray = field(repr=False)

    @property
    def positive(self) -> bool:
        return all(c >= 0 for c in self.coeffs)

    @property
    def sign(self) -> str:
        return "positive" if self.positive else "negative"

    def __call__(self, H: np.ndarray) -> float:
        return float(self.weight @ np.diag(H))

    def __eq__(self, other):
        return isinstance(other, Root) and self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def __neg__(self):
        raise NotImplementedError("look negatives up with RootSystem.negative")

    def label(self) -> str:
        return "(" + ",".join(str(c) for c in self.coeffs) + ")"


def _E(n, i, j):
    m = np.zeros((n, n))
    m[i, j] = 1.0
    return m


def _weights_and_vectors(model: GroupModel):
    """Positive roots as (weight, root vector) pairs; negatives are the transposes."""
    n = model.dim
    out = []
    if model.family == "sl":
        for i, j in itertools.combinations(range(n), 2):
            w = np.zeros(n)
            w[i], w[j] = 1.0, -1.0
            out.append((w, _E(n, i, j)))
        return out
    p = model.size
    bar = lambda i: n - 1 - i  # noqa: E731
    for i, j in itertools.combinations(range(p), 2):
        w = np.zeros(n)
        w[i], w[j] = 1.0, -1.0
        out.append((w, _E(n, i, j) - _E(n, bar(j), bar(i))))
        w = np.zeros(n)
        w[i], w[j] = 1.0, 1.0
        out.append((w, _E(n, i, bar(j)) - _E(n, j, bar(i))))
    return out


def _base_weights(model: GroupModel) -> list[np.ndarray]:
    n, r = model.dim, model.rank
    base = []
    for i in range(r):
        w = np.zeros(n)
        if model.family == "sl" or i < r - 1:
            w[i], w[i + 1] = 1.0, -1.0
        else:
            w[r - 2], w[r - 1] = 1.0, 1.0
        base.append(w)
    return base


def _cartan_basis(model: GroupModel) -> list[np.ndarray]:
    n = model.dim
    if model.family == "sl":
        return [_E(n, i, i) - _E(n, i + 1, i + 1) for i in range(n - 1)]
    return [_E(n, i, i) - _E(n, n - 1 - i, n - 1 - i) for i in range(model.size)]


class RootSystem:
    """Restricted roots, root vectors and the base Δ for a :class:`GroupModel`.

    Roots are built from the closed-form root vectors of the two families, then
    given integer coordinates in the base.  ``roots`` is sorted
    lexicographically by those coordinates, and ``basis`` (Cartan basis followed
    by the root vectors in that order) is the fixed ordered basis of the Lie
    algebra used for adjoint matrices.
    """

    def __init__(self, model: GroupModel, tol=DEFAULT_TOL):
        self.model = model
        self.tol = tol
        self.a_basis = _cartan_basis(model)
        base_w = _base_weights(model)
        W = np.array(base_w).T  # diag-weight space x rank
        pairs = _weights_and_vectors(model)
        roots = []
        for w, X in pairs:
            for sgn, vec in ((1.0, X), (-1.0, X.T.copy())):
                c, *_ = np.linalg.lstsq(W, sgn * w, rcond=None)
                c = np.where(np.abs(c) < RANK_CUTOFF, 0.0, c)
                ci = np.rint(c)
                if np.max(np.abs(c - ci)) > 1e-8:
                    raise AssertionError("non-integral root coordinates")
                roots.append(Root(tuple(int(v) for v in ci), sgn * w, vec))
        self.roots = sorted(roots, key=lambda r: r.coeffs)
        self._by_coeffs = {r.coeffs: r for r in self.roots}
        r = model.rank
        self.base = [self._by_coeffs[tuple(int(i == j) for j in range(r))] for i in range(r)]

    def __repr__(self):
        return f"RootSystem({self.model}, |Σ|={len(self.roots)})"

    @property
    def rank(self) -> int:
        return self.model.rank

    @property
    def zero_space_basis(self) -> list[np.ndarray]:
        return self.a_basis

    @property
    def positive_roots(self) -> list[Root]:
        return [r for r in self.roots if r.positive]

    @property
    def root_vectors(self) -> dict:
        return {r: r.vector for r in self.roots}

    def root(self, coeffs) -> Root | None:
        return self._by_coeffs.get(tuple(coeffs))

    def negative(self, alpha: Root) -> Root:
        return self._by_coeffs[tuple(-c for c in alpha.coeffs)]

    def functional(self, alpha: Root) -> np.ndarray:
        """Values of ``alpha`` on the Cartan basis."""
        return np.array([alpha(H) for H in self.a_basis])

    # -- fixed basis of g and coordinates --------------------------------------------

    @cached_property
    def basis(self) -> list[np.ndarray]:
        return list(self.a_basis) + [r.vector for r in self.roots]

    @cached_property
    def _basis_matrix(self) -> np.ndarray:
        return np.array([b.ravel() for b in self.basis]).T

    @cached_property
    def _coord_map(self) -> np.ndarray:
        return np.linalg.pinv(self._basis_matrix)

    def coords(self, X: np.ndarray) -> np.ndarray:
        return self._coord_map @ np.asarray(X).ravel()

    def from_coords(self, c: np.ndarray) -> np.ndarray:
        n = self.model.dim
        return (self._basis_matrix @ c).reshape(n, n)

    def ad_matrix(self, X: np.ndarray) -> np.ndarray:
        """Matrix of ``ad X`` on :attr:`basis`."""
        return np.array([self.coords(bracket(X, b)) for b in self.basis]).T

    def Ad_matrix(self, g: np.ndarray) -> np.ndarray:
        """Matrix of ``Ad g`` on :attr:`basis`."""
        gi = np.linalg.inv(g)
        return np.array([self.coords(g @ b @ gi) for b in self.basis]).T

    # -- Cartan subalgebra ------------------------------------------------------------

    def is_in_cartan(self, H: np.ndarray, tol=None) -> bool:
        tol = self.tol.membership_tol if tol is None else tol
        H = np.asarray(H)
        off = H - np.diag(np.diag(H))
        if np.linalg.norm(off) > tol * max(1.0, np.linalg.norm(H)):
            return False
        c, *_ = np.linalg.lstsq(np.array([np.diag(b) for b in self.a_basis]).T, np.diag(H), rcond=None)
        return np.linalg.norm(self.cartan_element(c) - H) <= tol * max(1.0, np.linalg.norm(H))

    def cartan_element(self, c) -> np.ndarray:
        n = self.model.dim
        return sum((ci * b for ci, b in zip(c, self.a_basis)), np.zeros((n, n)))

    def cartan_coords(self, H: np.ndarray) -> np.ndarray:
        A = np.array([np.diag(b) for b in self.a_basis]).T
        c, *_ = np.linalg.lstsq(A, np.diag(H), rcond=None)
        return c

    def simple_values(self, H: np.ndarray) -> np.ndarray:
        return np.array([a(H) for a in self.base])

    def _require_cartan(self, H):
        if not self.is_in_cartan(H):
            raise ModelError("element is not in the Cartan subalgebra a")

    def chamber_test(self, H: np.ndarray, closed: bool = False) -> bool:
        self._require_cartan(H)
        v = self.simple_values(H)
        tol = self.tol.membership_tol
        return bool(np.all(v >= -tol)) if closed else bool(np.all(v > tol))

    def facet_subset_of(self, H: np.ndarray) -> tuple:
        """Indices ``i`` of the simple roots with ``|alpha_i(H)| <= membership_tol``."""
        self._require_cartan(H)
        v = self.simple_values(H)
        return tuple(i for i, x in enumerate(v) if abs(x) <= self.tol.membership_tol)

    # -- root-space decomposition -----------------------------------------------------

    def root_space_project(self, X: np.ndarray) -> dict:
        """Split ``X`` into its ``g_0`` part (key ``"zero"``) and root-space parts.

        Only nonzero components are returned.
        """
        c = self.coords(X)
        r = len(self.a_basis)
        out = {}
        H = self.cartan_element(c[:r])
        if np.linalg.norm(H) > RANK_CUTOFF:
            out["zero"] = H
        for ci, alpha in zip(c[r:], self.roots):
            if abs(ci) > RANK_CUTOFF:
                out[alpha] = ci * alpha.vector
        return out

    def subset(self, I) -> "SubsetData":
        return build_subset(self, I)


def build_root_system(model: GroupModel, tol=DEFAULT_TOL) -> RootSystem:
    return RootSystem(model, tol)


def _span(mats, cutoff=RANK_CUTOFF) -> np.ndarray:
    """Orthonormal basis (columns) of the span of flattened matrices."""
    if not mats:
        return np.zeros((0, 0))
    A = np.array([m.ravel() for m in mats]).T
    return orth(A, rcond=cutoff) if np.any(A) else np.zeros((A.shape[0], 0))


def _unflatten(Q, n) -> list[np.ndarray]:
    return [Q[:, j].reshape(n, n) for j in range(Q.shape[1])]


def _intersect(Q1: np.ndarray, Q2: np.ndarray, cutoff=RANK_CUTOFF) -> np.ndarray:
    """Orthonormal basis of span(Q1) ∩ span(Q2) for orthonormal column sets."""
    if Q1.shape[1] == 0 or Q2.shape[1] == 0:
        return np.zeros((Q1.shape[0], 0))
    N = null_space(np.hstack([Q1, -Q2]), rcond=cutoff)
    if N.shape[1] == 0:
        return np.zeros((Q1.shape[0], 0))
    return orth(Q1 @ N[: Q1.shape[1]], rcond=cutoff)


@dataclass(frozen=True, eq=False)
class SubsetData:
    """Everything attached to a subset I of the base (indices into ``rs.base``)."""

    rs: RootSystem = field(repr=False)
    I: tuple
    a_I_basis: list
    aI_basis: list
    sigma_sup_I: list  # Σ^I
    sigma_I_plus: list  # Σ_I^+
    sigma_sup_I_plus: list  # Σ^{I,+}
    n_I_basis: list
    n_sup_I_basis: list
    k_I_basis: list
    M_elements: list

    @property
    def model(self) -> GroupModel:
        return self.rs.model

    @property
    def is_full(self) -> bool:
        return len(self.I) == self.rs.rank

    @cached_property
    def k_I_rotations(self) -> list[np.ndarray]:
        """Basis ``X_a - X_a^T`` (a in Σ^{I,+}) of k^I; each generator has period 2π."""
        return [a.vector - a.vector.T for a in self.sigma_sup_I_plus]

    @cached_property
    def d_I_basis(self) -> list[np.ndarray]:
        """Basis of the Lie algebra of D^I; m = 0 in the split models."""
        return list(self.k_I_basis) + list(self.n_I_basis)

    def split_cartan(self, H: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Killing-orthogonal split ``H = H_I + H^I`` with ``H_I`` in a_I, ``H^I`` in a^I."""
        basis = list(self.a_I_basis) + list(self.aI_basis)
        A = np.array([np.diag(b) for b in basis]).T
        c, *_ = np.linalg.lstsq(A, np.diag(H), rcond=None)
        k = len(self.a_I_basis)
        n = self.model.dim
        H_low = sum((ci * b for ci, b in zip(c[:k], basis[:k])), np.zeros((n, n)))
        H_up = sum((ci * b for ci, b in zip(c[k:], basis[k:])), np.zeros((n, n)))
        return H_low, H_up

    def project_n_sup(self, Y: np.ndarray) -> np.ndarray:
        """Component of ``Y`` along n^I in the root-space decomposition."""
        keep = set(self.sigma_sup_I_plus)
        comps = self.rs.root_space_project(Y)
        n = self.model.dim
        return sum((v for k, v in comps.items() if k in keep), np.zeros((n, n)))

    def integral_direction(self) -> np.ndarray:
        """Element ``H0`` of a_I with ``alpha(H0) = c > 0`` for every alpha outside I.

        ``c`` is the smallest positive integer making the diagonal of ``H0``
        integral, e.g. ``diag(1, 1, -2)`` for SL(3) and I = {alpha_12}.
        """
        rs = self.rs
        r = rs.rank
        F = np.array([rs.functional(a) for a in rs.base])  # rank x rank
        target = np.array([0.0 if i in self.I else 1.0 for i in range(r)])
        c = np.linalg.solve(F, target)
        H = rs.cartan_element(c)
        d = np.diag(H)
        for m in range(1, 1000):
            if np.allclose(m * d, np.rint(m * d), atol=1e-9):
                return np.diag(np.rint(m * d))
        return H


def _M_elements(model: GroupModel) -> list[np.ndarray]:
    out = []
    if model.family == "sl":
        for eps in itertools.product((1.0, -1.0), repeat=model.dim):
            if np.prod(eps) == 1.0:
                out.append(np.diag(eps))
    else:
        for eps in itertools.product((1.0, -1.0), repeat=model.size):
            if np.prod(eps) == 1.0:
                out.append(np.diag(list(eps) + list(eps[::-1])))
    return out


def build_subset(rs: RootSystem, I) -> SubsetData:
    """Build a_I, a^I, Σ^I, Σ_I^+, n_I, n^I, k^I and M for ``I`` (indices into Δ)."""
    I = tuple(sorted(set(int(i) for i in I)))
    r = rs.rank
    if any(i < 0 or i >= r for i in I):
        raise ValueError(f"I={I} is not a subset of the base (rank {r})")
    n = rs.model.dim
    # a_I as the joint kernel of I in Cartan coordinates
    F = np.array([rs.functional(rs.base[i]) for i in I]).reshape(len(I), r)
    ker = null_space(F, rcond=RANK_CUTOFF) if I else np.eye(r)
    a_I = [rs.cartan_element(v) for v in ker.T]
    # Killing-orthogonal complement inside a (trace form is a positive multiple)
    if a_I:
        cons = np.array([[np.trace(h @ b) for b in rs.a_basis] for h in a_I])
        comp = null_space(cons, rcond=RANK_CUTOFF)
    else:
        comp = np.eye(r)
    aI = [rs.cartan_element(v) for v in comp.T]

    in_I = lambda a: all(c == 0 for j, c in enumerate(a.coeffs) if j not in I)  # noqa: E731
    sigma_sup = [a for a in rs.roots if in_I(a)]
    sig_sup_plus = [a for a in sigma_sup if a.positive]
    sig_I_plus = [a for a in rs.positive_roots if not in_I(a)]

    # k^I = derived algebra of z_g(a_I), intersected with k
    if a_I:
        ads = np.vstack([rs.ad_matrix(H) for H in a_I])
        z = null_space(ads, rcond=RANK_CUTOFF)
    else:
        z = np.eye(len(rs.basis))
    z_mats = [rs.from_coords(v) for v in z.T]
    derived = [bracket(x, y) for x, y in itertools.combinations(z_mats, 2)]
    D = _span(derived)
    skew = [(_E(n, i, j) - _E(n, j, i)) for i, j in itertools.combinations(range(n), 2)]
    Kspan = _span(skew)
    kI = _unflatten(_intersect(D, Kspan), n) if D.shape[1] else []
    # sanity: k^I elements are in g and fixed by theta
    for X in kI:
        assert np.linalg.norm(cartan_involution(X) - X) < 1e-8

    return SubsetData(
        rs=rs,
        I=I,
        a_I_basis=a_I,
        aI_basis=aI,
        sigma_sup_I=sigma_sup,
        sigma_I_plus=sig_I_plus,
        sigma_sup_I_plus=sig_sup_plus,
        n_I_basis=[a.vector for a in sig_I_plus],
        n_sup_I_basis=[a.vector for a in sig_sup_plus],
        k_I_basis=kI,
        M_elements=_M_elements(rs.model),
    )
