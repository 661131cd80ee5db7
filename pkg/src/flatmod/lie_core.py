"""Root systems and representation-theoretic primitives.

Conventions used throughout the package:

* Weights are integer vectors in the basis of fundamental weights.
* The inner product on weights is the basic one (long roots of length^2 2)
  divided by ``2 * dual_coxeter``; under it the adjoint Casimir equals 1.
* A torus element is ``u * exp(C)``.  ``C`` is given by coordinates ``x`` in an
  orthonormal basis of the Cartan subalgebra.  Internally ``C`` is converted to
  simple-coroot coordinates ``v = L @ x`` where ``G = L L^T`` is the Cholesky
  factor of the weight Gram matrix, so that a weight ``m`` evaluates on ``C``
  as ``m . v``.  ``exp(C) = e`` exactly when ``v`` lies in ``2 pi Z^rank``.
"""
from __future__ import annotations

import cmath
import math
import os
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np

from .errors import (
    CutoffTooLarge,
    InvalidCenterElement,
    NearSingularElement,
    NonDominantWeight,
    UnsupportedGroup,
    WeylGroupTooLarge,
)

__all__ = [
    "RootSystem",
    "Weight",
    "HolonomySpec",
    "SUPPORTED_GROUPS",
    "build_root_system",
    "parse_group",
    "dimension",
    "casimir",
    "character",
    "central_character",
    "frobenius_schur",
    "enumerate_dominant_weights",
    "weyl_determinant_abs",
    "weight_multiplicities",
    "character_from_multiplicities",
    "fs_quadrature",
    "torus_average",
]

TOL_SINGULAR = 1e-8
MAX_WEYL_ORDER = 10**7
DEFAULT_WEIGHT_BUDGET = 4_000_000

SUPPORTED_GROUPS = (
    [("A", n) for n in range(1, 8)]
    + [("B", n) for n in range(2, 5)]
    + [("C", n) for n in range(2, 5)]
    + [("D", 4), ("G", 2)]
)

_CLASSICAL = {
    # family: (|W|, |positive roots|, dual Coxeter, #Z)
    "A": lambda n: (math.factorial(n + 1), n * (n + 1) // 2, n + 1, n + 1),
    "B": lambda n: (2**n * math.factorial(n), n * n, 2 * n - 1, 2),
    "C": lambda n: (2**n * math.factorial(n), n * n, n + 1, 2),
    "D": lambda n: (2 ** (n - 1) * math.factorial(n), n * (n - 1), 2 * n - 2, 4 if n % 2 == 0 else 4),
    "G": lambda n: (12, 6, 4, 1),
}


# --------------------------------------------------------------------------
# small exact linear algebra


def _frac_inverse(m: Sequence[Sequence[Fraction]]) -> list[list[Fraction]]:
    n = len(m)
    a = [[Fraction(x) for x in row] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(m)]
    for col in range(n):
        piv = next(r for r in range(col, n) if a[r][col] != 0)
        a[col], a[piv] = a[piv], a[col]
        p = a[col][col]
        a[col] = [x / p for x in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [row[n:] for row in a]


def _frac_det(m: Sequence[Sequence[Fraction]]) -> Fraction:
    n = len(m)
    a = [[Fraction(x) for x in row] for row in m]
    det = Fraction(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            a[col], a[piv] = a[piv], a[col]
            det = -det
        det *= a[col][col]
        for r in range(col + 1, n):
            f = a[r][col] / a[col][col]
            a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return det


def _matvec(m, v):
    return [sum((a * b for a, b in zip(row, v)), Fraction(0)) for row in m]


def _dot(u, v) -> Fraction:
    return sum((Fraction(a) * b for a, b in zip(u, v)), Fraction(0))


def _quad(g, u, v) -> Fraction:
    return _dot(u, _matvec(g, v))


# --------------------------------------------------------------------------
# data types


@dataclass(frozen=True)
class Weight:
    """Dominant integral weight in fundamental-weight coordinates."""

    coords: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(int(c) for c in self.coords))

    @property
    def is_dominant(self) -> bool:
        return all(c >= 0 for c in self.coords)

    @classmethod
    def parse(cls, text: str) -> "Weight":
        return cls(tuple(int(s) for s in text.split(",") if s.strip()))

    def __str__(self) -> str:
        return ",".join(map(str, self.coords))


@dataclass(frozen=True)
class HolonomySpec:
    """Boundary datum ``c = u * exp(C)``.

    ``central_part`` indexes ``RootSystem.center_elements``; ``torus_coords``
    are the orthonormal coordinates of ``C`` (all zeros for a central element).
    """

    central_part: int = 0
    torus_coords: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "torus_coords", tuple(float(x) for x in self.torus_coords))

    @property
    def is_central(self) -> bool:
        return all(x == 0.0 for x in self.torus_coords)

    @classmethod
    def central(cls, u: int = 0, rank: int = 1) -> "HolonomySpec":
        return cls(u, (0.0,) * rank)

    @classmethod
    def parse(cls, text: str, rank: int) -> "HolonomySpec":
        """Parse ``"e"``, ``"1"`` (center index), ``"x1,x2"`` or ``"1@x1,x2"``."""
        text = text.strip()
        if "@" in text:
            u_txt, c_txt = text.split("@", 1)
        elif "," in text or "." in text:
            u_txt, c_txt = "e", text
        else:
            u_txt, c_txt = text, ""
        u = 0 if u_txt.strip() in ("e", "") else int(u_txt)
        coords = tuple(float(s) for s in c_txt.split(",") if s.strip()) or (0.0,) * rank
        if len(coords) != rank:
            raise ValueError(f"expected {rank} torus coordinates, got {len(coords)}")
        return cls(u, coords)

    def to_json(self) -> dict:
        return {"center": self.central_part, "torus_coords": list(self.torus_coords)}

    @classmethod
    def from_json(cls, doc: dict, rank: int) -> "HolonomySpec":
        coords = doc.get("torus_coords") or [0.0] * rank
        return cls(int(doc.get("center", 0)), tuple(coords))


@dataclass(frozen=True, eq=False)
class RootSystem:
    """Immutable Lie-theoretic context for one simple simply connected group."""

    family: str
    rank: int
    simple_roots: tuple[tuple[Fraction, ...], ...]
    fundamental_weights: tuple[tuple[Fraction, ...], ...]
    cartan: np.ndarray = field(repr=False)
    positive_roots: tuple[tuple[int, ...], ...] = field(repr=False)
    positive_roots_in_roots: tuple[tuple[int, ...], ...] = field(repr=False)
    positive_coroots: tuple[tuple[int, ...], ...] = field(repr=False)
    rho: tuple[int, ...] = field(repr=False)
    gram_killing: tuple[tuple[Fraction, ...], ...] = field(repr=False)
    weyl_group: np.ndarray = field(repr=False)
    weyl_signs: np.ndarray = field(repr=False)
    dual_coxeter: int = 0
    center_order: int = 1
    center_generators: tuple[tuple[int, ...], ...] = ()
    center_elements: tuple[tuple[int, ...], ...] = ()
    rho_norm_sq: Fraction = Fraction(0)

    @property
    def name(self) -> str:
        return f"{self.family}{self.rank}"

    @property
    def dim(self) -> int:
        return self.rank + 2 * len(self.positive_roots)

    @property
    def n_positive(self) -> int:
        return len(self.positive_roots)

    @property
    def weyl_order(self) -> int:
        return len(self.weyl_group)

    def __repr__(self) -> str:
        return f"RootSystem({self.name})"

    def inner(self, a: Sequence, b: Sequence) -> Fraction:
        """Killing-normalized inner product of two weights (weight coords)."""
        return _quad(self.gram_killing, a, b)

    @cached_property
    def cartan_inverse(self) -> list[list[Fraction]]:
        return _frac_inverse([[Fraction(int(x)) for x in row] for row in self.cartan])

    def root_coords(self, weight: Sequence[int]) -> list[Fraction]:
        """Coordinates of a weight in the simple-root basis."""
        return _matvec([list(col) for col in zip(*self.cartan_inverse)], weight)

    @cached_property
    def highest_root(self) -> tuple[int, ...]:
        heights = [sum(r) for r in self.positive_roots_in_roots]
        return self.positive_roots[int(np.argmax(heights))]

    @cached_property
    def minus_w0(self) -> np.ndarray:
        """Integer matrix of ``-w0`` acting on weight coordinates."""
        rho = np.asarray(self.rho)
        for w in self.weyl_group:
            if np.array_equal(w @ rho, -rho):
                return -w
        raise AssertionError("longest element not found")

    @cached_property
    def two_rho_check(self) -> np.ndarray:
        """Simple-coroot coordinates of the sum of positive coroots."""
        return np.sum(np.asarray(self.positive_coroots, dtype=np.int64), axis=0)

    # float views used by the numerical engines
    @cached_property
    def gram_float(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.gram_killing])

    @cached_property
    def chol(self) -> np.ndarray:
        return np.linalg.cholesky(self.gram_float)

    @cached_property
    def coroot_gram(self) -> list[list[Fraction]]:
        """Killing Gram matrix of the simple coroots (inverse of ``gram_killing``)."""
        return _frac_inverse(self.gram_killing)

    def coroot_coords(self, torus_coords: Sequence[float]) -> np.ndarray:
        x = np.asarray(torus_coords, dtype=float)
        return self.chol @ x

    def torus_coords_from_coroot(self, v: Sequence[float]) -> np.ndarray:
        return np.linalg.solve(self.chol, np.asarray(v, dtype=float))

    def orthonormal(self, weights) -> np.ndarray:
        """Orthonormal coordinates of weights given row-wise in weight coords."""
        return np.asarray(weights, dtype=float) @ self.chol

    @cached_property
    def weyl_group_orthonormal(self) -> np.ndarray:
        """Weyl group acting on orthonormal torus coordinates."""
        lt = self.chol.T
        lt_inv = np.linalg.inv(lt)
        return np.einsum("ij,wjk,kl->wil", lt, self.weyl_group.astype(float), lt_inv)

    def center_coroot(self, u: int) -> np.ndarray:
        """Simple-coroot coordinates ``v`` of the central element ``u``."""
        k = self._center(u)
        ainv = np.array([[float(x) for x in row] for row in self.cartan_inverse])
        return 2 * math.pi * (ainv @ np.asarray(k, dtype=float))

    def center_product(self, a: int, b: int) -> int:
        ka, kb = self._center(a), self._center(b)
        s = [x + y for x, y in zip(ka, kb)]
        for idx, k in enumerate(self.center_elements):
            if self._in_coroot_lattice([x - y for x, y in zip(s, k)]):
                return idx
        raise AssertionError("center not closed")

    def _center(self, u: int) -> tuple[int, ...]:
        if not isinstance(u, (int, np.integer)) or not 0 <= u < self.center_order:
            raise InvalidCenterElement(f"{self.name} has {self.center_order} central elements; got {u!r}")
        return self.center_elements[u]

    def _in_coroot_lattice(self, k: Sequence[int]) -> bool:
        return all(x.denominator == 1 for x in _matvec(self.cartan_inverse, k))

    def torus_distance(self, h: HolonomySpec) -> float:
        """Killing distance from ``u * exp(C)`` to the identity within the torus."""
        v = self.center_coroot(h.central_part) + self.coroot_coords(h.torus_coords)
        ginv = np.array([[float(x) for x in row] for row in self.coroot_gram])
        base = np.round(v / (2 * math.pi))
        best = math.inf
        for shift in np.ndindex(*(3,) * self.rank):
            z = base + np.asarray(shift) - 1
            d = v - 2 * math.pi * z
            best = min(best, float(d @ ginv @ d))
        return math.sqrt(best)


# --------------------------------------------------------------------------
# construction


def _ambient_simple_roots(family: str, n: int) -> list[list[int]]:
    def e(i, dim):
        v = [0] * dim
        v[i] = 1
        return v

    def sub(a, b):
        return [x - y for x, y in zip(a, b)]

    if family == "A":
        d = n + 1
        return [sub(e(i, d), e(i + 1, d)) for i in range(n)]
    if family in "BCD":
        roots = [sub(e(i, n), e(i + 1, n)) for i in range(n - 1)]
        if family == "B":
            roots.append(e(n - 1, n))
        elif family == "C":
            roots.append([2 * x for x in e(n - 1, n)])
        else:
            roots.append([x + y for x, y in zip(e(n - 2, n), e(n - 1, n))])
        return roots
    if family == "G":
        return [[1, -1, 0], [-2, 1, 1]]
    raise UnsupportedGroup(family)


def _center_generator_coweights(family: str, n: int) -> list[tuple[int, ...]]:
    def unit(i):
        return tuple(int(j == i) for j in range(n))

    if family == "A":
        return [unit(n - 1)]
    if family == "B":
        return [unit(0)]
    if family == "C":
        return [unit(n - 1)]
    if family == "D":
        return [unit(n - 2), unit(n - 1)]
    return []


def _weyl_closure(generators: list[np.ndarray], expected: int) -> tuple[np.ndarray, np.ndarray]:
    r = generators[0].shape[0]
    ident = np.eye(r, dtype=np.int64)
    seen = {ident.tobytes()}
    elements = [ident]
    queue = deque([ident])
    while queue:
        w = queue.popleft()
        for s in generators:
            sw = s @ w
            key = sw.tobytes()
            if key not in seen:
                seen.add(key)
                elements.append(sw)
                queue.append(sw)
                if len(elements) > expected:
                    raise AssertionError("Weyl group larger than classical order")
    group = np.stack(elements)
    signs = np.rint(np.linalg.det(group.astype(float))).astype(np.int64)
    return group, signs


def parse_group(spec: str) -> tuple[str, int]:
    spec = spec.strip().upper()
    if len(spec) < 2 or spec[0] not in _CLASSICAL or not spec[1:].isdigit():
        raise UnsupportedGroup(f"unknown group spec {spec!r}")
    family, rank = spec[0], int(spec[1:])
    if (family, rank) not in SUPPORTED_GROUPS:
        raise UnsupportedGroup(f"{spec} is outside the supported set")
    return family, rank


@lru_cache(maxsize=None)
def build_root_system(family: str, rank: int | None = None) -> RootSystem:
    """Construct the root system of a supported simple group.

    ``build_root_system("A", 2)`` and ``build_root_system("A2")`` are equivalent.
    """
    if rank is None:
        family, rank = parse_group(family)
    family = family.upper()
    if (family, rank) not in SUPPORTED_GROUPS:
        raise UnsupportedGroup(f"{family}{rank} is outside the supported set")
    w_order, n_pos, h_dual, z_order = _CLASSICAL[family](rank)
    if w_order > MAX_WEYL_ORDER:
        raise WeylGroupTooLarge(f"|W({family}{rank})| = {w_order}")

    amb = _ambient_simple_roots(family, rank)
    raw = [[Fraction(sum(a * b for a, b in zip(x, y))) for y in amb] for x in amb]
    scale = Fraction(2) / max(raw[i][i] for i in range(rank))
    sroot = [[x * scale for x in row] for row in raw]  # basic inner products of simple roots
    cartan = np.array([[int(2 * sroot[i][j] / sroot[j][j]) for j in range(rank)] for i in range(rank)], dtype=np.int64)
    assert all(2 * sroot[i][j] / sroot[j][j] == cartan[i, j] for i in range(rank) for j in range(rank))

    a_inv = _frac_inverse([[Fraction(int(x)) for x in row] for row in cartan])
    # (omega_i, omega_j) = (A^-1 S A^-T)_ij
    tmp = [[sum((a_inv[i][k] * sroot[k][j] for k in range(rank)), Fraction(0)) for j in range(rank)] for i in range(rank)]
    gram_basic = [[sum((tmp[i][k] * a_inv[j][k] for k in range(rank)), Fraction(0)) for j in range(rank)] for i in range(rank)]
    gram_k = tuple(tuple(x / (2 * h_dual) for x in row) for row in gram_basic)

    gens = []
    for i in range(rank):
        m = np.eye(rank, dtype=np.int64)
        m[:, i] -= cartan[i, :]
        gens.append(m)
    weyl, signs = _weyl_closure(gens, w_order)

    simple_w = cartan  # row i = alpha_i in weight coords
    orbit = np.einsum("wij,kj->wki", weyl, simple_w).reshape(-1, rank)
    roots = np.unique(orbit, axis=0)
    a_inv_t = [list(col) for col in zip(*a_inv)]
    positive, positive_rc = [], []
    for r in roots:
        rc = _matvec(a_inv_t, [int(x) for x in r])
        assert all(x.denominator == 1 for x in rc)
        if all(x >= 0 for x in rc):
            positive.append(tuple(int(x) for x in r))
            positive_rc.append(tuple(int(x) for x in rc))
    order = sorted(range(len(positive)), key=lambda i: (sum(positive_rc[i]), positive_rc[i][::-1]))
    positive = [positive[i] for i in order]
    positive_rc = [positive_rc[i] for i in order]

    coroots = []
    for rc in positive_rc:
        norm = _quad(sroot, rc, rc)
        cc = [Fraction(c) * sroot[j][j] / norm for j, c in enumerate(rc)]
        assert all(x.denominator == 1 for x in cc)
        coroots.append(tuple(int(x) for x in cc))

    fundamental = tuple(
        tuple(sum((a_inv[i][j] * amb[j][k] for j in range(rank)), Fraction(0)) for k in range(len(amb[0])))
        for i in range(rank)
    )
    rho = (1,) * rank

    gen_cw = _center_generator_coweights(family, rank)
    center = [tuple([0] * rank)]

    def in_qcheck(k):
        return all(x.denominator == 1 for x in _matvec(a_inv, k))

    for g in gen_cw:
        extended = list(center)
        m = 1
        while not in_qcheck([m * x for x in g]):
            for base in center:
                cand = tuple(b + m * x for b, x in zip(base, g))
                if not any(in_qcheck([a - b for a, b in zip(cand, k)]) for k in extended):
                    extended.append(cand)
            m += 1
        center = extended

    rs = RootSystem(
        family=family,
        rank=rank,
        simple_roots=tuple(tuple(Fraction(x) for x in r) for r in amb),
        fundamental_weights=fundamental,
        cartan=cartan,
        positive_roots=tuple(positive),
        positive_roots_in_roots=tuple(positive_rc),
        positive_coroots=tuple(coroots),
        rho=rho,
        gram_killing=gram_k,
        weyl_group=weyl,
        weyl_signs=signs,
        dual_coxeter=h_dual,
        center_order=len(center),
        center_generators=tuple(gen_cw),
        center_elements=tuple(center),
        rho_norm_sq=_quad(gram_k, rho, rho),
    )
    for arr in (cartan, weyl, signs):
        arr.setflags(write=False)
    _check_invariants(rs, w_order, n_pos, z_order)
    return rs


def _check_invariants(rs: RootSystem, w_order: int, n_pos: int, z_order: int) -> None:
    assert rs.weyl_order == w_order, (rs.name, rs.weyl_order)
    assert rs.n_positive == n_pos, (rs.name, rs.n_positive)
    assert rs.center_order == z_order, (rs.name, rs.center_order)
    half_sum = [Fraction(sum(r[i] for r in rs.positive_roots), 2) for i in range(rs.rank)]
    assert half_sum == [Fraction(1)] * rs.rank
    theta = rs.highest_root
    assert rs.inner(theta, [t + 2 for t in theta]) == 1
    np.linalg.cholesky(rs.gram_float)


# --------------------------------------------------------------------------
# representation theory


def _check_dominant(lam: Weight, rs: RootSystem) -> None:
    if len(lam.coords) != rs.rank:
        raise NonDominantWeight(f"weight {lam} has wrong length for {rs.name}")
    if not lam.is_dominant:
        raise NonDominantWeight(f"weight {lam} is not dominant")


def dimension(rs: RootSystem, lam: Weight) -> int:
    """Weyl dimension formula, exact."""
    _check_dominant(lam, rs)
    num = den = 1
    for cc in rs.positive_coroots:
        num *= sum((l + 1) * c for l, c in zip(lam.coords, cc))
        den *= sum(cc)
    assert num % den == 0
    return num // den


def casimir(rs: RootSystem, lam: Weight) -> Fraction:
    """``|lam + rho|^2 - |rho|^2`` in Killing normalization, exact."""
    _check_dominant(lam, rs)
    shifted = [l + 1 for l in lam.coords]
    return rs.inner(shifted, shifted) - rs.rho_norm_sq


def central_character(rs: RootSystem, lam: Weight, u: int) -> complex:
    """Scalar by which the central element ``u`` acts in representation ``lam``."""
    k = rs._center(u)
    return cmath.exp(2j * math.pi * float(_central_phase(rs, lam.coords, k)))


def _central_phase(rs: RootSystem, coords, k) -> Fraction:
    pairing = _dot(coords, _matvec(rs.cartan_inverse, k))
    return pairing - math.floor(pairing)


def character(rs: RootSystem, lam: Weight, h: HolonomySpec) -> complex:
    """Character of ``lam`` at ``u * exp(C)``.

    Central elements use ``d_lam * Lambda_lam(u)``; regular ones use the Weyl
    character formula.  Non-central points with a Weyl denominator below
    ``TOL_SINGULAR`` raise ``NearSingularElement``.
    """
    _check_dominant(lam, rs)
    lam_u = central_character(rs, lam, h.central_part)
    if h.is_central:
        return dimension(rs, lam) * lam_u
    v = rs.coroot_coords(h.torus_coords)
    num, den = _weyl_alternants(rs, np.asarray(lam.coords) + 1, v)
    if abs(den) < TOL_SINGULAR:
        raise NearSingularElement(f"|Weyl denominator| = {abs(den):.3g} at {h.torus_coords}")
    return lam_u * num / den


def _weyl_alternants(rs: RootSystem, shifted: np.ndarray, v: np.ndarray) -> tuple[complex, complex]:
    rot = rs.weyl_group.transpose(0, 2, 1) @ v  # (|W|, r): w^T v
    num = np.sum(rs.weyl_signs * np.exp(1j * (rot @ shifted)))
    den = np.sum(rs.weyl_signs * np.exp(1j * (rot @ np.asarray(rs.rho))))
    return complex(num), complex(den)


def weyl_determinant_abs(rs: RootSystem, h: HolonomySpec) -> float:
    """``|j(c)| = prod_{alpha > 0} |2 sin(alpha(C) / 2)|``."""
    if h.is_central:
        return 0.0
    v = rs.coroot_coords(h.torus_coords)
    angles = np.asarray(rs.positive_roots, dtype=float) @ v
    return float(np.prod(np.abs(2 * np.sin(angles / 2))))


def frobenius_schur(rs: RootSystem, lam: Weight) -> int:
    """+1 real, -1 quaternionic, 0 complex."""
    _check_dominant(lam, rs)
    coords = np.asarray(lam.coords, dtype=np.int64)
    if not np.array_equal(rs.minus_w0 @ coords, coords):
        return 0
    return -1 if int(coords @ rs.two_rho_check) % 2 else 1


# --------------------------------------------------------------------------
# enumeration


def weight_budget() -> int:
    return int(os.environ.get("FLATMOD_WEIGHT_BUDGET", DEFAULT_WEIGHT_BUDGET))


@lru_cache(maxsize=None)
def _scaled_gram(rs: RootSystem) -> tuple[np.ndarray, int]:
    den = math.lcm(*(x.denominator for row in rs.gram_killing for x in row))
    gi = np.array([[int(x * den) for x in row] for row in rs.gram_killing], dtype=np.int64)
    assert (gi >= 0).all()
    return gi, den


@dataclass(frozen=True)
class WeightTable:
    """All dominant weights with Casimir <= cutoff, sorted by (Casimir, coords)."""

    coords: np.ndarray  # (N, rank) int64
    casimir_num: np.ndarray  # Casimir * denom, int64
    denom: int

    def __len__(self) -> int:
        return len(self.coords)

    @property
    def casimir(self) -> np.ndarray:
        return self.casimir_num / self.denom

    def upto(self, cutoff: Fraction) -> "WeightTable":
        bound = math.floor(Fraction(cutoff) * self.denom)
        k = int(np.searchsorted(self.casimir_num, bound, side="right"))
        return WeightTable(self.coords[:k], self.casimir_num[:k], self.denom)


def weight_table(rs: RootSystem, cutoff) -> WeightTable:
    cutoff = Fraction(cutoff)
    if cutoff < 0:
        raise ValueError("cutoff must be >= 0")
    cached = _TABLE_CACHE.get(rs.name)
    if cached is not None and cached[0] >= cutoff:
        return cached[1].upto(cutoff)
    table = _enumerate(rs, cutoff)
    _TABLE_CACHE[rs.name] = (cutoff, table)
    return table


_TABLE_CACHE: dict[str, tuple[Fraction, WeightTable]] = {}


def _enumerate(rs: RootSystem, cutoff: Fraction) -> WeightTable:
    gi, den = _scaled_gram(rs)
    r = rs.rank
    rho_q = int(np.ones(r, dtype=np.int64) @ gi @ np.ones(r, dtype=np.int64))
    bound = math.floor(cutoff * den) + rho_q  # n^T gi n <= bound with n = lam + 1 >= 1
    budget = weight_budget()
    chunks: list[np.ndarray] = []
    count = 0

    def rec(prefix: list[int]):
        nonlocal count
        k = len(prefix)
        p = np.asarray(prefix, dtype=np.int64)
        q = int(p @ gi[:k, :k] @ p) if k else 0
        if k == r - 1:
            a = int(gi[k, k])
            b = int(p @ gi[:k, k]) if k else 0
            # a n^2 + 2 b n + q <= bound
            disc = b * b - a * (q - bound)
            if disc < 0:
                return
            hi = (math.isqrt(disc) - b) // a
            while a * hi * hi + 2 * b * hi + q > bound:
                hi -= 1
            if hi < 1:
                return
            count += hi
            if count > budget:
                raise CutoffTooLarge(f"more than {budget} weights below Casimir {cutoff}")
            last = np.arange(1, hi + 1, dtype=np.int64)
            block = np.empty((hi, r), dtype=np.int64)
            block[:, :k] = p
            block[:, k] = last
            chunks.append(block)
            return
        n = 1
        while True:
            trial = prefix + [n]
            t = np.asarray(trial + [1] * (r - k - 1), dtype=np.int64)
            if int(t @ gi @ t) > bound:
                break
            rec(trial)
            n += 1

    rec([])
    n_all = np.concatenate(chunks) if chunks else np.empty((0, r), dtype=np.int64)
    cas = np.einsum("ni,ij,nj->n", n_all, gi, n_all) - rho_q
    coords = n_all - 1
    order = np.lexsort(tuple(coords[:, i] for i in range(r - 1, -1, -1)) + (cas,))
    coords, cas = coords[order], cas[order]
    coords.setflags(write=False)
    cas.setflags(write=False)
    return WeightTable(coords, cas, den)


def enumerate_dominant_weights(rs: RootSystem, casimir_cutoff) -> list[Weight]:
    """Dominant weights with Casimir <= cutoff, ordered by (Casimir, coords)."""
    table = weight_table(rs, casimir_cutoff)
    return [Weight(tuple(int(x) for x in row)) for row in table.coords]


# --------------------------------------------------------------------------
# oracles: weight multiplicities and torus quadrature


def _dominant_conjugate(rs: RootSystem, mu: tuple[int, ...]) -> tuple[int, ...]:
    mu = list(mu)
    while True:
        i = next((j for j, c in enumerate(mu) if c < 0), None)
        if i is None:
            return tuple(mu)
        c = mu[i]
        mu = [m - c * int(a) for m, a in zip(mu, rs.cartan[i])]


@lru_cache(maxsize=256)
def _multiplicities(rs: RootSystem, coords: tuple[int, ...]) -> dict[tuple[int, ...], int]:
    gi, _ = _scaled_gram(rs)
    lam = np.asarray(coords, dtype=np.int64)
    simple = [tuple(int(x) for x in row) for row in rs.cartan]
    pos = [np.asarray(a, dtype=np.int64) for a in rs.positive_roots]

    def is_weight(mu):
        dom = _dominant_conjugate(rs, mu)
        diff = [a - b for a, b in zip(coords, dom)]
        rc = rs.root_coords(diff)
        return all(x.denominator == 1 and x >= 0 for x in rc)

    depth = {coords: 0}
    layers = [[coords]]
    while layers[-1]:
        nxt = []
        for nu in layers[-1]:
            for a in simple:
                mu = tuple(x - y for x, y in zip(nu, a))
                if mu not in depth and is_weight(mu):
                    depth[mu] = len(layers)
                    nxt.append(mu)
        layers.append(nxt)

    def q(u, v):
        return int(np.asarray(u) @ gi @ np.asarray(v))

    top = q(lam + 1, lam + 1)
    mult = {coords: 1}
    for layer in layers[1:]:
        for mu in layer:
            m = np.asarray(mu, dtype=np.int64)
            acc = 0
            for a in pos:
                k = 1
                while True:
                    nu = tuple(int(x) for x in m + k * a)
                    if nu not in mult:
                        if nu not in depth:
                            break
                        k += 1
                        continue
                    acc += q(m + k * a, a) * mult[nu]
                    k += 1
            denom = top - q(m + 1, m + 1)
            value = Fraction(2 * acc, denom)
            assert value.denominator == 1 and value >= 0
            if value:
                mult[mu] = int(value)
    return mult


def weight_multiplicities(rs: RootSystem, lam: Weight) -> dict[tuple[int, ...], int]:
    """Freudenthal multiplicities of every weight of ``lam``."""
    _check_dominant(lam, rs)
    return dict(_multiplicities(rs, lam.coords))


def character_from_multiplicities(rs: RootSystem, lam: Weight, v: np.ndarray) -> np.ndarray:
    """``sum_mu mult(mu) exp(i mu . v)`` for coroot coordinates ``v`` of shape (..., rank)."""
    mult = weight_multiplicities(rs, lam)
    mus = np.array(list(mult.keys()), dtype=float)
    ms = np.array(list(mult.values()), dtype=float)
    return np.exp(1j * (np.asarray(v) @ mus.T)) @ ms


def _torus_grid(rs: RootSystem, n: int) -> np.ndarray:
    # irrational offsets keep the grid off the root hyperplanes; any offset
    # integrates trigonometric polynomials of degree < n exactly
    offsets = np.array([0.5 * (math.sqrt(5) - 1), math.sqrt(2) - 1, math.pi - 3, math.e - 2][: rs.rank])
    axes = [(np.arange(n) + o) / n for o in offsets]
    mesh = np.meshgrid(*axes, indexing="ij")
    return 2 * math.pi * np.stack([m.ravel() for m in mesh], axis=-1)


def _weyl_density(rs: RootSystem, v: np.ndarray) -> np.ndarray:
    angles = v @ np.asarray(rs.positive_roots, dtype=float).T
    return np.prod(np.abs(2 * np.sin(angles / 2)) ** 2, axis=-1) / rs.weyl_order


def torus_average(rs: RootSystem, func, n: int) -> complex:
    """Weyl-integration of a class function: ``(1/|W|) avg_T |j|^2 func``.

    ``func`` receives coroot coordinates of shape (n^rank, rank).
    """
    v = _torus_grid(rs, n)
    return complex(np.mean(_weyl_density(rs, v) * func(v)))


def fs_quadrature(rs: RootSystem, lam: Weight) -> float:
    """``int_G chi_lam(g^2) dg`` by exact torus quadrature."""
    mult = weight_multiplicities(rs, lam)
    span = max(max(abs(c) for c in mu) for mu in mult)
    root_span = int(np.abs(np.asarray(rs.positive_roots)).sum(axis=0).max())
    n = 2 * (2 * span + root_span) + 3
    val = torus_average(rs, lambda v: character_from_multiplicities(rs, lam, 2 * v), n)
    return val.real
