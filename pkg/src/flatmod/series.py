"""Regularized evaluation of the character series for moduli of flat bundles.

For a surface with genus ``g`` and boundary holonomies ``c_1..c_s`` the series is

    sum_lam  prod_j chi_lam(c_j) / d_lam^(2g-2+s) * p(lam + rho) * exp(-t p_c(lam))

and for the closed non-orientable presentations it is
``sum_lam f_lam Lambda_lam(u) / d_lam^E * p(lam + rho) * exp(-t p_c(lam))``.

Limits ``t -> 0`` are taken by least-squares extrapolation of the Gaussian
regularization; the ``c -> u`` limit extrapolates those values in ``|C|``.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import DivergentAtZeroT, ExtrapolationUnstable
from .lie_core import (
    HolonomySpec,
    RootSystem,
    WeightTable,
    weight_table,
    weyl_determinant_abs,
)
from .polynomial import InvariantPolynomial

__all__ = [
    "SurfaceTopology",
    "SeriesResult",
    "VanishingReport",
    "moduli_series",
    "regularized_limit",
    "c_to_u_limit",
    "group_and_torus_volumes",
    "heat_trace_volume",
    "closed_form_group_volume",
    "torus_volume",
    "assembled_invariant",
    "moduli_volume",
    "vanishing_check",
    "boundary_derivative",
    "default_c_schedule",
    "series_document",
    "schedule_csv",
]

CLOSED_FORM = "closed-form"
HOLONOMY = "holonomy"
CHUNK = 1 << 15
EXP_CUT = math.log(1e14)


# --------------------------------------------------------------------------
# topology


@dataclass(frozen=True)
class SurfaceTopology:
    """Surface type plus boundary/center data.

    Orientable: ``genus`` is g and ``boundaries`` lists the boundary holonomies
    (a closed surface with central element u is one central boundary).
    Non-orientable: ``genus`` is k, ``case`` is ``"i"`` (relator ending in
    ``eps^2``) or ``"ii"`` (``z eps z^-1 eps``) and ``center`` is u.
    """

    genus: int
    boundaries: tuple[HolonomySpec, ...] = ()
    orientable: bool = True
    case: str | None = None
    center: int = 0

    def __post_init__(self):
        if self.genus < 0:
            raise ValueError("genus must be >= 0")
        if self.orientable:
            if self.case is not None:
                raise ValueError("case applies to non-orientable surfaces only")
        else:
            if self.case not in ("i", "ii"):
                raise ValueError("non-orientable case must be 'i' or 'ii'")
            if self.boundaries:
                raise ValueError("non-orientable surfaces with boundary are not supported")
            if self.genus < 1:
                raise ValueError("non-orientable presentations need k >= 1")

    @classmethod
    def closed(cls, genus: int, u: int = 0, rank: int = 1) -> "SurfaceTopology":
        return cls(genus, (HolonomySpec.central(u, rank),))

    @classmethod
    def with_boundaries(cls, genus: int, boundaries: Sequence[HolonomySpec]) -> "SurfaceTopology":
        return cls(genus, tuple(boundaries))

    @classmethod
    def nonorientable(cls, k: int, case: str, u: int = 0) -> "SurfaceTopology":
        return cls(k, (), orientable=False, case=case, center=u)

    @property
    def s(self) -> int:
        return len(self.boundaries)

    @property
    def s_central(self) -> int:
        return sum(b.is_central for b in self.boundaries)

    @property
    def s_generic(self) -> int:
        return self.s - self.s_central

    def exponent(self, convention: str = CLOSED_FORM) -> int:
        """Power of ``d_lam`` in the denominator."""
        if self.orientable:
            return 2 * self.genus - 2 + self.s
        k = self.genus
        if self.case == "i":
            return 2 * k - 2 if convention == CLOSED_FORM else 2 * k - 1
        return 2 * k

    def real_dimension(self, rs: RootSystem) -> int:
        if self.orientable:
            stab = sum(rs.dim if b.is_central else rs.rank for b in self.boundaries)
            return (2 * self.genus + self.s - 2) * rs.dim - stab
        return (2 * self.genus - 1) * rs.dim if self.case == "i" else 2 * self.genus * rs.dim

    def vanishing_bound(self, rs: RootSystem) -> int | None:
        """Degree above which intersection numbers vanish (orientable only)."""
        if not self.orientable:
            return None
        return rs.n_positive * (2 * self.genus - 2 + self.s_generic)

    def to_json(self) -> dict:
        if self.orientable:
            return {
                "orientable": True,
                "genus": self.genus,
                "boundaries": [b.to_json() for b in self.boundaries],
            }
        return {"orientable": False, "k": self.genus, "case": self.case, "center": self.center}


# --------------------------------------------------------------------------
# results


@dataclass
class SeriesResult:
    value: float
    tail_bound: float
    schedule_values: list[tuple[float, float]] = field(default_factory=list)
    extrapolated: float | None = None
    residual: float | None = None
    fit_residuals: list[float] = field(default_factory=list)
    weight_count: int = 0
    converged: bool = False
    model: list[str] = field(default_factory=list)


@dataclass
class VanishingReport:
    expected_zero: bool
    achieved: float
    bound: int | None
    degree: int
    violation: bool


# --------------------------------------------------------------------------
# term evaluation


def _log_dims(rs: RootSystem, n: np.ndarray) -> np.ndarray:
    cc = np.asarray(rs.positive_coroots, dtype=n.dtype)
    return np.sum(np.log(n @ cc.T) - np.log(cc.sum(axis=1)), axis=1)


def _central_phase(rs: RootSystem, coords: np.ndarray, u: int) -> np.ndarray:
    k = rs._center(u)
    vec = [sum((rs.cartan_inverse[i][j] * k[j] for j in range(rs.rank)), Fraction(0)) for i in range(rs.rank)]
    den = math.lcm(*(x.denominator for x in vec))
    num = np.array([int(x * den) for x in vec], dtype=np.int64)
    return np.exp(2j * math.pi * ((coords @ num) % den) / den)


def _weyl_character_ratio(rs: RootSystem, n: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Weyl numerator / denominator for shifted weights ``n`` (rows) at coroot coords ``v``."""
    rot = rs.weyl_group.transpose(0, 2, 1) @ np.asarray(v, dtype=n.dtype)
    den = np.sum(rs.weyl_signs * np.exp(1j * (rot @ np.asarray(rs.rho, dtype=n.dtype))))
    num = np.exp(1j * (n @ rot.T)) @ rs.weyl_signs.astype(den.dtype)
    return num / den


def _fs_indicator(rs: RootSystem, coords: np.ndarray) -> np.ndarray:
    self_dual = np.all(coords @ rs.minus_w0.T == coords, axis=1)
    sign = 1 - 2 * ((coords @ rs.two_rho_check) % 2)
    return np.where(self_dual, sign, 0).astype(float)


@dataclass(frozen=True)
class _Plan:
    """Everything needed to turn a block of weights into series terms."""

    rs: RootSystem
    topo: SurfaceTopology
    poly: InvariantPolynomial
    convention: str

    @property
    def dim_exponent(self) -> int:
        # exponent of d after absorbing chi(u) = d * Lambda(u) at central boundaries
        return self.topo.exponent(self.convention) - self.topo.s_central

    def weights(self, coords: np.ndarray, n: np.ndarray | None = None) -> np.ndarray:
        rs, topo = self.rs, self.topo
        if n is None:
            n = coords.astype(float) + 1
        w = np.ones(len(coords), dtype=np.result_type(n.dtype, np.complex128))
        if topo.orientable:
            for b in topo.boundaries:
                if b.central_part:
                    w *= _central_phase(rs, coords, b.central_part)
                if not b.is_central:
                    w *= _weyl_character_ratio(rs, n, rs.coroot_coords(b.torus_coords))
        else:
            if topo.center:
                w *= _central_phase(rs, coords, topo.center)
            f = _fs_indicator(rs, coords)
            w *= f * f if (self.convention == HOLONOMY and topo.case == "ii") else f
        return w

    @property
    def dtype(self):
        # high-degree p sums huge cancelling terms; carry extra bits through them
        return np.longdouble if self.poly.degree >= 4 else np.float64

    def terms(self, table: WeightTable, t: float, lo: int, hi: int) -> np.ndarray:
        dt = self.dtype
        coords = table.coords[lo:hi]
        n = coords.astype(dt) + 1
        logd = _log_dims(self.rs, n)
        pval = self.poly(n @ self.rs.chol.astype(dt), dtype=dt)
        # exp(-t |lam + rho|^2); the exp(t |rho|^2) factor is applied by the caller
        norm_sq = table.casimir_num[lo:hi].astype(dt) / table.denom + dt(self.rs.rho_norm_sq.numerator) / dt(self.rs.rho_norm_sq.denominator)
        scale = np.exp(-self.dim_exponent * logd - dt(t) * norm_sq)
        return (self.weights(coords, n) * pval * scale).real

    def non_oscillating(self) -> bool:
        topo = self.topo
        if topo.orientable:
            return topo.s_generic == 0 and all(b.central_part == 0 for b in topo.boundaries)
        table = weight_table(self.rs, 30)
        return bool(np.all(self.weights(table.coords).real >= -1e-12)) and topo.center == 0


def _sum_terms(plan: _Plan, table: WeightTable, t: float, workers: int = 1) -> float:
    bounds = [(lo, min(lo + CHUNK, len(table))) for lo in range(0, len(table), CHUNK)]
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: plan.terms(table, t, *b), bounds))
    else:
        parts = [plan.terms(table, t, *b) for b in bounds]
    if not parts:
        return 0.0
    terms = np.concatenate(parts)
    if terms.dtype == np.float64:
        return math.fsum(terms)
    high = terms.astype(np.float64)
    low = (terms - high).astype(np.float64)
    return math.fsum(np.concatenate([high, low]))


# --------------------------------------------------------------------------
# tail bounds and cutoffs


def _majorant(plan: _Plan) -> tuple[float, int, float]:
    """(coef bound B, degree D, effective d-exponent E') so |term| <= B |x|^D / d^E'."""
    return plan.poly.abs_coef_sum(), plan.poly.degree, plan.dim_exponent - plan.topo.s_generic


def _certified_at_zero(plan: _Plan) -> bool:
    _, deg, e_eff = _majorant(plan)
    return e_eff > 1 and deg < e_eff - 1


def _tail_bound(plan: _Plan, cutoff: Fraction, t: float) -> float:
    rs = plan.rs
    coef, deg, e_eff = _majorant(plan)
    r = rs.rank
    eig = np.linalg.eigvalsh(rs.gram_float)
    s_min, s_max = float(eig[0]), float(eig[-1])
    rho2 = float(rs.rho_norm_sq)
    m0 = math.floor(math.sqrt((float(cutoff) + rho2) / (s_max * r))) + 1
    pref = coef * (s_max * r) ** (deg / 2)
    if t == 0:
        if not _certified_at_zero(plan):
            return math.inf
        zeta = 1 + 1 / (e_eff - 1)
        a = e_eff - deg
        return pref * r * zeta ** (r - 1) * (m0 ** (-a) + m0 ** (1 - a) / (a - 1))
    growth = deg + (rs.n_positive * -e_eff if e_eff < 0 else 0)
    total = 0.0
    m = np.arange(m0, m0 + 4096, dtype=float)
    while True:
        expo = -t * np.maximum(float(cutoff), s_min * m * m - rho2)
        block = pref * r * m ** (r - 1 + growth) * np.exp(expo)
        total += float(block.sum())
        if block[-1] < 1e-30 * max(total, 1e-300) or block[-1] == 0.0:
            return total
        m = m + len(m)


def auto_cutoff(plan: _Plan, t: float, eps: float = 1e-14) -> Fraction:
    """Casimir cutoff with ``exp(-t K) * growth(K) < eps``."""
    _, deg, e_eff = _majorant(plan)
    growth = (deg + (plan.rs.n_positive * -e_eff if e_eff < 0 else 0) + plan.rs.rank) / 2
    target = -math.log(eps)
    k = target / t
    for _ in range(50):
        k = (target + growth * math.log(1 + k)) / t
    return Fraction(math.ceil(k))


# --------------------------------------------------------------------------
# public series operations


def _make_plan(rs, topo, p, convention, check_polynomial) -> _Plan:
    if p is None:
        p = InvariantPolynomial.constant(rs.rank)
    if check_polynomial:
        p.check_invariance(rs, warn_only=(check_polynomial == "warn"))
        p.check_singular_vanishing(rs)
    for b in topo.boundaries:
        if len(b.torus_coords) != rs.rank:
            raise ValueError(f"boundary {b} has wrong rank for {rs.name}")
        rs._center(b.central_part)
    if not topo.orientable:
        rs._center(topo.center)
    if convention not in (CLOSED_FORM, HOLONOMY):
        raise ValueError(f"unknown convention {convention!r}")
    return _Plan(rs, topo, p, convention)


def moduli_series(
    rs: RootSystem,
    topo: SurfaceTopology,
    p: InvariantPolynomial | None = None,
    t: float = 0.0,
    cutoff=None,
    *,
    convention: str = CLOSED_FORM,
    workers: int = 1,
    check_polynomial: bool | str = True,
) -> SeriesResult:
    """Truncated series at fixed ``t`` with a certified tail bound."""
    plan = _make_plan(rs, topo, p, convention, check_polynomial)
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0 and not _certified_at_zero(plan):
        raise DivergentAtZeroT(
            f"series for {topo.to_json()} with deg p = {plan.poly.degree} is not absolutely convergent at t = 0"
        )
    if cutoff is None:
        if t == 0:
            raise ValueError("an explicit cutoff is required at t = 0")
        cutoff = auto_cutoff(plan, t)
    cutoff = Fraction(cutoff)
    table = weight_table(rs, cutoff)
    value = math.exp(t * float(rs.rho_norm_sq)) * _sum_terms(plan, table, t, workers)
    tail = math.exp(t * float(rs.rho_norm_sq)) * _tail_bound(plan, cutoff, t)
    return SeriesResult(
        value=value,
        tail_bound=tail,
        schedule_values=[(t, value)],
        weight_count=len(table),
        converged=bool(tail <= 1e-6 * max(1.0, abs(value))),
    )


def _model_columns(plan: _Plan) -> list[tuple[str, float | None, bool]]:
    """Basis of the small-t expansion as (label, exponent, with_log).

    For non-oscillating weights each set J of coordinates sent to infinity
    contributes powers ``t^((delta_J - |J| + m) / 2)``, where ``-delta_J`` is
    the homogeneity degree of the terms along that face.  ``m`` steps by one,
    or by one half when the quadratic form couples J to the fixed coordinates.
    Integer exponents carry a logarithm.
    """
    cols: list[tuple[str, float, bool]] = [("1", 0.0, False), ("t", 1.0, False), ("t^2", 2.0, False)]
    if not plan.non_oscillating():
        return cols
    rs = plan.rs
    _, deg, e_eff = _majorant(plan)
    coroots = np.asarray(rs.positive_coroots)
    gram = rs.gram_float
    found: set[tuple[float, bool]] = set()
    for mask in range(1, 2**rs.rank):
        face = [i for i in range(rs.rank) if mask >> i & 1]
        rest = [i for i in range(rs.rank) if not mask >> i & 1]
        delta = e_eff * int(np.sum(np.any(coroots[:, face] != 0, axis=1))) - deg
        coupled = bool(rest) and bool(np.any(np.abs(gram[np.ix_(face, rest)]) > 1e-12))
        step = 0.5 if coupled else 1.0
        e = (delta - len(face)) / 2
        while e < 2.5:
            if abs(e - round(e)) > 1e-12:
                found.add((e, False))
            elif round(e) < 0:
                found.add((float(round(e)), False))
            else:
                found.add((float(round(e)), True))
            e += step
    for e, lg in sorted(found):
        label = (f"t^{e:g}" if e else "") + (" log t" if lg else "")
        cols.append((label.strip(), e, lg))
    return cols


def _design(ts: np.ndarray, cols) -> np.ndarray:
    return np.stack([ts**ex * (np.log(ts) if lg else 1.0) for _, ex, lg in cols], axis=1)


def _lstsq_constant(ts: np.ndarray, ys: np.ndarray, cols) -> tuple[float, np.ndarray]:
    a = _design(ts, cols)
    scale = np.max(np.abs(a), axis=0)
    coef, *_ = np.linalg.lstsq(a / scale, ys, rcond=None)
    coef = coef / scale
    return float(coef[0]), ys - a @ coef


def default_t_schedule(n_points: int = 6, start: float = 0.4, ratio: float = 0.5) -> list[float]:
    return [start * ratio**k for k in range(n_points)]


def regularized_limit(
    rs: RootSystem,
    topo: SurfaceTopology,
    p: InvariantPolynomial | None = None,
    schedule: Sequence[float] | None = None,
    *,
    eps: float = 1e-14,
    convention: str = CLOSED_FORM,
    workers: int = 1,
    check_polynomial: bool | str = True,
) -> SeriesResult:
    """``t -> 0`` limit by least squares on a decreasing t-schedule.

    The fitted model is ``a0 + a1 t + a2 t^2`` applied to the series with the
    constant ``exp(t |rho|^2)`` removed.  When the weights do not oscillate
    (trivial central character, no generic boundary) the lattice-sum
    asymptotics also produce fractional powers of ``t`` which are added to
    the model.  ``residual`` is the change of ``a0`` when the largest ``t`` is
    dropped from the fit.
    """
    plan = _make_plan(rs, topo, p, convention, check_polynomial)
    cols = _model_columns(plan)
    if schedule is None:
        if topo.s_generic:
            d2 = min(rs.torus_distance(b) for b in topo.boundaries if not b.is_central) ** 2
            schedule = [d2 * tau for tau in DEFAULT_TAU]
        elif len(cols) > 3:
            # rank one keeps t large: high-degree p cancels badly at small t
            ratio = 0.7 if rs.rank == 1 else 0.5
            schedule = default_t_schedule(len(cols) + 3, 0.8 if rs.rank == 1 else 0.4, ratio)
        else:
            schedule = default_t_schedule()
    ts = np.asarray(schedule, dtype=float)
    if len(ts) < 4 or np.any(np.diff(ts) >= 0) or np.any(ts <= 0):
        raise ValueError("schedule must be strictly decreasing, positive, with >= 4 points")
    if len(ts) < len(cols) + 1:
        raise ValueError(f"schedule needs at least {len(cols) + 1} points for model {[c for c, *_ in cols]}")
    reduced, partial = [], []
    count = 0
    for t in ts:
        cutoff = auto_cutoff(plan, float(t), eps)
        table = weight_table(rs, cutoff)
        count = max(count, len(table))
        r_t = _sum_terms(plan, table, float(t), workers)
        reduced.append(r_t)
        partial.append(math.exp(float(t) * float(rs.rho_norm_sq)) * r_t)
    ys = np.asarray(reduced)
    a0, resid = _lstsq_constant(ts, ys, cols)
    a0_drop, _ = _lstsq_constant(ts[1:], ys[1:], cols)
    drift = abs(a0 - a0_drop)
    if drift > 1e-3 * max(1.0, abs(a0)):
        raise ExtrapolationUnstable(f"t-extrapolation drift {drift:.3g} exceeds tolerance (a0 = {a0:.6g})")
    return SeriesResult(
        value=a0,
        tail_bound=drift,
        schedule_values=list(zip(ts.tolist(), partial)),
        extrapolated=a0,
        residual=drift,
        fit_residuals=resid.tolist(),
        weight_count=count,
        converged=True,
        model=[c for c, *_ in cols],
    )


# t = tau * dist(c, e)^2 keeps the Gaussian images at exp(-1/(4 tau)) or below
DEFAULT_TAU = tuple(2.0**-k / 320 for k in range(6))
DEFAULT_TAU_HIGHER = tuple(2.0**-k / 80 for k in range(5))


def default_c_schedule(
    rs: RootSystem,
    n_points: int | None = None,
    start: float | None = None,
    u: int = 1,
    degree: int = 0,
) -> list[tuple[float, ...]]:
    """Points along the rho direction, indexed by the half-angle of the highest root.

    The half-angles are ``start * 2^-k``.  They are spaced linearly instead
    in two cases.  Rank > 1 around ``u = e`` uses ``[start / 2, start]``: the
    weight count grows like ``t^(-rank/2)`` and the log terms need a denser
    sample.  ``degree >= 4`` uses ``[0.4, 0.8]``: at smaller angles the terms
    of high-degree p grow past 1e13 and rounding swamps the cancellation.
    """
    linear = rs.rank > 1 and u == 0
    if degree >= 4 and start is None:
        linear, start = True, 0.8
    if n_points is None:
        n_points = 7 if rs.rank > 1 and u == 0 else (5 if degree >= 4 else 6)
    rho_x = rs.orthonormal(np.asarray(rs.rho, dtype=float)[None, :])[0]
    v = rs.coroot_coords(rho_x)
    theta_angle = float(np.asarray(rs.highest_root, dtype=float) @ v) / 2
    if linear:
        top = 0.4 if start is None else start
        angles = np.linspace(top, top / 2, n_points).tolist()
    else:
        top = (0.1 if rs.rank == 1 else 0.4) if start is None else start
        angles = [top * 2.0**-k for k in range(n_points)]
    return [tuple((a / theta_angle) * rho_x) for a in angles]


def c_to_u_limit(
    rs: RootSystem,
    genus: int,
    u: int,
    p: InvariantPolynomial | None = None,
    c_schedule: Sequence[Sequence[float]] | None = None,
    t_schedule: Sequence[float] | None = None,
    *,
    degree: int | None = None,
    convention: str = CLOSED_FORM,
    workers: int = 1,
) -> SeriesResult:
    """First ``t -> 0`` at each ``c = u exp(C)``, then ``|C| -> 0``.

    ``t_schedule`` holds relative factors: the actual schedule for ``c`` is
    ``tau * dist(c, e)^2``.
    """
    if c_schedule is None:
        c_schedule = default_c_schedule(rs, u=u, degree=0 if p is None else p.degree)
    if t_schedule is None:
        taus = DEFAULT_TAU_HIGHER if (rs.rank > 1 and u == 0) else DEFAULT_TAU
    else:
        taus = tuple(t_schedule)
    radii, values = [], []
    count = 0
    for coords in c_schedule:
        spec = HolonomySpec(u, tuple(coords))
        if spec.is_central:
            raise ValueError("c-schedule entries must be non-central")
        topo = SurfaceTopology(genus, (spec,))
        d2 = rs.torus_distance(spec) ** 2
        inner = regularized_limit(
            rs, topo, p, [tau * d2 for tau in taus], convention=convention, workers=workers
        )
        count = max(count, inner.weight_count)
        radii.append(float(np.linalg.norm(coords)))
        values.append(inner.value)
    rr, ys = np.asarray(radii), np.asarray(values)
    order = np.argsort(-rr)
    rr, ys = rr[order], ys[order]
    if len(rr) < 3:
        raise ValueError("c-schedule needs at least 3 points")
    deg = min(3, len(rr) - 2) if degree is None else degree
    cols = [(f"r^{k}", float(k), False) for k in range(deg + 1)]
    if rs.rank > 1 and u == 0:
        # faces of the chamber make the expansion around e non-analytic
        cols += [(f"r^{k} log r", float(k), True) for k in (2, 3) if k <= deg]
    if len(rr) < len(cols) + 1:
        raise ValueError(f"c-schedule needs at least {len(cols) + 1} points")
    a0, resid = _lstsq_constant(rr, ys, cols)
    a0_drop, _ = _lstsq_constant(rr[1:], ys[1:], cols)
    drift = abs(a0 - a0_drop)
    if drift > 1e-3 * max(1.0, abs(a0)):
        raise ExtrapolationUnstable(f"c-extrapolation drift {drift:.3g} exceeds tolerance (a0 = {a0:.6g})")
    return SeriesResult(
        value=a0,
        tail_bound=drift,
        schedule_values=list(zip(rr.tolist(), ys.tolist())),
        extrapolated=a0,
        residual=drift,
        fit_residuals=resid.tolist(),
        weight_count=count,
        converged=True,
        model=[c for c, *_ in cols],
    )


def boundary_derivative(
    rs: RootSystem,
    topo: SurfaceTopology,
    p: InvariantPolynomial | None,
    boundary: int,
    direction: Sequence[float],
    step: float = 1e-3,
    **kwargs,
) -> float:
    """Central finite difference of the regularized series in one boundary's ``C``."""
    specs = list(topo.boundaries)
    base = np.asarray(specs[boundary].torus_coords)
    vals = []
    for sgn in (1, -1):
        specs[boundary] = HolonomySpec(specs[boundary].central_part, tuple(base + sgn * step * np.asarray(direction)))
        vals.append(regularized_limit(rs, replace(topo, boundaries=tuple(specs)), p, **kwargs).value)
    return (vals[0] - vals[1]) / (2 * step)


# --------------------------------------------------------------------------
# volumes and assembly


def torus_volume(rs: RootSystem) -> float:
    """Covolume of ``2 pi`` times the coroot lattice in the Killing metric."""
    from .lie_core import _frac_det

    det = _frac_det(rs.coroot_gram)
    return (2 * math.pi) ** rs.rank * math.sqrt(float(det))


def closed_form_group_volume(rs: RootSystem) -> float:
    """``Vol(T) * prod_{alpha > 0} 2 pi / <rho, alpha>`` in the Killing metric."""
    return torus_volume(rs) * math.prod(2 * math.pi / float(rs.inner(rs.rho, a)) for a in rs.positive_roots)


def heat_trace_volume(rs: RootSystem, t: float, eps: float = 1e-14) -> float:
    """``(4 pi t)^(dim/2) * sum_lam d_lam^2 exp(-t |lam + rho|^2)``; flat in ``t``."""
    growth = (2 * rs.n_positive + rs.rank) / 2
    k = -math.log(eps) / t
    for _ in range(50):
        k = (-math.log(eps) + growth * math.log(1 + k)) / t
    table = weight_table(rs, Fraction(math.ceil(k)))
    n = table.coords.astype(float) + 1
    logs = 2 * _log_dims(rs, n) - t * (table.casimir + float(rs.rho_norm_sq))
    return (4 * math.pi * t) ** (rs.dim / 2) * math.fsum(np.exp(logs))


def group_and_torus_volumes(rs: RootSystem, t_schedule: Sequence[float] | None = None) -> tuple[float, float]:
    """(Vol(G), Vol(T)) in the Killing metric."""
    if t_schedule is None:
        # the shifted heat trace is flat up to exp(-c/t); large t keeps high rank cheap
        t_schedule = (1.0, 0.5) if rs.rank <= 4 else (8.0, 4.0)
    ts = list(t_schedule)
    if any(b >= a for a, b in zip(ts, ts[1:])):
        raise ValueError("t_schedule must be decreasing")
    vals = [heat_trace_volume(rs, t) for t in ts]
    if len(vals) >= 2 and abs(vals[-1] - vals[-2]) > 1e-3 * abs(vals[-1]):
        raise ExtrapolationUnstable(f"heat-trace volume not flat: {vals[-2]:.8g} vs {vals[-1]:.8g}")
    return vals[-1], torus_volume(rs)


def _central_product(rs: RootSystem, topo: SurfaceTopology) -> int:
    u = 0
    for b in topo.boundaries:
        u = rs.center_product(u, b.central_part)
    return u


def _prefactor(rs: RootSystem, topo: SurfaceTopology, vol_g: float, vol_t: float) -> float:
    nz = rs.center_order
    if not topo.orientable:
        n_real = topo.real_dimension(rs)
        power = 2 * topo.genus - 1 if topo.case == "i" else 2 * topo.genus
        return nz * vol_g**power / (2 * math.pi) ** n_real
    if topo.s_generic == 0:
        n_u = (topo.genus - 1) * rs.dim
        return nz * vol_g ** (2 * topo.genus - 2) / (2 * math.pi) ** (2 * n_u)
    if topo.s_central:
        raise ValueError("mixed central and generic boundaries are not supported by the assembled formula")
    two_n = topo.real_dimension(rs)
    jprod = math.prod(weyl_determinant_abs(rs, b) for b in topo.boundaries)
    return nz * vol_g ** (2 * topo.genus - 2 + topo.s) / ((2 * math.pi) ** two_n * vol_t**topo.s) * jprod


def _series_limit(rs, topo, p, schedule, convention) -> float:
    return regularized_limit(rs, topo, p, schedule, convention=convention).value


def assembled_invariant(
    rs: RootSystem,
    topo: SurfaceTopology,
    p: InvariantPolynomial | None = None,
    *,
    pi1_order: int = 1,
    schedule: Sequence[float] | None = None,
    volume_schedule: Sequence[float] | None = None,
    convention: str = CLOSED_FORM,
    series_value: float | None = None,
) -> float:
    """Prefactor times the regularized series; ``p = 1`` gives the volume.

    The overall sign is chosen so that the ``p = 1`` value is positive.
    ``series_value`` substitutes a series limit computed elsewhere, e.g. by
    :func:`c_to_u_limit`.
    """
    if pi1_order < 1:
        raise ValueError("pi1_order must be >= 1")
    vol_g, vol_t = group_and_torus_volumes(rs, volume_schedule)
    pref = _prefactor(rs, topo, vol_g, vol_t)
    one = InvariantPolynomial.constant(rs.rank)
    base = _series_limit(rs, topo, one, schedule, convention)
    sign = -1.0 if base < 0 else 1.0
    if series_value is not None:
        value = series_value
    elif p is None or p == one:
        value = base
    else:
        value = _series_limit(rs, topo, p, schedule, convention)
    return sign * pref * value / pi1_order


def moduli_volume(rs: RootSystem, topo: SurfaceTopology, **kwargs) -> float:
    return assembled_invariant(rs, topo, None, **kwargs)


def vanishing_check(
    rs: RootSystem,
    topo: SurfaceTopology,
    p: InvariantPolynomial,
    schedule: Sequence[float] | None = None,
    tol: float = 1e-3,
) -> VanishingReport:
    bound = topo.vanishing_bound(rs)
    expected = bound is not None and p.degree > bound
    achieved = abs(regularized_limit(rs, topo, p, schedule).value)
    return VanishingReport(expected, achieved, bound, p.degree, bool(expected and achieved > tol))


# --------------------------------------------------------------------------
# serialization


def series_document(
    rs: RootSystem,
    topo: SurfaceTopology,
    p: InvariantPolynomial | None,
    result: SeriesResult,
    *,
    t_schedule: Sequence[float] | None = None,
    cutoff=None,
) -> dict:
    return {
        "group": rs.name,
        "topology": topo.to_json(),
        "polynomial": str(p or InvariantPolynomial.constant(rs.rank)),
        "t_schedule": list(t_schedule) if t_schedule is not None else [t for t, _ in result.schedule_values],
        "cutoff": None if cutoff is None else str(Fraction(cutoff)),
        "value": result.value,
        "tail_bound": result.tail_bound,
        "schedule_values": [[t, v] for t, v in result.schedule_values],
        "residual": result.residual,
        "weight_count": result.weight_count,
        "model": result.model,
    }


def schedule_csv(result: SeriesResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", "partial_sum", "residual"])
    resid = result.fit_residuals or [0.0] * len(result.schedule_values)
    for (t, v), r in zip(result.schedule_values, resid):
        writer.writerow([repr(t), repr(v), repr(r)])
    return buf.getvalue()
