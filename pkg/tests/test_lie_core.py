import cmath
import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flatmod.errors import (
    CutoffTooLarge,
    InvalidCenterElement,
    NearSingularElement,
    NonDominantWeight,
    UnsupportedGroup,
)
from flatmod.lie_core import (
    SUPPORTED_GROUPS,
    HolonomySpec,
    Weight,
    build_root_system,
    casimir,
    central_character,
    character,
    character_from_multiplicities,
    dimension,
    enumerate_dominant_weights,
    frobenius_schur,
    fs_quadrature,
    parse_group,
    torus_average,
    weight_multiplicities,
    weyl_determinant_abs,
)

# (|positive roots|, |W|, #Z, dual Coxeter, dim G)
CLASSICAL = {
    "A1": (1, 2, 2, 2, 3),
    "A2": (3, 6, 3, 3, 8),
    "A3": (6, 24, 4, 4, 15),
    "A4": (10, 120, 5, 5, 24),
    "A5": (15, 720, 6, 6, 35),
    "A6": (21, 5040, 7, 7, 48),
    "A7": (28, 40320, 8, 8, 63),
    "B2": (4, 8, 2, 3, 10),
    "B3": (9, 48, 2, 5, 21),
    "B4": (16, 384, 2, 7, 36),
    "C2": (4, 8, 2, 3, 10),
    "C3": (9, 48, 2, 4, 21),
    "C4": (16, 384, 2, 5, 36),
    "D4": (12, 192, 4, 6, 28),
    "G2": (6, 12, 1, 4, 14),
}


def rs_(name):
    return build_root_system(*parse_group(name))


A1, A2, B2, G2 = rs_("A1"), rs_("A2"), rs_("B2"), rs_("G2")


@pytest.mark.parametrize("name", sorted(CLASSICAL))
def test_classical_data(name):
    rs = rs_(name)
    npos, w, z, h, dim = CLASSICAL[name]
    assert (rs.n_positive, rs.weyl_order, rs.center_order, rs.dual_coxeter, rs.dim) == (npos, w, z, h, dim)
    # Freudenthal strange formula in Killing normalization
    assert rs.rho_norm_sq == Fraction(dim, 24)


@pytest.mark.parametrize("fam,rank", SUPPORTED_GROUPS)
def test_adjoint_casimir_is_one(fam, rank):
    rs = build_root_system(fam, rank)
    assert casimir(rs, Weight(rs.highest_root)) == 1
    assert dimension(rs, Weight(rs.highest_root)) == rs.dim


def test_unsupported():
    for bad in ("Z9", "E8", "A8", "B1", "D3", "G3", ""):
        with pytest.raises(UnsupportedGroup):
            parse_group(bad)
    with pytest.raises(UnsupportedGroup):
        build_root_system("F", 4)


@pytest.mark.parametrize(
    "name,coords,dim",
    [
        ("A1", (2,), 3),
        ("A1", (5,), 6),
        ("A2", (1, 1), 8),
        ("A2", (1, 0), 3),
        ("A2", (2, 0), 6),
        ("A2", (3, 0), 10),
        ("A3", (0, 1, 0), 6),
        ("B2", (1, 0), 5),
        ("B2", (0, 1), 4),
        ("G2", (1, 0), 7),
        ("G2", (0, 1), 14),
        ("D4", (1, 0, 0, 0), 8),
        ("C3", (1, 0, 0), 6),
        ("B3", (0, 0, 1), 8),
    ],
)
def test_dimensions(name, coords, dim):
    rs = rs_(name)
    assert dimension(rs, Weight(coords)) == dim
    # weight multiplicities sum to the dimension (independent Freudenthal route)
    assert sum(weight_multiplicities(rs, Weight(coords)).values()) == dim


def test_casimir_examples():
    assert casimir(A1, Weight((2,))) == 1
    assert casimir(A1, Weight((1,))) == Fraction(3, 8)
    for m in range(10):
        assert casimir(A1, Weight((m,))) == Fraction((m + 1) ** 2 - 1, 8)
    # (1,0) of SU(3): <l, l + 2 rho> = 4/3 basic, divided by 2 h = 6
    assert casimir(A2, Weight((1, 0))) == Fraction(4, 9)
    assert casimir(A2, Weight((0, 0))) == 0


def test_nondominant():
    with pytest.raises(NonDominantWeight):
        dimension(A2, Weight((1, -1)))
    with pytest.raises(NonDominantWeight):
        casimir(A1, Weight((-1,)))


def test_central_characters():
    assert central_character(A1, Weight((1,)), 1) == pytest.approx(-1)
    assert central_character(A1, Weight((2,)), 1) == pytest.approx(1)
    assert central_character(A2, Weight((1, 0)), 1) == pytest.approx(cmath.exp(2j * math.pi / 3))
    with pytest.raises(InvalidCenterElement):
        central_character(A1, Weight((1,)), 2)
    with pytest.raises(InvalidCenterElement):
        central_character(G2, Weight((1, 0)), 1)


@pytest.mark.parametrize("name", ["A2", "A3", "D4", "B3", "C3"])
def test_central_character_multiplicative(name):
    rs = rs_(name)
    lam = Weight(tuple(range(1, rs.rank + 1)))
    for a, b in itertools.product(range(rs.center_order), repeat=2):
        lhs = central_character(rs, lam, rs.center_product(a, b))
        rhs = central_character(rs, lam, a) * central_character(rs, lam, b)
        assert lhs == pytest.approx(rhs, abs=1e-12)
        assert abs(lhs) == pytest.approx(1)


def test_characters_a1():
    for m in range(8):
        assert character(A1, Weight((m,)), HolonomySpec.central(0, 1)) == pytest.approx(m + 1)
        assert character(A1, Weight((m,)), HolonomySpec.central(1, 1)) == pytest.approx((-1) ** m * (m + 1))
    # alpha(C) = pi: orthonormal x with alpha(C) = 2 x / sqrt(8)
    h = HolonomySpec(0, (math.sqrt(8) * math.pi / 2,))
    assert abs(character(A1, Weight((1,)), h)) < 1e-12
    for m in range(8):
        theta = 0.7
        hh = HolonomySpec(0, (math.sqrt(8) * theta,))
        assert character(A1, Weight((m,)), hh).real == pytest.approx(math.sin((m + 1) * theta) / math.sin(theta))


def test_near_singular():
    with pytest.raises(NearSingularElement):
        character(A1, Weight((1,)), HolonomySpec(0, (1e-11,)))


@settings(max_examples=40, deadline=None)
@given(
    st.sampled_from(["A2", "B2", "G2", "C3"]),
    st.lists(st.floats(-3, 3, allow_nan=False), min_size=3, max_size=3),
    st.lists(st.integers(0, 3), min_size=3, max_size=3),
    st.integers(0, 3),
)
def test_character_weyl_formula_matches_multiplicities(name, xs, ws, u):
    rs = rs_(name)
    lam = Weight(tuple(ws[: rs.rank]))
    u = u % rs.center_order
    h = HolonomySpec(u, tuple(xs[: rs.rank]))
    try:
        val = character(rs, lam, h)
    except NearSingularElement:
        return
    v = rs.center_coroot(u) + rs.coroot_coords(h.torus_coords)
    oracle = complex(character_from_multiplicities(rs, lam, v[None, :])[0])
    assert abs(val - oracle) < 1e-8 * max(1.0, abs(oracle))


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(["A2", "B2", "G2"]), st.lists(st.floats(-3, 3, allow_nan=False), min_size=2, max_size=2))
def test_character_weyl_invariant(name, xs):
    rs = rs_(name)
    lam = Weight((1, 1))
    x = np.asarray(xs)
    try:
        base = character(rs, lam, HolonomySpec(0, tuple(x)))
    except NearSingularElement:
        return
    for w in rs.weyl_group_orthonormal:
        other = character(rs, lam, HolonomySpec(0, tuple(w @ x)))
        assert abs(other - base) <= 1e-10 * max(1.0, abs(base)) + 1e-9


def test_real_when_self_conjugate():
    # B2 has -1 in W, so every element is conjugate to its inverse
    val = character(B2, Weight((2, 1)), HolonomySpec(0, (0.3, 1.1)))
    assert abs(val.imag) < 1e-10 * abs(val)


def test_character_orthogonality_quadrature():
    for rs in (A1, A2):
        lams = enumerate_dominant_weights(rs, 1)
        for a, b in itertools.product(lams, repeat=2):
            val = torus_average(
                rs,
                lambda v: character_from_multiplicities(rs, a, v) * np.conj(character_from_multiplicities(rs, b, v)),
                24,
            )
            assert abs(val - (a == b)) < 1e-8


@pytest.mark.parametrize("name", ["A1", "A2", "B2"])
def test_frobenius_schur_matches_quadrature(name):
    rs = rs_(name)
    cutoff = 2 if name != "A1" else casimir(A1, Weight((6,)))
    for lam in enumerate_dominant_weights(rs, cutoff):
        q = fs_quadrature(rs, lam)
        f = frobenius_schur(rs, lam)
        assert abs(q - round(q)) < 1e-6
        assert f == round(q)


def test_frobenius_schur_examples():
    assert frobenius_schur(A1, Weight((1,))) == -1
    assert frobenius_schur(A1, Weight((2,))) == 1
    assert frobenius_schur(A2, Weight((1, 0))) == 0
    assert frobenius_schur(A2, Weight((1, 1))) == 1
    assert frobenius_schur(G2, Weight((1, 0))) == 1


def test_enumeration_examples():
    assert enumerate_dominant_weights(A1, 0) == [Weight((0,))]
    got = enumerate_dominant_weights(A1, 1)
    assert got == [Weight((0,)), Weight((1,)), Weight((2,))]
    assert [casimir(A1, w) for w in got] == [0, Fraction(3, 8), 1]
    # (1,0) has Casimir 4/9 in this normalization
    assert enumerate_dominant_weights(A2, Fraction(4, 9)) == [Weight((0, 0)), Weight((0, 1)), Weight((1, 0))]
    assert enumerate_dominant_weights(A2, Fraction(2, 9)) == [Weight((0, 0))]


@pytest.mark.parametrize("name,cutoff", [("A1", 5), ("A2", 5), ("A2", Fraction(7, 3))])
def test_enumeration_complete(name, cutoff):
    rs = rs_(name)
    brute = []
    for coords in itertools.product(range(51), repeat=rs.rank):
        c = casimir(rs, Weight(coords))
        if c <= cutoff:
            brute.append((c, coords))
    brute.sort()
    assert [w.coords for w in enumerate_dominant_weights(rs, cutoff)] == [c for _, c in brute]


def test_enumeration_budget(monkeypatch):
    monkeypatch.setenv("FLATMOD_WEIGHT_BUDGET", "50")
    with pytest.raises(CutoffTooLarge):
        enumerate_dominant_weights(rs_("A3"), 40)


def test_weyl_determinant_a1():
    assert weyl_determinant_abs(A1, HolonomySpec.central(0, 1)) == 0
    h = HolonomySpec(0, (math.sqrt(8) * math.pi / 2,))
    assert weyl_determinant_abs(A1, h) == pytest.approx(2)


def _su3_adjoint_det(x):
    # c = diag(e^{i phi}) with phases from the defining weights
    v = A2.coroot_coords(x)
    ws = sorted(weight_multiplicities(A2, Weight((1, 0))))
    phases = np.array([np.dot(w, v) for w in ws])
    c = np.diag(np.exp(1j * phases))
    # adjoint action on the 8-dim space of traceless hermitian generators
    basis = []
    for i, j in itertools.product(range(3), repeat=2):
        e = np.zeros((3, 3), complex)
        e[i, j] = 1
        basis.append(e)
    ad = np.array([[np.vdot(b, c @ a @ np.conj(c.T)) for a in basis] for b in basis])
    # drop the 3-dim diagonal block's trivial eigenvalues (torus has rank 2 + identity direction)
    eig = np.linalg.eigvals(ad)
    nontrivial = [e for e in eig if abs(e - 1) > 1e-9]
    return abs(np.prod([1 - e for e in nontrivial]))


def test_weyl_determinant_a2_adjoint_oracle():
    rng = np.random.default_rng(3)
    for _ in range(5):
        x = rng.normal(size=2)
        got = weyl_determinant_abs(A2, HolonomySpec(0, tuple(x)))
        assert got == pytest.approx(math.sqrt(_su3_adjoint_det(x)), rel=1e-8)


def test_holonomy_parse():
    assert HolonomySpec.parse("e", 2) == HolonomySpec(0, (0.0, 0.0))
    assert HolonomySpec.parse("1", 1) == HolonomySpec(1, (0.0,))
    assert HolonomySpec.parse("1@0.5,0.25", 2) == HolonomySpec(1, (0.5, 0.25))
    assert HolonomySpec.parse("0.5,0.25", 2).is_central is False
    with pytest.raises(ValueError):
        HolonomySpec.parse("0.5", 2)


def test_construction_deterministic():
    a = build_root_system.__wrapped__("B", 3)
    b = build_root_system.__wrapped__("B", 3)
    assert np.array_equal(a.weyl_group, b.weyl_group)
    assert a.center_elements == b.center_elements
