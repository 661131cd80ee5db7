"""Monte Carlo checks: Haar sampling, heat kernels and lattice integrals.

Random streams are counter based: block ``b`` of an estimate draws from
``Philox(key=seed, counter=[0, b, 0, 0])``, so the result depends only on
``(seed, samples)`` and never on how blocks are spread over workers.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import ArityMismatch, TruncationInsufficient, UnsupportedGroup
from .lie_core import HolonomySpec, RootSystem, Weight, weight_multiplicities
from .series import SurfaceTopology

__all__ = [
    "McEstimate",
    "LatticeComplex",
    "block_rng",
    "haar_sample",
    "heat_kernel_eval",
    "su2_characters",
    "torus_matrix",
    "generator_count",
    "surface_holonomy",
    "mc_partition_estimate",
    "complex_lattice_integral",
]

BLOCK = 8192
TRUNCATION_TOL = 1e-12


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    samples: int
    seed: int

    def z_score(self, reference: float) -> float:
        return (self.mean - reference) / self.stderr if self.stderr > 0 else math.inf * (self.mean != reference)

    def to_json(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "samples": self.samples, "seed": self.seed}


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed), counter=[0, int(block), 0, 0]))


def _require_su(rs: RootSystem, ranks=(1,)) -> None:
    if rs.family != "A" or rs.rank not in ranks:
        raise UnsupportedGroup(f"Monte Carlo supports {', '.join(f'SU({r + 1})' for r in ranks)}; got {rs.name}")


def haar_sample(rs: RootSystem, rng: np.random.Generator, n: int = 1) -> np.ndarray:
    """``n`` Haar-random matrices, shape ``(n, N, N)``; SU(2) and SU(3)."""
    _require_su(rs, (1, 2))
    if rs.rank == 1:
        q = rng.standard_normal((n, 4))
        q /= np.linalg.norm(q, axis=1, keepdims=True)
        a, b, c, d = q.T
        out = np.empty((n, 2, 2), dtype=complex)
        out[:, 0, 0] = a + 1j * b
        out[:, 0, 1] = c + 1j * d
        out[:, 1, 0] = -c + 1j * d
        out[:, 1, 1] = a - 1j * b
        return out
    z = (rng.standard_normal((n, 3, 3)) + 1j * rng.standard_normal((n, 3, 3))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=1, axis2=2)
    q = q * (diag / np.abs(diag))[:, None, :]
    det = np.linalg.det(q)
    return q / (det ** (1 / 3))[:, None, None]


def su2_characters(trace: np.ndarray, m_max: int) -> np.ndarray:
    """``chi_m`` for ``m = 0..m_max`` from the trace, by ``chi_m = tr chi_{m-1} - chi_{m-2}``."""
    tr = np.asarray(trace, dtype=float)
    out = np.empty((m_max + 1,) + tr.shape)
    out[0] = 1.0
    if m_max >= 1:
        out[1] = tr
    for m in range(2, m_max + 1):
        out[m] = tr * out[m - 1] - out[m - 2]
    return out


def _su2_cutoff(t: float, cutoff) -> int:
    """Largest highest weight ``m`` kept; Casimir of ``m`` is ``m (m + 2) / 8``."""
    if t <= 0:
        raise ValueError("t must be > 0")
    if cutoff is None:
        m = 0
        while (m + 2) ** 2 * math.exp(-t * (m + 1) * (m + 3) / 8) >= 1e-16:
            m += 1
        return m
    if math.exp(-t * float(cutoff)) >= TRUNCATION_TOL:
        raise TruncationInsufficient(f"exp(-t * cutoff) = {math.exp(-t * float(cutoff)):.3g} >= {TRUNCATION_TOL}")
    return int(math.floor(math.sqrt(8 * float(cutoff) + 1) - 1))


def _heat_from_trace(t: float, trace: np.ndarray, m_max: int) -> np.ndarray:
    chis = su2_characters(trace, m_max)
    m = np.arange(m_max + 1, dtype=float)
    coef = (m + 1) * np.exp(-t * m * (m + 2) / 8)
    return np.tensordot(coef, chis, axes=1)


def heat_kernel_eval(rs: RootSystem, t: float, x, y=None, cutoff=None):
    """``sum_lam d_lam chi_lam(x y^-1) exp(-t p_c(lam))`` for SU(2); batched over leading axes."""
    _require_su(rs)
    x = np.asarray(x, dtype=complex)
    g = x if y is None else x @ np.linalg.inv(np.asarray(y, dtype=complex))
    trace = np.trace(g, axis1=-2, axis2=-1)
    val = _heat_from_trace(t, trace.real, _su2_cutoff(t, cutoff))
    return float(val) if np.ndim(val) == 0 else val


def _defining_weights(rs: RootSystem) -> list[tuple[int, ...]]:
    fund = Weight((1,) + (0,) * (rs.rank - 1))
    return sorted(weight_multiplicities(rs, fund))


def torus_matrix(rs: RootSystem, spec: HolonomySpec) -> np.ndarray:
    """``u exp(C)`` in the defining representation of SU(n)."""
    _require_su(rs, tuple(range(1, 9)))
    v = rs.center_coroot(spec.central_part) + rs.coroot_coords(spec.torus_coords or (0.0,) * rs.rank)
    return np.diag([np.exp(1j * float(np.dot(w, v))) for w in _defining_weights(rs)])


def generator_count(topo: SurfaceTopology) -> int:
    if topo.orientable:
        return 2 * topo.genus + max(topo.s - 1, 0)
    return 2 * topo.genus + (1 if topo.case == "i" else 2)


def _inv(a: np.ndarray) -> np.ndarray:
    # unitary inverse
    return np.conj(np.swapaxes(a, -1, -2))


def surface_holonomy(rs: RootSystem, topo: SurfaceTopology, h: Sequence[np.ndarray]) -> np.ndarray:
    """Relator word times the pinned holonomy, so the result is ``f(h) c_1``.

    Orientable: ``prod [x_j, y_j] * prod_{i>=2} z_i c_i z_i^-1 * c_1``.
    Non-orientable: ``prod [x_j, y_j] * eps^2 * u`` (case i) or
    ``prod [x_j, y_j] * z eps z^-1 eps * u`` (case ii).
    """
    need = generator_count(topo)
    if len(h) != need:
        raise ArityMismatch(f"topology needs {need} generators, got {len(h)}")
    mats = [np.asarray(a, dtype=complex) for a in h]
    n = mats[0].shape[-1] if mats else rs.rank + 1
    out = np.broadcast_to(np.eye(n, dtype=complex), mats[0].shape if mats else (n, n)).copy()
    for j in range(topo.genus):
        x, y = mats[2 * j], mats[2 * j + 1]
        out = out @ x @ y @ _inv(x) @ _inv(y)
    rest = mats[2 * topo.genus :]
    if topo.orientable:
        for z, b in zip(rest, topo.boundaries[1:]):
            out = out @ z @ torus_matrix(rs, b) @ _inv(z)
        if topo.boundaries:
            out = out @ torus_matrix(rs, topo.boundaries[0])
        return out
    if topo.case == "i":
        eps = rest[0]
        out = out @ eps @ eps
    else:
        z, eps = rest
        out = out @ z @ eps @ _inv(z) @ eps
    return out @ torus_matrix(rs, HolonomySpec.central(topo.center, rs.rank))


def _run_blocks(seed: int, samples: int, block_fn: Callable[[np.random.Generator, int], np.ndarray], workers: int):
    if samples < 2:
        raise ValueError("need at least 2 samples")
    sizes = [min(BLOCK, samples - lo) for lo in range(0, samples, BLOCK)]

    def one(b):
        vals = np.asarray(block_fn(block_rng(seed, b), sizes[b]), dtype=float)
        return math.fsum(vals), math.fsum(vals * vals)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, range(len(sizes))))
    else:
        parts = [one(b) for b in range(len(sizes))]
    total = math.fsum(p[0] for p in parts)
    total_sq = math.fsum(p[1] for p in parts)
    mean = total / samples
    var = max(total_sq - samples * mean * mean, 0.0) / (samples - 1)
    return McEstimate(mean, math.sqrt(var / samples), samples, seed)


def mc_partition_estimate(
    rs: RootSystem,
    topo: SurfaceTopology,
    t: float,
    samples: int,
    seed: int,
    *,
    workers: int = 1,
    cutoff=None,
) -> McEstimate:
    """Estimate ``E_h[H(t, f(h), c_1^-1)]`` under normalized Haar measure (SU(2))."""
    _require_su(rs)
    m_max = _su2_cutoff(t, cutoff)
    n_gen = generator_count(topo)

    def block(rng, n):
        h = [haar_sample(rs, rng, n) for _ in range(n_gen)]
        g = surface_holonomy(rs, topo, h)
        return _heat_from_trace(t, np.trace(g, axis1=-2, axis2=-1).real, m_max)

    return _run_blocks(seed, samples, block, workers)


@dataclass(frozen=True)
class LatticeComplex:
    """Two-complex with one vertex: 1-cells carry group elements, 2-cells carry words.

    Words are sequences of signed 1-based 1-cell indices.  ``fixed_boundary``
    multiplies the word of 2-cell ``boundary_cell`` by ``c`` on the right.
    ``twist`` is a list of ``(highest weight m, word)`` pairs whose characters
    multiply the integrand.
    """

    num_one_cells: int
    two_cells: tuple[tuple[int, ...], ...]
    fixed_boundary: HolonomySpec | None = None
    boundary_cell: int = 0
    twist: tuple[tuple[int, tuple[int, ...]], ...] = ()

    def __post_init__(self):
        words = list(self.two_cells) + [w for _, w in self.twist]
        for word in words:
            for letter in word:
                if letter == 0 or abs(letter) > self.num_one_cells:
                    raise ArityMismatch(f"letter {letter} does not name one of {self.num_one_cells} 1-cells")
        if self.fixed_boundary is not None and not 0 <= self.boundary_cell < len(self.two_cells):
            raise ArityMismatch(f"boundary cell {self.boundary_cell} out of range")

    @classmethod
    def surface(cls, genus: int) -> "LatticeComplex":
        word: list[int] = []
        for j in range(genus):
            a, b = 2 * j + 1, 2 * j + 2
            word += [a, b, -a, -b]
        return cls(2 * genus, (tuple(word),))

    @classmethod
    def from_json(cls, doc: dict, rank: int = 1) -> "LatticeComplex":
        fixed = doc.get("fixed_boundary")
        spec, cell = None, 0
        if fixed is not None:
            hol = fixed["holonomy"]
            spec = HolonomySpec.parse(hol, rank) if isinstance(hol, str) else HolonomySpec.from_json(hol, rank)
            cell = int(fixed.get("cell", 0))
        twist = tuple((int(tw["weight"]), tuple(int(x) for x in tw["word"])) for tw in doc.get("twist", ()))
        return cls(
            int(doc["num_one_cells"]),
            tuple(tuple(int(x) for x in w) for w in doc["two_cells"]),
            spec,
            cell,
            twist,
        )

    @classmethod
    def load(cls, path, rank: int = 1) -> "LatticeComplex":
        return cls.from_json(json.loads(Path(path).read_text()), rank)


def _word(mats: list[np.ndarray], word: Sequence[int]) -> np.ndarray:
    out = None
    for letter in word:
        m = mats[letter - 1] if letter > 0 else _inv(mats[-letter - 1])
        out = m if out is None else out @ m
    return out


def complex_lattice_integral(
    rs: RootSystem,
    cx: LatticeComplex,
    t: float,
    samples: int,
    seed: int,
    *,
    workers: int = 1,
    cutoff=None,
) -> McEstimate:
    """Estimate ``E_h[prod_F H(t, word_F(h), e) * A(h)]`` (SU(2))."""
    _require_su(rs)
    m_max = _su2_cutoff(t, cutoff)
    twist_max = max((m for m, _ in cx.twist), default=0)
    pinned = None if cx.fixed_boundary is None else torus_matrix(rs, cx.fixed_boundary)

    def block(rng, n):
        mats = [haar_sample(rs, rng, n) for _ in range(cx.num_one_cells)]
        val = np.ones(n)
        for idx, word in enumerate(cx.two_cells):
            g = _word(mats, word)
            if pinned is not None and idx == cx.boundary_cell:
                g = g @ pinned
            val *= _heat_from_trace(t, np.trace(g, axis1=-2, axis2=-1).real, m_max)
        for m, word in cx.twist:
            tr = np.trace(_word(mats, word), axis1=-2, axis2=-1).real
            val *= su2_characters(tr, max(twist_max, 1))[m]
        return val

    return _run_blocks(seed, samples, block, workers)
