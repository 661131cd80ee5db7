"""Weyl-invariant polynomials in the orthonormal coordinates of lambda + rho."""
from __future__ import annotations

import re
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import NonInvariantPolynomial, UsageError
from .lie_core import RootSystem

__all__ = ["InvariantPolynomial"]

_MONO = re.compile(r"^x(\d*)(?:\^(\d+))?$")


@dataclass(frozen=True)
class InvariantPolynomial:
    """Sum of monomials ``coef * x1^a1 ... xl^al``.

    ``terms`` maps exponent tuples (length = rank) to rational coefficients.
    """

    terms: tuple[tuple[tuple[int, ...], Fraction], ...]
    rank: int

    @classmethod
    def constant(cls, rank: int, value=1) -> "InvariantPolynomial":
        return cls((((0,) * rank, Fraction(value)),), rank)

    @classmethod
    def from_dict(cls, terms: dict, rank: int) -> "InvariantPolynomial":
        merged: dict[tuple[int, ...], Fraction] = {}
        for exps, coef in terms.items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != rank:
                raise ValueError(f"exponent vector {exps} does not match rank {rank}")
            merged[exps] = merged.get(exps, Fraction(0)) + Fraction(coef)
        items = tuple(sorted((e, c) for e, c in merged.items() if c != 0))
        return cls(items or (((0,) * rank, Fraction(0)),), rank)

    @classmethod
    def parse(cls, text: str, rank: int) -> "InvariantPolynomial":
        """Parse e.g. ``"x1^4"``, ``"1"``, ``"x1^2 + x2^2"``, ``"3/2 * x1^2*x2^2 - 1"``.

        For rank one ``x`` is accepted as a synonym of ``x1``.
        """
        src = text.replace(" ", "")
        if not src:
            raise UsageError("empty polynomial")
        src = re.sub(r"(?<=[^\^*/+\-])-", "+-", src)
        if src.startswith("+"):
            src = src[1:]
        terms: dict[tuple[int, ...], Fraction] = {}
        for chunk in src.split("+"):
            if not chunk:
                raise UsageError(f"malformed polynomial {text!r}")
            sign = Fraction(1)
            if chunk.startswith("-"):
                sign, chunk = Fraction(-1), chunk[1:]
            coef = sign
            exps = [0] * rank
            for factor in chunk.split("*"):
                m = _MONO.match(factor)
                if m:
                    idx = int(m.group(1)) if m.group(1) else 1
                    if not m.group(1) and rank != 1:
                        raise UsageError(f"bare 'x' is ambiguous for rank {rank}")
                    if not 1 <= idx <= rank:
                        raise UsageError(f"variable x{idx} exceeds rank {rank}")
                    exps[idx - 1] += int(m.group(2) or 1)
                else:
                    try:
                        coef *= Fraction(factor)
                    except (ValueError, ZeroDivisionError):
                        raise UsageError(f"cannot parse factor {factor!r} in {text!r}") from None
            key = tuple(exps)
            terms[key] = terms.get(key, Fraction(0)) + coef
        return cls.from_dict(terms, rank)

    @property
    def degree(self) -> int:
        return max((sum(e) for e, c in self.terms if c != 0), default=0)

    @property
    def is_constant(self) -> bool:
        return self.degree == 0

    def abs_coef_sum(self) -> float:
        return float(sum(abs(c) for _, c in self.terms))

    def __call__(self, x: np.ndarray, dtype=float) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=dtype))
        out = np.zeros(x.shape[0], dtype=dtype)
        for exps, coef in self.terms:
            out += float(coef) * np.prod(x ** np.asarray(exps), axis=1)
        return out

    def __str__(self) -> str:
        parts = []
        for exps, coef in self.terms:
            mono = "*".join(f"x{i + 1}^{e}" if e > 1 else f"x{i + 1}" for i, e in enumerate(exps) if e)
            if not mono:
                parts.append(str(coef))
            elif coef == 1:
                parts.append(mono)
            else:
                parts.append(f"{coef}*{mono}")
        return " + ".join(parts)

    def check_invariance(self, rs: RootSystem, *, warn_only: bool = False, seed: int = 0) -> float:
        """Maximum relative deviation of p(w x) from p(x) over W and 20 random points."""
        if self.rank != rs.rank:
            raise NonInvariantPolynomial(f"polynomial rank {self.rank} != group rank {rs.rank}")
        if self.is_constant:
            return 0.0
        x = np.random.default_rng(seed).normal(size=(20, rs.rank))
        base = self(x)
        scale = np.maximum(np.abs(base), 1e-300)
        worst = 0.0
        for w in rs.weyl_group_orthonormal:
            worst = max(worst, float(np.max(np.abs(self(x @ w.T) - base) / scale)))
        if worst > 1e-9:
            msg = f"polynomial {self} is not Weyl-invariant for {rs.name} (deviation {worst:.3g})"
            if not warn_only:
                raise NonInvariantPolynomial(msg)
            warnings.warn(msg, stacklevel=2)
        return worst

    def check_singular_vanishing(self, rs: RootSystem) -> bool:
        """Warn unless p vanishes on singular lambda + rho (walls of the chamber)."""
        if self.is_constant:
            return True
        rng = np.random.default_rng(1)
        ok = True
        for i in range(rs.rank):
            n = rng.integers(1, 6, size=(8, rs.rank)).astype(float)
            n[:, i] = 0.0
            vals = self(rs.orthonormal(n))
            if np.max(np.abs(vals)) > 1e-9 * max(1.0, float(np.max(np.abs(self(rs.orthonormal(n + 1)))))):
                ok = False
        if not ok:
            warnings.warn(
                f"polynomial {self} does not vanish on singular weights; t -> 0 limits may not exist",
                stacklevel=2,
            )
        return ok
