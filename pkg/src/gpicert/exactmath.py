"""Exact sparse multivariate polynomials and dense rational linear algebra.

Everything in this module works over arbitrary-precision rationals
(``fractions.Fraction``): no value is ever converted to a float here, which is
what makes the certificate checks in the rest of the package proofs rather
than numerics.

A polynomial lives in a *ring*, an ordered tuple of variable names, and is
stored sparsely as a map from exponent tuples to nonzero coefficients.  Two
polynomials over the same ring are equal iff their term maps are equal, so
``==`` is exact polynomial identity.

The canonical term order used for printing, serialization and basis
enumeration is graded lexicographic with the declared variable order:
ascending total degree, and inside a degree block earlier variables come
first (``1, a, b, a^2, a*b, b^2, ...``).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

Monomial = tuple[int, ...]


class RingMismatchError(ValueError):
    """Operands over incompatible variable rings were combined."""


def as_fraction(x: Fraction | int | str) -> Fraction:
    """Coerce ints and 'num/den' strings to Fraction; floats are rejected."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, str)):
        return Fraction(x)
    raise TypeError(f"expected an exact rational, got {type(x).__name__}")


def grlex_key(mono: Monomial) -> tuple:
    # ascending total degree; ties broken so earlier ring variables sort first
    return (sum(mono), tuple(-e for e in mono))


@dataclass(frozen=True)
class MultiPoly:
    """Sparse exact-rational polynomial over an ordered variable ring."""

    ring: tuple[str, ...]
    terms: dict[Monomial, Fraction]

    def __post_init__(self) -> None:
        object.__setattr__(self, "ring", tuple(self.ring))
        width = len(self.ring)
        clean: dict[Monomial, Fraction] = {}
        for mono, coeff in self.terms.items():
            if len(mono) != width:
                raise ValueError(f"monomial {mono} does not fit a {width}-variable ring")
            if any(e < 0 for e in mono):
                raise ValueError(f"negative exponent in {mono}")
            c = as_fraction(coeff)
            if c != 0:
                clean[tuple(mono)] = c
        object.__setattr__(self, "terms", clean)

    # ---------------------------------------------------------------- factories

    @classmethod
    def zero(cls, ring: Sequence[str]) -> "MultiPoly":
        return cls(tuple(ring), {})

    @classmethod
    def constant(cls, ring: Sequence[str], value: Fraction | int) -> "MultiPoly":
        return cls(tuple(ring), {(0,) * len(ring): as_fraction(value)})

    @classmethod
    def one(cls, ring: Sequence[str]) -> "MultiPoly":
        return cls.constant(ring, 1)

    @classmethod
    def variable(cls, ring: Sequence[str], name: str) -> "MultiPoly":
        ring = tuple(ring)
        if name not in ring:
            raise RingMismatchError(f"variable {name!r} not in ring {ring}")
        mono = tuple(1 if v == name else 0 for v in ring)
        return cls(ring, {mono: Fraction(1)})

    @classmethod
    def monomial(cls, ring: Sequence[str], mono: Monomial, coeff: Fraction | int = 1) -> "MultiPoly":
        return cls(tuple(ring), {tuple(mono): as_fraction(coeff)})

    # ---------------------------------------------------------------- helpers

    def _require_same_ring(self, other: "MultiPoly") -> None:
        if self.ring != other.ring:
            raise RingMismatchError(f"ring mismatch: {self.ring} vs {other.ring}")

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def coefficient(self, mono: Monomial) -> Fraction:
        """Stored coefficient of the monomial, zero if absent."""
        mono = tuple(mono)
        if len(mono) != len(self.ring):
            raise RingMismatchError(f"monomial {mono} not over ring {self.ring}")
        return self.terms.get(mono, Fraction(0))

    def constant_term(self) -> Fraction:
        return self.terms.get((0,) * len(self.ring), Fraction(0))

    def total_degree(self) -> int:
        """Total degree; the zero polynomial reports 0."""
        return max((sum(m) for m in self.terms), default=0)

    def degree_of(self, name: str) -> int:
        i = self.ring.index(name)
        return max((m[i] for m in self.terms), default=0)

    def sorted_terms(self) -> list[tuple[Monomial, Fraction]]:
        return sorted(self.terms.items(), key=lambda kv: grlex_key(kv[0]))

    # ---------------------------------------------------------------- arithmetic

    def __add__(self, other: "MultiPoly") -> "MultiPoly":
        if not isinstance(other, MultiPoly):
            return NotImplemented
        self._require_same_ring(other)
        out = dict(self.terms)
        for mono, coeff in other.terms.items():
            s = out.get(mono, Fraction(0)) + coeff
            if s:
                out[mono] = s
            else:
                out.pop(mono, None)
        return MultiPoly(self.ring, out)

    def __neg__(self) -> "MultiPoly":
        return MultiPoly(self.ring, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other: "MultiPoly") -> "MultiPoly":
        return self + (-other)

    def __mul__(self, other: "MultiPoly | Fraction | int") -> "MultiPoly":
        if isinstance(other, (Fraction, int)):
            return self.scale(other)
        if not isinstance(other, MultiPoly):
            return NotImplemented
        self._require_same_ring(other)
        out: dict[Monomial, Fraction] = {}
        for ma, ca in self.terms.items():
            for mb, cb in other.terms.items():
                mono = tuple(x + y for x, y in zip(ma, mb))
                s = out.get(mono, Fraction(0)) + ca * cb
                if s:
                    out[mono] = s
                else:
                    out.pop(mono, None)
        return MultiPoly(self.ring, out)

    def __rmul__(self, other: "Fraction | int") -> "MultiPoly":
        if isinstance(other, (Fraction, int)):
            return self.scale(other)
        return NotImplemented

    def scale(self, c: Fraction | int) -> "MultiPoly":
        c = as_fraction(c)
        if c == 0:
            return MultiPoly.zero(self.ring)
        return MultiPoly(self.ring, {m: coeff * c for m, coeff in self.terms.items()})

    def __pow__(self, k: int) -> "MultiPoly":
        if not isinstance(k, int) or k < 0:
            raise ValueError("polynomial powers must be non-negative integers")
        result = MultiPoly.one(self.ring)
        for _ in range(k):
            result = result * self
        return result

    # ---------------------------------------------------------------- maps

    def substitute(self, name: str, replacement: "MultiPoly") -> "MultiPoly":
        """Substitute ``replacement`` for variable ``name``, fully expanded.

        The replacement's ring must contain every ring variable of ``self``
        except ``name``; the result lives in the replacement's ring.
        """
        if name not in self.ring:
            raise RingMismatchError(f"variable {name!r} not in ring {self.ring}")
        target = replacement.ring
        if name in target:
            raise RingMismatchError(f"replacement ring {target} still contains {name!r}")
        missing = [v for v in self.ring if v != name and v not in target]
        if missing:
            raise RingMismatchError(f"replacement ring {target} lacks {missing}")
        idx = self.ring.index(name)
        slot = {v: target.index(v) for v in self.ring if v != name}

        # group by the substituted variable's exponent so powers are reused
        by_exp: dict[int, dict[Monomial, Fraction]] = {}
        for mono, coeff in self.terms.items():
            rest = [0] * len(target)
            for v, e in zip(self.ring, mono):
                if v != name and e:
                    rest[slot[v]] = e
            by_exp.setdefault(mono[idx], {})[tuple(rest)] = (
                by_exp.get(mono[idx], {}).get(tuple(rest), Fraction(0)) + coeff
            )

        result = MultiPoly.zero(target)
        power = MultiPoly.one(target)
        last_e = 0
        for e in sorted(by_exp):
            for _ in range(e - last_e):
                power = power * replacement
            last_e = e
            result = result + MultiPoly(target, by_exp[e]) * power
        return result

    def rename(self, mapping: Mapping[str, str], ring: Sequence[str] | None = None) -> "MultiPoly":
        """Relabel variables; unlisted names keep themselves."""
        new_names = [mapping.get(v, v) for v in self.ring]
        if len(set(new_names)) != len(new_names):
            raise RingMismatchError(f"renaming collides: {new_names}")
        target = tuple(ring) if ring is not None else tuple(new_names)
        pos = {v: target.index(v) for v in new_names}
        out: dict[Monomial, Fraction] = {}
        for mono, coeff in self.terms.items():
            rest = [0] * len(target)
            for v, e in zip(new_names, mono):
                rest[pos[v]] = e
            out[tuple(rest)] = coeff
        return MultiPoly(target, out)

    def extend(self, ring: Sequence[str]) -> "MultiPoly":
        """Reinterpret over a superset ring (variable order may differ)."""
        target = tuple(ring)
        missing = [v for v in self.ring if v not in target]
        if missing:
            raise RingMismatchError(f"target ring lacks {missing}")
        pos = [target.index(v) for v in self.ring]
        out: dict[Monomial, Fraction] = {}
        for mono, coeff in self.terms.items():
            rest = [0] * len(target)
            for p, e in zip(pos, mono):
                rest[p] = e
            out[tuple(rest)] = coeff
        return MultiPoly(target, out)

    def evaluate(self, point: Mapping[str, Fraction | int]) -> Fraction:
        """Exact value at a rational point; every ring variable must be given."""
        vals = [as_fraction(point[v]) for v in self.ring]
        total = Fraction(0)
        for mono, coeff in self.terms.items():
            term = coeff
            for v, e in zip(vals, mono):
                if e:
                    term *= v**e
            total += term
        return total

    # ---------------------------------------------------------------- output

    def canonical_str(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for mono, coeff in self.sorted_terms():
            factors = []
            for v, e in zip(self.ring, mono):
                if e == 1:
                    factors.append(v)
                elif e > 1:
                    factors.append(f"{v}^{e}")
            body = "*".join(factors)
            if not body:
                parts.append(str(coeff))
            elif coeff == 1:
                parts.append(body)
            elif coeff == -1:
                parts.append(f"-{body}")
            else:
                parts.append(f"{coeff}*{body}")
        text = " + ".join(parts)
        return text.replace("+ -", "- ")

    def __str__(self) -> str:
        return self.canonical_str()

    def fingerprint(self) -> str:
        """Stable hash of the canonical form (ring and sorted terms)."""
        h = hashlib.sha256()
        h.update(",".join(self.ring).encode())
        for mono, coeff in self.sorted_terms():
            h.update(b"|")
            h.update(" ".join(map(str, mono)).encode())
            h.update(b":")
            h.update(str(coeff).encode())
        return h.hexdigest()


# -------------------------------------------------------------------- spec ops


def poly_mul(p: MultiPoly, q: MultiPoly) -> MultiPoly:
    """Exact product of two polynomials over the same ring."""
    return p * q


def poly_pow(p: MultiPoly, k: int) -> MultiPoly:
    """Exact k-th power; ``p**0`` is the constant 1."""
    return p**k


def coefficient_of(p: MultiPoly, mono: Monomial) -> Fraction:
    """Coefficient of the given exponent tuple, zero if absent."""
    return p.coefficient(mono)


def substitute(p: MultiPoly, name: str, replacement: MultiPoly) -> MultiPoly:
    """Exact substitution of a polynomial for a variable, fully expanded."""
    return p.substitute(name, replacement)


# ==================================================================== matrices


@dataclass(frozen=True)
class RationalMatrix:
    """Dense matrix of exact rationals."""

    entries: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self) -> None:
        rows = tuple(tuple(as_fraction(x) for x in row) for row in self.entries)
        if rows:
            width = len(rows[0])
            if any(len(r) != width for r in rows):
                raise ValueError("ragged matrix")
        object.__setattr__(self, "entries", rows)

    @classmethod
    def from_rows(cls, rows: Iterable[Iterable[Fraction | int]]) -> "RationalMatrix":
        return cls(tuple(tuple(as_fraction(x) for x in row) for row in rows))

    @classmethod
    def identity(cls, n: int) -> "RationalMatrix":
        return cls.from_rows(
            [[Fraction(1) if i == j else Fraction(0) for j in range(n)] for i in range(n)]
        )

    @property
    def nrows(self) -> int:
        return len(self.entries)

    @property
    def ncols(self) -> int:
        return len(self.entries[0]) if self.entries else 0

    def is_symmetric(self) -> bool:
        if self.nrows != self.ncols:
            return False
        e = self.entries
        return all(e[i][j] == e[j][i] for i in range(self.nrows) for j in range(i))

    def transpose(self) -> "RationalMatrix":
        return RationalMatrix.from_rows(zip(*self.entries)) if self.entries else self

    def matmul(self, other: "RationalMatrix") -> "RationalMatrix":
        if self.ncols != other.nrows:
            raise ValueError("dimension mismatch in matrix product")
        bt = list(zip(*other.entries))
        return RationalMatrix.from_rows(
            [[sum(x * y for x, y in zip(row, col)) for col in bt] for row in self.entries]
        )

    def matvec(self, v: Sequence[Fraction]) -> list[Fraction]:
        if self.ncols != len(v):
            raise ValueError("dimension mismatch in matrix-vector product")
        return [sum(x * y for x, y in zip(row, v)) for row in self.entries]

    def permuted(self, perm: Sequence[int]) -> "RationalMatrix":
        """Symmetric permutation: entry (i, j) of the result is (perm[i], perm[j])."""
        return RationalMatrix.from_rows(
            [[self.entries[pi][pj] for pj in perm] for pi in perm]
        )


@dataclass(frozen=True)
class LdltResult:
    """Exact factorization P' A P = L diag(d) L' with unit lower-triangular L.

    ``complete`` is False only when the factorization stalled on an all-zero
    remaining diagonal with a nonzero off-diagonal residual; that pattern is
    itself proof the matrix is indefinite, so ``is_psd`` is False there.
    """

    perm: tuple[int, ...]
    lower: RationalMatrix
    diag: tuple[Fraction, ...]
    is_psd: bool
    complete: bool


def ldlt(a: RationalMatrix) -> LdltResult:
    """Pivoted exact LDL' of a symmetric rational matrix.

    Pivoting picks the largest remaining nonzero diagonal entry (ties go to
    the lowest index), which keeps the factorization symmetric and makes the
    PSD verdict sound: after a stall-free run the pivot signs carry the
    matrix inertia, and a stall (zero diagonal, nonzero off-diagonal) exhibits
    a 2x2 principal submatrix with negative determinant.
    """
    if not a.is_symmetric():
        raise ValueError("ldlt requires a symmetric matrix")
    n = a.nrows
    m = [list(row) for row in a.entries]
    lower = [[Fraction(1) if i == j else Fraction(0) for j in range(n)] for i in range(n)]
    perm = list(range(n))
    diag: list[Fraction] = [Fraction(0)] * n
    complete = True
    indefinite = False

    for k in range(n):
        pivot_idx = -1
        for i in range(k, n):
            if m[i][i] != 0 and (pivot_idx == -1 or m[i][i] > m[pivot_idx][pivot_idx]):
                pivot_idx = i
        if pivot_idx == -1:
            # remaining diagonal is identically zero
            residual = any(
                m[i][j] != 0 for i in range(k, n) for j in range(k, n) if i != j
            )
            if residual:
                indefinite = True
                complete = False
            break
        if pivot_idx != k:
            perm[k], perm[pivot_idx] = perm[pivot_idx], perm[k]
            m[k], m[pivot_idx] = m[pivot_idx], m[k]
            for row in m:
                row[k], row[pivot_idx] = row[pivot_idx], row[k]
            for j in range(k):
                lower[k][j], lower[pivot_idx][j] = lower[pivot_idx][j], lower[k][j]
        pivot = m[k][k]
        diag[k] = pivot
        if pivot < 0:
            indefinite = True
        for i in range(k + 1, n):
            factor = m[i][k] / pivot
            lower[i][k] = factor
            if factor:
                for j in range(k + 1, n):
                    if m[k][j]:
                        m[i][j] -= factor * m[k][j]
        for j in range(k + 1, n):
            m[k][j] = Fraction(0)
            m[j][k] = Fraction(0)

    return LdltResult(
        perm=tuple(perm),
        lower=RationalMatrix.from_rows(lower),
        diag=tuple(diag),
        is_psd=complete and not indefinite,
        complete=complete,
    )


def solve_linear(a: RationalMatrix, b: Sequence[Fraction | int]) -> list[Fraction] | None:
    """Exact minimum-norm solution of ``a @ x = b``; None when inconsistent.

    Works through the normal equations ``(a a') y = b`` and returns ``a' y``:
    for consistent systems this is the unique minimum-Euclidean-norm solution
    regardless of row redundancy, and the system is inconsistent exactly when
    the normal equations are.
    """
    bvec = [as_fraction(x) for x in b]
    if a.nrows != len(bvec):
        raise ValueError("right-hand side length does not match row count")
    at = list(zip(*a.entries)) if a.entries else []
    gram = [
        [sum(x * y for x, y in zip(ri, rj)) for rj in a.entries] for ri in a.entries
    ]
    y = _gauss_jordan_particular(gram, bvec)
    if y is None:
        return None
    return [sum(col[i] * y[i] for i in range(len(y))) for col in at]


def _gauss_jordan_particular(
    m: list[list[Fraction]], rhs: list[Fraction]
) -> list[Fraction] | None:
    """One exact solution of a square (possibly singular) system, or None."""
    n = len(m)
    aug = [list(row) + [r] for row, r in zip(m, rhs)]
    pivots: list[tuple[int, int]] = []
    row = 0
    for col in range(n):
        sel = next((i for i in range(row, n) if aug[i][col] != 0), None)
        if sel is None:
            continue
        aug[row], aug[sel] = aug[sel], aug[row]
        inv = 1 / aug[row][col]
        aug[row] = [x * inv for x in aug[row]]
        for i in range(n):
            if i != row and aug[i][col] != 0:
                f = aug[i][col]
                aug[i] = [x - f * y for x, y in zip(aug[i], aug[row])]
        pivots.append((row, col))
        row += 1
        if row == n:
            break
    for i in range(row, n):
        if aug[i][n] != 0:
            return None
    x = [Fraction(0)] * n
    for r, c in pivots:
        x[c] = aug[r][n]
    return x
