"""Exact mixed moments of centered Gaussian vectors, computed three ways.

A vector (X_1, ..., X_n) is described by a ``Construction``: a grid of exact
coefficients expressing each X_k as a linear combination of independent
standard Gaussians U_1, ..., U_n.  Grid cells may be named free variables, so
every moment below is an exact polynomial in those variables.

The three routes, kept deliberately independent of each other:

* ``moment_by_coefficient`` reads E[prod X_j^(2 m_j)] off a single coefficient
  of the expanded power of the covariance quadratic form, rescaled by
  prod (2 m_j)! / (2^M M!) with M = sum m_j.
* ``moment_by_wick`` sums covariance products over all perfect pairings of
  the individual Gaussian factors (first-unpaired-element recursion with
  aggregation over identical factors), the reference oracle.
* ``symbolic_moment`` leaves one exponent symbolic and returns the moment
  normalized by the double factorial of that coordinate, which is a genuine
  polynomial in the symbolic exponent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .exactmath import Monomial, MultiPoly, as_fraction

SYMBOLIC_EXPONENT_NAME = "m"


class PairingBudgetError(RuntimeError):
    """The requested Wick enumeration exceeds the configured factor budget."""


def check_exponents(m: Sequence[int]) -> tuple[int, ...]:
    m = tuple(m)
    if not m:
        raise ValueError("exponent vector must be non-empty")
    if any(not isinstance(e, int) or e < 1 for e in m):
        raise ValueError(f"exponents must be integers >= 1, got {m}")
    return m


def double_factorial(k: int) -> int:
    """k!! for odd k >= -1, with (-1)!! = 1 by the empty-product convention."""
    if not isinstance(k, int) or k < -1 or k % 2 == 0:
        raise ValueError(f"double factorial needs an odd integer >= -1, got {k}")
    out = 1
    while k > 1:
        out *= k
        k -= 2
    return out


# ------------------------------------------------------------------ constructions


@dataclass(frozen=True)
class Construction:
    """Coefficient grid writing X_k = sum_j entries[k][j] * U_j.

    Diagonal entries of the generated cases are the constant 1: rescaling any
    X_k only rescales its moments by an even power of the factor, so unit
    new-direction coefficients lose no generality.
    """

    ring: tuple[str, ...]
    entries: tuple[tuple[MultiPoly, ...], ...]
    label: str = ""

    def __post_init__(self) -> None:
        n = len(self.entries)
        if any(len(row) != n for row in self.entries):
            raise ValueError("construction grid must be square")
        for row in self.entries:
            for cell in row:
                if cell.ring != self.ring:
                    raise ValueError("construction cell over a different ring")

    @property
    def n(self) -> int:
        return len(self.entries)

    @classmethod
    def build(
        cls,
        grid: Sequence[Sequence[Fraction | int | str]],
        ring: Sequence[str] | None = None,
        label: str = "",
    ) -> "Construction":
        """Build from a grid of rational constants and variable names.

        Each named variable may appear in exactly one cell; the ring defaults
        to the names in row-major reading order.
        """
        names: list[str] = []
        for row in grid:
            for cell in row:
                if isinstance(cell, str):
                    if cell in names:
                        raise ValueError(f"variable {cell!r} used in two cells")
                    names.append(cell)
        ring = tuple(ring) if ring is not None else tuple(names)
        rows = []
        for row in grid:
            cells = []
            for cell in row:
                if isinstance(cell, str):
                    cells.append(MultiPoly.variable(ring, cell))
                else:
                    cells.append(MultiPoly.constant(ring, as_fraction(cell)))
            cells.extend(
                MultiPoly.zero(ring) for _ in range(len(grid) - len(cells))
            )
            rows.append(tuple(cells))
        return cls(ring, tuple(rows), label=label)

    def covariance_entry(self, k: int, l: int) -> MultiPoly:
        total = MultiPoly.zero(self.ring)
        for j in range(self.n):
            total = total + self.entries[k][j] * self.entries[l][j]
        return total

    def scale_row(self, k: int, factor: Fraction | int) -> "Construction":
        rows = [list(row) for row in self.entries]
        rows[k] = [cell.scale(factor) for cell in rows[k]]
        return Construction(self.ring, tuple(tuple(r) for r in rows), label=self.label)

    def is_pure_basis_row(self, k: int) -> bool:
        one = MultiPoly.one(self.ring)
        return self.entries[k][k] == one and all(
            self.entries[k][j].is_zero() for j in range(self.n) if j != k
        )


@dataclass(frozen=True)
class CovarianceForm:
    """Symmetric grid of covariance polynomials Lambda[k][l] = Cov(X_k, X_l)."""

    ring: tuple[str, ...]
    entries: tuple[tuple[MultiPoly, ...], ...]

    def __post_init__(self) -> None:
        n = len(self.entries)
        if any(len(row) != n for row in self.entries):
            raise ValueError("covariance grid must be square")
        for i in range(n):
            for j in range(i):
                if self.entries[i][j] != self.entries[j][i]:
                    raise ValueError("covariance grid must be symmetric")

    @property
    def n(self) -> int:
        return len(self.entries)


def covariance_form(c: Construction) -> CovarianceForm:
    """Covariance polynomials of a construction: Lambda_kl = sum_j x_kj x_lj."""
    grid = tuple(
        tuple(c.covariance_entry(k, l) for l in range(c.n)) for k in range(c.n)
    )
    return CovarianceForm(c.ring, grid)


def symbolic_covariance(n: int) -> CovarianceForm:
    """Fully symbolic symmetric covariance form with entries s{k}{l}, k >= l."""
    names = [f"s{k + 1}{l + 1}" for k in range(n) for l in range(k + 1)]
    ring = tuple(names)
    grid = [
        [
            MultiPoly.variable(ring, f"s{max(k, l) + 1}{min(k, l) + 1}")
            for l in range(n)
        ]
        for k in range(n)
    ]
    return CovarianceForm(ring, tuple(tuple(row) for row in grid))


@dataclass(frozen=True)
class SymbolicExponent:
    """Marks one coordinate as carrying the symbolic exponent.

    The marked coordinate's construction row must be a pure basis row, so the
    symbolic powers fall on a single standard Gaussian.  ``normalized`` states
    that results are divided by (2m-1)!!; the unnormalized moment is not a
    polynomial in the exponent, so the flag must stay True.
    """

    coordinate: int = 0
    normalized: bool = True


# ------------------------------------------------------------------ concrete moments


def moment_by_coefficient(cov: CovarianceForm, m: Sequence[int]) -> MultiPoly:
    """E[prod X_j^(2 m_j)] via coefficient extraction from the covariance form.

    The coefficient of t_1^(2m_1)...t_n^(2m_n) in (sum_kl Lambda_kl t_k t_l)^M
    is accumulated directly by enumerating exponent assignments over the pairs
    k <= l, never materializing the t-expansion.
    """
    m = check_exponents(m)
    n = cov.n
    if len(m) != n:
        raise ValueError(f"exponent vector of length {len(m)} for dimension {n}")
    big_m = sum(m)
    ring = cov.ring

    pairs: list[tuple[int, int, MultiPoly]] = []
    for k in range(n):
        for l in range(k, n):
            base = cov.entries[k][l]
            pairs.append((k, l, base if k == l else base.scale(2)))

    total = MultiPoly.zero(ring)
    target = [2 * e for e in m]
    m_factorial = math.factorial(big_m)

    def recurse(idx: int, remaining: list[int], used: int, multi: int, prod: MultiPoly) -> None:
        nonlocal total
        if idx == len(pairs):
            if all(r == 0 for r in remaining):
                total = total + prod.scale(Fraction(m_factorial, multi))
            return
        k, l, q = pairs[idx]
        if k == l:
            cap = remaining[k] // 2
        else:
            cap = min(remaining[k], remaining[l])
        cap = min(cap, big_m - used)
        power = prod
        for count in range(cap + 1):
            if count:
                power = power * q
                remaining[k] -= 1
                remaining[l] -= 1  # same slot twice when k == l
            recurse(idx + 1, remaining, used + count, multi * math.factorial(count), power)
        remaining[k] += cap
        remaining[l] += cap

    recurse(0, target, 0, 1, MultiPoly.one(ring))

    scale = Fraction(
        math.prod(math.factorial(2 * e) for e in m),
        2**big_m * m_factorial,
    )
    return total.scale(scale)


def wick_moment(c: Construction, degrees: Sequence[int], budget: int = 24) -> MultiPoly:
    """E[prod X_j^(d_j)] by summing covariance products over perfect pairings.

    Identical factors are aggregated, so the recursion runs over the vector of
    unpaired counts instead of the (total-1)!! individual matchings; the
    budget still caps the total factor count to keep worst cases at desk
    scale.
    """
    degrees = tuple(degrees)
    if any(d < 0 for d in degrees):
        raise ValueError("factor counts must be non-negative")
    total_factors = sum(degrees)
    if total_factors > budget:
        raise PairingBudgetError(
            f"{total_factors} Gaussian factors exceed the pairing budget of {budget}"
        )
    n = c.n
    if len(degrees) != n:
        raise ValueError(f"degree vector of length {len(degrees)} for dimension {n}")
    ring = c.ring
    cov = [[c.covariance_entry(k, l) for l in range(n)] for k in range(n)]
    memo: dict[tuple[int, ...], MultiPoly] = {}

    def pairings(rem: tuple[int, ...]) -> MultiPoly:
        if rem in memo:
            return memo[rem]
        first = next((j for j, r in enumerate(rem) if r), None)
        if first is None:
            out = MultiPoly.one(ring)
        else:
            out = MultiPoly.zero(ring)
            base = list(rem)
            base[first] -= 1
            for partner in range(n):
                avail = base[partner]
                if avail == 0:
                    continue
                nxt = list(base)
                nxt[partner] -= 1
                out = out + cov[first][partner].scale(avail) * pairings(tuple(nxt))
        memo[rem] = out
        return out

    return pairings(tuple(degrees))


def moment_by_wick(c: Construction, m: Sequence[int], budget: int = 24) -> MultiPoly:
    """Oracle value of E[prod X_j^(2 m_j)] by perfect-pairing enumeration."""
    m = check_exponents(m)
    return wick_moment(c, [2 * e for e in m], budget=budget)


# ------------------------------------------------------------------ symbolic moments


def rising_odd_product(k: int, ring: tuple[str, ...]) -> MultiPoly:
    """prod_{i=1..k} (2m + 2i - 1) over a ring containing the exponent symbol."""
    out = MultiPoly.one(ring)
    mvar = MultiPoly.variable(ring, SYMBOLIC_EXPONENT_NAME)
    for i in range(1, k + 1):
        out = out * (mvar.scale(2) + MultiPoly.constant(ring, 2 * i - 1))
    return out


def symbolic_moment(
    c: Construction,
    exponents: Sequence[int | None],
    s: SymbolicExponent,
) -> MultiPoly:
    """E[prod X_j^(2 m_j)] / (2m - 1)!! with coordinate ``s.coordinate`` symbolic.

    ``exponents`` lists the concrete exponents with ``None`` in the symbolic
    slot.  The result is an exact polynomial over the construction variables
    plus the exponent symbol, using E[U^(2m+2k)]/(2m-1)!! = prod (2m + 2i - 1).
    """
    if not s.normalized:
        raise ValueError("unnormalized symbolic moments are not polynomial in the exponent")
    exponents = tuple(exponents)
    n = c.n
    if len(exponents) != n:
        raise ValueError(f"exponent vector of length {len(exponents)} for dimension {n}")
    sym = s.coordinate
    if not 0 <= sym < n:
        raise ValueError(f"symbolic coordinate {sym} out of range")
    if exponents[sym] is not None:
        raise ValueError("the symbolic coordinate's entry must be None")
    fixed = [(j, e) for j, e in enumerate(exponents) if j != sym]
    if any(e is None or e < 1 for _, e in fixed):
        raise ValueError("concrete exponents must be integers >= 1")
    if not c.is_pure_basis_row(sym):
        raise ValueError(
            "symbolic coordinate requires a pure basis row (unit on its own U, zeros elsewhere)"
        )
    if SYMBOLIC_EXPONENT_NAME in c.ring:
        raise ValueError(f"construction ring already uses {SYMBOLIC_EXPONENT_NAME!r}")

    u_names = [f"u{i + 1}" for i in range(n)]
    if set(u_names) & set(c.ring):
        raise ValueError("construction ring collides with internal factor names")
    work_ring = c.ring + tuple(u_names)

    product = MultiPoly.one(work_ring)
    for j, e in fixed:
        row = MultiPoly.zero(work_ring)
        for i in range(n):
            cell = c.entries[j][i]
            if not cell.is_zero():
                row = row + cell.extend(work_ring) * MultiPoly.variable(work_ring, u_names[i])
        product = product * row**(2 * e)

    out_ring = c.ring + (SYMBOLIC_EXPONENT_NAME,)
    nvars = len(c.ring)
    total = MultiPoly.zero(out_ring)
    rising_cache: dict[int, MultiPoly] = {}
    for mono, coeff in product.terms.items():
        alphas = mono[nvars:]
        if any(a % 2 for a in alphas):
            continue
        weight = Fraction(coeff)
        for i, a in enumerate(alphas):
            if i != sym and a:
                weight *= double_factorial(a - 1)
        k = alphas[sym] // 2
        if k not in rising_cache:
            rising_cache[k] = rising_odd_product(k, out_ring)
        base: Monomial = mono[:nvars] + (0,)
        total = total + rising_cache[k] * MultiPoly.monomial(out_ring, base, weight)
    return total
