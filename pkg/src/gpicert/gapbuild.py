"""Gap polynomials for Gaussian product moment inequalities.

The gap for exponents (m_1, ..., m_n) and a construction of (X_1, ..., X_n)
is E[prod X_j^(2 m_j)] minus prod (2 m_j - 1)!! Lambda_jj^(m_j), expanded as
an exact polynomial in the construction's free variables.  Non-negativity of
the gap over all real values of those variables is the product inequality for
that construction.

Certifying the full inequality reduces to degenerate constructions where the
last coordinate is a linear combination of the others: for each such case and
each partial exponent k = 1..m_n one gap polynomial must be non-negative
(strictly positive at k = m_n for the equality characterization), and the
k = 0 obligation is the same inequality one dimension down, which the
certification driver handles by recursing on the shortened exponent vector.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .exactmath import MultiPoly
from .moments import (
    SYMBOLIC_EXPONENT_NAME,
    Construction,
    SymbolicExponent,
    check_exponents,
    covariance_form,
    double_factorial,
    moment_by_coefficient,
    symbolic_moment,
)

SYMBOLIC_BASE_NAME = "p"
CONCRETE_NORMALIZATION = "1"
SYMBOLIC_NORMALIZATION = "2*(2m-1)!!"

_FREE_NAMES = "abcdefghijklnoqrstuvwz"  # skips m, p and x which have fixed roles


@dataclass(frozen=True)
class GapInstance:
    """One certification subproblem: exponents over a concrete construction."""

    exponents: tuple[int, ...]
    construction: Construction
    case_id: int | None = None
    reduction_k: int | None = None
    symbolic: SymbolicExponent | None = None
    strict_required: bool = False

    def label(self) -> str:
        exps = ",".join(str(e) for e in self.exponents)
        if self.symbolic is not None:
            parts = ["m" if i == self.symbolic.coordinate else str(e) for i, e in enumerate(self.exponents)]
            exps = ",".join(parts)
        out = f"gap({exps})"
        if self.case_id is not None:
            out += f" case {self.case_id}"
        return out


@dataclass(frozen=True)
class GapPolynomial:
    """A gap polynomial together with its instance and normalization."""

    instance: GapInstance
    poly: MultiPoly
    normalization: str = CONCRETE_NORMALIZATION


@dataclass(frozen=True)
class SubproblemPlan:
    """Direct SOS obligations plus the shortened exponent vector to recurse on."""

    exponents: tuple[int, ...]
    instances: tuple[GapInstance, ...]
    recurse: tuple[int, ...] | None


def _free_names(count: int) -> list[str]:
    if count <= len(_FREE_NAMES):
        return list(_FREE_NAMES[:count])
    return [f"x{i + 1}" for i in range(count)]


def enumerate_cases(n: int) -> list[Construction]:
    """Degenerate constructions with X_n a linear combination of the others.

    The list walks the rank r of span(X_1, ..., X_{n-1}) downward from n-1.
    Rows 2..r introduce fresh unit directions with free coefficients below;
    rows past r stay inside the span (free on U_1..U_{r-1}, unit on U_r).
    For each rank below n-1 the last row appears in two shapes: sticking out
    into the next unused direction, then lying inside the span.  Case 1 is
    the full-rank shape; the rank-1 ladder is the n = 2 base construction.
    """
    if n < 2:
        raise ValueError("need dimension >= 2")
    if n == 2:
        return [Construction.build([[1, 0], ["a", 0]], label="case1:line")]

    shapes: list[tuple[int, bool, str]] = []
    shapes.append((n - 1, False, f"case1:rank{n - 1}-inspan"))
    case_no = 2
    for r in range(n - 2, 1, -1):
        shapes.append((r, True, f"case{case_no}:rank{r}-newdir"))
        case_no += 1
        shapes.append((r, False, f"case{case_no}:rank{r}-inspan"))
        case_no += 1

    cases = []
    for r, sticks_out, label in shapes:
        grid: list[list[object]] = []
        names = iter(_free_names(n * n))
        grid.append([1] + [0] * (n - 1))
        for k in range(2, n):
            if k <= r:
                row = [next(names) for _ in range(k - 1)] + [1] + [0] * (n - k)
            else:
                row = [next(names) for _ in range(r - 1)] + [1] + [0] * (n - r)
            grid.append(row)
        if sticks_out:
            last = [next(names) for _ in range(r)] + [1] + [0] * (n - r - 1)
        else:
            last = [next(names) for _ in range(r - 1)] + [1] + [0] * (n - r)
        grid.append(last)
        used = [cell for row in grid for cell in row if isinstance(cell, str)]
        cases.append(Construction.build(grid, ring=used, label=label))
    return cases


def independent_construction(n: int) -> Construction:
    """All coordinates on their own directions; the gap vanishes identically."""
    return Construction.build(
        [[1 if i == j else 0 for j in range(n)] for i in range(n)],
        ring=(),
        label="independent",
    )


def full_construction(n: int) -> Construction:
    """Unit lower-triangular construction with all n(n-1)/2 free coefficients."""
    grid: list[list[object]] = []
    for i in range(n):
        row: list[object] = [f"x{i + 1}{j + 1}" for j in range(i)]
        row.append(1)
        row.extend([0] * (n - i - 1))
        grid.append(row)
    return Construction.build(grid, label="full")


def product_term(c: Construction, m: Sequence[int]) -> MultiPoly:
    """prod_k (2 m_k - 1)!! Lambda_kk^(m_k) over the construction variables."""
    out = MultiPoly.one(c.ring)
    for k, e in enumerate(m):
        out = out * c.covariance_entry(k, k) ** e
        out = out.scale(double_factorial(2 * e - 1))
    return out


def build_gap(exponents: Sequence[int], c: Construction, case_id: int | None = None) -> GapPolynomial:
    """Moment minus product term for concrete exponents, fully expanded."""
    m = check_exponents(exponents)
    if len(m) != c.n:
        raise ValueError(f"exponent vector of length {len(m)} for dimension {c.n}")
    poly = moment_by_coefficient(covariance_form(c), m) - product_term(c, m)
    inst = GapInstance(exponents=m, construction=c, case_id=case_id)
    return GapPolynomial(instance=inst, poly=poly, normalization=CONCRETE_NORMALIZATION)


def build_gap_symbolic(
    exponents: Sequence[int | None],
    c: Construction,
    case_id: int | None = None,
    symbolic: SymbolicExponent | None = None,
) -> GapPolynomial:
    """Gap with one exponent symbolic, normalized by 2 (2m-1)!!.

    ``exponents`` carries None in the symbolic slot.  After normalization the
    moment side is polynomial in the exponent symbol; substituting
    m = p^2 + 1 (which sweeps exactly the integers m >= 1 as p^2 sweeps
    m - 1 >= 0) yields the returned polynomial over the construction
    variables plus p, with p in even powers only.
    """
    s = symbolic or SymbolicExponent(coordinate=0)
    exponents = tuple(exponents)
    normalized_moment = symbolic_moment(c, exponents, s)

    fixed = [(j, e) for j, e in enumerate(exponents) if j != s.coordinate]
    prod = MultiPoly.one(c.ring)
    for j, e in fixed:
        prod = prod * c.covariance_entry(j, j) ** e
        prod = prod.scale(double_factorial(2 * e - 1))
    gap_over_df = normalized_moment - prod.extend(normalized_moment.ring)

    p_ring = c.ring + (SYMBOLIC_BASE_NAME,)
    p_var = MultiPoly.variable(p_ring, SYMBOLIC_BASE_NAME)
    replacement = p_var * p_var + MultiPoly.one(p_ring)
    poly = gap_over_df.substitute(SYMBOLIC_EXPONENT_NAME, replacement).scale(Fraction(1, 2))

    placeholder = tuple(1 if e is None else e for e in exponents)
    inst = GapInstance(
        exponents=placeholder, construction=c, case_id=case_id, symbolic=s
    )
    return GapPolynomial(instance=inst, poly=poly, normalization=SYMBOLIC_NORMALIZATION)


def enumerate_subproblems(exponents: Sequence[int]) -> SubproblemPlan:
    """Reduction of the inequality for ``exponents`` to degenerate cases.

    Emits one GapInstance per case construction and per k = 1..m_n (with the
    strictness flag on k = m_n), and reports the shortened exponent vector
    whose inequality discharges the k = 0 obligations.  The recursion bottoms
    out at two dimensions.
    """
    m = check_exponents(exponents)
    n = len(m)
    if n < 2:
        raise ValueError("need at least two exponents")
    instances = []
    for case_id, c in enumerate(enumerate_cases(n), start=1):
        for k in range(1, m[-1] + 1):
            instances.append(
                GapInstance(
                    exponents=m[:-1] + (k,),
                    construction=c,
                    case_id=case_id,
                    reduction_k=k,
                    strict_required=(k == m[-1]),
                )
            )
    recurse = m[:-1] if n > 2 else None
    return SubproblemPlan(exponents=m, instances=tuple(instances), recurse=recurse)


def certification_chain(exponents: Sequence[int]) -> list[SubproblemPlan]:
    """All subproblem plans for an exponent vector, including recursions."""
    plans = []
    todo = check_exponents(exponents)
    while True:
        plan = enumerate_subproblems(todo)
        plans.append(plan)
        if plan.recurse is None:
            return plans
        todo = plan.recurse


def build_strong_gap(n: int, exponents: Sequence[int]) -> MultiPoly:
    """Gap over the full unit-triangular construction in the x_ij variables.

    Only the first coordinate's expectation is a constant here (its row is
    the pure U_1); every other factor keeps its full polynomial expectation.
    This variant is conjectured to be SOS for every dimension and exponent
    choice, which would imply the product inequality outright.
    """
    if n < 3:
        raise ValueError("the strong gap needs dimension >= 3")
    m = check_exponents(exponents)
    if len(m) != n:
        raise ValueError(f"exponent vector of length {len(m)} for dimension {n}")
    return build_gap(m, full_construction(n)).poly
