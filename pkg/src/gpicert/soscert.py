"""End-to-end exact sums-of-squares certification.

The pipeline: choose a monomial basis from the target's Newton polytope,
assemble the linear Gram constraints, solve the margin SDP in floats, round
the Gram matrix to rationals and project it exactly back onto the constraint
set, factor it exactly, and expand the resulting squares to confirm they
reproduce the target identically.  Nothing returned by ``certify`` depends on
floating point: the float solve only proposes a candidate.

Failure is split deliberately: a rationalized dual certificate that checks
out in exact arithmetic proves the target is not a sum of squares
(``NotSumOfSquaresError``), while exhausting the rounding ladder proves
nothing and surfaces as ``CertificationInconclusiveError`` since a rational
SOS polynomial need not admit a rational Gram certificate over a given basis.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from itertools import product as iter_product

import numpy as np

from . import sdp
from .exactmath import (
    Monomial,
    MultiPoly,
    RationalMatrix,
    ldlt,
)

STRICT_CONSTANT_SQUARE = "strict_constant_square"
STRICT_EPSILON_SHIFT = "strict_epsilon_shift"
NONNEG_ONLY = "nonneg_only"


class NotSumOfSquaresError(ValueError):
    """The target is certifiably not a sum of squares."""


class CertificationInconclusiveError(RuntimeError):
    """Certification failed without proof either way (rounding exhausted)."""


class BasisInsufficientError(ValueError):
    """A target monomial is not a product of two basis monomials."""

    def __init__(self, monomial: Monomial):
        super().__init__(f"monomial {monomial} is not representable over the basis")
        self.monomial = monomial


class IndefiniteGramError(ValueError):
    """Square extraction was asked for an indefinite Gram matrix."""


@dataclass(frozen=True)
class GramBasis:
    """Graded-lex ordered candidate monomials for the squares."""

    ring: tuple[str, ...]
    monomials: tuple[Monomial, ...]

    def __len__(self) -> int:
        return len(self.monomials)


@dataclass(frozen=True)
class GramSystem:
    """Linear identification of Gram matrices G with z' G z = F.

    Every unknown entry (i, j) appears in exactly one constraint, the one for
    its product monomial z_i * z_j; ``pairs`` lists the i <= j entries per
    product and ``rhs`` the target coefficient (zero when F lacks the term).
    """

    basis: GramBasis
    pairs: dict[Monomial, list[tuple[int, int]]]
    rhs: dict[Monomial, Fraction]


@dataclass(frozen=True)
class SosCertificate:
    """Positive rational weights and rational polynomials with sum c_i f_i^2."""

    target_fingerprint: str
    terms: tuple[tuple[Fraction, MultiPoly], ...]
    basis: GramBasis | None = None
    provenance: str = "solver"


@dataclass(frozen=True)
class StrictnessVerdict:
    kind: str
    epsilon: Fraction | None = None

    def describe(self) -> str:
        if self.kind == STRICT_EPSILON_SHIFT:
            return f"{self.kind} {self.epsilon}"
        return self.kind


@dataclass
class CertifyOptions:
    denominator_ladder: tuple[int, ...] = (10**3, 10**6, 10**9, 10**12)
    sdp_tol_ladder: tuple[float, ...] = (1e-9, 1e-12)
    sdp_iterations: int = 200
    max_basis: int = 400
    use_newton_polytope: bool = True
    epsilon_floor: Fraction = Fraction(1, 10**6)
    time_budget: float | None = None
    refusal_denominators: tuple[int, ...] = (10**3, 10**6, 10**9)


# ------------------------------------------------------------------ basis


def _point_in_hull(points: list[Monomial], target: tuple[int, ...]) -> bool:
    """Exact test for target in conv(points) via phase-1 simplex with Bland's rule."""
    if target in points:
        return True
    nvars = len(target)
    rows = nvars + 1
    cols = len(points)
    # equality system: sum lambda_s * [s; 1] = [target; 1], lambda >= 0
    a = [[Fraction(p[r]) for p in points] for r in range(nvars)]
    a.append([Fraction(1)] * cols)
    b = [Fraction(t) for t in target] + [Fraction(1)]
    for r in range(rows):
        if b[r] < 0:
            a[r] = [-x for x in a[r]]
            b[r] = -b[r]
    # artificial basis
    tableau = [a[r] + [Fraction(1) if i == r else Fraction(0) for i in range(rows)] + [b[r]] for r in range(rows)]
    cost = [Fraction(0)] * cols + [Fraction(1)] * rows + [Fraction(0)]
    basis = list(range(cols, cols + rows))
    # reduced costs for phase-1 objective
    obj = [sum(tableau[r][c] for r in range(rows)) for c in range(cols + rows + 1)]
    total = cols + rows
    while True:
        enter = next(
            (c for c in range(total) if c not in basis and obj[c] > 0), None
        )
        if enter is None:
            break
        ratios = [
            (tableau[r][total] / tableau[r][enter], r)
            for r in range(rows)
            if tableau[r][enter] > 0
        ]
        if not ratios:
            break  # unbounded cannot happen in phase 1; defensive
        _, leave = min(ratios, key=lambda rr: (rr[0], basis[rr[1]]))
        piv = tableau[leave][enter]
        tableau[leave] = [x / piv for x in tableau[leave]]
        for r in range(rows):
            if r != leave and tableau[r][enter] != 0:
                f = tableau[r][enter]
                tableau[r] = [x - f * y for x, y in zip(tableau[r], tableau[leave])]
        f = obj[enter]
        obj = [x - f * y for x, y in zip(obj, tableau[leave])]
        basis[leave] = enter
    infeas = sum(tableau[r][total] for r in range(rows) if basis[r] >= cols)
    return infeas == 0


def full_degree_basis(ring: tuple[str, ...], half_degree: int) -> GramBasis:
    """Every monomial of total degree at most ``half_degree``."""
    monos = [
        m
        for m in iter_product(*[range(half_degree + 1)] * len(ring))
        if sum(m) <= half_degree
    ]
    monos.sort(key=lambda m: (sum(m), tuple(-e for e in m)))
    return GramBasis(ring, tuple(monos))


def select_basis(f: MultiPoly, use_newton_polytope: bool = True) -> GramBasis:
    """Candidate square support: lattice points u with 2u in Newton(f).

    Refuses immediately on parity obstructions (odd total degree, or an odd
    top degree in some variable), which already rule out any SOS form.  With
    the polytope rule disabled the fallback is the full basis of half the
    total degree.
    """
    if f.is_zero():
        return GramBasis(f.ring, ())
    deg = f.total_degree()
    if deg % 2:
        raise NotSumOfSquaresError(f"total degree {deg} is odd")
    for v in f.ring:
        dv = f.degree_of(v)
        if dv % 2:
            raise NotSumOfSquaresError(f"top degree of {v} is odd ({dv})")
    if not use_newton_polytope:
        return full_degree_basis(f.ring, deg // 2)

    support = list(f.terms)
    box = [max(s[i] for s in support) // 2 for i in range(len(f.ring))]
    lo_total = min(sum(s) for s in support)
    hi_total = max(sum(s) for s in support)
    monos = []
    for cand in iter_product(*[range(b + 1) for b in box]):
        doubled = tuple(2 * e for e in cand)
        if not lo_total <= sum(doubled) <= hi_total:
            continue
        if _point_in_hull(support, doubled):
            monos.append(cand)
    monos.sort(key=lambda m: (sum(m), tuple(-e for e in m)))
    return GramBasis(f.ring, tuple(monos))


# ------------------------------------------------------------------ gram system


def build_gram_system(f: MultiPoly, basis: GramBasis) -> GramSystem:
    """Constraints identifying symmetric G with z' G z = f over the basis."""
    if basis.ring != f.ring:
        raise ValueError("basis ring does not match the target ring")
    pairs: dict[Monomial, list[tuple[int, int]]] = {}
    z = basis.monomials
    for i in range(len(z)):
        for j in range(i, len(z)):
            mu = tuple(a + b for a, b in zip(z[i], z[j]))
            pairs.setdefault(mu, []).append((i, j))
    for mono in f.terms:
        if mono not in pairs:
            raise BasisInsufficientError(mono)
    rhs = {mu: f.coefficient(mu) for mu in pairs}
    return GramSystem(basis=basis, pairs=pairs, rhs=rhs)


def gram_constraint_matrices(system: GramSystem) -> list[tuple[Monomial, np.ndarray, float]]:
    """Float view of the constraints for the SDP: (product, A, b) triples."""
    n = len(system.basis)
    out = []
    for mu in sorted(system.pairs, key=lambda m: (sum(m), tuple(-e for e in m))):
        a = np.zeros((n, n))
        for i, j in system.pairs[mu]:
            a[i, j] = 1.0
            a[j, i] = 1.0
        out.append((mu, a, float(system.rhs[mu])))
    return out


def system_satisfied(g: RationalMatrix, system: GramSystem) -> bool:
    for mu, entries in system.pairs.items():
        total = Fraction(0)
        for i, j in entries:
            total += g.entries[i][j] * (1 if i == j else 2)
        if total != system.rhs[mu]:
            return False
    return True


# ------------------------------------------------------------------ rounding


def round_and_project(
    g_float: np.ndarray, system: GramSystem, denom_bound: int
) -> RationalMatrix:
    """Nearest exactly-feasible rational Gram matrix to a float candidate.

    Entrywise rational approximation with denominators up to the bound is
    followed by the exact orthogonal projection onto the affine constraint
    set.  Because each Gram entry appears in exactly one constraint, the
    normal equations of the projection decouple into one scalar equation per
    product monomial: the deficit is spread uniformly over the ordered-pair
    multiplicity.  (The general minimum-norm route through ``solve_linear``
    agrees; the property tests cross-check the two.)
    """
    n = len(system.basis)
    if g_float.shape != (n, n):
        raise ValueError("Gram candidate has wrong shape")
    if not np.isfinite(g_float).all():
        raise ValueError("Gram candidate contains non-finite entries")
    g = [[Fraction(0)] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            val = Fraction(float((g_float[i, j] + g_float[j, i]) / 2.0))
            val = val.limit_denominator(denom_bound)
            g[i][j] = val
            g[j][i] = val
    for mu, entries in system.pairs.items():
        multiplicity = sum(1 if i == j else 2 for i, j in entries)
        current = sum(g[i][j] * (1 if i == j else 2) for i, j in entries)
        deficit = system.rhs[mu] - current
        if deficit:
            if not entries:
                raise ValueError(f"constraint {mu} has no Gram entries")
            step = deficit / multiplicity
            for i, j in entries:
                g[i][j] += step
                if i != j:
                    g[j][i] = g[i][j]
    projected = RationalMatrix.from_rows(g)
    if not system_satisfied(projected, system):
        raise ValueError("projection failed to reach the constraint set")
    return projected


# ------------------------------------------------------------------ extraction


def basis_poly(basis: GramBasis, index: int) -> MultiPoly:
    return MultiPoly.monomial(basis.ring, basis.monomials[index])


def extract_sos(g: RationalMatrix, basis: GramBasis) -> SosCertificate:
    """Exact squares from a PSD rational Gram matrix via pivoted LDL'.

    Writing P' G P = L diag(d) L', each positive pivot d_i contributes the
    square d_i * f_i^2 with f_i the i-th entry of L' P' z; zero pivots drop
    out.  The expansion sum c_i f_i^2 equals z' G z identically.
    """
    res = ldlt(g)
    if not res.is_psd:
        raise IndefiniteGramError("Gram matrix is not positive semidefinite")
    n = len(basis)
    terms = []
    expansion = MultiPoly.zero(basis.ring)
    for i in range(n):
        if res.diag[i] == 0:
            continue
        f = MultiPoly.zero(basis.ring)
        for j in range(n):
            coeff = res.lower.entries[j][i]
            if coeff:
                f = f + basis_poly(basis, res.perm[j]).scale(coeff)
        if f.is_zero():
            continue
        terms.append((res.diag[i], f))
        expansion = expansion + (f * f).scale(res.diag[i])
    return SosCertificate(
        target_fingerprint=expansion.fingerprint(),
        terms=tuple(terms),
        basis=basis,
        provenance="solver",
    )


# ------------------------------------------------------------------ verification


def certificate_expansion(cert: SosCertificate, ring: tuple[str, ...]) -> MultiPoly:
    total = MultiPoly.zero(ring)
    for c, f in cert.terms:
        total = total + (f * f).scale(c)
    return total


def first_mismatch(cert: SosCertificate, f: MultiPoly):
    """(monomial, expanded, expected) for the first differing term, or None."""
    diff = certificate_expansion(cert, f.ring) - f
    if diff.is_zero():
        return None
    mono = min(diff.terms, key=lambda m: (sum(m), tuple(-e for e in m)))
    return mono, f.coefficient(mono) + diff.terms[mono], f.coefficient(mono)


def verify_certificate(cert: SosCertificate, f: MultiPoly) -> bool:
    """True iff all weights are positive and sum c_i f_i^2 equals f exactly."""
    if any(c <= 0 for c, _ in cert.terms):
        return False
    if any(poly.ring != f.ring for _, poly in cert.terms):
        return False
    return certificate_expansion(cert, f.ring) == f


# ------------------------------------------------------------------ pipeline


class _Budget:
    def __init__(self, seconds: float | None):
        self.deadline = None if seconds is None else time.monotonic() + seconds

    def check(self, stage: str) -> None:
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise CertificationInconclusiveError(f"time budget exhausted during {stage}")


def _try_exact_refusal(
    system: GramSystem,
    ordered: list[tuple[Monomial, np.ndarray, float]],
    dual_y: np.ndarray,
    kept: list[int],
    denominators: tuple[int, ...],
) -> bool:
    """Check a rationalized dual vector as an exact non-SOS certificate.

    The functional y refutes every Gram matrix when sum_i y_i b_i > 0 while
    -sum_i y_i A_i is PSD: any feasible G would give the same positive value
    to a nonpositive quantity.  Both conditions are checked in exact
    arithmetic against the exact right-hand sides.
    """
    n = len(system.basis)
    if len(kept) != len(dual_y):
        return False
    for denom in denominators:
        y = [Fraction(float(v)).limit_denominator(denom) for v in dual_y]
        value = Fraction(0)
        m_entries = [[Fraction(0)] * n for _ in range(n)]
        for yk, idx in zip(y, kept):
            mu, _, _ = ordered[idx]
            value += yk * system.rhs[mu]
            for i, j in system.pairs[mu]:
                m_entries[i][j] -= yk
                if i != j:
                    m_entries[j][i] -= yk
        if value <= 0:
            continue
        if ldlt(RationalMatrix.from_rows(m_entries)).is_psd:
            return True
    return False


def certify(f: MultiPoly, opts: CertifyOptions | None = None) -> SosCertificate:
    """Full exact certification loop for one target polynomial.

    Returns a verified certificate, raises ``NotSumOfSquaresError`` with an
    exact dual certificate when the target is provably not SOS, and raises
    ``CertificationInconclusiveError`` when budgets run out without proof.
    """
    opts = opts or CertifyOptions()
    budget = _Budget(opts.time_budget)

    if f.is_zero():
        return SosCertificate(target_fingerprint=f.fingerprint(), terms=())

    basis = select_basis(f, use_newton_polytope=opts.use_newton_polytope)
    if len(basis) > opts.max_basis:
        raise CertificationInconclusiveError(
            f"basis of {len(basis)} monomials exceeds the configured cap {opts.max_basis}"
        )
    try:
        system = build_gram_system(f, basis)
    except BasisInsufficientError as exc:
        if opts.use_newton_polytope:
            # the Newton basis is exact: unrepresentable support proves non-SOS
            raise NotSumOfSquaresError(str(exc)) from exc
        raise

    ordered = gram_constraint_matrices(system)
    problem = sdp.SdpProblem(
        dim=len(basis), constraints=[(a, b) for _, a, b in ordered]
    )

    last_failure = "no attempt"
    for tol in opts.sdp_tol_ladder:
        budget.check("sdp solve")
        sol = sdp.solve(
            problem,
            tol=tol,
            max_iterations=opts.sdp_iterations,
            dim_cap=max(opts.max_basis, len(basis)),
        )
        kept = sol.kept_indices
        if sol.status == sdp.INFEASIBLE:
            budget.check("dual refusal")
            if _try_exact_refusal(system, ordered, sol.dual_y, kept, opts.refusal_denominators):
                raise NotSumOfSquaresError(
                    "exact dual certificate: no PSD Gram matrix fits the target"
                )
            last_failure = "numerically infeasible without an exact dual certificate"
            continue
        if sol.status == sdp.NUMERICAL_FAILURE and sol.primal_residual > 1e-4:
            last_failure = "SDP made no usable progress"
            continue
        for denom in opts.denominator_ladder:
            budget.check("rounding")
            try:
                g = round_and_project(sol.G, system, denom)
            except ValueError:
                last_failure = "rounding produced an unusable matrix"
                continue
            if not ldlt(g).is_psd:
                last_failure = f"rounded Gram indefinite at denominator bound {denom}"
                continue
            cert = extract_sos(g, basis)
            cert = replace(cert, target_fingerprint=f.fingerprint())
            if not verify_certificate(cert, f):
                # cannot happen if the projection is exact; treat as failure
                last_failure = "extracted certificate failed exact verification"
                continue
            return cert
    raise CertificationInconclusiveError(last_failure)


def check_strictness(
    cert: SosCertificate, f: MultiPoly, opts: CertifyOptions | None = None
) -> StrictnessVerdict:
    """Classify how the certificate witnesses positivity.

    A nonzero constant square bounds f away from zero everywhere.  Otherwise
    strictness is attempted by re-certifying f - epsilon down a decimal
    ladder; exhausting the ladder leaves only the nonnegativity verdict.
    """
    if not verify_certificate(cert, f):
        raise ValueError("strictness analysis requires a verified certificate")
    for c, poly in cert.terms:
        if poly.total_degree() == 0 and not poly.is_zero():
            return StrictnessVerdict(kind=STRICT_CONSTANT_SQUARE)
    opts = opts or CertifyOptions()
    eps = Fraction(1)
    while eps >= opts.epsilon_floor:
        shifted = f - MultiPoly.constant(f.ring, eps)
        try:
            certify(shifted, opts)
            return StrictnessVerdict(kind=STRICT_EPSILON_SHIFT, epsilon=eps)
        except (NotSumOfSquaresError, CertificationInconclusiveError):
            eps = eps / 10
    return StrictnessVerdict(kind=NONNEG_ONLY)
