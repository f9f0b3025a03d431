"""Dense semidefinite feasibility solver for small Gram-matrix problems.

Solves  maximize t  subject to  <A_i, G> = b_i  and  G - t I >= 0  with a
primal-dual interior-point method.  Writing G = S + t I with S >= 0 turns the
problem into a standard-form SDP with one free scalar variable, which the
Newton system carries as a border row.  Iterations use Nesterov-Todd scaling
with a Mehrotra-style adaptive centering parameter, so the path following is
symmetric and deterministic: identical inputs and parameters produce
identical iterates.

The interior-point machinery is float-only by design; exactness enters the
pipeline later, when a rational rounding of the returned G is projected back
onto the constraint set and checked with exact arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

OPTIMAL = "optimal"
NEAR_OPTIMAL = "near_optimal"
INFEASIBLE = "infeasible"
NUMERICAL_FAILURE = "numerical_failure"

DEFAULT_DIM_CAP = 400


@dataclass
class SdpProblem:
    """Margin problem data: trace constraints <A_i, G> = b_i on an N x N Gram."""

    dim: int
    constraints: list[tuple[np.ndarray, float]]

    def validate(self, dim_cap: int = DEFAULT_DIM_CAP) -> None:
        if self.dim < 1:
            raise ValueError("Gram dimension must be positive")
        if self.dim > dim_cap:
            raise ValueError(f"Gram dimension {self.dim} exceeds cap {dim_cap}")
        for a, _ in self.constraints:
            if a.shape != (self.dim, self.dim):
                raise ValueError("constraint matrix has wrong shape")
            if not np.allclose(a, a.T, atol=0.0):
                raise ValueError("constraint matrices must be exactly symmetric")


@dataclass
class SdpSolution:
    G: np.ndarray
    t: float
    primal_residual: float
    duality_gap: float
    status: str
    dual_y: np.ndarray
    iterations: int
    dropped_constraints: int = 0
    kept_indices: list[int] = field(default_factory=list)


def _sym(m: np.ndarray) -> np.ndarray:
    return (m + m.T) / 2.0


def _psd_chol(m: np.ndarray) -> np.ndarray:
    """Cholesky with an eigenvalue-floor fallback for nearly-PSD iterates."""
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        lam, u = np.linalg.eigh(_sym(m))
        lam = np.maximum(lam, 1e-14 * max(1.0, float(lam.max(initial=1.0))))
        return np.linalg.cholesky(_sym(u @ np.diag(lam) @ u.T))


def _nt_scaling(x: np.ndarray, z: np.ndarray) -> np.ndarray:
    """The scaling point W with W Z W = X."""
    lz = _psd_chol(z)
    inner = _sym(lz.T @ x @ lz)
    lam, u = np.linalg.eigh(inner)
    lam = np.maximum(lam, 1e-300)
    sqrt_inner = u @ np.diag(np.sqrt(lam)) @ u.T
    lz_inv = np.linalg.solve(lz, np.eye(len(z)))
    return _sym(lz_inv.T @ sqrt_inner @ lz_inv)


def _max_step(x: np.ndarray, dx: np.ndarray) -> float:
    """Largest alpha with x + alpha dx still PSD (1.0 means a full step fits)."""
    lx = _psd_chol(x)
    s = np.linalg.solve(lx, np.linalg.solve(lx, dx.T).T)
    lam_min = float(np.linalg.eigvalsh(_sym(s)).min())
    if lam_min >= -1e-16:
        return 1.0
    return min(1.0, -1.0 / lam_min)


def _drop_dependent_rows(
    mats: list[np.ndarray], tr: np.ndarray, b: np.ndarray
) -> tuple[list[int], int]:
    """Greedy exact-arithmetic-free rank filter on vectorized constraints."""
    vecs = np.array([np.concatenate([m.reshape(-1), [t]]) for m, t in zip(mats, tr)])
    keep: list[int] = []
    basis: list[np.ndarray] = []
    for i, v in enumerate(vecs):
        w = v.copy()
        for u in basis:
            w = w - np.dot(w, u) * u
        norm = np.linalg.norm(w)
        if norm > 1e-10 * max(1.0, np.linalg.norm(v)):
            basis.append(w / norm)
            keep.append(i)
    return keep, len(mats) - len(keep)


def solve(
    problem: SdpProblem,
    tol: float = 1e-9,
    max_iterations: int = 200,
    step_fraction: float = 0.98,
    dim_cap: int = DEFAULT_DIM_CAP,
) -> SdpSolution:
    """Maximize the minimum-eigenvalue margin t of G subject to the constraints.

    Returns status ``optimal`` when primal/dual residuals and the duality gap
    are all below ``tol`` in relative terms; ``infeasible`` when the problem
    converged to a certifiably negative margin (no PSD G satisfies the
    constraints); ``numerical_failure`` with the best iterate when the
    iteration cap is hit.
    """
    problem.validate(dim_cap)
    n = problem.dim
    mats = [np.asarray(a, dtype=float) for a, _ in problem.constraints]
    b_raw = np.array([float(v) for _, v in problem.constraints])
    tr = np.array([float(np.trace(a)) for a in mats])

    keep, dropped = _drop_dependent_rows(mats, tr, b_raw)
    if dropped:
        mats = [mats[i] for i in keep]
        b_raw = b_raw[keep]
        tr = tr[keep]
    m = len(mats)
    if m == 0:
        # no constraints: margin is unbounded; report a neutral identity
        return SdpSolution(
            G=np.eye(n), t=1.0, primal_residual=0.0, duality_gap=0.0,
            status=OPTIMAL, dual_y=np.zeros(0), iterations=0,
            dropped_constraints=dropped, kept_indices=keep,
        )

    scale = max(1.0, float(np.abs(b_raw).max()))
    b = b_raw / scale

    a_stack = np.stack(mats)

    def apply_a(x: np.ndarray) -> np.ndarray:
        return np.tensordot(a_stack, x, axes=([1, 2], [0, 1]))

    def apply_at(y: np.ndarray) -> np.ndarray:
        return np.tensordot(y, a_stack, axes=(0, 0))

    x = np.eye(n)
    z = np.eye(n)
    y = np.zeros(m)
    t = 0.0

    best: tuple[float, dict] | None = None
    status = NUMERICAL_FAILURE
    it = 0
    for it in range(1, max_iterations + 1):
        rp = b - apply_a(x) - tr * t
        rd = -z - apply_at(y)           # dual residual for the S block (C = 0)
        rf = -1.0 - float(tr @ y)       # dual equality for the free variable
        gap = float(np.tensordot(x, z))
        mu = gap / n

        pobj = -t
        dobj = -float(b @ y)
        err_p = float(np.abs(rp).max()) / (1.0 + float(np.abs(b).max()))
        err_d = max(float(np.abs(rd).max()), abs(rf)) / 2.0
        err_g = gap / (1.0 + abs(pobj) + abs(dobj))
        merit = max(err_p, err_d, err_g)
        if best is None or merit < best[0]:
            best = (merit, dict(x=x, z=z, y=y.copy(), t=t, err_p=err_p, gap=gap))
        if merit <= tol:
            status = OPTIMAL
            break

        w = _nt_scaling(x, z)

        # Schur complement with the free-variable border
        wa = np.array([w @ a @ w for a in mats])
        schur = np.tensordot(wa, a_stack, axes=([1, 2], [1, 2]))
        bordered = np.zeros((m + 1, m + 1))
        bordered[:m, :m] = schur
        bordered[:m, m] = tr
        bordered[m, :m] = tr
        reg = 1e-13 * max(1.0, float(np.trace(schur)) / max(m, 1))
        bordered[:m, :m] += reg * np.eye(m)

        lz = _psd_chol(z)
        z_inv = np.linalg.solve(lz.T, np.linalg.solve(lz, np.eye(n)))

        def newton(rc: np.ndarray):
            rhs = np.concatenate(
                [rp - apply_a(rc) + apply_a(w @ rd @ w), [rf]]
            )
            try:
                sol = np.linalg.solve(bordered, rhs)
            except np.linalg.LinAlgError:
                return None
            dy, dt = sol[:m], float(sol[m])
            dz = rd - apply_at(dy)
            dx = _sym(rc - w @ dz @ w)
            dz = _sym(dz)
            return dx, dz, dy, dt

        pred = newton(-x)
        if pred is None:
            break
        dxa, dza, _, _ = pred
        ap = _max_step(x, dxa)
        ad = _max_step(z, dza)
        gap_aff = float(np.tensordot(x + ap * dxa, z + ad * dza))
        sigma = min(0.8, max(1e-8, (max(gap_aff, 0.0) / gap) ** 3))
        # Mehrotra safeguard: short predictor steps demand more centering
        sigma = max(sigma, min(0.8, (1.0 - min(ap, ad)) ** 3))

        # second-order correction in the complementarity right side
        rc_corr = sigma * mu * z_inv - x - _sym(dxa @ dza @ z_inv)
        corr = newton(rc_corr)
        if corr is None:
            break
        dx, dz, dy, dt = corr
        ap = min(1.0, step_fraction * _max_step(x, dx))
        ad = min(1.0, step_fraction * _max_step(z, dz))
        if min(ap, ad) < 0.05:
            # jammed against the cone boundary: recenter without the corrector
            recenter = newton(0.8 * mu * z_inv - x)
            if recenter is not None:
                dx, dz, dy, dt = recenter
                ap = min(1.0, step_fraction * _max_step(x, dx))
                ad = min(1.0, step_fraction * _max_step(z, dz))
        x = _sym(x + ap * dx)
        z = _sym(z + ad * dz)
        y = y + ad * dy
        t = t + ap * dt

    assert best is not None
    final = best[1]
    x, z, y, t = final["x"], final["z"], final["y"], final["t"]
    if status != OPTIMAL:
        # the Gram matrix is usable whenever primal feasibility and the gap
        # are tight, even if a boundary dual keeps the last digit out of reach
        near = best[0] <= max(1e-6, 1e3 * tol) or (
            final["err_p"] <= 1e-8 and final["gap"] <= 1e-5
        )
        status = NEAR_OPTIMAL if near else NUMERICAL_FAILURE
    if status in (OPTIMAL, NEAR_OPTIMAL) and t < -max(1e-7, 10.0 * tol):
        status = INFEASIBLE

    g = scale * (x + t * np.eye(n))
    return SdpSolution(
        G=_sym(g),
        t=scale * t,
        primal_residual=scale * final["err_p"],
        duality_gap=scale * final["gap"],
        status=status,
        dual_y=y,
        iterations=it,
        dropped_constraints=dropped,
        kept_indices=keep,
    )
