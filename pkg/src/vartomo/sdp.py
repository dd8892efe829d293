"""Conic problem container and operator-splitting solver.

One Hermitian PSD block (the process-matrix candidate), one block of
nonnegative scalars (the per-measurement noise slacks), a linear
objective, two-sided linear inequalities, and optional equalities.
The variable vector is ``[svec(X) || slacks]``.

The solver is ADMM with PSD projection (see :mod:`vartomo._kernels`).
Infeasibility is reported heuristically: the primal residual stalls far
from the tolerance while the dual residual settles, which is how the
alternating projections behave on an empty feasible set.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Callable, TextIO

import numpy as np

from . import linalg, tolerances as tol
from ._kernels import default_backend, get_loop
from .channels import OperatorBasis


class SolveStatus(enum.Enum):
    OPTIMAL = "optimal"
    MAX_ITER = "max_iter"
    INFEASIBLE = "infeasible"


@dataclass
class SdpProblem:
    """Standard-form container; rows are appended by the builders."""

    psd_dim: int
    n_slack: int
    objective: np.ndarray = field(default=None)  # type: ignore[assignment]
    inequalities: list[tuple[np.ndarray, float, float]] = field(default_factory=list)
    equalities: list[tuple[np.ndarray, float]] = field(default_factory=list)
    slack_caps: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.psd_dim < 0 or self.n_slack < 0:
            raise ValueError("negative block sizes")
        if self.objective is None:
            self.objective = np.zeros(self.n_vars)
        self.objective = np.asarray(self.objective, dtype=float)
        if self.objective.shape != (self.n_vars,):
            raise ValueError(f"objective must have length {self.n_vars}")
        if self.slack_caps is None:
            self.slack_caps = np.full(self.n_slack, np.inf)
        self.slack_caps = np.asarray(self.slack_caps, dtype=float)
        if self.slack_caps.shape != (self.n_slack,):
            raise ValueError("one cap per slack")

    @property
    def n_vars(self) -> int:
        return self.psd_dim**2 + self.n_slack

    def _check_row(self, vec: np.ndarray) -> np.ndarray:
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (self.n_vars,):
            raise ValueError(f"coefficient vector must have length {self.n_vars}")
        return vec

    def add_inequality(self, vec: np.ndarray, lower: float, upper: float) -> None:
        if lower > upper:
            raise ValueError(f"empty interval [{lower}, {upper}]")
        self.inequalities.append((self._check_row(vec), float(lower), float(upper)))

    def add_equality(self, vec: np.ndarray, value: float) -> None:
        self.equalities.append((self._check_row(vec), float(value)))

    def cap_slack(self, index: int, cap: float) -> None:
        self.slack_caps[index] = min(self.slack_caps[index], cap)

    def chi_row(self, chi_coeffs: np.ndarray) -> np.ndarray:
        """Embed a psd-block coefficient vector into full variable coordinates."""
        chi_coeffs = np.asarray(chi_coeffs, dtype=float)
        if chi_coeffs.shape != (self.psd_dim**2,):
            raise ValueError("chi coefficient vector has wrong length")
        return np.concatenate([chi_coeffs, np.zeros(self.n_slack)])

    def stacked_rows(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All box rows (inequalities then equalities) as (A, lower, upper)."""
        rows = [v for v, _, _ in self.inequalities] + [v for v, _ in self.equalities]
        lower = [lo for _, lo, _ in self.inequalities] + [val for _, val in self.equalities]
        upper = [hi for _, _, hi in self.inequalities] + [val for _, val in self.equalities]
        if not rows:
            return np.zeros((0, self.n_vars)), np.zeros(0), np.zeros(0)
        return np.stack(rows), np.array(lower, dtype=float), np.array(upper, dtype=float)


@dataclass
class SdpSolution:
    chi_block: np.ndarray
    slacks: np.ndarray
    objective_value: float
    primal_residual: float
    dual_residual: float
    iterations: int
    status: SolveStatus


# --- row/objective assembly ---------------------------------------------------


def expectation_coefficient_matrix(
    rho: np.ndarray, effect: np.ndarray, basis: OperatorBasis, ancilla: bool = False
) -> np.ndarray:
    """Hermitian K with <svec K, svec chi> = Tr(E . sum chi_ij B_i rho B_j^dag).

    B_i is the basis element, lifted to I (x) E_i when ``ancilla`` is set
    (rho and the effect then live on dimension d^2).
    """
    B = lifted_basis(basis) if ancilla else basis.elements
    if rho.shape[0] != B.shape[1] or effect.shape[0] != B.shape[1]:
        raise ValueError("dimension mismatch between state, effect, and basis")
    T = np.einsum("iab,bc->iac", B, rho)
    M = np.einsum("ab,ibc,jac->ij", effect, T, B.conj(), optimize=True)
    return linalg.hermitian_part(M.conj(), reject_tol=1e-9)


def lifted_basis(basis: OperatorBasis) -> np.ndarray:
    """Basis elements wrapped as I (x) E_i for ancilla-assisted rows."""
    eye = np.eye(basis.d)
    return np.stack([np.kron(eye, E) for E in basis.elements])


def assemble_expectation_row(
    rho: np.ndarray, effect: np.ndarray, basis: OperatorBasis, ancilla: bool = False
) -> np.ndarray:
    """Coefficient row over svec(chi) reproducing Tr(E . map-output) exactly."""
    return linalg.vec_hermitian(expectation_coefficient_matrix(rho, effect, basis, ancilla))


def assemble_objective(
    terms: list[tuple[np.ndarray | None, np.ndarray | None]], psd_dim: int, n_slack: int
) -> np.ndarray:
    """Sum of Hermitian chi-weight matrices and slack weight vectors as one
    coefficient vector over [svec(chi) || slacks]."""
    chi_part = np.zeros(psd_dim**2)
    slack_part = np.zeros(n_slack)
    for chi_weight, slack_weights in terms:
        if chi_weight is not None:
            W = np.asarray(chi_weight, dtype=complex)
            if W.shape != (psd_dim, psd_dim):
                raise ValueError(f"chi weight must be {psd_dim} x {psd_dim}")
            chi_part += linalg.vec_hermitian(W)
        if slack_weights is not None:
            slack_part += np.asarray(slack_weights, dtype=float)
    return np.concatenate([chi_part, slack_part])


def add_noise_envelope(
    problem: SdpProblem,
    row: np.ndarray,
    p: float,
    slack_index: int,
    *,
    shots: int = 0,
    p_min: float = 1e-6,
    additive_scale: float | None = None,
    additive_cap: float = 100.0,
) -> None:
    """Install the two-sided noise envelope for one measured probability.

    For p >= p_min the relative form (1-D)p <= <row, chi> <= (1+D)p is
    used, linear in (chi, D).  Below p_min that envelope would collapse
    to an equality, so an additive window |<row, chi> - p| <= D * scale
    is installed instead, with the slack capped: a near-zero record
    should absorb sampling noise, not an arbitrary contradiction.
    """
    if p < 0:
        raise ValueError("negative probability")
    base = problem.chi_row(row)
    slack_pos = problem.psd_dim**2 + slack_index
    if p >= p_min:
        lo_row = base.copy()
        lo_row[slack_pos] = p
        problem.add_inequality(lo_row, p, np.inf)  # <row,chi> + p*D >= p
        hi_row = base.copy()
        hi_row[slack_pos] = -p
        problem.add_inequality(hi_row, -np.inf, p)  # <row,chi> - p*D <= p
    else:
        scale = additive_scale if additive_scale is not None else (1.0 / shots if shots > 0 else 1e-3)
        lo_row = base.copy()
        lo_row[slack_pos] = scale
        problem.add_inequality(lo_row, p, np.inf)
        hi_row = base.copy()
        hi_row[slack_pos] = -scale
        problem.add_inequality(hi_row, -np.inf, p)
        problem.cap_slack(slack_index, additive_cap)


# --- solver -------------------------------------------------------------------


def solve(
    problem: SdpProblem,
    tol_: float = tol.SOLVER_TOL,
    max_iter: int = 200_000,
    *,
    rho: float = 1.0,
    alpha: float = 1.6,
    backend: str | None = None,
    trace: TextIO | Callable[[str], None] | None = None,
    detect_infeasible: bool = True,
    stall_iters: int = 3000,
    check_every: int = 25,
    adapt_every: int = 100,
) -> SdpSolution:
    """Run the splitting iteration until both residuals fall below tol_.

    Returns the best iterate seen, with diagnostics.  Status INFEASIBLE
    is heuristic: the primal residual plateaus orders of magnitude above
    the tolerance (no relative improvement for ``stall_iters``
    iterations), which is how the alternating projections behave between
    two sets that do not intersect.  Genuinely slow-but-feasible
    problems keep improving and instead exhaust ``max_iter``.
    """
    if tol_ <= 0:
        raise ValueError("tolerance must be positive")
    D = problem.psd_dim
    m = problem.n_vars
    A, lower, upper = problem.stacked_rows()
    p_rows = A.shape[0]

    # Equilibrate: unit-norm rows keep the projections balanced.
    if p_rows:
        norms = np.linalg.norm(A, axis=1)
        norms[norms == 0] = 1.0
        A = A / norms[:, None]
        lower = lower / norms
        upper = upper / norms
    A = np.ascontiguousarray(A)
    At = np.ascontiguousarray(A.T)

    # Scale-invariant objective: the iterates depend only on c's direction.
    gamma = np.linalg.norm(problem.objective)
    c = problem.objective / gamma if gamma > 0 else problem.objective.copy()

    Finv = np.linalg.inv(np.eye(m) + At @ A) if p_rows else np.eye(m)
    Finv = np.ascontiguousarray(Finv)

    idx_diag = np.arange(D) * (D + 1)
    iu, ju = linalg.triu_indices(D)
    idx_up = iu * D + ju
    idx_lo = ju * D + iu

    x = np.zeros(m)
    z1 = np.zeros(m)
    z2 = np.zeros(p_rows)
    u1 = np.zeros(m)
    u2 = np.zeros(p_rows)
    caps = problem.slack_caps.copy()

    loop = get_loop(backend)
    write = trace.write if hasattr(trace, "write") else trace

    iters = 0
    converged = False
    r_prim = np.inf
    r_dual = np.inf
    best_prim = np.inf
    best_iter = 0
    best_score = np.inf
    best_x = x.copy()
    stalled = False
    chunk = 500
    while iters < max_iter:
        n = min(chunk, max_iter - iters)
        done, converged, rho, r_prim, r_dual = loop(
            A, At, Finv, c, lower, upper, D, caps,
            idx_diag, idx_up, idx_lo,
            x, z1, z2, u1, u2,
            rho, alpha, tol_, n, check_every, adapt_every,
        )
        iters += done
        if write is not None:
            write(f"iter={iters} primal={r_prim:.3e} dual={r_dual:.3e} rho={rho:.3e}\n")
        score = max(r_prim, r_dual)
        if score < best_score:
            best_score = score
            best_x = x.copy()
        if r_prim < best_prim * (1 - 3e-3):
            best_prim = r_prim
            best_iter = iters
        if converged:
            best_x = x.copy()
            break
        if (
            detect_infeasible
            and iters - best_iter >= stall_iters
            and best_prim > max(1e3 * tol_, 1e-6)
        ):
            stalled = True
            break

    if converged:
        status = SolveStatus.OPTIMAL
    elif stalled:
        status = SolveStatus.INFEASIBLE
    else:
        status = SolveStatus.MAX_ITER

    chi_block = linalg.mat_hermitian(best_x[: D * D], D) if D else np.zeros((0, 0), dtype=complex)
    return SdpSolution(
        chi_block=chi_block,
        slacks=best_x[D * D :].copy(),
        objective_value=float(problem.objective @ best_x),
        primal_residual=float(r_prim),
        dual_residual=float(r_dual),
        iterations=iters,
        status=status,
    )


# --- problem dump/load (debugging) ---------------------------------------------


def problem_to_json(problem: SdpProblem) -> str:
    return json.dumps(
        {
            "psd_dim": problem.psd_dim,
            "n_slack": problem.n_slack,
            "objective": problem.objective.tolist(),
            "slack_caps": [None if np.isinf(c) else c for c in problem.slack_caps],
            "inequalities": [
                {
                    "coeffs": vec.tolist(),
                    "lower": None if np.isneginf(lo) else lo,
                    "upper": None if np.isposinf(hi) else hi,
                }
                for vec, lo, hi in problem.inequalities
            ],
            "equalities": [
                {"coeffs": vec.tolist(), "value": val} for vec, val in problem.equalities
            ],
        }
    )


def problem_from_json(text: str) -> SdpProblem:
    doc = json.loads(text)
    problem = SdpProblem(psd_dim=int(doc["psd_dim"]), n_slack=int(doc["n_slack"]))
    problem.objective = np.asarray(doc["objective"], dtype=float)
    if problem.objective.shape != (problem.n_vars,):
        raise ValueError("objective length does not match block sizes")
    caps = [np.inf if c is None else float(c) for c in doc["slack_caps"]]
    problem.slack_caps = np.asarray(caps, dtype=float)
    for entry in doc["inequalities"]:
        lo = -np.inf if entry["lower"] is None else float(entry["lower"])
        hi = np.inf if entry["upper"] is None else float(entry["upper"])
        problem.add_inequality(np.asarray(entry["coeffs"], dtype=float), lo, hi)
    for entry in doc["equalities"]:
        problem.add_equality(np.asarray(entry["coeffs"], dtype=float), float(entry["value"]))
    return problem


__all__ = [
    "SolveStatus",
    "SdpProblem",
    "SdpSolution",
    "expectation_coefficient_matrix",
    "assemble_expectation_row",
    "assemble_objective",
    "add_noise_envelope",
    "lifted_basis",
    "solve",
    "problem_to_json",
    "problem_from_json",
    "default_backend",
]
