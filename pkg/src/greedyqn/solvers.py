"""Quasi-Newton iteration schemes and convergence diagnostics.

Implements the greedy/randomized Broyden-family scheme with exact Hessian
actions (optionally with the multiplicative correction that keeps the new
Hessian dominated after each step), plus two baselines: gradient descent
with step 1/L and classical secant-based quasi-Newton methods.

All schemes start from the approximation G0 = L * I, take unit steps
x+ = x - G^{-1} grad, and return a per-iteration :class:`RunTrace`.
Divergence or loss of definiteness is reported as an outcome, never
patched.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .broyden import (
    DEGENERACY_RTOL,
    UpdateKind,
    UpdatePair,
    UpdateRule,
    _op_error_from_factor,
    _sigma_from_factor,
    broyden_update,
    greedy_direction,
    tau_split,
)
from .data_io import RngStream, unit_sphere_direction
from .errors import (
    DimensionTooLarge,
    GreedyQnError,
    NonFiniteResult,
    NonPositiveCurvature,
    NonPositiveHessianDiagonal,
    NotPositiveDefinite,
    SingularCapacitance,
)
from .objectives import ObjectiveOracle, QuadraticProblem
from .operator_core import SpdState, factorize

DIAGNOSTICS_CAP = 500
SECANT_SKIP_RTOL = 1e-12


class DirectionKind(enum.Enum):
    GREEDY_COORDINATE = "greedy_coordinate"
    RANDOM_SPHERE = "random_sphere"
    CLASSICAL_SECANT = "classical_secant"


@dataclass(frozen=True)
class DirectionStrategy:
    """How update directions are chosen.

    ``seed`` feeds the "directions" stream and must be present exactly for
    the random-sphere strategy.
    """

    kind: DirectionKind
    seed: int | None = None

    def __post_init__(self):
        if (self.kind is DirectionKind.RANDOM_SPHERE) != (self.seed is not None):
            raise ValueError("seed must be present iff the strategy is random-sphere")

    @classmethod
    def greedy(cls):
        return cls(DirectionKind.GREEDY_COORDINATE)

    @classmethod
    def random_sphere(cls, seed: int):
        return cls(DirectionKind.RANDOM_SPHERE, seed)

    @classmethod
    def classical(cls):
        return cls(DirectionKind.CLASSICAL_SECANT)


@dataclass(frozen=True)
class FunctionResidual:
    """Stop once f(x_k) - f_star <= epsilon * (f(x_0) - f_star)."""

    epsilon: float
    f_star: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


@dataclass(frozen=True)
class GradientNorm:
    """Stop once the Euclidean gradient norm drops to epsilon."""

    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


@dataclass(frozen=True)
class TraceOptions:
    """Opt-in O(n^3) per-iteration diagnostics."""

    lambda_f: bool = False
    sigma: bool = False
    op_error: bool = False

    def any(self) -> bool:
        return self.lambda_f or self.sigma or self.op_error


@dataclass(frozen=True)
class SolverConfig:
    """Method assembly for the Broyden-family schemes."""

    rule: UpdateRule
    strategy: DirectionStrategy
    termination: FunctionResidual | GradientNorm
    max_iter: int
    correction: bool = False
    m_const: float = 0.0
    trace: TraceOptions = field(default_factory=TraceOptions)
    diag_cap: int = DIAGNOSTICS_CAP
    seed: int | None = None

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.m_const < 0:
            raise ValueError("m_const must be nonnegative")


@dataclass(frozen=True)
class IterationRecord:
    """One row of a run trace; optional entries are None when not computed."""

    k: int
    f_value: float
    grad_norm: float
    r_k: float | None = None
    direction_index: int | None = None
    lambda_f: float | None = None
    sigma: float | None = None
    op_error: float | None = None


CONVERGED = "converged"
MAX_ITER_REACHED = "max_iter_reached"
NUMERICAL_FAILURE = "numerical_failure"


@dataclass
class RunTrace:
    """Per-iteration records plus the run outcome.

    Records appear in iteration order.  ``f_value`` is not asserted to be
    non-increasing: unit steps can overshoot outside the local region, and
    that is recorded rather than hidden.
    """

    records: list[IterationRecord] = field(default_factory=list)
    outcome: str = MAX_ITER_REACHED
    converged_at: int | None = None
    failure_reason: str | None = None

    def f_values(self) -> np.ndarray:
        return np.array([r.f_value for r in self.records])


@dataclass(frozen=True)
class IterationEvent:
    """Mid-iteration snapshot passed to observer callbacks.

    ``state`` is the live operator state after the correction rescale and
    before the Broyden update; callbacks must treat it as read-only.
    """

    k: int
    x: np.ndarray
    x_next: np.ndarray
    r_k: float
    direction_index: int | None
    state: SpdState


def _terminated(termination, f, f0, grad_norm) -> bool:
    if isinstance(termination, FunctionResidual):
        return f - termination.f_star <= termination.epsilon * (f0 - termination.f_star)
    return grad_norm <= termination.epsilon


def _diagnostics(oracle, x, grad, state, trace: TraceOptions, diag_cap: int):
    """(lambda_f, sigma, op_error) at the current iterate, or Nones.

    Shares one Cholesky factorization of the exact Hessian across the
    requested quantities; skipped entirely above the dimension cap.
    """
    if not trace.any() or oracle.n > diag_cap or not oracle.has_full_hessian:
        return None, None, None
    hess = oracle.full_hessian(x)
    chol = factorize(hess)
    lam = sig = operr = None
    if trace.lambda_f:
        lam = float(np.sqrt(max(np.dot(grad, chol.solve(grad)), 0.0)))
    if state is not None:
        g_entries = state._g
        if trace.sigma:
            sig = _sigma_from_factor(chol, g_entries)
        if trace.op_error:
            operr = _op_error_from_factor(chol, g_entries, hess.entries)
    return lam, sig, operr


_STEP_ERRORS = (
    NotPositiveDefinite,
    SingularCapacitance,
    NonPositiveCurvature,
    NonPositiveHessianDiagonal,
    NonFiniteResult,
)


def _failure_reason(exc: GreedyQnError) -> str:
    return type(exc).__name__


def _apply_family_update(state, pair, rule):
    """One tau-family update against an exact target action, or a no-op.

    The degenerate case <(G - A)u, u> <= tol * <Au, u> is screened before
    the mixing parameter is computed: every family member reduces to the
    identity update there, and the BFGS parameter auu/guu would leave
    [0, 1] if the approximation dipped below the target along u (possible
    when the correction is disabled).
    """
    if pair.guu - pair.auu <= DEGENERACY_RTOL * pair.auu:
        return state
    tau, omt = tau_split(rule, pair)
    return broyden_update(state, pair, tau, one_minus_tau=omt)


def solve_general(
    oracle: ObjectiveOracle,
    x0,
    config: SolverConfig,
    on_iteration=None,
) -> tuple[np.ndarray, RunTrace]:
    """Broyden-family scheme with exact Hessian actions on a smooth oracle.

    Each iteration takes the unit quasi-Newton step, measures its length
    r_k in the local Hessian metric, optionally inflates G by
    (1 + m_const * r_k) so the Hessian at the new point stays dominated,
    selects the update direction (greedy coordinate or random sphere), and
    applies the tau-update against the exact Hessian action at the new
    point.
    """
    if config.strategy.kind is DirectionKind.CLASSICAL_SECANT:
        raise ValueError("classical secant runs go through classical_qn")
    n = oracle.n
    x = np.array(x0, dtype=float)
    state = SpdState.scaled_identity(n, oracle.lipschitz_l)
    rng = None
    if config.strategy.kind is DirectionKind.RANDOM_SPHERE:
        seed = config.strategy.seed if config.strategy.seed is not None else config.seed
        rng = RngStream(seed, "directions")
    greedy = config.strategy.kind is DirectionKind.GREEDY_COORDINATE
    trace = RunTrace()
    f0 = None
    for k in range(config.max_iter + 1):
        try:
            f = oracle.value(x)
            grad = oracle.gradient(x)
            if not (np.isfinite(f) and np.all(np.isfinite(grad))):
                raise NonFiniteResult("objective or gradient is not finite")
            grad_norm = float(np.linalg.norm(grad))
            if f0 is None:
                f0 = f
            lam, sig, operr = _diagnostics(
                oracle, x, grad, state, config.trace, config.diag_cap
            )
        except _STEP_ERRORS as exc:
            trace.outcome = NUMERICAL_FAILURE
            trace.failure_reason = _failure_reason(exc)
            return x, trace
        if _terminated(config.termination, f, f0, grad_norm):
            trace.records.append(
                IterationRecord(k, f, grad_norm, lambda_f=lam, sigma=sig, op_error=operr)
            )
            trace.outcome = CONVERGED
            trace.converged_at = k
            return x, trace
        if k == config.max_iter:
            trace.records.append(
                IterationRecord(k, f, grad_norm, lambda_f=lam, sigma=sig, op_error=operr)
            )
            trace.outcome = MAX_ITER_REACHED
            return x, trace
        r_k = None
        idx = None
        try:
            d = -state.solve(grad)
            x_next = x + d
            hv = oracle.hessian_vec(x, d)
            r_k = float(np.sqrt(max(np.dot(hv, d), 0.0)))
            if config.correction and config.m_const * r_k > 0.0:
                state.rescale(1.0 + config.m_const * r_k)
            if greedy:
                diag_a = oracle.hessian_diag(x_next)
                idx = greedy_direction(state.diag, diag_a)
                u = np.zeros(n)
                u[idx] = 1.0
            else:
                u = unit_sphere_direction(rng, n)
            au = oracle.hessian_vec(x_next, u)
            pair = UpdatePair.from_state(state, u, au)
            if on_iteration is not None:
                on_iteration(
                    IterationEvent(k, x.copy(), x_next.copy(), r_k, idx, state)
                )
            _apply_family_update(state, pair, config.rule)
        except _STEP_ERRORS as exc:
            trace.records.append(
                IterationRecord(
                    k, f, grad_norm, r_k, idx, lambda_f=lam, sigma=sig, op_error=operr
                )
            )
            trace.outcome = NUMERICAL_FAILURE
            trace.failure_reason = _failure_reason(exc)
            return x, trace
        trace.records.append(
            IterationRecord(
                k, f, grad_norm, r_k, idx, lambda_f=lam, sigma=sig, op_error=operr
            )
        )
        x = x_next
    return x, trace


def solve_quadratic(
    problem: QuadraticProblem,
    x0,
    config: SolverConfig,
    on_iteration=None,
) -> tuple[np.ndarray, RunTrace]:
    """Broyden-family scheme on a quadratic with exact target actions.

    The quadratic Hessian is constant, so no correction is needed (or
    allowed); the run is identical to :func:`solve_general` on the same
    oracle.
    """
    if not isinstance(problem, QuadraticProblem):
        raise TypeError("solve_quadratic expects a QuadraticProblem")
    if config.correction:
        raise ValueError("quadratics need no correction; configure it off")
    return solve_general(problem, x0, config, on_iteration=on_iteration)


def gradient_method(
    oracle: ObjectiveOracle,
    x0,
    l_const: float,
    termination,
    max_iter: int,
) -> tuple[np.ndarray, RunTrace]:
    """Gradient descent with the constant step size 1/L."""
    if not l_const > 0:
        raise ValueError("L must be positive")
    x = np.array(x0, dtype=float)
    trace = RunTrace()
    f0 = None
    for k in range(max_iter + 1):
        try:
            f = oracle.value(x)
            grad = oracle.gradient(x)
            if not (np.isfinite(f) and np.all(np.isfinite(grad))):
                raise NonFiniteResult("objective or gradient is not finite")
        except NonFiniteResult as exc:
            trace.outcome = NUMERICAL_FAILURE
            trace.failure_reason = _failure_reason(exc)
            return x, trace
        grad_norm = float(np.linalg.norm(grad))
        if f0 is None:
            f0 = f
        trace.records.append(IterationRecord(k, f, grad_norm))
        if _terminated(termination, f, f0, grad_norm):
            trace.outcome = CONVERGED
            trace.converged_at = k
            return x, trace
        if k == max_iter:
            trace.outcome = MAX_ITER_REACHED
            return x, trace
        x = x - grad / l_const
    return x, trace


def _secant_coefficients(rule: UpdateRule, alpha, beta):
    """Stable rank-two coefficients on (y, Gs) for the secant update.

    Returns None when the rule's skip test fires (degenerate SR1
    denominator, or nonpositive curvature for the DFP/BFGS-type rules).
    """
    delta = beta - alpha
    if rule.kind is UpdateKind.SR1:
        if abs(delta) <= SECANT_SKIP_RTOL * abs(alpha):
            return None
        return -1.0 / delta, 1.0 / delta, -1.0 / delta
    if alpha <= 0.0:
        return None
    if rule.kind is UpdateKind.BFGS:
        return 1.0 / alpha, 0.0, -1.0 / beta
    if rule.kind is UpdateKind.DFP:
        return (alpha + beta) / alpha**2, -1.0 / alpha, 0.0
    # fixed tau: convex combination of the DFP and SR1 coefficient triples
    if abs(delta) <= SECANT_SKIP_RTOL * abs(alpha):
        return None
    t = rule.tau
    omt = 1.0 - t
    return (
        t * (alpha + beta) / alpha**2 - omt / delta,
        -t / alpha + omt / delta,
        -omt / delta,
    )


def classical_qn(
    oracle: ObjectiveOracle,
    x0,
    rule: UpdateRule,
    l_const: float,
    termination,
    max_iter: int,
    trace_options: TraceOptions | None = None,
    diag_cap: int = DIAGNOSTICS_CAP,
) -> tuple[np.ndarray, RunTrace]:
    """Classical quasi-Newton baseline with the secant substitution.

    The update direction is the step s = x+ - x, and the target action
    along it is replaced by the gradient difference y = grad(x+) - grad(x).
    Only gradients are consumed.  SR1 skips its update when the denominator
    <Gs - y, s> is negligible relative to <y, s>; DFP and BFGS skip when
    the curvature <y, s> is not positive.
    """
    if not l_const > 0:
        raise ValueError("L must be positive")
    topt = trace_options if trace_options is not None else TraceOptions()
    n = oracle.n
    x = np.array(x0, dtype=float)
    state = SpdState.scaled_identity(n, l_const)
    trace = RunTrace()
    f0 = None
    grad = None
    for k in range(max_iter + 1):
        try:
            f = oracle.value(x)
            if grad is None:
                grad = oracle.gradient(x)
            if not (np.isfinite(f) and np.all(np.isfinite(grad))):
                raise NonFiniteResult("objective or gradient is not finite")
            grad_norm = float(np.linalg.norm(grad))
            if f0 is None:
                f0 = f
            lam, sig, operr = _diagnostics(oracle, x, grad, state, topt, diag_cap)
        except _STEP_ERRORS as exc:
            trace.outcome = NUMERICAL_FAILURE
            trace.failure_reason = _failure_reason(exc)
            return x, trace
        trace.records.append(
            IterationRecord(k, f, grad_norm, lambda_f=lam, sigma=sig, op_error=operr)
        )
        if _terminated(termination, f, f0, grad_norm):
            trace.outcome = CONVERGED
            trace.converged_at = k
            return x, trace
        if k == max_iter:
            trace.outcome = MAX_ITER_REACHED
            return x, trace
        try:
            s = -state.solve(grad)
            x_next = x + s
            grad_next = oracle.gradient(x_next)
            if not np.all(np.isfinite(grad_next)):
                raise NonFiniteResult("gradient is not finite")
            y = grad_next - grad
            alpha = float(np.dot(y, s))
            gs = state.apply(s)
            beta = float(np.dot(gs, s))
            # SR1 never divides by <Gs, s> and classically tolerates an
            # indefinite approximation; the other members require it.
            if beta <= 0.0 and rule.kind is not UpdateKind.SR1:
                raise NotPositiveDefinite(
                    f"approximation lost definiteness along the step (<Gs,s>={beta})"
                )
            coeffs = _secant_coefficients(rule, alpha, beta)
            if coeffs is not None:
                state.rank2_update(y, gs, *coeffs)
        except _STEP_ERRORS as exc:
            trace.outcome = NUMERICAL_FAILURE
            trace.failure_reason = _failure_reason(exc)
            return x, trace
        x = x_next
        grad = grad_next
    return x, trace


def lambda_f(problem: ObjectiveOracle, x, diag_cap: int = DIAGNOSTICS_CAP) -> float:
    """Gradient norm in the inverse metric of the exact Hessian at x.

    For a quadratic this is the A^{-1}-norm of the gradient and satisfies
    f(x) - f_min = lambda_f(x)^2 / 2.  O(n^3); diagnostics only.
    """
    if problem.n > diag_cap:
        raise DimensionTooLarge(f"n={problem.n} exceeds diagnostics cap {diag_cap}")
    x = np.asarray(x, dtype=float)
    hess = problem.full_hessian(x)
    chol = factorize(hess)
    grad = problem.gradient(x)
    return float(np.sqrt(max(np.dot(grad, chol.solve(grad)), 0.0)))
