"""Proximal-gradient matrix completion solvers.

All solvers minimize ``f(X) + lam * g(X) + xi * r(X)`` where ``f`` is the
masked squared residual, ``g`` a low-rank penalty (nuclear norm or
log-sum penalty on singular values) and ``r`` the discrete penalty on
unobserved entries. The gradient of ``f`` is 1-Lipschitz, so every
gradient step uses unit step size, which turns ``X - grad_f(X)`` into
plain data imputation ``P_Omega(O) + P_Omega^c(X)``.

Algorithms
----------
soft_impute
    ``X_t = svt(X_{t-1} + P_Omega(O - X_{t-1}), lam)``.
apg
    Soft-Impute evaluated at a momentum point ``Y_t``.
discrete_apg
    ``Y_t`` -> discrete prox on the unobserved entries -> imputation -> svt.
niapg, discrete_niapg
    Log-sum penalty prox with a non-monotone acceptance test on ``Y_t``.
"""
import dataclasses
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, ParameterError, SolverError
from . import kernels
from .linalg import (
    ObservedMatrix,
    SparsePlusLowRank,
    SvdFactors,
    _as_matrix,
    _check_shape,
    masked_residual_sq,
    truncated_svd,
)
from .regularizers import (
    RegularizerSpec,
    discrete_penalty,
    lsp_prox_factors,
    lsp_value,
    prox_discrete,
    svt_factors,
)

ALGORITHMS = ("soft_impute", "apg", "discrete_apg", "niapg", "discrete_niapg")
MOMENTUM_SCHEDULES = ("fista", "none")
STOP_REASONS = ("tolerance", "max_iter", "stagnation")

#: lam = largest singular value of P_Omega(O) divided by this
AUTO_LAMBDA_DIVISOR = 50.0


def next_theta(theta):
    return 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * theta * theta))


def momentum_beta(t, schedule="fista"):
    """Momentum weight for iteration ``t >= 1``.

    ``"fista"``: ``theta_1 = 1``, ``theta_{t+1} = (1 + sqrt(1 + 4 theta_t^2)) / 2``,
    ``beta_t = (theta_t - 1) / theta_{t+1}``. ``"none"`` is identically 0.
    """
    if t < 1:
        raise ParameterError(f"iteration index must be >= 1, got {t}")
    if schedule not in MOMENTUM_SCHEDULES:
        raise ParameterError(f"unknown momentum schedule {schedule!r}")
    if schedule == "none":
        return 0.0
    theta = 1.0
    for _ in range(t - 1):
        theta = next_theta(theta)
    return (theta - 1.0) / next_theta(theta)


@dataclass(frozen=True)
class SolverConfig:
    algorithm: str
    reg: RegularizerSpec
    max_iter: int = 500
    rel_tol: float = 1e-4
    momentum: str = "fista"
    trace_nmse: bool = True
    seed: int = 0
    window: int = 5
    svd_tol: float = 1e-4
    strict_descent: bool = False
    label: str | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ParameterError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        if self.max_iter < 1:
            raise ParameterError("max_iter must be >= 1")
        if not self.rel_tol > 0:
            raise ParameterError("rel_tol must be > 0")
        if self.momentum not in MOMENTUM_SCHEDULES:
            raise ParameterError(f"unknown momentum schedule {self.momentum!r}")
        if self.window < 1:
            raise ParameterError("window must be >= 1")
        if not self.svd_tol > 0:
            raise ParameterError("svd_tol must be > 0")
        if self.algorithm.startswith("discrete") and self.reg.alphabet is None:
            raise ParameterError(f"{self.algorithm} requires an alphabet")
        if self.algorithm.endswith("niapg") and self.reg.kind != "lsp":
            raise ParameterError(f"{self.algorithm} requires an lsp regularizer")
        if not self.algorithm.endswith("niapg") and self.reg.kind == "lsp":
            raise ParameterError(f"{self.algorithm} uses the nuclear norm, not lsp")

    @classmethod
    def make(cls, algorithm, lam=None, xi=0.05, theta=1.0, alphabet=None, **kwargs):
        """Config with the regularizer kind implied by ``algorithm``."""
        if algorithm not in ALGORITHMS:
            raise ParameterError(f"unknown algorithm {algorithm!r}; choose from {ALGORITHMS}")
        discrete = algorithm.startswith("discrete")
        if algorithm.endswith("niapg"):
            kind = "lsp"
        else:
            kind = "discrete" if discrete else "nuclear"
        reg = RegularizerSpec(
            kind=kind,
            lam=lam,
            xi=xi if discrete else 0.0,
            theta=theta,
            alphabet=alphabet if discrete else None,
        )
        return cls(algorithm=algorithm, reg=reg, **kwargs)

    @property
    def name(self):
        return self.label or self.algorithm

    @property
    def objective_reg(self):
        """Regularizer actually minimized: the discrete term only for discrete_* algorithms."""
        if self.algorithm.startswith("discrete"):
            return self.reg
        kind = "nuclear" if self.reg.kind == "discrete" else self.reg.kind
        return dataclasses.replace(self.reg, kind=kind, xi=0.0, alphabet=None)


@dataclass(frozen=True)
class IterateState:
    """Solver state after ``t`` completed iterations.

    ``x_curr`` is ``X_{t-1}`` from the point of view of the next step and
    ``x_prev`` is ``X_{t-2}``; ``theta_seq`` is the momentum auxiliary for
    the next step. ``factors`` holds the thin SVD of ``x_curr`` (used for
    warm starts and penalty values), ``objective`` its objective value and
    ``history`` the most recent objective values, newest last.
    """

    x_curr: np.ndarray
    x_prev: np.ndarray
    t: int = 0
    theta_seq: float = 1.0
    factors: SvdFactors | None = None
    prev_factors: SvdFactors | None = None
    objective: float | None = None
    history: tuple = ()
    stagnated: bool = False

    @classmethod
    def initial(cls, shape, objective=None):
        x0 = np.zeros(shape)
        hist = () if objective is None else (objective,)
        f0 = _empty_factors(shape)
        return cls(x_curr=x0, x_prev=x0, factors=f0, prev_factors=f0, objective=objective, history=hist)

    @property
    def rank(self):
        return 0 if self.factors is None else int(self.factors.sigma.size)


@dataclass(frozen=True)
class TraceRecord:
    iter: int
    objective: float
    train_f: float
    nmse: float
    rank: int
    seconds: float


@dataclass
class ConvergenceTrace:
    records: list = field(default_factory=list)
    stop_reason: str | None = None
    lam: float | None = None

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def iterations(self):
        return len(self.records)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])


def _empty_factors(shape):
    m, n = shape
    return SvdFactors(np.zeros((m, 0)), np.zeros(0), np.zeros((n, 0)))


def _penalty(sigma, reg):
    if reg.low_rank == "lsp":
        return lsp_value(sigma, reg.theta)
    return float(np.sum(sigma))


def _objective_from_parts(X, sigma, O, reg, lam, S_unobs):
    value = masked_residual_sq(X, O)
    if lam:
        value += lam * _penalty(sigma, reg)
    if reg.discrete_active:
        value += reg.xi * discrete_penalty(X, S_unobs, reg.alphabet)
    return value


def _resolved_lambda(reg):
    if reg.lam is None:
        raise ParameterError("lambda is unresolved; pass a number or use run() for the automatic choice")
    return float(reg.lam)


def objective(X, O, reg, S_unobs=None):
    """Composite objective ``f(X) + lam g(X) + xi r(X)``.

    ``g`` is the nuclear norm or the log-sum penalty of the singular
    values of ``X`` per ``reg.kind``; the ``r`` term vanishes when
    ``xi == 0`` or no alphabet is given. ``S_unobs`` defaults to the
    complement of the observed set.
    """
    X = _as_matrix(X)
    _check_shape(X, O)
    if S_unobs is None:
        S_unobs = O.index_set.complement()
    lam = _resolved_lambda(reg)
    sigma = np.linalg.svd(X, compute_uv=False) if lam else np.zeros(0)
    return _objective_from_parts(X, sigma, O, reg, lam, S_unobs)


def auto_lambda(O, divisor=AUTO_LAMBDA_DIVISOR, seed=0):
    """``sigma_max(P_Omega(O)) / divisor``."""
    try:
        top = truncated_svd(O.dense, 1, tol=1e-10, seed=seed)
    except ConvergenceError as err:
        top = err.result
    return float(top.sigma[0]) / divisor


def _impute(Z, O):
    """``P_Omega^c(Z) + P_Omega(O)``, the unit-step gradient update."""
    return np.where(O.index_set.mask, O.dense, Z)


def _imputed(point, factors, O):
    """:func:`_impute` kept implicit when ``point`` has known thin ``factors``."""
    if factors is None:
        return _impute(point, O)
    resid = O.values - kernels.gather(point, O.rows, O.cols)
    return SparsePlusLowRank(O, resid, factors.u, factors.sigma, factors.v)


def _combine(fa, fb, a, b):
    """Thin (non-orthogonal) factors of ``a * A + b * B``."""
    return SvdFactors(
        np.hstack([fa.u, fb.u]), np.concatenate([a * fa.sigma, b * fb.sigma]), np.hstack([fa.v, fb.v])
    )


def _point_factors(state, beta):
    """Factors of the momentum point, when those of both iterates are known."""
    if beta == 0.0:
        return state.factors
    if state.factors is None or state.prev_factors is None:
        return None
    return _combine(state.factors, state.prev_factors, 1.0 + beta, -beta)


def _extrapolate(state, momentum):
    """Momentum point ``Y_t`` plus ``(beta_t, theta_{t+1})``."""
    if momentum == "none":
        return state.x_curr, 0.0, state.theta_seq
    theta_next = next_theta(state.theta_seq)
    beta = (state.theta_seq - 1.0) / theta_next
    if beta == 0.0:
        return state.x_curr, beta, theta_next
    y = state.x_curr + beta * (state.x_curr - state.x_prev)
    return y, beta, theta_next


def _svd_kwargs(state, seed, svd_tol):
    init = state.factors.v if state.factors is not None and state.factors.sigma.size else None
    return dict(k0=max(10, state.rank + 1), tol=svd_tol, seed=seed, init=init)


def _advance(state, factors, theta_next, objective_value=None, window=5):
    x_new = factors.to_dense()
    hist = state.history
    if objective_value is not None:
        hist = (hist + (objective_value,))[-window:]
    return IterateState(
        x_curr=x_new,
        x_prev=state.x_curr,
        t=state.t + 1,
        theta_seq=theta_next,
        factors=factors,
        prev_factors=state.factors,
        objective=objective_value,
        history=hist,
    )


def soft_impute_step(state, O, lam, *, seed=0, svd_tol=1e-4):
    """``X_t = svt(X_{t-1} + P_Omega(O - X_{t-1}), lam)``."""
    A = _imputed(state.x_curr, state.factors, O)
    f = svt_factors(A, lam, **_svd_kwargs(state, seed, svd_tol))
    return _advance(state, f, state.theta_seq)


def apg_step(state, O, lam, *, momentum="fista", seed=0, svd_tol=1e-4):
    """Soft-Impute step taken from the momentum point ``Y_t``."""
    y, beta, theta_next = _extrapolate(state, momentum)
    A = _imputed(y, _point_factors(state, beta), O)
    f = svt_factors(A, lam, **_svd_kwargs(state, seed, svd_tol))
    return _advance(state, f, theta_next)


def discrete_apg_step(state, O, reg, S_unobs=None, *, momentum="fista", seed=0, svd_tol=1e-4):
    """Discrete-aware accelerated step.

    ``Y_t`` by momentum, ``Z_t = prox_discrete(Y_t)`` on the unobserved
    entries, then ``X_t = svt(P_Omega^c(Z_t) + P_Omega(O), lam)``.
    """
    if reg.alphabet is None:
        raise ParameterError("discrete_apg_step requires an alphabet")
    if S_unobs is None:
        S_unobs = O.index_set.complement()
    lam = _resolved_lambda(reg)
    y, _, theta_next = _extrapolate(state, momentum)
    z = prox_discrete(y, S_unobs, reg.alphabet, reg.xi)
    f = svt_factors(_impute(z, O), lam, **_svd_kwargs(state, seed, svd_tol))
    return _advance(state, f, theta_next)


def _factor_singular_values(f):
    """Singular values of ``f.to_dense()`` for non-orthogonal thin factors."""
    if f.sigma.size == 0:
        return np.zeros(0)
    _, ru = np.linalg.qr(f.u)
    _, rv = np.linalg.qr(f.v)
    return np.linalg.svd((ru * f.sigma) @ rv.T, compute_uv=False)


def niapg_step(state, O, reg, S_unobs=None, *, discrete=False, momentum="fista", window=5,
               seed=0, svd_tol=1e-4, strict_descent=False):
    """Non-monotone accelerated step with the log-sum penalty.

    The momentum point ``Y_t`` is kept only if its objective does not
    exceed the largest of the last ``window`` recorded objectives;
    otherwise ``Y_t = X_{t-1}``. With ``discrete=True`` the discrete prox
    is applied to ``Y_t`` before imputation.

    With ``strict_descent=True`` the new iterate must also respect the
    window bound (it can break it through an inexact SVD or the composed
    discrete prox): the step is redone from ``X_{t-1}`` and, failing that,
    the state is returned unchanged with ``stagnated=True``.

    The objective at ``Y_t`` uses the thin factors of ``x_curr`` and
    ``x_prev`` when the state carries them, avoiding a full SVD.
    """
    if reg.kind != "lsp":
        raise ParameterError("niapg_step requires an lsp regularizer")
    if discrete and reg.alphabet is None:
        raise ParameterError("discrete niapg requires an alphabet")
    if S_unobs is None:
        S_unobs = O.index_set.complement()
    lam = _resolved_lambda(reg)
    obj_reg = reg if discrete else dataclasses.replace(reg, xi=0.0, alphabet=None)

    if state.objective is None:
        sigma = state.factors.sigma if state.factors is not None else np.linalg.svd(state.x_curr, compute_uv=False)
        cur_obj = _objective_from_parts(state.x_curr, sigma, O, obj_reg, lam, S_unobs)
        state = dataclasses.replace(state, objective=cur_obj, history=(state.history + (cur_obj,))[-window:])
    bound = max(state.history)

    y, beta, theta_next = _extrapolate(state, momentum)
    y_factors = _point_factors(state, beta)
    if beta != 0.0:
        if y_factors is None:
            sigma_y = np.linalg.svd(y, compute_uv=False)
        else:
            sigma_y = _factor_singular_values(y_factors)
        if _objective_from_parts(y, sigma_y, O, obj_reg, lam, S_unobs) > bound:
            y, y_factors = state.x_curr, state.factors

    def prox_step(point, factors):
        if discrete:
            A = _impute(prox_discrete(point, S_unobs, reg.alphabet, reg.xi), O)
        else:
            A = _imputed(point, factors, O)
        f = lsp_prox_factors(A, lam, reg.theta, **_svd_kwargs(state, seed, svd_tol))
        x = f.to_dense()
        return f, x, _objective_from_parts(x, f.sigma, O, obj_reg, lam, S_unobs)

    f, x, val = prox_step(y, y_factors)
    if strict_descent and val > bound and y is not state.x_curr:
        f, x, val = prox_step(state.x_curr, state.factors)
    if strict_descent and val > bound:
        return dataclasses.replace(state, t=state.t + 1, theta_seq=theta_next, stagnated=True)
    return IterateState(
        x_curr=x,
        x_prev=state.x_curr,
        t=state.t + 1,
        theta_seq=theta_next,
        factors=f,
        prev_factors=state.factors,
        objective=val,
        history=(state.history + (val,))[-window:],
    )


def run(config, O, test=None, callback=None):
    """Iterate ``config.algorithm`` from ``X_0 = 0``.

    Stops when ``|F_t - F_{t-1}| / max(1, F_{t-1}) < rel_tol`` (reason
    ``"tolerance"``), after ``max_iter`` iterations (``"max_iter"``) or
    when ``strict_descent`` is set and the window bound cannot be met
    (``"stagnation"``). ``lam=None`` is resolved with :func:`auto_lambda`.
    ``callback``, if given, receives each :class:`TraceRecord` as it is made.

    Returns
    -------
    X : ndarray
        Final iterate, shape ``O.shape``.
    trace : ConvergenceTrace
        One record per iteration.

    Raises
    ------
    SolverError
        Wrapping the failing step's error; ``trace`` holds the records so far.
    """
    from .metrics import nmse  # metrics imports solvers for the grid runner

    if not isinstance(O, ObservedMatrix):
        raise ParameterError("O must be an ObservedMatrix")
    if test is not None:
        if test.shape != O.shape:
            raise ParameterError("test and train shapes differ")
        if not O.index_set.isdisjoint(test.index_set):
            raise ParameterError("test entries overlap the observed entries")
        if len(test) == 0:
            test = None

    reg = config.objective_reg
    lam = reg.lam if reg.lam is not None else auto_lambda(O, seed=config.seed)
    reg = dataclasses.replace(reg, lam=lam)
    S_unobs = O.index_set.complement()
    algo = config.algorithm
    svd = dict(seed=config.seed, svd_tol=config.svd_tol)

    state = IterateState.initial(O.shape)
    prev_obj = _objective_from_parts(state.x_curr, np.zeros(0), O, reg, lam, S_unobs)
    state = dataclasses.replace(state, objective=prev_obj, history=(prev_obj,))

    trace = ConvergenceTrace(lam=lam)
    start = time.perf_counter()
    for _ in range(config.max_iter):
        try:
            if algo == "soft_impute":
                new = soft_impute_step(state, O, lam, **svd)
            elif algo == "apg":
                new = apg_step(state, O, lam, momentum=config.momentum, **svd)
            elif algo == "discrete_apg":
                new = discrete_apg_step(state, O, reg, S_unobs, momentum=config.momentum, **svd)
            else:
                new = niapg_step(
                    state, O, reg, S_unobs,
                    discrete=algo == "discrete_niapg",
                    momentum=config.momentum,
                    window=config.window,
                    strict_descent=config.strict_descent,
                    **svd,
                )
        except Exception as err:
            trace.stop_reason = None
            raise SolverError(f"{algo} failed at iteration {state.t + 1}: {err}", trace) from err

        if new.stagnated:
            x_dense, obj = state.x_curr, state.objective
        else:
            x_dense = new.x_curr
            obj = new.objective
            if obj is None:
                obj = _objective_from_parts(x_dense, new.factors.sigma, O, reg, lam, S_unobs)
                new = dataclasses.replace(new, objective=obj, history=(state.history + (obj,))[-config.window:])
        if not np.all(np.isfinite(obj)):
            raise SolverError(f"{algo} produced a non-finite objective at iteration {new.t}", trace)

        err_test = nmse(x_dense, test) if (test is not None and config.trace_nmse) else float("nan")
        trace.records.append(
            TraceRecord(
                iter=new.t,
                objective=obj,
                train_f=masked_residual_sq(x_dense, O),
                nmse=err_test,
                rank=new.rank,
                seconds=time.perf_counter() - start,
            )
        )
        if callback is not None:
            callback(trace.records[-1])
        state = new
        if new.stagnated:
            trace.stop_reason = "stagnation"
            break
        if abs(obj - prev_obj) / max(1.0, prev_obj) < config.rel_tol:
            trace.stop_reason = "tolerance"
            break
        prev_obj = obj
    else:
        trace.stop_reason = "max_iter"
    return np.array(state.x_curr, copy=True), trace
