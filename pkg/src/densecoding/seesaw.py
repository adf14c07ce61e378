"""Alternating (see-saw) lower bounds on the superdense coding success probability.

Starting from a random measurement, the preparations (local channels on
Alice's side) and the measurement are optimized in turn, each step being
an exact SDP.  Every reported value is recomputed from a repaired, exactly
valid protocol, so it is a certified lower bound.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .policy import DEFAULT_POLICY, InvariantError, NumericPolicy, SolverError
from .protocol import PreparationFamily, Povm, behavior, bell_basis_povm, p_suc
from .sdp import optimize_povm, optimize_preparations
from .states import DensityOperator

__all__ = [
    "SeesawConfig",
    "SeesawResult",
    "RestartTrace",
    "default_restarts",
    "random_povm",
    "initial_povm",
    "seesaw_psuc",
    "resimulate",
    "write_trace_csv",
]

log = logging.getLogger(__name__)


def default_restarts(d: int) -> int:
    return 10 if d <= 3 else 20


@dataclass(frozen=True)
class SeesawConfig:
    n_preparations: int
    restarts: int = 10
    seed: int = 0
    tol: float = 1e-7
    max_rounds: int = 200
    sdp_tol: float = 1e-9
    workers: int = 1
    structured_start: bool = True

    def __post_init__(self):
        if self.n_preparations < 2:
            raise InvariantError("need at least two preparations")
        if self.tol <= 0:
            raise InvariantError("tolerance must be positive")
        if self.restarts < 1:
            raise InvariantError("need at least one restart")


@dataclass
class RestartTrace:
    restart: int
    values: list = field(default_factory=list)
    rounds: int = 0
    converged: bool = False
    error: str | None = None


@dataclass
class SeesawResult:
    best_value: float
    best_protocol: tuple | None
    rounds_used: int
    traces: list
    best_restart: int = -1

    @property
    def n_failed(self) -> int:
        return sum(t.error is not None for t in self.traces)


def random_povm(dim: int, n: int, rng: np.random.Generator,
                policy: NumericPolicy = DEFAULT_POLICY) -> Povm:
    """``n`` full-rank effects ``G G^dag`` normalized by ``S^{-1/2}``, ``S`` their sum."""
    g = rng.normal(size=(n, dim, dim)) + 1j * rng.normal(size=(n, dim, dim))
    return Povm.repaired(g @ np.conj(np.swapaxes(g, 1, 2)), policy)


def initial_povm(shared: DensityOperator, config: SeesawConfig, restart: int) -> Povm:
    """Starting measurement of one restart.

    With ``structured_start`` and ``N = d_a^2`` on a ``d x d`` state,
    restart 0 begins from the maximally entangled basis measurement; every
    other restart draws a random full-rank POVM from its own stream.
    """
    d_a, d_b = shared.dims
    if (config.structured_start and restart == 0 and d_a == d_b
            and config.n_preparations == d_a * d_a):
        return bell_basis_povm(d_a, shared.policy)
    rng = np.random.default_rng([config.seed, restart])
    return random_povm(shared.dim, config.n_preparations, rng, shared.policy)


def resimulate(shared: DensityOperator, chois, povm: Povm) -> float:
    family = PreparationFamily(shared, tuple(chois), shared.policy)
    return p_suc(behavior(family, povm))


def _run_restart(shared: DensityOperator, config: SeesawConfig, restart: int):
    trace = RestartTrace(restart)
    povm = initial_povm(shared, config, restart)
    best = (-np.inf, None, None)
    try:
        for rnd in range(1, config.max_rounds + 1):
            chois, v1 = optimize_preparations(shared, povm, tol=config.sdp_tol,
                                              policy=shared.policy)
            if best[1] is None or v1 >= best[0]:
                best = (v1, chois, povm)
            family = PreparationFamily(shared, tuple(best[1]), shared.policy)
            new_povm, v2 = optimize_povm(family.states, tol=config.sdp_tol, policy=shared.policy)
            if v2 >= best[0]:
                best = (v2, best[1], new_povm)
            povm = best[2]
            prev = trace.values[-1] if trace.values else -np.inf
            trace.values.append(float(best[0]))
            trace.rounds = rnd
            if best[0] - prev < config.tol:
                trace.converged = True
                break
    except (SolverError, InvariantError, np.linalg.LinAlgError) as exc:
        log.warning("see-saw restart %d failed: %s", restart, exc)
        trace.error = str(exc)
    return trace, best


def seesaw_psuc(shared: DensityOperator, config: SeesawConfig) -> SeesawResult:
    """Best see-saw value of ``p_suc`` over ``config.restarts`` random starts.

    A half-step whose SDP value does not improve on the current protocol
    is rejected, so each restart's trace is non-decreasing.  Ties between
    restarts go to the lowest restart index.
    """
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as ex:
            runs = list(ex.map(_run_restart, [shared] * config.restarts,
                               [config] * config.restarts, range(config.restarts)))
    else:
        runs = [_run_restart(shared, config, r) for r in range(config.restarts)]
    best_val, best_proto, best_r = -np.inf, None, -1
    for trace, (val, chois, povm) in runs:
        if chois is not None and val > best_val:
            best_val, best_proto, best_r = val, (list(chois), povm), trace.restart
    if best_proto is None:
        raise SolverError("every see-saw restart failed")
    best_val = resimulate(shared, *best_proto)
    traces = [t for t, _ in runs]
    return SeesawResult(float(best_val), best_proto, max(t.rounds for t in traces), traces, best_r)


def write_trace_csv(result: SeesawResult, path, header_lines=()) -> None:
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["restart", "round", "value"])
        for t in result.traces:
            for k, v in enumerate(t.values, start=1):
                w.writerow([t.restart, k, f"{v:.12g}"])
