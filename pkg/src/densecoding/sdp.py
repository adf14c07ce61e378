"""Small dense SDP solver over Hermitian PSD blocks, and the two see-saw programs.

The standard form is::

    maximize    sum_i <C_i, X_i>
    subject to  sum_i <A_ji, X_i> = b_j      for every constraint j
                X_i >= 0

with ``<A, X> = Re tr(A^dag X)``, and its dual::

    minimize    b . y
    subject to  S_i = sum_j y_j A_ji - C_i >= 0.

The solver is a primal-dual path-following method with Nesterov-Todd
scaling and Mehrotra predictor-corrector steps.  Blocks of equal size that
touch the same number of constraints are processed as one batch.
"""

from __future__ import annotations

import csv
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg

from .channels import ChoiOperator, apply_choi
from .policy import DEFAULT_POLICY, InvariantError, NumericPolicy, SolverError
from .protocol import Povm
from .states import DensityOperator

__all__ = [
    "SdpProblem",
    "SdpSolution",
    "ChoiOperator",
    "apply_choi",
    "hermitian_basis",
    "solve_sdp",
    "optimize_povm",
    "optimize_preparations",
    "preparation_objective",
    "povm_problem",
    "preparation_problem",
    "write_iteration_log",
]

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
MAX_ITERATIONS = "max-iterations"
INFEASIBLE = "infeasible"


def _herm(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def _dag(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def hermitian_basis(n: int) -> np.ndarray:
    """Orthonormal basis of the ``n x n`` Hermitian matrices, shape ``(n^2, n, n)``."""
    out = []
    for k in range(n):
        e = np.zeros((n, n), dtype=complex)
        e[k, k] = 1.0
        out.append(e)
    r = 1 / np.sqrt(2)
    for k in range(n):
        for l in range(k + 1, n):
            e = np.zeros((n, n), dtype=complex)
            e[k, l] = e[l, k] = r
            out.append(e)
            e = np.zeros((n, n), dtype=complex)
            e[k, l], e[l, k] = -1j * r, 1j * r
            out.append(e)
    return np.array(out)


@dataclass
class _Group:
    """Batch of blocks sharing a size ``n`` and a row count ``r``."""

    index: np.ndarray  # positions of these blocks in the problem, (nb,)
    rows: np.ndarray  # constraint rows touched by each block, (nb, r)
    a: np.ndarray  # coefficient matrices, (nb, r, n, n)
    c: np.ndarray  # objective, (nb, n, n)

    def __post_init__(self):
        nb, r, n, _ = self.a.shape
        self.a = np.ascontiguousarray(self.a)
        # Re <A, X> is a plain dot product of the interleaved (re, im) floats
        self.flat = self.a.reshape(nb, r, n * n)
        self.real = self.flat.view(float)
        self.conj_flat = np.conj(self.flat)
        # identical coefficients on identical rows: the Schur blocks can be summed first
        self.shared = bool(nb > 1 and np.all(self.rows == self.rows[0])
                           and np.array_equal(self.a, np.broadcast_to(self.a[0], self.a.shape)))

    @property
    def n(self) -> int:
        return self.c.shape[-1]

    def apply(self, x: np.ndarray, m: int) -> np.ndarray:
        nb = len(self.index)
        xf = np.ascontiguousarray(x).reshape(nb, -1, 1).view(float).reshape(nb, -1, 1)
        vals = (self.real @ xf)[..., 0]
        out = np.zeros(m)
        np.add.at(out, self.rows, vals)
        return out

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        nb, n = len(self.index), self.n
        return (y[self.rows][:, None, :] @ self.flat).reshape(nb, n, n)

    def schur(self, w: np.ndarray) -> np.ndarray:
        """``<A_r, W A_s W>`` per block, shape (nb, r, r), or (1, r, r) if summable.

        Uses ``vec(W B W) = (W kron W^T) vec(B)`` for row-major ``vec``.
        """
        nb, n = len(self.index), self.n
        k = (w[:, :, None, :, None] * np.swapaxes(w, 1, 2)[:, None, :, None, :])
        k = k.reshape(nb, n * n, n * n)
        if self.shared:
            return ((self.conj_flat[0] @ k.sum(axis=0)) @ self.flat[0].T).real[None]
        return (self.conj_flat @ k @ np.swapaxes(self.flat, 1, 2)).real


class SdpProblem:
    """Block-structured Hermitian SDP in the standard (maximization) form.

    Parameters
    ----------
    block_dims : sequence of int
        Size of each PSD block ``X_i``.
    objective : sequence of arrays
        One Hermitian ``C_i`` per block.
    constraints : sequence of (mapping, float)
        Each constraint maps block index to its Hermitian coefficient
        matrix (absent blocks have zero coefficient), with the right-hand
        side ``b_j``.
    """

    def __init__(self, block_dims: Sequence[int], objective: Sequence[np.ndarray],
                 constraints: Sequence[tuple[Mapping[int, np.ndarray], float]],
                 policy: NumericPolicy = DEFAULT_POLICY):
        rows: list[list[int]] = [[] for _ in block_dims]
        mats: list[list[np.ndarray]] = [[] for _ in block_dims]
        for j, (coeffs, _) in enumerate(constraints):
            for i, a in coeffs.items():
                rows[i].append(j)
                mats[i].append(np.asarray(a, dtype=complex))
        coeffs = []
        for n, ms in zip(block_dims, mats):
            coeffs.append(np.array(ms) if ms else np.zeros((0, n, n), dtype=complex))
        self._setup(block_dims, objective, rows, coeffs, [b for _, b in constraints], policy)

    @classmethod
    def from_arrays(cls, block_dims, objective, rows, coefficients, rhs,
                    policy: NumericPolicy = DEFAULT_POLICY) -> "SdpProblem":
        """Build from per-block row indices and stacked coefficient matrices.

        ``rows[i]`` lists the constraints block ``i`` enters and
        ``coefficients[i]`` has shape ``(len(rows[i]), n_i, n_i)``.
        """
        self = cls.__new__(cls)
        self._setup(block_dims, objective, rows, coefficients, rhs, policy)
        return self

    def _setup(self, block_dims, objective, rows, coefficients, rhs, policy) -> None:
        self.policy = policy
        self.block_dims = [int(n) for n in block_dims]
        if len(objective) != len(self.block_dims):
            raise InvariantError("need one objective matrix per block")
        if len(rows) != len(self.block_dims) or len(coefficients) != len(self.block_dims):
            raise InvariantError("need constraint data for every block")
        self.rhs = np.array([float(b) for b in rhs])
        m = len(self.rhs)
        self.objective = []
        for i, (n, c) in enumerate(zip(self.block_dims, objective)):
            c = np.asarray(c, dtype=complex)
            if c.shape != (n, n):
                raise InvariantError(f"objective block {i} has shape {c.shape}, expected {(n, n)}")
            self.objective.append(self._hermitian(c, f"objective block {i}"))
        self._blocks = []
        for i, (n, r, a) in enumerate(zip(self.block_dims, rows, coefficients)):
            r = np.asarray(r, dtype=int).reshape(-1)
            a = np.asarray(a, dtype=complex).reshape(len(r), n, n)
            if len(r) and (r.min() < 0 or r.max() >= m):
                raise InvariantError(f"block {i} refers to a constraint out of range")
            if len(np.unique(r)) != len(r):
                raise InvariantError(f"block {i} lists a constraint twice")
            order = np.argsort(r)
            self._blocks.append((r[order], self._hermitian(a[order], f"constraints of block {i}")))
        self._drop_dependent_rows()
        self.groups = self._build_groups()

    def _hermitian(self, a: np.ndarray, what: str) -> np.ndarray:
        if not np.all(np.isfinite(a)):
            raise InvariantError(f"{what} have non-finite entries")
        err = np.abs(a - _dag(a)).max(initial=0.0)
        if err > self.policy.sym_tol * max(1.0, np.abs(a).max(initial=0.0)):
            raise InvariantError(f"{what} not Hermitian (error {err:.3e})")
        return _herm(a)

    @property
    def n_constraints(self) -> int:
        return len(self.rhs)

    def _gram(self) -> np.ndarray:
        m = self.n_constraints
        g = np.zeros((m, m))
        for rows, a in self._blocks:
            if len(rows):
                flat = np.ascontiguousarray(a).reshape(len(rows), -1).view(float)
                g[np.ix_(rows, rows)] += flat @ flat.T
        return g

    def _drop_dependent_rows(self) -> None:
        m = self.n_constraints
        if m == 0:
            return
        g = self._gram()
        bad = np.flatnonzero(np.diag(g) <= 0)
        if np.any(np.abs(self.rhs[bad]) > 1e-12):
            raise InvariantError(f"constraints {bad.tolist()} read 0 = b with b != 0")
        w = np.linalg.eigvalsh(g)
        if w[0] > 1e-10 * max(w[-1], 1.0):
            return
        # pivoted QR on a Gram factor picks a maximal independent subset
        factor = (np.linalg.eigh(g)[1] * np.sqrt(np.clip(w, 0, None))).T
        _, rr, piv = scipy.linalg.qr(factor, pivoting=True, mode="economic")
        diag = np.abs(np.diag(rr))
        rank = int(np.sum(diag > 1e-9 * diag[0]))
        keep = np.sort(piv[:rank])
        coef = np.linalg.solve(g[np.ix_(keep, keep)], g[keep])
        if np.abs(coef.T @ self.rhs[keep] - self.rhs).max() > 1e-8 * max(1.0, np.abs(self.rhs).max()):
            raise InvariantError("dependent constraints with inconsistent right-hand sides")
        log.debug("dropping %d dependent constraint rows", m - rank)
        remap = -np.ones(m, dtype=int)
        remap[keep] = np.arange(rank)
        blocks = []
        for rows, a in self._blocks:
            sel = remap[rows] >= 0
            blocks.append((remap[rows][sel], a[sel]))
        self._blocks = blocks
        self.rhs = self.rhs[keep]

    def _build_groups(self) -> list[_Group]:
        buckets: dict[tuple[int, int], list[int]] = defaultdict(list)
        for i, (rows, _) in enumerate(self._blocks):
            buckets[(self.block_dims[i], len(rows))].append(i)
        groups = []
        for (n, r), idx in sorted(buckets.items()):
            rows = np.array([self._blocks[i][0] for i in idx], dtype=int).reshape(len(idx), r)
            a = np.array([self._blocks[i][1] for i in idx]).reshape(len(idx), r, n, n)
            c = np.array([self.objective[i] for i in idx])
            groups.append(_Group(np.array(idx), rows, a, c))
        return groups


    def constraint_values(self, blocks: Sequence[np.ndarray]) -> np.ndarray:
        return sum(g.apply(np.array([blocks[i] for i in g.index]), self.n_constraints)
                   for g in self.groups)

    def objective_value(self, blocks: Sequence[np.ndarray]) -> float:
        return float(sum(np.vdot(c, x).real for c, x in zip(self.objective, blocks)))


@dataclass
class SdpSolution:
    primal_blocks: list
    primal_value: float
    dual_value: float
    gap: float
    status: str
    iterations: int = 0
    primal_residual: float = 0.0
    dual_residual: float = 0.0
    min_eigenvalue: float = 0.0
    dual: np.ndarray | None = field(default=None, repr=False)
    log: list = field(default_factory=list, repr=False)


def write_iteration_log(solution: SdpSolution, path) -> None:
    """Dump the per-iteration diagnostics of a solve as CSV."""
    cols = ["iteration", "mu", "primal_value", "dual_value", "primal_residual",
            "dual_residual", "step_primal", "step_dual", "sigma"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for row in solution.log:
            w.writerow({k: f"{row[k]:.12g}" if isinstance(row[k], float) else row[k] for k in cols})


def _factor(x: np.ndarray) -> np.ndarray:
    """Batched ``L`` with ``x = L L^dag``; eigen-based fallback near singularity."""
    try:
        return np.linalg.cholesky(x)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(x)
        return v * np.sqrt(np.clip(w, 1e-300, None))[..., None, :]


def _max_step(lam: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Largest ``alpha`` with ``diag(lam) + alpha d >= 0`` for each batch entry."""
    s = 1 / np.sqrt(lam)
    m = d * s[..., :, None] * s[..., None, :]
    lo = np.linalg.eigvalsh(_herm(m))[..., 0]
    with np.errstate(divide="ignore"):
        return np.where(lo < 0, -1.0 / lo, np.inf)


class _Scaling:
    """NT scaling for one group: ``G^-1 X G^-dag = G^dag S G = diag(lam)``."""

    def __init__(self, x: np.ndarray, s: np.ndarray):
        lx = _factor(x)
        ls = _factor(s)
        u, sv, vh = np.linalg.svd(_dag(ls) @ lx)
        self.lam = sv
        self.g = lx @ _dag(vh) / np.sqrt(sv)[..., None, :]
        self.ginv = np.linalg.inv(self.g)
        self.w = self.g @ _dag(self.g)

    def scaled_x(self, dx):
        return self.ginv @ dx @ _dag(self.ginv)

    def scaled_s(self, ds):
        return _dag(self.g) @ ds @ self.g

    def lyap(self, rhs: np.ndarray) -> np.ndarray:
        """Solve ``lam D + D lam = rhs`` and map back: returns ``G D G^dag``."""
        lam = self.lam
        d = rhs / (lam[..., :, None] + lam[..., None, :])
        return self.g @ d @ _dag(self.g)


def solve_sdp(problem: SdpProblem, tol: float = 1e-9, max_iters: int = 100,
              step: float = 0.98) -> SdpSolution:
    """Solve ``problem`` to relative gap and infeasibility below ``tol``.

    Returns the best iterate with ``status='max-iterations'`` if ``tol``
    is not reached.  Raises :class:`SolverError` when the Newton system is
    numerically singular beyond recovery.
    """
    groups = problem.groups
    m = problem.n_constraints
    b = problem.rhs
    n_total = sum(problem.block_dims)
    c_norm = max(1.0, float(np.sqrt(sum(np.vdot(g.c, g.c).real for g in groups))))
    b_norm = max(1.0, float(np.linalg.norm(b)))

    def a_op(xs):
        return sum(g.apply(x, m) for g, x in zip(groups, xs)) if groups else np.zeros(m)

    def at_op(y):
        return [g.adjoint(y) for g in groups]

    # primal start: X = t I with t fitting the constraints best
    eye = [np.broadcast_to(np.eye(g.n), g.c.shape).astype(complex) for g in groups]
    ai = a_op(eye)
    t = float(ai @ b / (ai @ ai)) if m and ai @ ai > 0 else 1.0
    xs = [e * (t if t > 0 else 1.0) for e in eye]
    # dual start: y with A^*(y) = I if the identity is in range, else S = I
    cmax = max((np.linalg.eigvalsh(g.c)[..., -1].max() for g in groups), default=0.0)
    y = np.zeros(m)
    if m:
        gram = problem._gram()
        y1 = np.linalg.lstsq(gram, ai, rcond=None)[0]
        if all(np.abs(aty - e).max() < 1e-10 for aty, e in zip(at_op(y1), eye)):
            y = y1 * (1.0 + max(cmax, 0.0))
    ss = [aty - g.c for aty, g in zip(at_op(y), groups)] if np.any(y) else \
        [e * (1.0 + abs(cmax)) for e in eye]

    history = []
    best = None
    status = MAX_ITERATIONS
    it = 0
    for it in range(max_iters + 1):
        rp = b - a_op(xs)
        rd = [aty - g.c - s for aty, g, s in zip(at_op(y), groups, ss)]
        mu = sum(np.vdot(x, s).real for x, s in zip(xs, ss)) / n_total
        pobj = sum(np.vdot(g.c, x).real for g, x in zip(groups, xs))
        dobj = float(b @ y)
        pinf = float(np.linalg.norm(rp)) / b_norm
        dinf = float(np.sqrt(sum(np.vdot(r, r).real for r in rd))) / c_norm
        gap = abs(dobj - pobj) / max(1.0, abs(pobj))
        score = max(pinf, dinf, gap)
        if best is None or score <= best[0]:
            best = (score, [x.copy() for x in xs], y.copy(), pobj, dobj, gap, pinf, dinf)
        row = {"iteration": it, "mu": float(mu), "primal_value": float(pobj),
               "dual_value": dobj, "primal_residual": pinf, "dual_residual": dinf}
        if pinf <= tol and dinf <= tol and gap <= tol:
            status = OPTIMAL
            history.append({**row, "step_primal": 0.0, "step_dual": 0.0, "sigma": 0.0})
            break
        if it == max_iters:
            history.append({**row, "step_primal": 0.0, "step_dual": 0.0, "sigma": 0.0})
            break
        if max(np.abs(x).max() for x in xs) > 1e12:
            status = INFEASIBLE
            history.append({**row, "step_primal": 0.0, "step_dual": 0.0, "sigma": 0.0})
            break

        scal = [_Scaling(x, s) for x, s in zip(xs, ss)]
        schur = np.zeros((m, m))
        for g, sc in zip(groups, scal):
            blk = g.schur(sc.w)
            if g.shared:
                schur[np.ix_(g.rows[0], g.rows[0])] += blk[0]
            else:
                for k in range(len(blk)):
                    schur[np.ix_(g.rows[k], g.rows[k])] += blk[k]
        schur = 0.5 * (schur + schur.T)
        try:
            fac = scipy.linalg.cho_factor(schur)

            def solve(v):
                return scipy.linalg.cho_solve(fac, v)
        except np.linalg.LinAlgError:
            wsch, vsch = np.linalg.eigh(schur)
            if wsch[-1] <= 0:
                raise SolverError(f"Schur complement singular at iteration {it}")
            inv = np.where(wsch > 1e-14 * wsch[-1], 1.0 / np.where(wsch > 0, wsch, 1.0), 0.0)

            def solve(v):
                return vsch @ (inv * (vsch.T @ v))

        def direction(rcs):
            rhs = a_op([rc - sc.w @ r @ sc.w for rc, sc, r in zip(rcs, scal, rd)]) - rp
            dy = solve(rhs)
            if not np.all(np.isfinite(dy)):
                raise SolverError(f"non-finite Newton step at iteration {it}")
            ds = [aty + r for aty, r in zip(at_op(dy), rd)]
            dx = [_herm(rc - sc.w @ d @ sc.w) for rc, sc, d in zip(rcs, scal, ds)]
            return dx, dy, [_herm(d) for d in ds]

        def steps(dx, ds):
            ap = min([1.0] + [float(_max_step(sc.lam, sc.scaled_x(d)).min()) * step
                              for sc, d in zip(scal, dx)])
            ad = min([1.0] + [float(_max_step(sc.lam, sc.scaled_s(d)).min()) * step
                              for sc, d in zip(scal, ds)])
            return ap, ad

        # predictor
        lam2 = [np.einsum("...i,ij->...ij", sc.lam**2, np.eye(g.n)) for sc, g in zip(scal, groups)]
        dxa, dya, dsa = direction([sc.lyap(-2 * l2) for sc, l2 in zip(scal, lam2)])
        ap, ad = steps(dxa, dsa)
        mu_aff = sum(np.vdot(x + ap * dx, s + ad * ds).real
                     for x, dx, s, ds in zip(xs, dxa, ss, dsa)) / n_total
        sigma = float(np.clip((mu_aff / mu) ** 3, 0.0, 1.0)) if mu > 0 else 0.0
        # corrector
        rcs = []
        for sc, g, l2, dx, ds in zip(scal, groups, lam2, dxa, dsa):
            sx, sd = sc.scaled_x(dx), sc.scaled_s(ds)
            cross = sx @ sd
            rcs.append(sc.lyap(2 * sigma * mu * np.eye(g.n) - 2 * l2 - (cross + _dag(cross))))
        dx, dy, ds = direction(rcs)
        ap, ad = steps(dx, ds)
        xs = [_herm(x + ap * d) for x, d in zip(xs, dx)]
        ss = [_herm(s + ad * d) for s, d in zip(ss, ds)]
        y = y + ad * dy
        history.append({**row, "step_primal": ap, "step_dual": ad, "sigma": sigma})

    _, bx, by, pobj, dobj, gap, pinf, dinf = best
    blocks: list = [None] * len(problem.block_dims)
    for g, x in zip(groups, bx):
        for k, i in enumerate(g.index):
            blocks[i] = x[k]
    lo = min(float(np.linalg.eigvalsh(x)[0]) for x in blocks) if blocks else 0.0
    resid = float(np.abs(b - a_op(bx)).max()) if m else 0.0
    return SdpSolution(blocks, float(pobj), float(dobj), float(gap), status, it,
                       resid, float(dinf), lo, by, history)


# ---------------------------------------------------------------------------
# see-saw programs


def povm_problem(states: Sequence[np.ndarray], policy: NumericPolicy = DEFAULT_POLICY) -> SdpProblem:
    """``max sum_x tr(rho_x M_x)`` over POVMs ``{M_x}``."""
    rhos = [np.asarray(getattr(r, "matrix", r), dtype=complex) for r in states]
    n = rhos[0].shape[0]
    if any(r.shape != (n, n) for r in rhos):
        raise InvariantError("all states must have the same dimension")
    basis = hermitian_basis(n)
    rhs = np.einsum("kii->k", basis).real
    rows = [np.arange(len(basis))] * len(rhos)
    return SdpProblem.from_arrays([n] * len(rhos), rhos, rows, [basis] * len(rhos), rhs, policy)


def optimize_povm(prepared: Sequence[DensityOperator], tol: float = 1e-9, max_iters: int = 100,
                  policy: NumericPolicy = DEFAULT_POLICY,
                  return_solution: bool = False):
    """Optimal minimum-error measurement for equiprobable ``prepared`` states.

    Returns ``(povm, p_suc)`` where ``p_suc`` is recomputed from the
    repaired (exactly complete) POVM.
    """
    prepared = list(prepared)
    if not prepared:
        raise InvariantError("need at least one state")
    sol = solve_sdp(povm_problem(prepared, policy), tol=tol, max_iters=max_iters)
    if sol.status == INFEASIBLE:
        raise SolverError("POVM program reported infeasible")
    povm = Povm.repaired(sol.primal_blocks, policy)
    value = float(sum(np.vdot(r.matrix, m).real for r, m in zip(prepared, povm.effects)))
    value /= len(prepared)
    if return_solution:
        return povm, value, sol
    return povm, value


def preparation_objective(shared: DensityOperator, effect: np.ndarray) -> np.ndarray:
    """Operator ``Q`` on ``A ⊗ A'`` with ``tr(rho_x M) = tr(L Q)`` for Choi ``L``.

    ``Q[(j,a2), (i,a1)] = sum_{b,b2} rho[(i,b), (j,b2)] M[(a2,b2), (a1,b)]``.
    """
    d_a, d_b = shared.dims
    r = shared.matrix.reshape(d_a, d_b, d_a, d_b)
    m = np.asarray(effect, dtype=complex).reshape(d_a, d_b, d_a, d_b)
    q = np.einsum("ibjc,ecab->jeia", r, m)
    return _herm(q.reshape(d_a * d_a, d_a * d_a))


def preparation_problem(shared: DensityOperator, povm: Povm,
                        policy: NumericPolicy = DEFAULT_POLICY) -> SdpProblem:
    """``max sum_x tr(L_x Q_x)`` over Choi operators with ``tr_A' L_x = I_A``."""
    d_a, d_b = shared.dims
    if povm.dim != d_a * d_b:
        raise InvariantError(f"POVM dimension {povm.dim} does not match the shared state")
    n = povm.n_outcomes
    qs = [preparation_objective(shared, e) for e in povm.effects]
    basis = hermitian_basis(d_a)
    coeffs = np.array([np.kron(e, np.eye(d_a)) for e in basis])
    rhs_one = np.einsum("kii->k", basis).real
    k = len(basis)
    rows = [np.arange(x * k, (x + 1) * k) for x in range(n)]
    return SdpProblem.from_arrays([d_a * d_a] * n, qs, rows, [coeffs] * n,
                                  np.tile(rhs_one, n), policy)


def optimize_preparations(shared: DensityOperator, povm: Povm, tol: float = 1e-9,
                          max_iters: int = 100, policy: NumericPolicy = DEFAULT_POLICY,
                          return_solution: bool = False):
    """Best local channels on Alice's side for a fixed measurement.

    Returns ``(chois, p_suc)``; the Choi operators are repaired to exact
    trace preservation and ``p_suc`` is recomputed from them.
    """
    sol = solve_sdp(preparation_problem(shared, povm, policy), tol=tol, max_iters=max_iters)
    if sol.status == INFEASIBLE:
        raise SolverError("preparation program reported infeasible")
    d_a = shared.d_a
    chois = [ChoiOperator.repaired(x, d_a, d_a, policy) for x in sol.primal_blocks]
    value = float(sum(np.vdot(preparation_objective(shared, e), c.matrix).real
                      for e, c in zip(povm.effects, chois))) / povm.n_outcomes
    if return_solution:
        return chois, value, sol
    return chois, value
