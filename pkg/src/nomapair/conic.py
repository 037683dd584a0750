"""Second-order-cone assembly of one SCA subproblem, plus solver backends.

The subproblem maximizes the common rate floor ``eta`` subject to the
pairing polytope, the transmit power budget, the quadratic-under-linear
lifts ``|h_k^H w_l|^2 <= mu[k, l]`` and the concave rate surrogates from
:mod:`nomapair.surrogate`.  Everything is assembled into an explicit
standard form

    maximize  c @ x   s.t.   A_lin x <= b_lin,   quadratic blocks,

where every quadratic block is a sum of squared affine forms bounded by an
affine form -- positive semidefinite by construction -- and is lowered to
one second-order cone.  Complex inner products are embedded as pairs of
real affine rows (real/imaginary stacking).

Two interchangeable backends solve the lowered cone program: ``clarabel``
(interior point, the default) and ``scs`` (operator splitting, used for
cross-checks).  Outcomes are validated against the original blocks before
being reported optimal, so a solver can never silently return an infeasible
point.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp

from .core import BeamformerSet, PairingMatrix, PairingMode
from .surrogate import (
    TERM_VHAT,
    TERM_X_CORNER,
    Iterate,
    SurrogateCoeffs,
    term_kind,
)

__all__ = [
    "FEAS_TOL",
    "GAP_TOL",
    "VariableLayout",
    "LinearBlock",
    "QuadBlock",
    "ConicProgram",
    "SolveStatus",
    "SolveOutcome",
    "build_subproblem",
    "solve",
    "dump_program",
]

#: Feasibility tolerance an optimal point must satisfy on the original blocks.
FEAS_TOL = 1e-7

#: Duality-gap tolerance requested from the interior-point backend.
GAP_TOL = 1e-8


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    NUMERICAL_FAILURE = "numerical-failure"


@dataclass(frozen=True)
class VariableLayout:
    """Real-valued packing of the decision variables.

    ``w`` occupies ``2 N K`` slots (per user: N real parts then N imaginary
    parts), followed by the free upper-triangular pairing entries (absent
    when the pairing is frozen), the ``K^2`` mu lifts in row-major order,
    and finally ``eta``.
    """

    K: int
    N: int
    alpha_index: dict   # (k, l) -> variable index; empty when frozen
    alpha_fixed: np.ndarray | None
    mu_start: int
    eta_index: int
    n_vars: int

    def w_index(self, k: int, j: int, imag: bool) -> int:
        return 2 * self.N * k + j + (self.N if imag else 0)

    def mu_index(self, k: int, l: int) -> int:
        return self.mu_start + k * self.K + l

    def pack(self, w: BeamformerSet, a: PairingMatrix, mu: np.ndarray, eta: float) -> np.ndarray:
        x = np.zeros(self.n_vars)
        for k in range(self.K):
            x[2 * self.N * k: 2 * self.N * k + self.N] = w.vectors[k].real
            x[2 * self.N * k + self.N: 2 * self.N * (k + 1)] = w.vectors[k].imag
        for (k, l), idx in self.alpha_index.items():
            x[idx] = a.entries[k, l]
        x[self.mu_start: self.mu_start + self.K * self.K] = np.asarray(mu).reshape(-1)
        x[self.eta_index] = eta
        return x

    def unpack(self, x: np.ndarray):
        K, N = self.K, self.N
        vecs = np.empty((K, N), dtype=complex)
        for k in range(K):
            vecs[k] = x[2 * N * k: 2 * N * k + N] + 1j * x[2 * N * k + N: 2 * N * (k + 1)]
        alpha = np.zeros((K, K)) if self.alpha_fixed is None else self.alpha_fixed.copy()
        for (k, l), idx in self.alpha_index.items():
            alpha[k, l] = x[idx]
        mu = x[self.mu_start: self.mu_start + K * K].reshape(K, K).copy()
        return (
            BeamformerSet(vecs),
            PairingMatrix(alpha, PairingMode.RELAXED),
            mu,
            float(x[self.eta_index]),
        )


@dataclass(frozen=True)
class LinearBlock:
    """Rows of ``A x <= b``."""

    name: str
    A: sp.csr_matrix
    b: np.ndarray

    def violation(self, x: np.ndarray) -> float:
        if self.A.shape[0] == 0:
            return 0.0
        resid = self.A @ x - self.b
        scale = np.maximum(1.0, np.abs(self.b))
        return float(np.max(resid / scale))


@dataclass(frozen=True)
class QuadBlock:
    """``sum_j (F_j x + d_j)^2 <= g x + e`` with the nonnegative curvature
    scales already folded into the rows, certifying convexity by construction."""

    name: str
    F: sp.csr_matrix
    d: np.ndarray
    g: sp.csr_matrix   # single row
    e: float

    def violation(self, x: np.ndarray) -> float:
        lhs = float(np.sum((self.F @ x + self.d) ** 2))
        rhs = float((self.g @ x)[0] + self.e)
        return (lhs - rhs) / max(1.0, abs(rhs))


@dataclass(frozen=True)
class ConicProgram:
    """One assembled subproblem: layout, linear objective, constraint blocks."""

    layout: VariableLayout
    c: np.ndarray                     # maximize c @ x
    linear_blocks: list[LinearBlock]
    quad_blocks: list[QuadBlock]
    notes: dict = field(default_factory=dict)

    @property
    def n_vars(self) -> int:
        return self.layout.n_vars

    def counts(self) -> dict:
        return {
            "variables": self.n_vars,
            "linear_rows": int(sum(blk.A.shape[0] for blk in self.linear_blocks)),
            "cones": len(self.quad_blocks),
            "cone_rows": int(sum(blk.F.shape[0] + 2 for blk in self.quad_blocks)),
        }

    def residuals_at(self, x: np.ndarray) -> dict:
        """Scaled violation per block; positive means the constraint is broken."""
        out = {}
        for blk in self.linear_blocks:
            out[blk.name] = blk.violation(x)
        for blk in self.quad_blocks:
            out[blk.name] = blk.violation(x)
        return out

    def max_violation(self, x: np.ndarray) -> float:
        vals = self.residuals_at(x).values()
        return max(vals) if vals else 0.0

    def lower(self):
        """Stack everything into (q, A, b, nonneg_rows, soc_dims) with s = b - Ax."""
        n = self.n_vars
        rows_A = [blk.A for blk in self.linear_blocks if blk.A.shape[0] > 0]
        rows_b = [blk.b for blk in self.linear_blocks if blk.A.shape[0] > 0]
        nonneg = int(sum(A.shape[0] for A in rows_A))
        soc_dims = []
        for blk in self.quad_blocks:
            m = blk.F.shape[0]
            soc_dims.append(m + 2)
            # s0 = g x + e + 1; s_j = 2 (F_j x + d_j); s_last = g x + e - 1
            rows_A.append(sp.vstack([-blk.g, -2.0 * blk.F, -blk.g], format="csr"))
            rows_b.append(np.concatenate([[blk.e + 1.0], 2.0 * blk.d, [blk.e - 1.0]]))
        A = sp.vstack(rows_A, format="csc") if rows_A else sp.csc_matrix((0, n))
        b = np.concatenate(rows_b) if rows_b else np.zeros(0)
        return -self.c, A, b, nonneg, soc_dims


@dataclass(frozen=True)
class SolveOutcome:
    status: SolveStatus
    backend: str
    raw_status: str
    objective: float | None
    w: BeamformerSet | None
    a: PairingMatrix | None
    mu: np.ndarray | None
    eta: float | None
    iterations: int
    solve_time_s: float
    max_residual: float
    residuals: dict


def _scaled_quad_block(name: str, F: sp.csr_matrix, d: np.ndarray,
                       g: sp.csr_matrix, e: float, scale: float) -> QuadBlock:
    """Pose ``sum q^2 <= rhs`` as ``sum (q/sqrt(c))^2 <= rhs/c``.

    Dividing a block by its expansion-point magnitude keeps all cone data
    near unity, which is what the interior-point solver's per-constraint
    accuracy is measured against.
    """
    c = max(1.0, float(scale))
    if c == 1.0:
        return QuadBlock(name, F, d, g, e)
    root = np.sqrt(c)
    return QuadBlock(name, F / root, d / root, g / c, e / c)


class _RowAccumulator:
    """Collects sparse rows as (cols, vals) pairs before CSR assembly."""

    def __init__(self, n_vars: int):
        self.n = n_vars
        self.rows = []
        self.rhs = []

    def add(self, cols, vals, rhs: float) -> None:
        self.rows.append((np.asarray(cols, dtype=int), np.asarray(vals, dtype=float)))
        self.rhs.append(float(rhs))

    def matrix(self) -> tuple[sp.csr_matrix, np.ndarray]:
        if not self.rows:
            return sp.csr_matrix((0, self.n)), np.zeros(0)
        indptr = np.zeros(len(self.rows) + 1, dtype=int)
        for i, (cols, _) in enumerate(self.rows):
            indptr[i + 1] = indptr[i] + len(cols)
        indices = np.concatenate([cols for cols, _ in self.rows]) if self.rows else np.zeros(0, dtype=int)
        data = np.concatenate([vals for _, vals in self.rows]) if self.rows else np.zeros(0)
        A = sp.csr_matrix((data, indices, indptr), shape=(len(self.rows), self.n))
        return A, np.asarray(self.rhs)


def _inner_product_rows(layout: VariableLayout, hn_row: np.ndarray, l: int):
    """Affine rows (cols, vals) of Re and Im of ``hn_row^H w_l``."""
    N = layout.N
    re_cols, re_vals, im_cols, im_vals = [], [], [], []
    for j in range(N):
        cr = layout.w_index(l, j, imag=False)
        ci = layout.w_index(l, j, imag=True)
        # z = sum_j conj(h_j) w_j
        re_cols += [cr, ci]
        re_vals += [hn_row[j].real, hn_row[j].imag]
        im_cols += [cr, ci]
        im_vals += [-hn_row[j].imag, hn_row[j].real]
    return (re_cols, re_vals), (im_cols, im_vals)


def _real_form(layout: VariableLayout, t_row: np.ndarray, k: int):
    """Columns/values of the real-linear form ``Re(t_row @ w_k)``."""
    cols, vals = [], []
    for j in range(layout.N):
        cols.append(layout.w_index(k, j, imag=False))
        vals.append(t_row[j].real)
        cols.append(layout.w_index(k, j, imag=True))
        vals.append(-t_row[j].imag)
    return cols, vals


def build_subproblem(s, coeffs: SurrogateCoeffs, it: Iterate) -> ConicProgram:
    """Assemble the convex subproblem around ``it`` with the given coefficients.

    Which pairing entries are decision variables is taken from
    ``coeffs.alpha_var`` (empty in the fixed-pairing phase, where the values
    in ``it.a`` act as constants).  Inactive pairs contribute no
    cross-receiver rate constraint.  The expansion iterate itself is feasible
    for the assembled program, which the IA step relies on; see
    ``ConicProgram.residuals_at`` for checking that directly.
    """
    K, N = coeffs.K, coeffs.N
    if s.K != K or s.N != N:
        raise ValueError(f"scenario is {s.K}x{s.N} but coefficients are {K}x{N}")
    if it.a.entries.shape != (K, K):
        raise ValueError("iterate pairing dimension mismatch")

    frozen = not bool(coeffs.alpha_var.any())
    alpha_entries = [(k, l) for k in range(K) for l in range(k + 1, K)] if not frozen else []
    alpha_index = {}
    pos = 2 * N * K
    for k, l in alpha_entries:
        alpha_index[(k, l)] = pos
        pos += 1
    mu_start = pos
    eta_index = mu_start + K * K

    # corner product bounds take one epigraph variable each; count them first
    n_aux = 0
    if not frozen:
        for k in range(K):
            for l in range(K):
                if l != k and term_kind(coeffs.x0_f[k, l], coeffs.mu0[k, l], coeffs.eps_v) != TERM_VHAT:
                    n_aux += 1
        for ell, k in coeffs.active_pairs():
            for lp in range(K):
                if lp != k and term_kind(coeffs.alpha0[ell, k], coeffs.mu0[ell, lp],
                                         coeffs.eps_v) != TERM_VHAT:
                    n_aux += 1

    layout = VariableLayout(
        K=K,
        N=N,
        alpha_index=alpha_index,
        alpha_fixed=it.a.entries.copy() if frozen else None,
        mu_start=mu_start,
        eta_index=eta_index,
        n_vars=eta_index + 1 + n_aux,
    )

    def alpha_col(k, l):
        return alpha_index.get((k, l))

    linear_blocks: list[LinearBlock] = []

    if not frozen:
        acc = _RowAccumulator(layout.n_vars)
        for l in range(K):                      # each far slot used at most once
            cols = [alpha_index[(k, l)] for k in range(l)]
            acc.add(cols, [1.0] * len(cols), 1.0)
        for k in range(K):                      # each near slot used at most once
            cols = [alpha_index[(k, l)] for l in range(k + 1, K)]
            acc.add(cols, [1.0] * len(cols), 1.0)
        A, b = acc.matrix()
        linear_blocks.append(LinearBlock("pair_degree", A, b))

        acc = _RowAccumulator(layout.n_vars)
        for k in range(K):
            for l in range(k + 1, K):
                cols = [alpha_index[(k, l)]] + [alpha_index[(l, kp)] for kp in range(l + 1, K)]
                acc.add(cols, [1.0] * len(cols), 1.0)
        for k in range(K):
            for l in range(k + 1, K):
                cols = [alpha_index[(k, l)]] + [alpha_index[(lp, k)] for lp in range(k)]
                acc.add(cols, [1.0] * len(cols), 1.0)
        A, b = acc.matrix()
        linear_blocks.append(LinearBlock("pair_chain", A, b))

        acc = _RowAccumulator(layout.n_vars)
        for (k, l), idx in alpha_index.items():
            acc.add([idx], [-1.0], 0.0)          # alpha >= 0
            acc.add([idx], [1.0], 1.0)           # alpha <= 1
        A, b = acc.matrix()
        linear_blocks.append(LinearBlock("pair_box", A, b))

        # pairs without a cross-receiver constraint may only reach the
        # activation boundary in this step; growing further requires the
        # next iteration to generate their constraint first
        acc = _RowAccumulator(layout.n_vars)
        for (k, l), idx in alpha_index.items():
            if not coeffs.active[k, l]:
                acc.add([idx], [1.0], coeffs.eps_act)
        A, b = acc.matrix()
        linear_blocks.append(LinearBlock("pair_trust", A, b))

    acc = _RowAccumulator(layout.n_vars)
    for k in range(K):
        for l in range(K):
            acc.add([layout.mu_index(k, l)], [-1.0], 0.0)
        # mu >= 0
    A, b = acc.matrix()
    linear_blocks.append(LinearBlock("mu_nonneg", A, b))

    aux_next = [eta_index + 1]
    relu_acc = _RowAccumulator(layout.n_vars)
    cap_acc = _RowAccumulator(layout.n_vars)
    capped_entries = set()

    def new_relu_var() -> int:
        idx = aux_next[0]
        aux_next[0] += 1
        relu_acc.add([idx], [-1.0], 0.0)     # t >= 0
        return idx

    def require_mu_cap(k: int, l: int) -> None:
        # power-implied lift cap; only corner product bounds rely on it
        if (k, l) not in capped_entries:
            capped_entries.add((k, l))
            cap_acc.add([layout.mu_index(k, l)], [1.0], coeffs.mu_cap[k])

    quad_blocks: list[QuadBlock] = []
    zero_row = sp.csr_matrix((1, layout.n_vars))

    # total transmit power: sum ||w_k||^2 <= p_max
    acc = _RowAccumulator(layout.n_vars)
    for idx in range(2 * N * K):
        acc.add([idx], [1.0], 0.0)
    F, d = acc.matrix()
    quad_blocks.append(_scaled_quad_block("power", F, d, zero_row, float(s.p_max_w),
                                          s.p_max_w))

    # mu lifts: |h_k^H w_l|^2 <= mu[k, l]
    for k in range(K):
        for l in range(K):
            (re_c, re_v), (im_c, im_v) = _inner_product_rows(layout, coeffs.hn[k], l)
            acc = _RowAccumulator(layout.n_vars)
            acc.add(re_c, re_v, 0.0)
            acc.add(im_c, im_v, 0.0)
            F, d = acc.matrix()
            g = sp.csr_matrix(([1.0], ([0], [layout.mu_index(k, l)])), shape=(1, layout.n_vars))
            quad_blocks.append(_scaled_quad_block(f"mu_lift[{k},{l}]", F, d, g, 0.0,
                                                  coeffs.mu0[k, l]))

    # own-receiver rate surrogates (one per user)
    for k in range(K):
        xi = max(float(coeffs.xi[k]), 0.0)
        sq = _RowAccumulator(layout.n_vars)
        (re_c, re_v), (im_c, im_v) = _inner_product_rows(layout, coeffs.hn[k], k)
        root_xi = np.sqrt(xi)
        sq.add(re_c, np.asarray(re_v) * root_xi, 0.0)
        sq.add(im_c, np.asarray(im_v) * root_xi, 0.0)

        g_cols, g_vals = _real_form(layout, 2.0 * coeffs.f1_row[k], k)
        g_cols.append(layout.eta_index)
        g_vals.append(-1.0)
        e = float(coeffs.f0[k]) - xi
        for l in range(K):
            if l == k:
                continue
            if not coeffs.alpha_var[k, l]:
                weight = xi * (1.0 - it.a.entries[k, l])
                if weight != 0.0:
                    g_cols.append(layout.mu_index(k, l))
                    g_vals.append(-weight)
                continue
            x0 = coeffs.x0_f[k, l]
            z0 = coeffs.mu0[k, l]
            kind = term_kind(x0, z0, coeffs.eps_v)
            if kind == TERM_VHAT:
                c_mu = np.sqrt(xi * 0.5 * x0 / z0)
                sq.add([layout.mu_index(k, l)], [c_mu], 0.0)
                c_al = np.sqrt(xi * 0.5 * z0 / x0)
                sq.add([alpha_col(k, l)], [-c_al], c_al)   # c_al * (1 - alpha)
            elif kind == TERM_X_CORNER:
                # xi * (x0 * mu + t), with t >= cap * ((1 - alpha) - x0);
                # the cap lives in a linear row where per-row equilibration
                # absorbs it, keeping the cone data near unity
                cap = coeffs.mu_cap[k]
                require_mu_cap(k, l)
                t = new_relu_var()
                relu_acc.add([alpha_col(k, l), t], [-cap, -1.0], cap * (x0 - 1.0))
                g_cols += [layout.mu_index(k, l), t]
                g_vals += [-xi * x0, -xi]
            else:
                # xi * (z0 * (1 - alpha) + t), with t >= mu - z0
                t = new_relu_var()
                relu_acc.add([layout.mu_index(k, l), t], [1.0, -1.0], z0)
                e -= xi * z0
                g_cols += [alpha_col(k, l), t]
                g_vals += [xi * z0, -xi]
        F, d = sq.matrix()
        g = sp.csr_matrix((g_vals, ([0] * len(g_cols), g_cols)), shape=(1, layout.n_vars))
        quad_blocks.append(QuadBlock(f"rate_own[{k}]", F, d, g, e))

    # cross-receiver rate surrogates (one per active pair)
    for ell, k in coeffs.active_pairs():
        theta = max(float(coeffs.theta[ell, k]), 0.0)
        sq = _RowAccumulator(layout.n_vars)
        (re_c, re_v), (im_c, im_v) = _inner_product_rows(layout, coeffs.hn[ell], k)
        root_theta = np.sqrt(theta)
        sq.add(re_c, np.asarray(re_v) * root_theta, 0.0)
        sq.add(im_c, np.asarray(im_v) * root_theta, 0.0)

        g_cols, g_vals = _real_form(layout, 2.0 * coeffs.g1_row[ell, k], k)
        g_cols.append(layout.eta_index)
        g_vals.append(-1.0)
        e = float(coeffs.g0[ell, k])
        if coeffs.alpha_var[ell, k]:
            g_cols.append(alpha_col(ell, k))
            g_vals.append(-theta)                 # noise term alpha * theta
            x0 = coeffs.alpha0[ell, k]
            alpha_curv = 0.0
            for lp in range(K):
                if lp == k:
                    continue
                z0 = coeffs.mu0[ell, lp]
                kind = term_kind(x0, z0, coeffs.eps_v)
                if kind == TERM_VHAT:
                    c_mu = np.sqrt(theta * 0.5 * x0 / z0)
                    sq.add([layout.mu_index(ell, lp)], [c_mu], 0.0)
                    alpha_curv += theta * 0.5 * z0 / x0
                elif kind == TERM_X_CORNER:
                    # theta * (x0 * mu + t), with t >= cap * (alpha - x0)
                    cap = coeffs.mu_cap[ell]
                    require_mu_cap(ell, lp)
                    t = new_relu_var()
                    relu_acc.add([alpha_col(ell, k), t], [cap, -1.0], cap * x0)
                    g_cols += [layout.mu_index(ell, lp), t]
                    g_vals += [-theta * x0, -theta]
                else:
                    # theta * (z0 * alpha + t), with t >= mu - z0
                    t = new_relu_var()
                    relu_acc.add([layout.mu_index(ell, lp), t], [1.0, -1.0], z0)
                    g_cols += [alpha_col(ell, k), t]
                    g_vals += [-theta * z0, -theta]
            if alpha_curv > 0.0:
                sq.add([alpha_col(ell, k)], [np.sqrt(alpha_curv)], 0.0)
        else:
            alpha_c = float(it.a.entries[ell, k])
            e -= theta * alpha_c
            for lp in range(K):
                if lp == k:
                    continue
                weight = theta * alpha_c
                if weight != 0.0:
                    g_cols.append(layout.mu_index(ell, lp))
                    g_vals.append(-weight)
        F, d = sq.matrix()
        g = sp.csr_matrix((g_vals, ([0] * len(g_cols), g_cols)), shape=(1, layout.n_vars))
        quad_blocks.append(QuadBlock(f"rate_pair[{ell},{k}]", F, d, g, e))

    A, b = relu_acc.matrix()
    linear_blocks.append(LinearBlock("relu_epi", A, b))
    A, b = cap_acc.matrix()
    linear_blocks.append(LinearBlock("mu_cap", A, b))

    c = np.zeros(layout.n_vars)
    c[layout.eta_index] = 1.0

    from .sca import complexity_estimate   # complexity-model counts, for the log only
    x_model, y_model, _ = complexity_estimate(K, N)
    program = ConicProgram(
        layout=layout,
        c=c,
        linear_blocks=linear_blocks,
        quad_blocks=quad_blocks,
        notes={
            "frozen_pairing": frozen,
            "active_pairs": coeffs.active_pairs(),
            "model_constraint_count": x_model,
            "model_variable_count": y_model,
        },
    )
    return program


#: Alternative interior-point configurations; tried in order when the
#: default cannot certify a solve on a badly conditioned instance.
CLARABEL_PROFILES = ("default", "wide_equil", "no_statreg")


def _solve_clarabel(program: ConicProgram, gap_tol: float, feas_tol: float,
                    profile: str = "default"):
    import clarabel

    q, A, b, nonneg, soc_dims = program.lower()
    cones = []
    if nonneg:
        cones.append(clarabel.NonnegativeConeT(nonneg))
    cones.extend(clarabel.SecondOrderConeT(dim) for dim in soc_dims)
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_gap_abs = gap_tol
    settings.tol_gap_rel = gap_tol
    # an order tighter than the outcome check so unscaled residuals pass it
    settings.tol_feas = min(feas_tol * 1e-2, 1e-9)
    settings.tol_ktratio = 1e-5
    if profile == "wide_equil":
        settings.equilibrate_max_scaling = 1e6
        settings.max_iter = 400
    elif profile == "no_statreg":
        settings.static_regularization_enable = False
        settings.max_iter = 400
    P = sp.csc_matrix((q.size, q.size))
    solver = clarabel.DefaultSolver(P, q, A, b, cones, settings)
    sol = solver.solve()
    status = str(sol.status).removeprefix("SolverStatus.")
    x = np.asarray(sol.x)[: program.n_vars]
    solved = status == "Solved"
    # stalls near the solution are common at these tolerances; the returned
    # iterate is accepted only if it passes the residual and gap checks below
    stalled = status in ("AlmostSolved", "InsufficientProgress", "MaxIterations")
    infeasible = "PrimalInfeasible" in status
    gap = abs(float(sol.obj_val) - float(sol.obj_val_dual))
    return x, solved, stalled, infeasible, status, gap, int(sol.iterations), float(sol.solve_time)


def _solve_scs(program: ConicProgram, gap_tol: float, feas_tol: float,
               profile: str = "default"):
    import scs

    q, A, b, nonneg, soc_dims = program.lower()
    cone = {}
    if nonneg:
        cone["l"] = nonneg
    if soc_dims:
        cone["q"] = soc_dims
    data = dict(A=sp.csc_matrix(A), b=b, c=q)
    solver = scs.SCS(data, cone, verbose=False, eps_abs=1e-9, eps_rel=1e-9, max_iters=50_000)
    out = solver.solve()
    status = out["info"]["status"]
    x = np.asarray(out["x"])[: program.n_vars]
    solved = status == "solved"
    stalled = status.startswith("solved")
    infeasible = "infeasible" in status
    gap = abs(float(out["info"]["gap"]))
    return x, solved, stalled, infeasible, status, gap, int(out["info"]["iter"]), float(out["info"]["solve_time"]) / 1e3


_BACKENDS = {"clarabel": _solve_clarabel, "scs": _solve_scs}


#: Gap bound (relative to the objective scale) for accepting a stalled iterate.
STALL_GAP_TOL = 1e-7


def solve(program: ConicProgram, backend: str = "clarabel",
          gap_tol: float = GAP_TOL, feas_tol: float = FEAS_TOL,
          profile: str = "default") -> SolveOutcome:
    """Solve an assembled program, verifying feasibility before claiming optimal.

    Deterministic for fixed inputs.  An outcome is ``optimal`` only when the
    point satisfies every original block within ``feas_tol`` and the duality
    gap is certified: either the backend met its requested tolerance, or it
    stalled at a point whose reported gap is below ``STALL_GAP_TOL`` of the
    objective scale.  Anything weaker surfaces as ``numerical-failure`` with
    residual diagnostics; when the returned point is at least feasible it is
    exposed on the outcome so callers can apply their own acceptance rule.
    """
    if backend not in _BACKENDS:
        raise ValueError(f"unknown backend '{backend}', have {sorted(_BACKENDS)}")
    x, solved, stalled, infeasible, raw, gap, iters, took = _BACKENDS[backend](
        program, gap_tol, feas_tol, profile)

    if infeasible:
        return SolveOutcome(
            status=SolveStatus.INFEASIBLE, backend=backend, raw_status=raw,
            objective=None, w=None, a=None, mu=None, eta=None,
            iterations=iters, solve_time_s=took, max_residual=np.inf, residuals={},
        )
    residuals = program.residuals_at(x) if x.size == program.n_vars else {}
    max_resid = max(residuals.values()) if residuals else np.inf
    finite = bool(np.all(np.isfinite(x))) and x.size == program.n_vars
    obj_scale = max(1.0, abs(float(program.c @ x))) if finite else 1.0
    gap_ok = solved or gap <= STALL_GAP_TOL * obj_scale
    usable = finite and max_resid <= feas_tol
    if (solved or stalled) and usable and gap_ok:
        w, a, mu, eta = program.layout.unpack(x)
        return SolveOutcome(
            status=SolveStatus.OPTIMAL, backend=backend, raw_status=raw,
            objective=float(program.c @ x), w=w, a=a, mu=mu, eta=eta,
            iterations=iters, solve_time_s=took, max_residual=max_resid, residuals=residuals,
        )
    if usable:
        w, a, mu, eta = program.layout.unpack(x)
        obj = float(program.c @ x)
    else:
        w = a = mu = eta = obj = None
    return SolveOutcome(
        status=SolveStatus.NUMERICAL_FAILURE, backend=backend, raw_status=raw,
        objective=obj, w=w, a=a, mu=mu, eta=eta,
        iterations=iters, solve_time_s=took, max_residual=max_resid, residuals=residuals,
    )


def dump_program(program: ConicProgram, path) -> None:
    """Write a portable text listing (variables, cones, coefficient triplets)."""
    with open(path, "w") as fh:
        lay = program.layout
        fh.write(f"conic_program K={lay.K} N={lay.N} vars={lay.n_vars}\n")
        fh.write(f"objective maximize x[{lay.eta_index}]\n")
        for blk in program.linear_blocks:
            A = blk.A.tocoo()
            fh.write(f"linear {blk.name} rows={blk.A.shape[0]}\n")
            for i, j, v in zip(A.row, A.col, A.data):
                fh.write(f"  A {i} {j} {v!r}\n")
            for i, v in enumerate(blk.b):
                fh.write(f"  b {i} {v!r}\n")
        for blk in program.quad_blocks:
            F = blk.F.tocoo()
            G = blk.g.tocoo()
            fh.write(f"quad {blk.name} sq_rows={blk.F.shape[0]} e={blk.e!r}\n")
            for i, j, v in zip(F.row, F.col, F.data):
                fh.write(f"  F {i} {j} {v!r}\n")
            for i, v in enumerate(blk.d):
                if v:
                    fh.write(f"  d {i} {v!r}\n")
            for _, j, v in zip(G.row, G.col, G.data):
                fh.write(f"  g {j} {v!r}\n")
