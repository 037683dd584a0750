"""Concave minorants for the non-convex rate constraints.

Each SCA iteration replaces the two families of rate constraints (the
own-receiver log-SINR of every user, and the cross-receiver log-SINR of a
far user's message at its paired near receiver) by concave lower bounds
expanded around the current iterate.  The bounds have three ingredients:

* a global minorant of ``ln(1 + |a|^2 / b)`` that is linear in the complex
  inner product and affine in the interference power, tight at the
  expansion point;
* an auxiliary lift ``mu[k, l] >= |h_k^H w_l|^2`` so interference shows up
  affinely; and
* a convex quadratic upper bound ``vhat`` on the bilinear products between
  pairing variables and lifted powers, also tight at the expansion point.

Tightness at the expansion point is what makes the outer loop monotone, so
it is asserted to near machine precision by the test suite.

All quantities here use noise-normalized channels (``h_k / sigma_k``, unit
noise), which keeps every coefficient within a few orders of magnitude of
one; SINRs and rates are invariant under this scaling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import BeamformerSet, PairingMatrix, PairingMode

__all__ = [
    "EPS_V",
    "EPS_ACT",
    "MU_PAD",
    "Iterate",
    "SurrogateCoeffs",
    "clamp_counter",
    "vhat",
    "build_coeffs",
    "eval_lower_bound_0k",
    "eval_lower_bound_lk",
    "normalized_channels",
    "received_powers_normalized",
    "relaxed_phi",
    "relaxed_psi",
    "relaxed_log_sinr_0k",
    "relaxed_log_sinr_lk",
    "relaxed_min_rate",
    "make_iterate",
]

#: Floor for vhat expansion values (keeps the quadratic curvatures finite).
EPS_V = 1e-6

#: Pairing level below which a cross-receiver rate constraint is not generated.
EPS_ACT = 1e-2

#: Slack added above the exact received power when refreshing the mu lift.
MU_PAD = 1e-12


class _ClampCounter:
    """Counts vhat expansion-point clamps; useful when debugging conditioning."""

    def __init__(self):
        self.count = 0

    def reset(self) -> None:
        self.count = 0


clamp_counter = _ClampCounter()


def normalized_channels(s) -> np.ndarray:
    """Channels divided by per-user noise std; unit noise in this scaling."""
    return s.channels / np.sqrt(s.noise_w)[:, None]


def received_powers_normalized(s, w: BeamformerSet) -> np.ndarray:
    """R[k, l] = |h_k^H w_l|^2 / sigma_k^2."""
    hn = normalized_channels(s)
    return np.abs(np.conj(hn) @ w.vectors.T) ** 2


def relaxed_phi(s, w: BeamformerSet, a: PairingMatrix) -> np.ndarray:
    """Own-receiver interference-plus-noise (normalized), any alpha in [0, 1]."""
    r = received_powers_normalized(s, w)
    weighted = (1.0 - a.entries) * r
    return weighted.sum(axis=1) - np.diag(weighted) + 1.0


def relaxed_psi(s, w: BeamformerSet) -> np.ndarray:
    """Psi[l, k]: pre-SIC interference-plus-noise at receiver l for message k."""
    r = received_powers_normalized(s, w)
    return r.sum(axis=1)[:, None] - r + 1.0


def relaxed_log_sinr_0k(s, w: BeamformerSet, a: PairingMatrix, k: int) -> float:
    r = received_powers_normalized(s, w)
    return float(np.log1p(r[k, k] / relaxed_phi(s, w, a)[k]))


def relaxed_log_sinr_lk(s, w: BeamformerSet, a: PairingMatrix, ell: int, k: int) -> float:
    alpha = a.entries[ell, k]
    if alpha <= 0.0:
        return np.inf
    r = received_powers_normalized(s, w)
    return float(np.log1p(r[ell, k] / (alpha * relaxed_psi(s, w)[ell, k])))


def relaxed_min_rate(s, w: BeamformerSet, a: PairingMatrix, active_floor: float = 0.0) -> float:
    """Exact min over all rate expressions with alpha relaxed.

    Pairs with alpha exactly zero impose no cross-receiver constraint (their
    SINR is +inf).  With a positive ``active_floor`` only pairs at or above
    it contribute, matching the solver's constraint-activation rule: that is
    the objective the iteration actually ascends, and it coincides with the
    unrestricted value at binary points and whenever no pairing level sits in
    (0, floor).
    """
    r = received_powers_normalized(s, w)
    phi_vec = relaxed_phi(s, w, a)
    value = float(np.min(np.log1p(np.diag(r) / phi_vec)))
    psi_mat = relaxed_psi(s, w)
    for ell, k in zip(*np.nonzero(a.entries > 0.0)):
        if a.entries[ell, k] < active_floor:
            continue
        value = min(value, float(np.log1p(r[ell, k] / (a.entries[ell, k] * psi_mat[ell, k]))))
    return value


@dataclass(frozen=True)
class Iterate:
    """One SCA expansion point: beamformers, relaxed pairing, mu lift, objective.

    ``mu[k, l]`` bounds the noise-normalized received power
    ``|h_k^H w_l|^2 / sigma_k^2`` from above; ``eta`` is the exact relaxed
    min-rate at the point, in nats.
    """

    w: BeamformerSet
    a: PairingMatrix
    mu: np.ndarray
    eta: float

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        object.__setattr__(self, "mu", mu)
        K = self.a.K
        if mu.shape != (K, K):
            raise ValueError(f"mu must have shape ({K}, {K}), got {mu.shape}")
        if np.any(mu < 0):
            raise ValueError("mu entries must be nonnegative")
        mu.setflags(write=False)

    def check_mu_cover(self, s, tol: float = 1e-9) -> None:
        """Assert the lift covers the actual received powers at this point."""
        gap = received_powers_normalized(s, self.w) - self.mu
        worst = float(gap.max())
        if worst > tol:
            raise ValueError(f"mu lift violated by {worst:.3e} (> {tol:.1e})")


def make_iterate(s, w: BeamformerSet, a: PairingMatrix, eta: float | None = None,
                 active_floor: float = EPS_ACT, mu_pad: float = MU_PAD) -> Iterate:
    """Fresh iterate with the tightest valid mu lift and exact objective value."""
    a_relaxed = PairingMatrix(a.entries, PairingMode.RELAXED)
    mu = received_powers_normalized(s, w) + mu_pad
    if eta is None:
        eta = relaxed_min_rate(s, w, a_relaxed, active_floor)
    return Iterate(w=w, a=a_relaxed, mu=mu, eta=float(eta))


def vhat(x: float, z: float, x0: float, z0: float, eps_v: float = EPS_V) -> float:
    """Convex quadratic upper bound on the product x*z around (x0, z0).

    ``(x0 / 2 z0) z^2 + (z0 / 2 x0) x^2 >= x z`` for x, z >= 0 by AM-GM,
    with equality at (x0, z0).  Expansion values below ``eps_v`` are clamped
    (counted in ``clamp_counter``), which only loosens the bound.
    """
    if x0 < eps_v or z0 < eps_v:
        clamp_counter.count += 1
        x0 = max(x0, eps_v)
        z0 = max(z0, eps_v)
    return 0.5 * (x0 / z0) * z * z + 0.5 * (z0 / x0) * x * x


#: Curvature-ratio guard: beyond it the quadratic product bound is replaced
#: by an exact-touching piecewise-linear one (see ``term_kind``).
CORNER_RATIO = 1e9

TERM_VHAT = 0
TERM_X_CORNER = 1
TERM_Z_CORNER = 2


def term_kind(x0: float, z0: float, eps_v: float = EPS_V) -> int:
    """Which product upper bound to use for x*z expanded at (x0, z0).

    The quadratic bound's curvatures are x0/2z0 and z0/2x0, so it degenerates
    at the corners of [0, 1] x [0, mu_cap].  There the bound is replaced by
    an exact-touching piecewise-linear one instead of clamping (a clamp would
    break tightness at the expansion point and with it the monotone-ascent
    guarantee):

    * z corner (z0 < eps_v, a dead beam):  x*z <= z0*x + max(z - z0, 0),
      valid for any x in [0, 1];
    * x corner (x0 < eps_v or z0/x0 huge, a converged pairing entry):
      x*z <= x0*z + cap * max(x - x0, 0), valid while z <= cap.
    """
    if z0 < eps_v:
        return TERM_Z_CORNER
    if x0 < eps_v or z0 / x0 > CORNER_RATIO:
        return TERM_X_CORNER
    return TERM_VHAT


def _term_value(x, z, x0, z0, cap, eps_v):
    kind = term_kind(x0, z0, eps_v)
    if kind == TERM_VHAT:
        return 0.5 * (x0 / z0) * z * z + 0.5 * (z0 / x0) * x * x
    if kind == TERM_X_CORNER:
        return x0 * z + cap * max(x - x0, 0.0)
    return z0 * x + max(z - z0, 0.0)


@dataclass(frozen=True)
class SurrogateCoeffs:
    """All expansion-point constants for one SCA subproblem.

    Per user k (own-receiver family): ``f0[k]``, curvature ``xi[k]`` and the
    row vector ``f1_row[k]`` with ``f1_k(w) = Re(f1_row[k] @ w_k)``.  Per
    ordered pair (l, k) with ``active[l, k]``: ``g0``, ``theta`` and
    ``g1_row`` likewise acting on ``w_k``.  ``x0_f``/``mu0``/``alpha0`` are
    the frozen (clamped) vhat expansion values.
    """

    K: int
    N: int
    hn: np.ndarray            # (K, N) noise-normalized channels
    f0: np.ndarray            # (K,)
    xi: np.ndarray            # (K,)
    f1_row: np.ndarray        # (K, N) complex
    active: np.ndarray        # (K, K) bool, only upper-triangle pairs can be set
    g0: np.ndarray            # (K, K)
    theta: np.ndarray         # (K, K)
    g1_row: np.ndarray        # (K, K, N) complex; g1_row[l, k] acts on w_k
    alpha_var: np.ndarray     # (K, K) bool: True where alpha[k, l] is a decision variable
    x0_f: np.ndarray          # (K, K) product-bound x expansions 1 - alpha0
    alpha0: np.ndarray        # (K, K) activation-clamped alpha0 (g-family x expansions)
    mu0: np.ndarray           # (K, K) product-bound z expansions (the mu lift values)
    mu_cap: np.ndarray        # (K,) power-implied upper bound on each mu row
    eps_act: float
    eps_v: float

    def active_pairs(self) -> list[tuple[int, int]]:
        l_idx, k_idx = np.nonzero(self.active)
        return sorted(zip(l_idx.tolist(), k_idx.tolist()))


def build_coeffs(s, it: Iterate, eps_act: float = EPS_ACT, eps_v: float = EPS_V,
                 alpha_frozen: bool = False) -> SurrogateCoeffs:
    """Expansion constants of both surrogate families at the given iterate.

    Cross-receiver constraints are generated only for pairs whose current
    pairing level reaches ``eps_act``; below that the true constraint cannot
    bind (its SINR grows like 1/alpha) while its curvature would blow up, so
    the pair is marked inactive.

    Product bounds are only applied where the pairing entry is a decision
    variable.  Structurally zero entries, and every entry when
    ``alpha_frozen`` (the fixed-pairing phase), multiply the mu lift by a
    constant, which stays linear and exactly tight.
    """
    if not (np.all(np.isfinite(it.w.vectors)) and np.all(np.isfinite(s.channels))):
        raise ValueError("channels and beamformers must be finite")
    hn = normalized_channels(s)
    K, N = hn.shape
    inner = np.conj(hn) @ it.w.vectors.T          # inner[k, l] = h_k^H w_l (normalized)
    r = np.abs(inner) ** 2
    alpha = it.a.entries

    weighted = (1.0 - alpha) * r
    phi0 = weighted.sum(axis=1) - np.diag(weighted) + 1.0
    gamma0 = np.diag(r) / phi0
    f0 = np.log1p(gamma0) - gamma0
    xi = 1.0 / phi0 - 1.0 / (phi0 + np.diag(r))
    f1_row = (np.conj(np.diag(inner)) / phi0)[:, None] * np.conj(hn)

    psi0 = r.sum(axis=1)[:, None] - r + 1.0
    active = np.triu(alpha, 1) >= eps_act
    g0 = np.zeros((K, K))
    theta = np.zeros((K, K))
    g1_row = np.zeros((K, K, N), dtype=complex)
    alpha0c = np.clip(alpha, eps_act, 1.0)
    for ell, k in zip(*np.nonzero(active)):
        denom = alpha0c[ell, k] * psi0[ell, k]
        gamma_lk = r[ell, k] / denom
        g0[ell, k] = np.log1p(gamma_lk) - gamma_lk
        theta[ell, k] = 1.0 / denom - 1.0 / (denom + r[ell, k])
        g1_row[ell, k] = (np.conj(inner[ell, k]) / denom) * np.conj(hn[ell])

    if alpha_frozen:
        alpha_var = np.zeros((K, K), dtype=bool)
    else:
        alpha_var = np.triu(np.ones((K, K), dtype=bool), 1)

    # corner-regime bookkeeping (diagnostic only; the bounds stay tight)
    clamp_counter.count += int(np.sum((1.0 - alpha < eps_v) & alpha_var))
    clamp_counter.count += int(np.sum(it.mu < eps_v))

    mu_cap = (np.linalg.norm(hn, axis=1) ** 2) * s.p_max_w * (1.0 + 1e-9) + 1e-6

    return SurrogateCoeffs(
        K=K,
        N=N,
        hn=hn,
        f0=f0,
        xi=xi,
        f1_row=f1_row,
        active=active,
        g0=g0,
        theta=theta,
        g1_row=g1_row,
        alpha_var=alpha_var,
        x0_f=1.0 - alpha,
        alpha0=alpha0c,
        mu0=it.mu.copy(),
        mu_cap=mu_cap,
        eps_act=eps_act,
        eps_v=eps_v,
    )


def eval_lower_bound_0k(coeffs: SurrogateCoeffs, s, w: BeamformerSet, a: PairingMatrix,
                        mu: np.ndarray, k: int) -> float:
    """Concave lower bound on user k's own-receiver log-SINR at (w, alpha, mu).

    Valid for mu within the power-implied caps; exactly equal to the true
    log-SINR when evaluated at the iterate the coefficients were built from.
    """
    z = np.dot(np.conj(coeffs.hn[k]), w.vectors[k])
    f1 = float(np.real(np.dot(coeffs.f1_row[k], w.vectors[k])))
    f2 = float(np.abs(z) ** 2) + 1.0
    for ell in range(coeffs.K):
        if ell == k:
            continue
        if coeffs.alpha_var[k, ell]:
            f2 += _term_value(1.0 - a.entries[k, ell], mu[k, ell],
                              coeffs.x0_f[k, ell], coeffs.mu0[k, ell],
                              coeffs.mu_cap[k], coeffs.eps_v)
        else:
            f2 += (1.0 - a.entries[k, ell]) * mu[k, ell]
    return float(coeffs.f0[k] + 2.0 * f1 - coeffs.xi[k] * f2)


def eval_lower_bound_lk(coeffs: SurrogateCoeffs, s, w: BeamformerSet, a: PairingMatrix,
                        mu: np.ndarray, ell: int, k: int) -> float:
    """Concave lower bound on the log-SINR of user k's message at receiver ell."""
    if not coeffs.active[ell, k]:
        raise ValueError(f"pair ({ell}, {k}) generated no cross-receiver constraint at this iterate")
    alpha_lk = a.entries[ell, k]
    z = np.dot(np.conj(coeffs.hn[ell]), w.vectors[k])
    g1 = float(np.real(np.dot(coeffs.g1_row[ell, k], w.vectors[k])))
    g2 = float(np.abs(z) ** 2) + alpha_lk
    for lp in range(coeffs.K):
        if lp == k:
            continue
        if coeffs.alpha_var[ell, k]:
            g2 += _term_value(alpha_lk, mu[ell, lp],
                              coeffs.alpha0[ell, k], coeffs.mu0[ell, lp],
                              coeffs.mu_cap[ell], coeffs.eps_v)
        else:
            g2 += alpha_lk * mu[ell, lp]
    return float(coeffs.g0[ell, k] + 2.0 * g1 - coeffs.theta[ell, k] * g2)
