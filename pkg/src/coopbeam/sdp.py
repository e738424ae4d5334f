"""Feasibility-check SDP solver and bisection driver for max-min SINR.

The per-target feasibility problem (does a unit-norm-diagonal PSD matrix
exist meeting all SINR constraints?) is decided by maximizing the worst
normalized constraint margin with a log-barrier path-following method over
the complex Hermitian cone.  The margin sign at the certified optimum gives
the feasibility verdict; a duality-gap certificate allows early exit on
clearly feasible/infeasible targets.  Instances here are tiny (dimension
M'+1 up to a few dozen), so each Newton step is assembled in closed form via
the inverse-Hessian structure of the log-det barrier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import io as _io

FEAS_TOL = 1e-6  # constraints satisfied within this relative slack count as feasible


class SdpSolverError(RuntimeError):
    """Interior-point solve failed numerically (never silently infeasible)."""


@dataclass
class MaxMinSdpInstance:
    """Data of one reflect-vector subproblem in homogenized form.

    q[k, j] is the length-M' vector and qbar[k, j] the scalar such that the
    user-j term seen by receiver k equals |q^H theta + qbar|^2; noise[k] is
    the receiver-k noise power.  The homogenization matrices B_{k,j} are
    derived on demand.
    """

    q: np.ndarray      # (K, K, M') complex
    qbar: np.ndarray   # (K, K) complex
    noise: np.ndarray  # (K,) float

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=complex)
        self.qbar = np.asarray(self.qbar, dtype=complex)
        self.noise = np.asarray(self.noise, dtype=float)
        k = self.q.shape[0]
        if self.q.ndim != 3 or self.q.shape[1] != k:
            raise ValueError("q must have shape (K, K, M')")
        if self.qbar.shape != (k, k) or self.noise.shape != (k,):
            raise ValueError("qbar/noise inconsistent with q")
        if np.any(self.noise <= 0):
            raise ValueError("noise terms must be positive")

    @property
    def n_users(self):
        return self.q.shape[0]

    @property
    def dim(self):
        return self.q.shape[2]

    def constraint_matrix(self, k, j):
        """Homogenized Hermitian B_{k,j} with zero bottom-right entry."""
        q = self.q[k, j]
        qb = self.qbar[k, j]
        n = self.dim + 1
        b = np.zeros((n, n), dtype=complex)
        b[:-1, :-1] = np.outer(q, q.conj())
        b[:-1, -1] = qb * q
        b[-1, :-1] = np.conj(qb) * q.conj()
        return b

    def all_constraint_matrices(self):
        k = self.n_users
        n = self.dim + 1
        out = np.zeros((k, k, n, n), dtype=complex)
        for a in range(k):
            for b in range(k):
                out[a, b] = self.constraint_matrix(a, b)
        return out

    def term_powers(self, theta):
        """|q_{k,j}^H theta + qbar_{k,j}|^2 for one theta or a batch (C, M')."""
        theta = np.asarray(theta, dtype=complex)
        batched = theta.ndim == 2
        th = theta if batched else theta[None, :]
        vals = np.einsum("kjp,cp->ckj", self.q.conj(), th) + self.qbar[None, :, :]
        p = np.abs(vals) ** 2
        return p if batched else p[0]

    def sinr_values(self, theta):
        """Per-user SINRs of one unit-modulus theta or a batch."""
        p = self.term_powers(theta)
        batched = p.ndim == 3
        if not batched:
            p = p[None]
        sig = np.einsum("ckk->ck", p)
        interf = p.sum(axis=2) - sig
        out = sig / (interf + self.noise[None, :])
        return out if batched else out[0]

    def min_sinr(self, theta):
        vals = self.sinr_values(theta)
        return vals.min(axis=-1)

    def dump(self, path):
        _io.save_matrices(path, {"q": self.q, "qbar": self.qbar, "noise": self.noise})

    @classmethod
    def load(cls, path):
        mats = _io.load_matrices(path)
        return cls(mats["q"], mats["qbar"], mats["noise"])


@dataclass
class PsdSolution:
    """Result of one feasibility check at a fixed SINR target."""

    psi: np.ndarray
    status: str                 # feasible | infeasible | numerical-failure
    margins: np.ndarray         # normalized constraint margins at psi
    s: float                    # certified worst margin (max-margin value)
    delta: float
    iterations: int
    message: str = ""

    @property
    def feasible(self):
        return self.status == "feasible"


def _constraint_data(inst: MaxMinSdpInstance, delta):
    """Margin data: constraint k reads tr(C_k Psi) + e_k >= 0."""
    b = inst.all_constraint_matrices()
    k = inst.n_users
    qb2 = np.abs(inst.qbar) ** 2
    c_mats = np.empty_like(b[:, 0])
    e = np.empty(k)
    for a in range(k):
        others = [j for j in range(k) if j != a]
        c_mats[a] = b[a, a] - delta * b[a, others].sum(axis=0)
        e[a] = qb2[a, a] - delta * (qb2[a, others].sum() + inst.noise[a])
    return c_mats, e


def feasibility_check(
    inst: MaxMinSdpInstance, delta, feas_tol=FEAS_TOL, max_newton=60
) -> PsdSolution:
    """Decide whether the SINR target `delta` is achievable in relaxation.

    Runs the max-margin barrier solve; status is 'feasible' when the worst
    normalized margin is >= -feas_tol.  The returned Psi has unit diagonal and
    is strictly positive definite.
    """
    if delta < 0:
        raise ValueError("SINR target must be non-negative")
    c_mats, e = _constraint_data(inst, delta)
    scales = np.array(
        [max(np.linalg.norm(c_mats[k]), abs(e[k]), 1e-300) for k in range(inst.n_users)]
    )
    c_hat = c_mats / scales[:, None, None]
    e_hat = e / scales
    s, psi, iters, ok, msg = _solve_max_margin(c_hat, e_hat, feas_tol, max_newton)
    margins = np.real(np.einsum("kij,ji->k", c_hat, psi)) + e_hat
    if not ok:
        return PsdSolution(psi, "numerical-failure", margins, s, float(delta), iters, msg)
    status = "feasible" if s >= -feas_tol else "infeasible"
    return PsdSolution(psi, status, margins, s, float(delta), iters, msg)


def _solve_max_margin(c_hat, e_hat, feas_tol, max_newton=60):
    """maximize s  s.t.  tr(c_k Psi) + e_k >= s,  diag(Psi) = 1,  Psi >= 0.

    Log-barrier path following; the Newton step is computed by reducing the
    KKT system to a dense (K + 1 + n)-dimensional solve through the
    closed-form inverse of the log-det Hessian.  Returns (s, Psi, iterations,
    ok, message); `s` is certified to within the final duality gap.
    """
    kk, n = c_hat.shape[0], c_hat.shape[1]
    nu = n + kk  # barrier complexity
    gap_target = max(1e-3 * feas_tol, 1e-12)

    psi = np.eye(n, dtype=complex)
    margins = np.real(np.einsum("kij,ji->k", c_hat, psi)) + e_hat
    s = float(margins.min()) - 1.0
    t = 1.0
    total_newton = 0

    def objective(psi_m, s_v, g_v, t_v):
        sign, logdet = np.linalg.slogdet(psi_m)
        if sign.real <= 0:
            return np.inf
        return -t_v * s_v - logdet - np.sum(np.log(g_v))

    for _outer in range(80):
        for _ in range(max_newton):
            total_newton += 1
            g = margins - s
            if np.any(g <= 0):  # safeguard, should not happen
                return s, psi, total_newton, False, "left the barrier domain"
            inv_g = 1.0 / g
            psi_inv = np.linalg.inv(psi)
            s_mats = np.einsum("ij,kjl,lm->kim", psi, c_hat, psi, optimize=True)
            c_cross = np.real(np.einsum("kij,lji->kl", c_hat, s_mats))
            p_mat = np.real(np.einsum("kii->ki", s_mats))
            t_mat = np.abs(psi) ** 2
            tr_cpsi = np.real(np.einsum("kij,ji->k", c_hat, psi))
            b_vec = tr_cpsi + c_cross @ inv_g
            d0 = 1.0 + inv_g @ p_mat

            dim = kk + 1 + n
            a_sys = np.zeros((dim, dim))
            rhs = np.zeros(dim)
            a_sys[:kk, :kk] = c_cross + np.diag(g**2)
            a_sys[:kk, kk] = 1.0
            a_sys[:kk, kk + 1 :] = p_mat
            rhs[:kk] = b_vec
            a_sys[kk, :kk] = 1.0
            rhs[kk] = inv_g.sum() - t
            a_sys[kk + 1 :, :kk] = p_mat.T
            a_sys[kk + 1 :, kk + 1 :] = t_mat
            rhs[kk + 1 :] = d0
            try:
                sol = np.linalg.solve(a_sys, rhs)
            except np.linalg.LinAlgError:
                return s, psi, total_newton, False, "singular Newton system"
            alpha, ds, nu_mult = sol[:kk], sol[kk], sol[kk + 1 :]

            delta = psi + np.einsum("k,kij->ij", inv_g, s_mats)
            delta -= np.einsum("k,kij->ij", alpha, s_mats)
            delta -= (psi * nu_mult[None, :]) @ psi
            delta = 0.5 * (delta + delta.conj().T)
            np.fill_diagonal(delta, 0.0)

            r_psi = psi_inv + np.einsum("k,kij->ij", inv_g, c_hat)
            r_s = t - inv_g.sum()
            dec2 = float(np.real(np.vdot(r_psi, delta))) + r_s * ds
            if dec2 <= 1e-10:
                break

            dg = np.real(np.einsum("kij,ji->k", c_hat, delta)) - ds
            beta = 1.0
            try:
                lo = np.linalg.cholesky(psi)
            except np.linalg.LinAlgError:
                return s, psi, total_newton, False, "iterate left the PSD cone"
            mid = np.linalg.solve(lo, np.linalg.solve(lo, delta).conj().T).conj().T
            lam_min = float(np.linalg.eigvalsh(0.5 * (mid + mid.conj().T)).min())
            if lam_min < 0:
                beta = min(beta, -0.99 / lam_min)
            neg = dg < 0
            if np.any(neg):
                beta = min(beta, 0.99 * float(np.min(g[neg] / -dg[neg])))

            f_cur = objective(psi, s, g, t)
            accepted = False
            for _bt in range(50):
                psi_new = psi + beta * delta
                s_new = s + beta * ds
                m_new = np.real(np.einsum("kij,ji->k", c_hat, psi_new)) + e_hat
                g_new = m_new - s_new
                if np.all(g_new > 0):
                    f_new = objective(psi_new, s_new, g_new, t)
                    if f_new <= f_cur - 1e-4 * beta * dec2:
                        accepted = True
                        break
                beta *= 0.5
            if not accepted:
                # stalled: decide with what we have if the gap already allows
                break
            psi, s, margins = psi_new, s_new, m_new
            if s >= feas_tol:
                return s, psi, total_newton, True, "early feasible"

        gap = nu / t
        if s >= feas_tol:
            return s, psi, total_newton, True, "feasible margin"
        if s + 2.0 * gap < -feas_tol:
            return s, psi, total_newton, True, "infeasibility certificate"
        if gap <= gap_target:
            return s, psi, total_newton, True, "path converged"
        t *= 10.0
    return s, psi, total_newton, False, "barrier iteration cap"


def matched_filter_bound(inst: MaxMinSdpInstance):
    """Interference-free upper bound on the achievable min SINR."""
    n = inst.dim + 1
    bounds = []
    for k in range(inst.n_users):
        b_kk = inst.constraint_matrix(k, k)
        lam = float(np.linalg.eigvalsh(b_kk).max()) if n else 0.0
        bounds.append((n * max(lam, 0.0) + abs(inst.qbar[k, k]) ** 2) / inst.noise[k])
    return float(min(bounds))


@dataclass
class BisectionResult:
    delta_star: float
    solution: PsdSolution
    saturated: bool
    steps: int
    history: list = field(default_factory=list)  # (delta, status) pairs


def bisection_maxmin(inst: MaxMinSdpInstance, delta_lo, delta_hi, eps, feas_tol=FEAS_TOL):
    """Largest feasible SINR target on an eps-grid inside [delta_lo, delta_hi].

    `eps` is an absolute SINR accuracy: the returned target is within eps of
    the relaxation's feasibility boundary.  delta_lo must be feasible; a
    feasible delta_hi short-circuits with the `saturated` flag set.
    """
    if delta_hi < delta_lo:
        raise ValueError("invalid bracket: delta_hi < delta_lo")
    if eps <= 0:
        raise ValueError("bisection accuracy must be positive")
    history = []

    def check(value):
        res = feasibility_check(inst, value, feas_tol=feas_tol)
        if res.status == "numerical-failure":
            raise SdpSolverError(f"feasibility check failed at target {value}: {res.message}")
        history.append((value, res.status))
        return res

    best = check(delta_lo)
    if not best.feasible:
        raise ValueError(f"invalid bracket: delta_lo={delta_lo} is infeasible")
    res_hi = check(delta_hi)
    if res_hi.feasible:
        return BisectionResult(float(delta_hi), res_hi, True, 0, history)

    lo, hi = float(delta_lo), float(delta_hi)
    steps = 0
    while hi - lo > eps:
        mid = 0.5 * (lo + hi)
        res = check(mid)
        steps += 1
        if res.feasible:
            lo, best = mid, res
        else:
            hi = mid
    return BisectionResult(lo, best, False, steps, history)


@dataclass
class RandomizationResult:
    theta_tilde: np.ndarray  # unit-modulus lifted vector incl. auxiliary t
    theta: np.ndarray        # recovered reflect vector of length M'
    objective: float         # true min SINR of theta on the instance
    candidates: int


def gaussian_randomization(psi, inst: MaxMinSdpInstance, n_rand, rng) -> RandomizationResult:
    """Recover a unit-modulus solution from a PSD relaxation solution.

    Draws `n_rand` Gaussian vectors with covariance Psi, projects entrywise
    to unit modulus, de-homogenizes via the auxiliary entry, and returns the
    candidate with the best true min SINR.  The dominant eigenvector is
    always included as a candidate, which makes rank-one relaxations exact.
    """
    if n_rand < 1:
        raise ValueError("candidate count must be >= 1")
    psi = np.asarray(psi, dtype=complex)
    n = psi.shape[0]
    if n != inst.dim + 1:
        raise ValueError("Psi dimension does not match the instance")
    lam, vec = np.linalg.eigh(0.5 * (psi + psi.conj().T))
    lam = np.maximum(lam, 0.0)
    factor = vec * np.sqrt(lam)[None, :]
    z = (rng.standard_normal((n_rand, n)) + 1j * rng.standard_normal((n_rand, n))) / math.sqrt(2)
    draws = z @ factor.T.conj()
    cands = np.concatenate([vec[:, -1][None, :], draws], axis=0)
    cands = np.exp(1j * np.angle(cands))
    thetas = np.conj(cands[:, -1])[:, None] * cands[:, :-1]
    objs = inst.min_sinr(thetas)
    best = int(np.argmax(objs))
    return RandomizationResult(cands[best], thetas[best], float(objs[best]), cands.shape[0])
