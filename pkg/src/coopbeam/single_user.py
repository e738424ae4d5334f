"""Single-user joint beamforming: closed-form alternating optimization,
the single-IRS baseline optimizer, the baseline-derived initialization that
provably matches or beats the baseline SNR, and an SDR benchmark."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .channels import ChannelSet, ReflectPattern
from .metrics import SinrContext
from .multi_user import build_p31_instance, build_p34_instance
from .reports import SolveReport
from .sdp import bisection_maxmin, gaussian_randomization, matched_filter_bound


class DegenerateChannelError(ValueError):
    """Raised when the effective channel vanishes and MRC is undefined."""


@dataclass
class SuSolveState:
    """Iterate of the single-user optimizer (unit-norm w, unit-modulus thetas)."""

    w: np.ndarray
    theta1: np.ndarray
    theta2: np.ndarray
    snr: float = 0.0
    iteration: int = 0
    trace: list = field(default_factory=list)  # objective after every sub-step
    converged: bool = False

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=complex).reshape(-1)
        self.theta1 = np.asarray(self.theta1, dtype=complex).reshape(-1)
        self.theta2 = np.asarray(self.theta2, dtype=complex).reshape(-1)
        nrm = np.linalg.norm(self.w)
        if not np.isclose(nrm, 1.0, rtol=1e-9, atol=1e-9):
            raise ValueError("receive vector must be unit norm")

    def pattern(self):
        return ReflectPattern(self.theta1, self.theta2)


def _require_single_user(chs: ChannelSet):
    if chs.n_users != 1:
        raise ValueError("single-user operation called on a multi-user channel set")


def _channel_vector(chs, theta1, theta2):
    h = np.einsum("mnp,m,p->n", chs.q[0], theta1, theta2, optimize=True)
    h += chs.r2[0] @ theta2
    h += chs.r1[0] @ theta1
    return h


def snr_value(chs: ChannelSet, w, theta1, theta2, ctx: SinrContext):
    """P |w^H h|^2 / (noise ||w||^2) for the single user."""
    _require_single_user(chs)
    h = _channel_vector(chs, np.asarray(theta1, complex), np.asarray(theta2, complex))
    w = np.asarray(w, dtype=complex)
    return float(ctx.powers[0] * np.abs(np.vdot(w, h)) ** 2 / (ctx.noise * np.vdot(w, w).real))


def opt_theta2_closed_form(chs: ChannelSet, theta1, w):
    """Globally optimal theta2 for fixed theta1 and w.

    Aligns every term of b^H theta2 and matches its phase to the reference
    term b0 = w^H R1 theta1 (phase 0 when b0 vanishes), which attains the
    triangle-inequality upper bound.
    """
    _require_single_user(chs)
    theta1 = np.asarray(theta1, dtype=complex)
    w = np.asarray(w, dtype=complex)
    if theta1.size != chs.m1 or w.size != chs.n_bs:
        raise ValueError("dimension mismatch")
    a = np.einsum("mnp,m->np", chs.q[0], theta1, optimize=True) + chs.r2[0]
    b = a.conj().T @ w
    b0 = np.vdot(w, chs.r1[0] @ theta1) if chs.m1 else 0.0
    return np.exp(1j * (np.angle(b0) + np.angle(b)))


def opt_theta1_closed_form(chs: ChannelSet, theta2, w):
    """Globally optimal theta1 for fixed theta2 and w (mirror update)."""
    _require_single_user(chs)
    theta2 = np.asarray(theta2, dtype=complex)
    w = np.asarray(w, dtype=complex)
    if theta2.size != chs.m2 or w.size != chs.n_bs:
        raise ValueError("dimension mismatch")
    qbar = np.einsum("mnp,p->nm", chs.q[0], theta2, optimize=True)  # (N, M1)
    c = (qbar + chs.r1[0]).conj().T @ w
    c0 = np.vdot(w, chs.r2[0] @ theta2) if chs.m2 else 0.0
    return np.exp(1j * (np.angle(c0) + np.angle(c)))


def mrc_receive(chs: ChannelSet, theta1, theta2):
    """Optimal (maximum-ratio combining) unit-norm receive vector w = h/||h||."""
    _require_single_user(chs)
    h = _channel_vector(chs, np.asarray(theta1, complex), np.asarray(theta2, complex))
    nrm = np.linalg.norm(h)
    if nrm == 0:
        raise DegenerateChannelError("effective channel is zero")
    return h / nrm


def random_init(chs: ChannelSet, rng) -> SuSolveState:
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    pat = ReflectPattern.random(chs.m1, chs.m2, rng)
    w = rng.standard_normal(chs.n_bs) + 1j * rng.standard_normal(chs.n_bs)
    return SuSolveState(w / np.linalg.norm(w), pat.theta1, pat.theta2)


def ao_single_user(
    chs: ChannelSet, ctx: SinrContext, init: SuSolveState, max_iters=100, tol=1e-8
):
    """Alternate the closed-form theta2, theta1 and MRC updates.

    Every sub-step is a global optimum of its block, so the SNR trace is
    non-decreasing; stops when the relative gain of a full cycle falls below
    `tol` or after `max_iters` iterations.  Returns (SuSolveState, SolveReport).
    """
    _require_single_user(chs)
    t_start = time.perf_counter()
    w = init.w.copy()
    t1, t2 = init.theta1.copy(), init.theta2.copy()
    trace = [snr_value(chs, w, t1, t2, ctx)]
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        prev = trace[-1]
        t2 = opt_theta2_closed_form(chs, t1, w)
        trace.append(snr_value(chs, w, t1, t2, ctx))
        t1 = opt_theta1_closed_form(chs, t2, w)
        trace.append(snr_value(chs, w, t1, t2, ctx))
        try:
            w = mrc_receive(chs, t1, t2)
        except DegenerateChannelError:
            pass  # keep the previous receiver; objective is zero anyway
        trace.append(snr_value(chs, w, t1, t2, ctx))
        if trace[-1] - prev <= tol * max(prev, 1e-300):
            converged = True
            break
    state = SuSolveState(
        w, t1, t2, snr=trace[-1], iteration=it, trace=trace, converged=converged
    )
    report = SolveReport(
        method="su-ao",
        objective=state.snr,
        trace=trace,
        converged=converged,
        iterations=it,
        wall_time_s=time.perf_counter() - t_start,
    )
    return state, report


def single_irs_opt(
    baseline: ChannelSet, ctx: SinrContext, restarts=20, max_iters=100, tol=1e-8, rng=None
):
    """Best single-IRS solution found by multi-start alternating optimization.

    The baseline is a ChannelSet with m1 = 0, so each restart alternates the
    phase-alignment update theta = exp(j angle(Rbar^H w)) with MRC.  Returns
    the best SuSolveState across `restarts` random initializations.
    """
    _require_single_user(baseline)
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    best = None
    for _ in range(max(restarts, 1)):
        state, _rep = ao_single_user(baseline, ctx, random_init(baseline, rng), max_iters, tol)
        if best is None or state.snr > best.snr:
            best = state
    return best


def init_from_single_irs(chs: ChannelSet, baseline_state: SuSolveState) -> SuSolveState:
    """Seed the double-IRS optimizer from a single-IRS solution.

    Splits the baseline's reflect vector across the two IRSs and applies the
    common phase shift that aligns the double-reflection term with the
    single-reflection sum, so the starting SNR is at least the baseline SNR
    (equal exactly when the double-reflection term vanishes; phase 0 is used
    then).  Assumes the baseline is the [R1, R2]-concatenation pair of `chs`.
    """
    _require_single_user(chs)
    theta_star = baseline_state.pattern().theta
    if theta_star.size != chs.m1 + chs.m2:
        raise ValueError("baseline solution does not match the channel split")
    w = baseline_state.w
    part1, part2 = theta_star[: chs.m1], theta_star[chs.m1 :]
    a1 = np.vdot(w, np.einsum("mnp,m,p->n", chs.q[0], part1, part2, optimize=True))
    a2 = np.vdot(w, chs.r1[0] @ part1 + chs.r2[0] @ part2)
    phi = np.angle(a2 / a1) if np.abs(a1) > 0 else 0.0
    rot = np.exp(1j * phi)
    return SuSolveState(w, rot * part1, rot * part2)


@dataclass
class SdrBenchmark:
    theta1: np.ndarray
    theta2: np.ndarray
    snr: float
    bound: float  # relaxation upper bound of the final conditional subproblems
    report: SolveReport


def sdr_benchmark_su(
    chs: ChannelSet,
    ctx: SinrContext,
    w,
    rng=None,
    max_iters=20,
    tol=1e-6,
    eps=1e-3,
    n_rand=100,
    init_pattern=None,
):
    """Alternating SDR benchmark for the single-user problem.

    Starting from `w` (and an optional reflect pattern), each round solves
    the theta2 and theta1 subproblems by bisection over the PSD relaxation
    followed by Gaussian randomization, then refreshes w by MRC; candidate
    updates are kept only if the exact SNR does not decrease.  `eps` is a
    fraction of each subproblem's bracket.  The returned bound is the tighter
    relaxation bound of the two conditional subproblems re-solved at the
    final iterate, so it upper-bounds the final feasible SNR.
    """
    _require_single_user(chs)
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    t_start = time.perf_counter()
    w = np.asarray(w, dtype=complex).reshape(-1)
    w = w / np.linalg.norm(w)
    if init_pattern is None:
        init_pattern = ReflectPattern.ones(chs.m1, chs.m2)
    t1, t2 = init_pattern.theta1.copy(), init_pattern.theta2.copy()
    snr = snr_value(chs, w, t1, t2, ctx)
    trace = [snr]
    converged = False

    def subproblem(which, w_cur, t1_cur, t2_cur):
        if which == "theta2":
            inst = build_p31_instance(chs, t1_cur, w_cur[:, None], ctx.powers, ctx.noise)
        else:
            inst = build_p34_instance(chs, t2_cur, w_cur[:, None], ctx.powers, ctx.noise)
        hi = max(matched_filter_bound(inst), 1e-12)
        bis = bisection_maxmin(inst, 0.0, hi, eps * hi)
        cand = gaussian_randomization(bis.solution.psi, inst, n_rand, rng).theta
        return bis.delta_star + eps * hi, cand

    for _ in range(max_iters):
        prev = snr
        if chs.m2:
            _b, cand = subproblem("theta2", w, t1, t2)
            if snr_value(chs, w, t1, cand, ctx) >= snr:
                t2 = cand
                snr = snr_value(chs, w, t1, t2, ctx)
        if chs.m1:
            _b, cand = subproblem("theta1", w, t1, t2)
            if snr_value(chs, w, cand, t2, ctx) >= snr:
                t1 = cand
                snr = snr_value(chs, w, t1, t2, ctx)
        w = mrc_receive(chs, t1, t2)
        snr = snr_value(chs, w, t1, t2, ctx)
        trace.append(snr)
        if snr - prev <= tol * max(prev, 1e-300):
            converged = True
            break
    # conditional bounds at the final iterate cover the final feasible SNR
    final_bounds = []
    if chs.m2:
        final_bounds.append(subproblem("theta2", w, t1, t2)[0])
    if chs.m1:
        final_bounds.append(subproblem("theta1", w, t1, t2)[0])
    bound = min(final_bounds) if final_bounds else snr
    report = SolveReport(
        method="su-sdr",
        objective=snr,
        trace=trace,
        converged=converged,
        iterations=len(trace) - 1,
        wall_time_s=time.perf_counter() - t_start,
    )
    return SdrBenchmark(t1, t2, snr, bound, report)
