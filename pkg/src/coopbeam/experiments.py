"""Experiment harness: scenario presets, Monte-Carlo sweep runners for the
bundled rate/rank studies, CSV artifacts, and plot-ready series files.

Reproducibility contract: a run is a pure function of (spec, seed).  Draw
seeds come from numpy SeedSequence spawning - the master sequence spawns one
child per draw, and each draw spawns one grandchild per sweep point - so
results are identical for any thread count, and the reduction happens in a
fixed order after all draws complete.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .channels import (
    LinkModel,
    ReflectPattern,
    SystemScenario,
    build_double_irs_scenario,
    build_single_irs_baseline_A1,
    build_single_irs_baseline_A2,
    db_to_linear,
    dbm_to_watt,
)
from .metrics import SinrContext, max_min_rate, rank_gain_report
from .multi_user import algorithm1, dft_codebook_search
from .sdp import MaxMinSdpInstance, SdpSolverError
from .single_user import (
    SuSolveState,
    ao_single_user,
    init_from_single_irs,
    sdr_benchmark_su,
    single_irs_opt,
    snr_value,
)

EXPERIMENT_IDS = (
    "fig4-rate-vs-power",
    "fig5-rate-vs-M1-split",
    "fig6-rate-vs-totalM",
    "fig7-mu-alg",
    "fig8-mu-vs-power",
    "fig9-rate-vs-K",
    "prop1-property",
    "prop2-rank",
    "oracle-suite",
)

EXPERIMENT_DESCRIPTIONS = {
    "fig4-rate-vs-power": "single-user achievable rate vs transmit power for the AO/SDR/codebook designs",
    "fig5-rate-vs-M1-split": "single-user rate vs subsurface split M1 under a fixed total budget",
    "fig6-rate-vs-totalM": "single-user rate vs total subsurfaces for several Rician factors",
    "fig7-mu-alg": "multi-user max-min rate vs power: alternating optimizer against codebook search",
    "fig8-mu-vs-power": "multi-user max-min rate vs power: double-IRS against the single-IRS baseline",
    "fig9-rate-vs-K": "multi-user max-min rate vs number of users at high power",
    "prop1-property": "double-IRS-with-init SNR never below the single-IRS optimum",
    "prop2-rank": "effective channel rank of the double/single systems",
    "oracle-suite": "self-check batch of closed-form and identity oracles",
}


@dataclass
class ExperimentSpec:
    """One experiment request: id, sweep axis, draw count, seed, overrides."""

    experiment: str
    sweep: list
    draws: int = 100
    seed: int = 0
    out_dir: str = "results"
    scenario: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENT_IDS:
            raise ValueError(
                f"unknown experiment {self.experiment!r}; known ids: {', '.join(EXPERIMENT_IDS)}"
            )
        if not isinstance(self.sweep, (list, tuple)) or len(self.sweep) == 0:
            raise ValueError("sweep must be a non-empty list")
        self.sweep = list(self.sweep)
        if self.draws < 1:
            raise ValueError("draws must be >= 1")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {"experiment", "sweep", "draws", "seed", "out_dir", "scenario", "options"}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown spec fields: {sorted(extra)}")
        if "experiment" not in d or "sweep" not in d:
            raise ValueError("spec requires at least 'experiment' and 'sweep'")
        return cls(**d)


def load_spec(path) -> ExperimentSpec:
    """Parse a JSON experiment spec with line/column diagnostics."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ValueError(f"{path}:{err.lineno}:{err.colno}: {err.msg}") from err
    try:
        return ExperimentSpec.from_dict(data)
    except (TypeError, ValueError) as err:
        raise ValueError(f"{path}: {err}") from err


def default_spec(experiment, **over) -> ExperimentSpec:
    """Desk-scale default spec for one of the bundled experiments."""
    defaults = {
        "fig4-rate-vs-power": dict(sweep=[0, 5, 10, 15, 20, 25, 30], draws=10),
        "fig5-rate-vs-M1-split": dict(sweep=[0, 4, 8, 12, 16, 20, 24, 28, 32], draws=20),
        "fig6-rate-vs-totalM": dict(sweep=[16, 32, 64], draws=50),
        "fig7-mu-alg": dict(sweep=[10, 15, 20, 25, 30], draws=10),
        "fig8-mu-vs-power": dict(sweep=[20, 30], draws=20),
        "fig9-rate-vs-K": dict(sweep=[1, 2, 3, 4, 5, 6], draws=10),
        "prop1-property": dict(sweep=[-10.0, 0.0, 10.0], draws=67),
        "prop2-rank": dict(sweep=[5], draws=100),
        "oracle-suite": dict(sweep=["closed-form-grid", "homogenization", "receivers"], draws=20),
    }
    base = dict(defaults[experiment])
    base.update(over)
    return ExperimentSpec(experiment=experiment, **base)


# ---------------------------------------------------------------------------
# scenario presets


def su_scenario(kappa_far_db=-10.0, m1=16, m2=16, n_bs=5, power_dbm=15.0, seed=0):
    """Single-user setup: near links LoS-dominant at 10 dB, far links at kappa."""
    far = LinkModel("rician", rician_k=db_to_linear(kappa_far_db))
    near = LinkModel("rician", rician_k=db_to_linear(10.0))
    links = {"u1": near, "u2": far, "d": far, "g1": far, "g2": near}
    return SystemScenario(
        n_bs=n_bs, m1=m1, m2=m2, n_users=1, links=links,
        tx_power_w=dbm_to_watt(power_dbm), seed=seed,
    )


def mu_scenario(
    k_users=5, power_dbm=20.0, n_bs=40, m1=16, m2=16,
    paths_g2=2, paths_g1=4, paths_d=4, paths_user=4, seed=0,
):
    """Multi-user setup: geometric links with a rank-2 IRS2->BS channel."""
    links = {
        "u1": LinkModel("geometric", paths=paths_user),
        "u2": LinkModel("geometric", paths=paths_user),
        "d": LinkModel("geometric", paths=paths_d),
        "g1": LinkModel("geometric", paths=paths_g1),
        "g2": LinkModel("geometric", paths=paths_g2),
    }
    return SystemScenario(
        n_bs=n_bs, m1=m1, m2=m2, n_users=k_users, links=links,
        tx_power_w=dbm_to_watt(power_dbm), seed=seed,
    )


def _apply_overrides(scn: SystemScenario, overrides: dict) -> SystemScenario:
    if not overrides:
        return scn
    data = scn.to_dict()
    data.update(overrides)
    return SystemScenario.from_dict(data)


# ---------------------------------------------------------------------------
# per-draw workers (module level so process pools can pickle them)


def _su_solutions(chs, ctx, rng, methods, opts):
    """Rates of the requested single-user methods on one channel realization."""
    out = {}
    i0 = int(opts.get("i0", 100))
    restarts = int(opts.get("restarts", 20))
    needs_base = {"ao-ib", "init-ib", "single-irs"} & set(methods)
    base_state = None
    if needs_base:
        base = build_single_irs_baseline_A1(chs)
        base_state = single_irs_opt(base, ctx, restarts=restarts, max_iters=i0, rng=rng)
    if "single-irs" in methods:
        out["single-irs"] = max_min_rate([base_state.snr])
    if "init-ib" in methods or "ao-ib" in methods:
        init = init_from_single_irs(chs, base_state)
        if "init-ib" in methods:
            out["init-ib"] = max_min_rate(
                [snr_value(chs, init.w, init.theta1, init.theta2, ctx)]
            )
        if "ao-ib" in methods:
            state, _ = ao_single_user(chs, ctx, init, max_iters=i0)
            out["ao-ib"] = max_min_rate([state.snr])
    if "dft-search" in methods or "ao-dft" in methods:
        found = dft_codebook_search(chs, ctx)
        if "dft-search" in methods:
            out["dft-search"] = max_min_rate([found.objective])
        if "ao-dft" in methods:
            init = SuSolveState(found.rx.w[:, 0], found.pattern.theta1, found.pattern.theta2)
            state, _ = ao_single_user(chs, ctx, init, max_iters=i0)
            out["ao-dft"] = max_min_rate([state.snr])
    if "sdr" in methods:
        w0 = np.ones(chs.n_bs, dtype=complex) / math.sqrt(chs.n_bs)
        bench = sdr_benchmark_su(chs, ctx, w0, rng=rng, max_iters=int(opts.get("sdr_iters", 10)))
        out["sdr"] = max_min_rate([bench.snr])
    return out


def _mu_point(scn, rng, methods, opts):
    """Max-min rates of the requested multi-user methods for one realization."""
    out = {}
    ctx = SinrContext.from_scenario(scn)
    i1 = int(opts.get("i1", 4))
    xi = float(opts.get("xi", 1e-3))
    eps = float(opts.get("eps", 0.1))
    n_rand = int(opts.get("n_rand", 100))
    chs = build_double_irs_scenario(scn, rng) if any(m.startswith(("alg1", "dft", "double")) for m in methods) else None
    base = None
    if any(m.startswith("single") for m in methods):
        base = build_single_irs_baseline_A2(
            scn, rank_g=scn.links["g2"].paths, rank_u=min(scn.n_users, scn.m_total), rng=rng
        )

    def run(system, mode):
        target = chs if system == "double" else base
        found = dft_codebook_search(target, ctx, rx_mode=mode)
        state, _ = algorithm1(
            target, ctx, init=found, max_iters=i1, xi=xi, rx_mode=mode,
            eps=eps, n_rand=n_rand, rng=rng,
        )
        return state

    for method in methods:
        mode = method.split("-", 1)[1]
        if method.startswith("dft-"):
            sinr = dft_codebook_search(chs, ctx, rx_mode=mode).objective
        elif method.startswith(("alg1-", "double-")):
            sinr = run("double", mode).min_sinr
        elif method.startswith("single-"):
            sinr = run("single", mode).min_sinr
        else:
            raise ValueError(f"unknown method {method!r}")
        out[method] = max_min_rate([sinr])
        out[f"_sinr:{method}"] = float(sinr)
    return out


def _draw_fig4(spec, point_rngs):
    opts = spec.options
    methods = opts.get("methods", ["ao-ib", "ao-dft", "dft-search", "sdr", "single-irs"])
    scn0 = _apply_overrides(
        su_scenario(kappa_far_db=float(opts.get("kappa_far_db", -10.0))), spec.scenario
    )
    # one channel realization per draw, swept over transmit power
    chs = build_double_irs_scenario(scn0, point_rngs[0])
    results = []
    for p_dbm, rng in zip(spec.sweep, point_rngs):
        ctx = SinrContext(np.full(scn0.n_users, dbm_to_watt(p_dbm)), scn0.noise_w)
        results.append(_su_solutions(chs, ctx, rng, methods, opts))
    return results

def _draw_fig5(spec, point_rngs):
    opts = spec.options
    methods = opts.get("methods", ["ao-ib", "init-ib", "single-irs"])
    m_total = int(opts.get("m_total", 32))
    results = []
    for m1, rng in zip(spec.sweep, point_rngs):
        m1 = int(m1)
        if not 0 <= m1 <= m_total:
            raise ValueError(f"split {m1} outside the budget {m_total}")
        scn = _apply_overrides(
            su_scenario(
                kappa_far_db=float(opts.get("kappa_far_db", -10.0)), m1=m1, m2=m_total - m1
            ),
            spec.scenario,
        )
        chs = build_double_irs_scenario(scn, rng)
        ctx = SinrContext.from_scenario(scn)
        results.append(_su_solutions(chs, ctx, rng, methods, opts))
    return results


def _draw_fig6(spec, point_rngs):
    opts = spec.options
    kappas = opts.get("kappa_set_db", [-10.0, 0.0, 10.0])
    results = []
    for m, rng in zip(spec.sweep, point_rngs):
        m = int(m)
        row = {}
        for kdb in kappas:
            sub = rng.spawn(1)[0] if hasattr(rng, "spawn") else rng
            scn = _apply_overrides(
                su_scenario(kappa_far_db=float(kdb), m1=m // 2, m2=m - m // 2), spec.scenario
            )
            chs = build_double_irs_scenario(scn, sub)
            ctx = SinrContext.from_scenario(scn)
            vals = _su_solutions(chs, ctx, sub, ["ao-ib", "single-irs"], opts)
            row[f"double-ao[k={kdb:g}dB]"] = vals["ao-ib"]
            row[f"single-irs[k={kdb:g}dB]"] = vals["single-irs"]
        results.append(row)
    return results


def _draw_mu_power(spec, point_rngs, methods):
    opts = spec.options
    results = []
    for p_dbm, rng in zip(spec.sweep, point_rngs):
        scn = _apply_overrides(
            mu_scenario(k_users=int(opts.get("k_users", 5)), power_dbm=float(p_dbm)),
            spec.scenario,
        )
        results.append(_mu_point(scn, rng, methods, opts))
    return results


def _draw_fig7(spec, point_rngs):
    methods = spec.options.get("methods", ["alg1-zf", "alg1-mmse", "dft-zf", "dft-mmse"])
    return _draw_mu_power(spec, point_rngs, methods)


def _draw_fig8(spec, point_rngs):
    methods = spec.options.get("methods", ["double-mmse", "single-mmse"])
    return _draw_mu_power(spec, point_rngs, methods)


def _draw_fig9(spec, point_rngs):
    opts = spec.options
    methods = opts.get("methods", ["double-mmse", "double-zf", "single-mmse", "single-zf"])
    results = []
    for k, rng in zip(spec.sweep, point_rngs):
        scn = _apply_overrides(
            mu_scenario(k_users=int(k), power_dbm=float(opts.get("power_dbm", 30.0))),
            spec.scenario,
        )
        results.append(_mu_point(scn, rng, methods, opts))
    return results


def _draw_prop1(spec, point_rngs):
    opts = spec.options
    results = []
    for kdb, rng in zip(spec.sweep, point_rngs):
        scn = _apply_overrides(su_scenario(kappa_far_db=float(kdb)), spec.scenario)
        chs = build_double_irs_scenario(scn, rng)
        ctx = SinrContext.from_scenario(scn)
        base = build_single_irs_baseline_A1(chs)
        base_state = single_irs_opt(base, ctx, restarts=int(opts.get("restarts", 20)), rng=rng)
        init = init_from_single_irs(chs, base_state)
        init_snr = snr_value(chs, init.w, init.theta1, init.theta2, ctx)
        state, _ = ao_single_user(chs, ctx, init)
        results.append(
            {
                "ao-ib": max_min_rate([state.snr]),
                "single-irs": max_min_rate([base_state.snr]),
                "_violation": float(state.snr < base_state.snr * (1 - 1e-9)),
                "_init_violation": float(init_snr < base_state.snr * (1 - 1e-9)),
            }
        )
    return results


def _draw_prop2(spec, point_rngs):
    opts = spec.options
    results = []
    for k, rng in zip(spec.sweep, point_rngs):
        scn = _apply_overrides(mu_scenario(k_users=int(k)), spec.scenario)
        chs = build_double_irs_scenario(scn, rng)
        base = build_single_irs_baseline_A2(
            scn, rank_g=scn.links["g2"].paths, rank_u=min(scn.n_users, scn.m_total), rng=rng
        )
        pat = ReflectPattern.random(scn.m1, scn.m2, rng)
        rep = rank_gain_report(chs, base, pat, rng=rng)
        results.append(
            {
                "rank-h": float(rep.rank_h),
                "rank-hbar": float(rep.rank_hbar),
                "_clipped_holds": float(rep.clipped_gain_holds),
            }
        )
    return results


def _draw_oracle(spec, point_rngs):
    from .metrics import sinr_per_user
    from .multi_user import mmse_receivers, zf_receivers
    from .single_user import opt_theta2_closed_form

    results = []
    for check, rng in zip(spec.sweep, point_rngs):
        ok = 1.0
        if check == "closed-form-grid":
            chs = _random_channel_set(rng, n=3, m1=3, m2=3, k=1)
            ctx = SinrContext(np.ones(1), 1.0)
            w = rng.standard_normal(3) + 1j * rng.standard_normal(3)
            w = w / np.linalg.norm(w)
            t1 = np.exp(1j * rng.uniform(0, 2 * math.pi, 3))
            t2 = opt_theta2_closed_form(chs, t1, w)
            grid = _grid_best_theta2(chs, t1, w, ctx, points=32)
            ok = float(snr_value(chs, w, t1, t2, ctx) >= grid * (1 - 1e-9))
        elif check == "homogenization":
            inst = _random_instance(rng, k=2, m=4)
            theta = np.exp(1j * rng.uniform(0, 2 * math.pi, 5))
            lhs = np.real(
                theta.conj() @ inst.constraint_matrix(0, 1) @ theta
            ) + np.abs(inst.qbar[0, 1]) ** 2
            rec = np.conj(theta[-1]) * theta[:-1]
            rhs = np.abs(inst.q[0, 1].conj() @ rec + inst.qbar[0, 1]) ** 2
            ok = float(abs(lhs - rhs) <= 1e-10 * max(abs(rhs), 1.0))
        elif check == "receivers":
            h = rng.standard_normal((6, 3)) + 1j * rng.standard_normal((6, 3))
            ctx = SinrContext(np.ones(3), 0.5)
            wz = zf_receivers(h, ctx.powers)
            wm = mmse_receivers(h, ctx.powers, ctx.noise)
            gz = sinr_per_user(h, wz.w, ctx)
            gm = sinr_per_user(h, wm.w, ctx)
            ident = np.max(np.abs(wz.w.conj().T @ h - np.eye(3)))
            ok = float(ident <= 1e-9 and np.all(gm >= gz * (1 - 1e-10)))
        else:
            raise ValueError(f"unknown oracle check {check!r}")
        results.append({str(check): ok})
    return results


def _random_channel_set(rng, n, m1, m2, k):
    from .channels import ChannelSet

    def c(*shape):
        return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)

    return ChannelSet.from_links(c(m1, k), c(m2, k), c(m2, m1), c(n, m1), c(n, m2))


def _grid_best_theta2(chs, t1, w, ctx, points=32):
    m2 = chs.m2
    phases = 2 * math.pi * np.arange(points) / points
    grids = np.meshgrid(*([phases] * m2), indexing="ij")
    combos = np.exp(1j * np.stack([g.ravel() for g in grids], axis=1))
    a = np.einsum("mnp,m->np", chs.q[0], t1) + chs.r2[0]
    b = a.conj().T @ w
    b0 = np.vdot(w, chs.r1[0] @ t1)
    vals = np.abs(combos @ b.conj() + b0) ** 2
    return float(ctx.powers[0] * vals.max() / ctx.noise)


def _random_instance(rng, k, m):
    q = rng.standard_normal((k, k, m)) + 1j * rng.standard_normal((k, k, m))
    qb = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
    return MaxMinSdpInstance(q, qb, np.ones(k))


_DRAW_FNS = {
    "fig4-rate-vs-power": _draw_fig4,
    "fig5-rate-vs-M1-split": _draw_fig5,
    "fig6-rate-vs-totalM": _draw_fig6,
    "fig7-mu-alg": _draw_fig7,
    "fig8-mu-vs-power": _draw_fig8,
    "fig9-rate-vs-K": _draw_fig9,
    "prop1-property": _draw_prop1,
    "prop2-rank": _draw_prop2,
    "oracle-suite": _draw_oracle,
}


def _run_one_draw(args):
    spec_dict, draw_index, seed_seq = args
    spec = ExperimentSpec.from_dict(spec_dict)
    point_seqs = seed_seq.spawn(len(spec.sweep))
    point_rngs = [np.random.default_rng(sq) for sq in point_seqs]
    try:
        rows = _DRAW_FNS[spec.experiment](spec, point_rngs)
        return draw_index, rows, None
    except (SdpSolverError, np.linalg.LinAlgError) as err:
        return draw_index, None, f"{type(err).__name__}: {err}"


# ---------------------------------------------------------------------------
# driver


def run_experiment(spec: ExperimentSpec, threads=1):
    """Run one experiment; writes the CSV and summary artifacts.

    Returns the summary dict (also stored as JSON next to the CSV).  Rows for
    sweep points whose draws hit a solver failure are flushed with status
    'failed' instead of aborting the whole run.
    """
    t_start = time.perf_counter()
    master = np.random.SeedSequence(spec.seed)
    children = master.spawn(spec.draws)
    tasks = [(spec.to_dict(), i, children[i]) for i in range(spec.draws)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(_run_one_draw, tasks))
    else:
        outcomes = [_run_one_draw(t) for t in tasks]
    outcomes.sort(key=lambda o: o[0])

    per_point = [dict() for _ in spec.sweep]  # method -> list of values
    failures = []
    for draw_index, rows, err in outcomes:
        if err is not None:
            failures.append({"draw": draw_index, "error": err})
            continue
        for point_idx, row in enumerate(rows):
            for method, value in row.items():
                per_point[point_idx].setdefault(method, []).append(float(value))

    os.makedirs(spec.out_dir, exist_ok=True)
    csv_path = os.path.join(spec.out_dir, f"{spec.experiment}.csv")
    table = []
    for point_idx, sweep_value in enumerate(spec.sweep):
        for method in sorted(per_point[point_idx]):
            if method.startswith("_"):
                continue
            vals = np.asarray(per_point[point_idx][method])
            stderr = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
            table.append(
                {
                    "sweep": sweep_value,
                    "method": method,
                    "mean_rate": float(vals.mean()),
                    "stderr": stderr,
                    "draws": int(vals.size),
                    "status": "ok" if not failures else "failed",
                }
            )
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["sweep", "method", "mean_rate", "stderr", "draws", "status"]
        )
        writer.writeheader()
        for row in table:
            out = dict(row)
            out["mean_rate"] = format(row["mean_rate"], ".10g")
            out["stderr"] = format(row["stderr"], ".10g")
            writer.writerow(out)

    summary = {
        "experiment": spec.experiment,
        "seed": spec.seed,
        "draws": spec.draws,
        "sweep": spec.sweep,
        "csv": csv_path,
        "failures": failures,
        "assertions": _summarize(spec, per_point),
    }
    with open(os.path.join(spec.out_dir, f"{spec.experiment}_summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    summary["runtime_s"] = time.perf_counter() - t_start
    return summary


def _mean(per_point, idx, method):
    vals = per_point[idx].get(method)
    return float(np.mean(vals)) if vals else float("nan")


def _summarize(spec, per_point):
    """Pass/fail records for the assertions embedded in each experiment."""
    out = {}
    exp = spec.experiment
    if exp == "fig5-rate-vs-M1-split":
        ok = all(
            _mean(per_point, i, "ao-ib") >= _mean(per_point, i, "single-irs") - 1e-12
            for i in range(len(spec.sweep))
            if per_point[i]
        )
        out["double_ge_single_all_splits"] = bool(ok)
    elif exp == "fig6-rate-vs-totalM":
        gains = {}
        methods = sorted({m for p in per_point for m in p if not m.startswith("_")})
        for method in methods:
            for i in range(len(spec.sweep) - 1):
                if 2 * spec.sweep[i] == spec.sweep[i + 1]:
                    key = f"{method} {spec.sweep[i]}->{spec.sweep[i + 1]}"
                    gains[key] = _mean(per_point, i + 1, method) - _mean(per_point, i, method)
        out["doubling_gains_bits"] = gains
    elif exp == "fig7-mu-alg":
        for mode in ("zf", "mmse"):
            a, d = f"alg1-{mode}", f"dft-{mode}"
            if per_point and a in per_point[0] and d in per_point[0]:
                out[f"alg1_ge_dft_{mode}"] = bool(
                    all(
                        _mean(per_point, i, a) >= _mean(per_point, i, d) - 1e-12
                        for i in range(len(spec.sweep))
                    )
                )
    elif exp == "fig8-mu-vs-power":
        if len(spec.sweep) >= 2 and per_point:
            lo, hi = 0, len(spec.sweep) - 1
            for key in sorted(per_point[0]):
                if not key.startswith("_sinr:"):
                    continue
                lo_sinr = _mean(per_point, lo, key)
                hi_sinr = _mean(per_point, hi, key)
                out[f"sinr_growth[{key[6:]}]"] = (
                    (hi_sinr - lo_sinr) / lo_sinr if lo_sinr > 0 else float("inf")
                )
    elif exp == "fig9-rate-vs-K":
        for method in sorted(per_point[0] if per_point else {}):
            if method.startswith("_"):
                continue
            rates = [_mean(per_point, i, method) for i in range(len(spec.sweep))]
            out[f"rate_span[{method}]"] = {"first": rates[0], "last": rates[-1]}
    elif exp == "prop1-property":
        viol = sum(sum(p.get("_violation", [])) for p in per_point)
        init_viol = sum(sum(p.get("_init_violation", [])) for p in per_point)
        out["violations"] = int(viol)
        out["init_violations"] = int(init_viol)
        out["pass"] = viol == 0
    elif exp == "prop2-rank":
        k = int(spec.sweep[0])
        h_vals = np.asarray(per_point[0].get("rank-h", []))
        hbar_vals = np.asarray(per_point[0].get("rank-hbar", []))
        out["frac_rank_h_full"] = float(np.mean(h_vals == min(k, 5))) if h_vals.size else 0.0
        out["frac_rank_hbar_2"] = float(np.mean(hbar_vals == 2)) if hbar_vals.size else 0.0
        out["pass"] = out["frac_rank_h_full"] >= 0.95 and out["frac_rank_hbar_2"] >= 0.95
    elif exp == "oracle-suite":
        checks = {}
        for i, name in enumerate(spec.sweep):
            vals = per_point[i].get(str(name), [])
            checks[str(name)] = float(np.mean(vals)) if vals else 0.0
        out["check_pass_fraction"] = checks
        out["pass"] = all(v == 1.0 for v in checks.values())
    return out


def emit_plotdata(csv_path, out_dir=None):
    """Split an experiment CSV into per-method (x, y, yerr) series files."""
    out_dir = out_dir or os.path.dirname(os.path.abspath(csv_path))
    with open(csv_path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"sweep", "method", "mean_rate", "stderr"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise ValueError(f"{csv_path}: missing required columns {sorted(required)}")
        rows = list(reader)
    if not rows:
        raise ValueError(f"{csv_path}: no data rows")
    series = {}
    for row in rows:
        try:
            series.setdefault(row["method"], []).append(
                (row["sweep"], float(row["mean_rate"]), float(row["stderr"]))
            )
        except (TypeError, ValueError) as err:
            raise ValueError(f"{csv_path}: malformed row {row!r}") from err
    stem = os.path.splitext(os.path.basename(csv_path))[0]
    paths = []
    for method, points in sorted(series.items()):
        safe = "".join(ch if ch.isalnum() or ch in "-._" else "-" for ch in method)
        path = os.path.join(out_dir, f"{stem}__{safe}.dat")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("# x y yerr\n")
            for x, y, yerr in points:
                fh.write(f"{x} {format(y, '.10g')} {format(yerr, '.10g')}\n")
        paths.append(path)
    return paths
