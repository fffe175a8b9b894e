"""Scripted studies: annealing, survival scans, window statistics, audits.

Each study is a pure function of its parameters and seed and returns a
:class:`StudyResult` table; identical calls produce identical rows.  The
tables are self-describing so the io module can serialize them together
with a manifest for regression comparisons.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import engine, lattice, rules
from .engine import EngineCaps
from .rng import BOOTSTRAP, EVENTS, derive_seed, replica_seeds

_VERSION_KEY = "spindual"


@dataclass(frozen=True)
class StudyResult:
    """Columnar output of one study plus the inputs that produced it."""

    name: str
    params: dict
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]
    seed: int
    wallclock_s: float

    def column(self, name: str) -> list:
        j = self.columns.index(name)
        return [row[j] for row in self.rows]

    def manifest(self) -> dict:
        # wallclock stays out: it would break byte-identical reruns
        from . import __version__

        return {
            "study": self.name,
            "params": self.params,
            "seed": self.seed,
            "version": {_VERSION_KEY: __version__},
        }


def _finish(name, params, columns, rows, seed, t0) -> StudyResult:
    return StudyResult(
        name=name, params=dict(params), columns=tuple(columns),
        rows=tuple(tuple(r) for r in rows), seed=int(seed),
        wallclock_s=time.time() - t0,
    )


# ---------------------------------------------------------------------------
# density under a slowly lowered branching parameter

def linear_schedule(alpha_from: float = 1.0, alpha_to: float = 0.0,
                    t_total: float = 3e4, segments: int = 300) -> tuple:
    """Piecewise-constant ramp given as (start_time, alpha) breakpoints."""
    ts = np.linspace(0.0, t_total, segments, endpoint=False)
    al = np.linspace(alpha_from, alpha_to, segments)
    return tuple((float(t), float(a)) for t, a in zip(ts, al))


def density_anneal(sites: int = 201, t_total: float = 3e4,
                   schedule: Sequence[tuple] | None = None,
                   seed: int = 0, n_samples: int = 300,
                   threads: int = 1) -> StudyResult:
    """Particle density of the branching-annihilating walk under a ramp.

    One particle on a ring; the branching parameter is constant on each
    schedule segment, so a single-segment schedule is exactly a plain run
    at that value.  Parity makes extinction impossible from an odd start,
    hence density - 1/sites is reported alongside the raw density.
    """
    t_start = time.time()
    if schedule is None:
        schedule = linear_schedule(t_total=t_total)
    schedule = sorted((float(t), float(a)) for t, a in schedule)
    if not schedule or schedule[0][0] != 0.0:
        raise ValueError("the schedule must start at time 0")
    if any(b[1] > a[1] + 1e-12 for a, b in zip(schedule, schedule[1:])):
        raise ValueError("the ramp must be non-increasing in alpha")
    shape = lattice.LatticeShape.torus(sites)
    x = lattice.single_site(shape, sites // 2)
    grid = np.linspace(0.0, t_total, n_samples + 1)[1:]
    bounds = [t for t, _ in schedule] + [t_total]
    rows = []
    n_events = 0
    for k, (t0_seg, alpha) in enumerate(schedule):
        t1_seg = bounds[k + 1]
        if t1_seg <= t0_seg:
            continue
        r = rules.model("adbarw", alpha)
        local = [g - t0_seg for g in grid if t0_seg < g <= t1_seg]
        pad = not local or local[-1] < t1_seg - t0_seg
        if pad:
            local.append(t1_seg - t0_seg)
        traj = engine.run_dense(r, x, local, seed=derive_seed(seed, EVENTS, k))
        n_events += traj.n_events
        for g, s in zip(local, traj.samples if not pad else traj.samples[:-1]):
            ones = s.ones_count()
            rows.append((t0_seg + g, alpha, ones, ones / sites,
                         ones / sites - 1.0 / sites))
        x = traj.samples[-1]
    return _finish(
        "density_anneal",
        {"sites": sites, "t_total": t_total, "n_samples": n_samples,
         "segments": len(schedule),
         "schedule_head": list(schedule[:3]), "schedule_tail": list(schedule[-3:])},
        ("t", "alpha", "particles", "density", "density_minus_floor"),
        rows, seed, t_start,
    )


def _crossing_alpha(alphas: np.ndarray, dens: np.ndarray, floor: float) -> float:
    """Ramp-curve threshold crossing: half way between floor and plateau.

    The plateau is the mean density over the lowest tenth of the alpha
    range; the estimate interpolates where the curve (averaged per alpha)
    first exceeds the threshold as alpha decreases.
    """
    order = np.argsort(alphas)
    a = alphas[order]
    d = dens[order]
    lo_mask = a <= a[0] + 0.1 * (a[-1] - a[0])
    plateau = float(d[lo_mask].mean())
    thresh = floor + 0.5 * (plateau - floor)
    above = d >= thresh
    if not above.any():
        return float("nan")
    i = int(np.max(np.nonzero(above)))  # largest alpha index still above
    if i + 1 >= a.size:
        return float(a[-1])
    d0, d1 = d[i], d[i + 1]
    if d0 == d1:
        return float(a[i])
    frac = (thresh - d1) / (d0 - d1)
    return float(a[i + 1] + frac * (a[i] - a[i + 1]))


def anneal_critical_point(sites: int = 201, t_total: float = 3e4,
                          replicates: int = 8, seed: int = 0,
                          n_samples: int = 300,
                          n_boot: int = 1000) -> StudyResult:
    """Ramp-based estimate of the branching threshold with a bootstrap CI.

    Each replicate runs its own ramp; the threshold estimate is the
    half-plateau crossing of its density-versus-alpha curve.  The CI is a
    percentile bootstrap over the replicate estimates.
    """
    t0 = time.time()
    est = []
    for k in range(replicates):
        res = density_anneal(sites, t_total, None, derive_seed(seed, EVENTS, k),
                             n_samples)
        al = np.array(res.column("alpha"))
        de = np.array(res.column("density"))
        est.append(_crossing_alpha(al, de, 1.0 / sites))
    est = np.array(est)
    rg = np.random.Generator(np.random.PCG64(derive_seed(seed, BOOTSTRAP)))
    idx = rg.integers(0, len(est), size=(n_boot, len(est)))
    means = est[idx].mean(axis=1)
    lo, hi = np.percentile(means, [2.5, 97.5])
    rows = [("replicate_%d" % k, float(e)) for k, e in enumerate(est)]
    rows.append(("mean", float(est.mean())))
    rows.append(("ci_low", float(lo)))
    rows.append(("ci_high", float(hi)))
    return _finish(
        "anneal_critical_point",
        {"sites": sites, "t_total": t_total, "replicates": replicates,
         "n_samples": n_samples, "n_boot": n_boot,
         "estimator": "half-plateau crossing of the ramp curve"},
        ("quantity", "alpha_c"), rows, seed, t0,
    )


# ---------------------------------------------------------------------------
# survival scan over the branching parameter

def survival_scan(model_name: str = "adbarw",
                  alpha_grid: Sequence[float] | None = None,
                  y0_sites: Sequence[int] = (0, 1), T: float = 1e4,
                  replicas: int = 400, seed: int = 0,
                  max_particles: int = 512, threads: int = 1,
                  n_boot: int = 1000) -> StudyResult:
    """p_alive(alpha) for an even start, plus a threshold-crossing estimate.

    Replicas hitting the particle cap count as alive: the cap only trips
    on growing populations, and the window of interest is extinction.
    The threshold estimate interpolates where p_alive crosses half of its
    small-alpha plateau; a parametric bootstrap over the per-alpha counts
    gives the CI.  A caller asking about an odd start gets an error, since
    parity would pin survival at one.
    """
    t0 = time.time()
    if alpha_grid is None:
        alpha_grid = np.round(np.arange(0.0, 1.0001, 0.05), 10)
    y0_sites = sorted(int(s) for s in y0_sites)
    if len(y0_sites) % 2 == 1:
        raise ValueError("survival from an odd start is one by parity")
    shape = lattice.LatticeShape.infinite(1)
    y0 = lattice.sparse_config(shape, y0_sites)
    caps = EngineCaps(max_particles=max_particles)
    rows = []
    n_alive = []
    for i, alpha in enumerate(alpha_grid):
        r = rules.model(model_name, float(alpha))
        s = engine.sample_survival(r, y0, T, replicas,
                                   derive_seed(seed, EVENTS, i), caps, threads)
        n_alive.append(s.n_alive)
        rows.append((float(alpha), replicas, s.n_alive, s.p_alive,
                     s.ci_low, s.ci_high, s.n_capped))

    alphas = np.asarray(alpha_grid, dtype=float)
    wins = np.asarray(n_alive, dtype=int)

    def crossing(counts: np.ndarray) -> float:
        p = counts / replicas
        plateau = float(p[0])
        if plateau <= 0:
            return float("nan")
        thr = 0.5 * plateau
        below = p < thr
        if not below.any():
            return float("nan")
        j = int(np.min(np.nonzero(below)))
        if j == 0:
            return float(alphas[0])
        p0, p1 = p[j - 1], p[j]
        frac = (p0 - thr) / (p0 - p1) if p0 != p1 else 0.5
        return float(alphas[j - 1] + frac * (alphas[j] - alphas[j - 1]))

    a_c = crossing(wins)
    rg = np.random.Generator(np.random.PCG64(derive_seed(seed, BOOTSTRAP)))
    samples = []
    for _ in range(n_boot):
        fake = rg.binomial(replicas, wins / replicas)
        v = crossing(fake)
        if not math.isnan(v):
            samples.append(v)
    if samples:
        lo, hi = np.percentile(samples, [2.5, 97.5])
    else:
        lo = hi = float("nan")
    return _finish(
        "survival_scan",
        {"model": model_name, "y0": y0_sites, "T": T, "replicas": replicas,
         "max_particles": max_particles, "alpha_c": a_c,
         "alpha_c_ci": [float(lo), float(hi)], "n_boot": n_boot,
         "estimator": "half-plateau crossing, parametric bootstrap"},
        ("alpha", "replicas", "n_alive", "p_alive", "ci_low", "ci_high",
         "n_capped"),
        rows, seed, t0,
    )


# ---------------------------------------------------------------------------
# the extinction-versus-growth window

def extinction_vs_growth(model_name: str = "adbarw", alpha: float = 0.2,
                         y0_sites: Sequence[int] = (0, 1),
                         N_grid: Sequence[int] = (2, 6, 10),
                         t_grid: Sequence[float] = (10.0, 100.0, 1000.0),
                         replicas: int = 2000, seed: int = 0,
                         max_particles: int = 128, x_sites: int = 256,
                         x_replicas: int = 300, threads: int = 1) -> StudyResult:
    """P[0 < |Y_t| < N] for the dual, and the gradient analogue for spins.

    Capped replicas count as outside the window (the cap exceeds every N
    in the grid, so a capped population is already too large); the capped
    fraction is reported.  The spin side starts from a one-block state on
    a ring wide enough to keep the light cone from wrapping at the largest
    t, and measures the same window for the gradient count.
    """
    t0 = time.time()
    N_grid = sorted(int(n) for n in N_grid)
    t_grid = sorted(float(t) for t in t_grid)
    if max_particles <= max(N_grid):
        raise ValueError("the particle cap must exceed every N in the grid")
    shape = lattice.LatticeShape.infinite(1)
    y0 = lattice.sparse_config(shape, [int(s) for s in y0_sites])
    caps = EngineCaps(max_particles=max_particles)
    seeds = replica_seeds(seed, EVENTS, replicas)
    counts, ext, capt = engine.sparse_counts(
        rules.model(model_name, alpha), y0, t_grid, seeds, caps, threads)
    capped = np.isfinite(capt)
    rows = []
    for ti, t in enumerate(t_grid):
        col = counts[:, ti]
        for N in N_grid:
            inside = ((col > 0) & (col < N) & ~capped).sum()
            p = inside / replicas
            lo, hi = engine.wilson_interval(int(inside), replicas)
            rows.append(("dual_particles", t, N, float(p), lo, hi,
                         float(capped.mean())))

    # spin-system side: gradient count of the matching model from one block
    spec = rules.ModelSpec(model_name, alpha)
    rx = rules.model(spec.name, alpha)
    ring = lattice.LatticeShape.torus(x_sites)
    block = lattice.interval(ring, x_sites // 2 - 1, x_sites // 2)
    x_seeds = replica_seeds(derive_seed(seed, EVENTS, 1), EVENTS, x_replicas)
    grads = np.empty((x_replicas, len(t_grid)), dtype=np.int64)
    for k in range(x_replicas):
        traj = engine.run_dense(rx, block, t_grid, int(x_seeds[k]))
        for ti, s in enumerate(traj.samples):
            grads[k, ti] = lattice.config_statistics(s).gradient
    for ti, t in enumerate(t_grid):
        col = grads[:, ti]
        for N in N_grid:
            inside = ((col > 0) & (col < N)).sum()
            p = inside / x_replicas
            lo, hi = engine.wilson_interval(int(inside), x_replicas)
            rows.append(("spin_gradient", t, N, float(p), lo, hi, 0.0))
    return _finish(
        "extinction_vs_growth",
        {"model": model_name, "alpha": alpha, "y0": list(y0_sites),
         "N_grid": N_grid, "t_grid": t_grid, "replicas": replicas,
         "max_particles": max_particles, "x_sites": x_sites,
         "x_replicas": x_replicas},
        ("side", "t", "N", "p_window", "ci_low", "ci_high", "capped_fraction"),
        rows, seed, t0,
    )


# ---------------------------------------------------------------------------
# drift of the rightmost particle

_DRIFT_TABLE = {0: 2.0, 1: 3.0, 2: 1.0, 3: 1.0}
_PATTERN_NAMES = {0: "..00100", 1: "..01100", 2: "..10100", 3: "..11100"}


def drift_audit(alpha: float = 0.0, samples: int = 100_000,
                seed: int = 0) -> StudyResult:
    """Conditional edge drift per local pattern versus the exact table.

    The reference values hold for the pure-branching case alpha = 0; for
    other alpha the table column reports NaN and the rows are exploratory.
    """
    t0 = time.time()
    r = rules.model("adbarw", alpha)
    d = engine.sample_edge_drift(r, seed, n_target=samples)
    rows = []
    for pat in range(4):
        expected = _DRIFT_TABLE[pat] if alpha == 0.0 else float("nan")
        rows.append((
            _PATTERN_NAMES[pat], int(d.moves[pat]), float(d.time_in[pat]),
            float(d.step_rate[pat]), float(d.mean_step[pat]), expected,
        ))
    return _finish(
        "drift_audit",
        {"alpha": alpha, "samples": samples, "episodes": d.episodes,
         "statistic": "edge displacement per unit time, conditioned on the "
                      "two sites behind the edge"},
        ("pattern", "moves", "time_in", "drift_rate", "mean_step", "expected"),
        rows, seed, t0,
    )


# ---------------------------------------------------------------------------
# structural audits

def _interface_rate_match(alpha: float) -> tuple[int, float]:
    """Exact check that spin flips map to dual events under the interface.

    For every 5-site local spin pattern, the flip rate of the center site
    under the one-dimensional pair-swap-free rules must equal the total
    rate of dual events whose toggle set is exactly the two interface
    sites the flip touches.  Returns (patterns checked, max |difference|).
    """
    rx = rules.model("rebellious", alpha)
    ry = rules.transpose_dual(rx)
    shape = lattice.LatticeShape.infinite(1)
    worst = 0.0
    checked = 0
    c = 2  # center of the 5-site window
    for bits in range(32):
        xs = [(bits >> k) & 1 for k in range(5)]
        x = lattice.sparse_config(shape, [i for i in range(5) if xs[i]])
        rate_x = rules.effective_flip_rate(rx, x, (c,))
        y_sites = [i for i in range(4) if xs[i] != xs[i + 1]]
        y = lattice.sparse_config(shape, y_sites)
        want = frozenset({(c - 1,), (c,)})
        rate_y = 0.0
        for t in ry.templates:
            for a in range(c - 3, c + 4):
                if frozenset(rules.action_toggles(t, y, (a,))) == want:
                    rate_y += t.rate
        worst = max(worst, abs(rate_x - rate_y))
        checked += 1
    return checked, worst


def _voter_reduction_equal() -> bool:
    """The alpha = 1 rule set must be the nearest-neighbor voter model."""
    got = rules.model("rebellious", 1.0)
    voter = rules.RuleSet(1, (
        rules.RuleTemplate(frozenset({((0,), (-1,)), ((0,), (0,))}), 1.0),
        rules.RuleTemplate(frozenset({((0,), (0,)), ((0,), (1,))}), 1.0),
    ))
    return got == voter


def structural_audits(seed: int = 0, replicas: int = 100_000,
                      hold_times: Sequence[float] = (0.1, 0.25),
                      lengths: Sequence[int] = tuple(range(4, 13)),
                      alphas: Sequence[float] = (0.0, 0.3, 1.0),
                      threads: int = 1) -> StudyResult:
    """Three exact-or-tight checks tying the rule algebra together.

    (i) interface rates match the dual rates symbolically on all 32 local
    patterns; (ii) at alpha = 1 the rule set reduces to the voter model;
    (iii) a one-block state of length n holds unchanged for time t with
    probability e^{-4t}, uniformly in n.  For (iii) the holding
    probability P[first change > t] is the audited number; the raw return
    probability P[X_t = x0] is reported alongside, and sits strictly
    above it because excursions can cancel out.
    """
    t0 = time.time()
    rows = []
    for alpha in alphas:
        checked, worst = _interface_rate_match(float(alpha))
        rows.append(("interface_rate_match", float(alpha), float("nan"),
                     float("nan"), checked, worst, worst <= 1e-12))
    ok = _voter_reduction_equal()
    rows.append(("voter_reduction", 1.0, float("nan"), float("nan"),
                 1, 0.0 if ok else 1.0, ok))

    alpha_hold = 0.3
    rx = rules.model("rebellious", alpha_hold)
    for n in lengths:
        ring = lattice.LatticeShape.torus(n + 6)
        x0 = lattice.interval(ring, 3, 3 + n - 1)
        seeds = replica_seeds(derive_seed(seed, EVENTS, n), EVENTS, replicas)
        t_max = max(hold_times)
        ends, first = engine.dense_endstates_batch(rx, x0, t_max, seeds, threads)
        returned = np.all(ends == x0.bits[None, :], axis=1)
        for t in hold_times:
            p_hold = float((first > t).mean()) if t < t_max else float(
                (first > t_max).mean())
            target = math.exp(-4.0 * t)
            p_return = float(returned.mean()) if t == t_max else float("nan")
            rows.append(("interval_holding", alpha_hold, float(n), float(t),
                         replicas, abs(p_hold - target),
                         abs(p_hold - target) <= 0.01))
            rows.append(("interval_return_marginal", alpha_hold, float(n),
                         float(t), replicas,
                         p_return - target if not math.isnan(p_return)
                         else float("nan"), True))
    return _finish(
        "structural_audits",
        {"replicas": replicas, "hold_times": list(hold_times),
         "lengths": list(lengths), "alphas": list(alphas),
         "holding_statistic": "P[first change > t] vs exp(-4t)"},
        ("audit", "alpha", "n", "t", "checked", "discrepancy", "passed"),
        rows, seed, t0,
    )


# ---------------------------------------------------------------------------
# equilibrium statistics across initial laws

_INITIAL_LAWS = ("product_half", "product_quarter", "half_space", "interval")


def _initial_state(law: str, shape: lattice.LatticeShape, seed: int) -> lattice.SpinConfig:
    n = shape.n_sites
    if law == "product_half":
        return lattice.product_random(shape, 0.5, seed)
    if law == "product_quarter":
        return lattice.product_random(shape, 0.25, seed)
    if law == "half_space":
        return lattice.interval(shape, 0, n // 2 - 1)
    if law == "interval":
        return lattice.interval(shape, n // 2 - n // 8, n // 2 + n // 8)
    raise ValueError(f"unknown initial law {law!r}; expected one of {_INITIAL_LAWS}")


def equilibrium_probe(model_name: str = "rebellious", alpha: float = 0.2,
                      sites: int = 200, t_relax: float = 2000.0,
                      replicas: int = 24,
                      initial_laws: Sequence[str] = _INITIAL_LAWS,
                      seed: int = 0, lags: int = 5) -> StudyResult:
    """Long-run one- and two-point statistics per initial law.

    Trapped runs (all zeros or all ones at the horizon) are excluded from
    the statistics and counted; every homogeneous coexisting start should
    agree with the product-half start within the joint CI, which the
    cross-law z columns make directly readable.
    """
    t0 = time.time()
    shape = lattice.LatticeShape.torus(sites)
    r = rules.model(model_name, alpha)
    stats: dict[str, dict] = {}
    for li, law in enumerate(initial_laws):
        dens, disag = [], []
        two = [[] for _ in range(lags)]
        trapped = 0
        for k in range(replicas):
            s_init = derive_seed(seed, EVENTS, li, k)
            x0 = _initial_state(law, shape, s_init)
            traj = engine.run_dense(r, x0, [t_relax], s_init)
            xt = traj.samples[-1].bits.astype(np.float64)
            ones = xt.sum()
            if ones == 0 or ones == sites:
                trapped += 1
                continue
            dens.append(ones / sites)
            disag.append(float((xt != np.roll(xt, -1)).mean()))
            for lag in range(1, lags + 1):
                two[lag - 1].append(float((xt == np.roll(xt, -lag)).mean()))
        stats[law] = {
            "density": np.array(dens), "disagreement": np.array(disag),
            "two_point": [np.array(v) for v in two], "trapped": trapped,
        }

    ref = stats.get("product_half")
    rows = []
    for law in initial_laws:
        st = stats[law]
        used = st["density"].size
        for qname, vals in (
            ("density", st["density"]), ("nn_disagreement", st["disagreement"]),
            *(("two_point_lag%d" % (k + 1), st["two_point"][k]) for k in range(lags)),
        ):
            if used == 0:
                rows.append((law, qname, used, st["trapped"],
                             float("nan"), float("nan"), float("nan")))
                continue
            m = float(vals.mean())
            se = float(vals.std(ddof=1) / math.sqrt(used)) if used > 1 else float("nan")
            z = float("nan")
            if ref is not None and law != "product_half" and ref["density"].size:
                rv = ref["density"] if qname == "density" else (
                    ref["disagreement"] if qname == "nn_disagreement"
                    else ref["two_point"][int(qname[-1]) - 1])
                if rv.size > 1 and used > 1:
                    se2 = rv.std(ddof=1) ** 2 / rv.size + vals.std(ddof=1) ** 2 / used
                    if se2 > 0:
                        z = float((m - rv.mean()) / math.sqrt(se2))
            rows.append((law, qname, used, st["trapped"], m, se, z))
    return _finish(
        "equilibrium_probe",
        {"model": model_name, "alpha": alpha, "sites": sites,
         "t_relax": t_relax, "replicas": replicas,
         "initial_laws": list(initial_laws), "lags": lags},
        ("initial_law", "quantity", "runs_used", "trapped", "mean",
         "stderr", "z_vs_product_half"),
        rows, seed, t0,
    )
