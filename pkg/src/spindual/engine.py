"""Monte Carlo engines: dense torus, sparse line, and arrow-field runs.

All engines sample the jump chain directly: per template they track the
anchors whose action is nonzero, so no clock ticks are spent on null
events.  Trajectories are deterministic functions of (rule set, initial
state, sample times, seed); batch helpers derive one child seed per
replica, which keeps results independent of chunking and thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _kernels as K
from .lattice import LatticeShape, SpinConfig, sparse_config
from .rng import EVENTS, Stream, derive_seed, replica_seeds
from .rules import RuleSet, RuleTemplate, apply_rule

_U64 = lambda x: np.uint64(x & 0xFFFFFFFFFFFFFFFF)


@dataclass(frozen=True)
class EngineCaps:
    """Resource limits for sparse runs; exceeding one flags the trajectory."""

    max_particles: int = 1_000_000
    max_radius: int = 100_000_000
    window_start: int = 1 << 12
    window_max: int = 1 << 21


@dataclass(frozen=True)
class EventLog:
    """Times, template indices, and anchor sites of every applied event."""

    times: np.ndarray
    template_idx: np.ndarray
    anchors: np.ndarray  # (n_events, d) absolute anchor coordinates

    def __len__(self) -> int:
        return self.times.size


@dataclass(frozen=True)
class Trajectory:
    """One engine run: sampled states plus bookkeeping."""

    ruleset: RuleSet
    shape: LatticeShape
    initial: SpinConfig
    seed: int
    sample_times: np.ndarray
    samples: tuple[SpinConfig, ...]
    event_log: EventLog | None
    n_events: int
    final_time: float
    capped: bool = False
    cap_reason: str | None = None
    cap_time: float = math.inf
    extinction_time: float = math.inf

    @property
    def final_state(self) -> SpinConfig:
        return self.samples[-1]


def _check_sample_times(sample_times) -> np.ndarray:
    st = np.asarray(sample_times, dtype=np.float64).reshape(-1)
    if st.size == 0:
        raise ValueError("at least one sample time is required")
    if st[0] < 0 or np.any(np.diff(st) < 0):
        raise ValueError("sample times must be nonnegative and nondecreasing")
    return st


# ---------------------------------------------------------------------------
# table builders

class DenseTables:
    """Flat-array form of a rule set bound to one torus."""

    def __init__(self, r: RuleSet, shape: LatticeShape):
        if not shape.is_torus or shape.d != r.d:
            raise ValueError("dense tables need a torus matching the rule set dimension")
        shape.check_supports_radius(r.radius)
        self.ruleset = r
        self.shape = shape
        n = shape.n_sites

        off_ids: dict[tuple, int] = {}
        offsets: list[tuple] = []

        def oid(o: tuple) -> int:
            if o not in off_ids:
                off_ids[o] = len(offsets)
                offsets.append(o)
            return off_ids[o]

        trow_ptr = [0]
        trow_ids: list[int] = []
        rowcol_ptr = [0]
        rowcol_ids: list[int] = []
        trev_ptr = [0]
        trev_ids: list[int] = []
        for t in r.templates:
            rev: list[tuple] = []
            for row in t.rows:
                trow_ids.append(oid(row))
                for col in t.cols_of(row):
                    rowcol_ids.append(oid(col))
                    neg = tuple(-c for c in col)
                    if neg not in rev:
                        rev.append(neg)
                rowcol_ptr.append(len(rowcol_ids))
            trow_ptr.append(len(trow_ids))
            for neg in sorted(rev):
                trev_ids.append(oid(neg))
            trev_ptr.append(len(trev_ids))

        self.rates = np.array([t.rate for t in r.templates], dtype=np.float64)
        self.trow_ptr = np.array(trow_ptr, dtype=np.int64)
        self.trow_ids = np.array(trow_ids, dtype=np.int64)
        self.rowcol_ptr = np.array(rowcol_ptr, dtype=np.int64)
        self.rowcol_ids = np.array(rowcol_ids, dtype=np.int64)
        self.trev_ptr = np.array(trev_ptr, dtype=np.int64)
        self.trev_ids = np.array(trev_ids, dtype=np.int64)
        site_map = np.empty((len(offsets), n), dtype=np.int64)
        for o, off in enumerate(offsets):
            for s in range(n):
                site = shape.site_of_flat(s)
                site_map[o, s] = shape.flat_index(
                    tuple(si + oi for si, oi in zip(site, off))
                )
        self.site_map = site_map

    def kernel_args(self):
        return (self.rates, self.site_map, self.trow_ptr, self.trow_ids,
                self.rowcol_ptr, self.rowcol_ids, self.trev_ptr, self.trev_ids)


class SparseTables:
    """Scalar-offset form of a one-dimensional rule set."""

    def __init__(self, r: RuleSet):
        if r.d != 1:
            raise ValueError("scalar sparse tables are one-dimensional")
        self.ruleset = r
        srow_ptr = [0]
        srow_off: list[int] = []
        srowcol_ptr = [0]
        srowcol_off: list[int] = []
        srev_ptr = [0]
        srev_off: list[int] = []
        for t in r.templates:
            rev: list[int] = []
            for row in t.rows:
                srow_off.append(row[0])
                for col in t.cols_of(row):
                    srowcol_off.append(col[0])
                    if -col[0] not in rev:
                        rev.append(-col[0])
                srowcol_ptr.append(len(srowcol_off))
            srow_ptr.append(len(srow_off))
            for neg in sorted(rev):
                srev_off.append(neg)
            srev_ptr.append(len(srev_off))
        self.rates = np.array([t.rate for t in r.templates], dtype=np.float64)
        self.srow_ptr = np.array(srow_ptr, dtype=np.int64)
        self.srow_off = np.array(srow_off, dtype=np.int64)
        self.srowcol_ptr = np.array(srowcol_ptr, dtype=np.int64)
        self.srowcol_off = np.array(srowcol_off, dtype=np.int64)
        self.srev_ptr = np.array(srev_ptr, dtype=np.int64)
        self.srev_off = np.array(srev_off, dtype=np.int64)
        self.radius = r.radius

    def kernel_args(self):
        return (self.rates, self.srow_ptr, self.srow_off, self.srowcol_ptr,
                self.srowcol_off, self.srev_ptr, self.srev_off, self.radius)


# ---------------------------------------------------------------------------
# dense runs

def run_dense(r: RuleSet, x0: SpinConfig, sample_times, seed: int,
              keep_log: bool = False) -> Trajectory:
    """Simulate on the torus of ``x0``; states are sampled right continuous."""
    if not x0.is_dense:
        raise ValueError("run_dense needs a dense initial configuration")
    st = _check_sample_times(sample_times)
    tables = DenseTables(r, x0.shape)
    n = x0.shape.n_sites
    samples = np.empty((st.size, n), dtype=np.uint8)
    toggles_buf = np.empty(int(tables.trow_ptr[-1]) + 1, dtype=np.int64)
    log_cap = 1 << 14 if keep_log else 0
    while True:
        bits = x0.bits.copy()
        log_times = np.empty(log_cap, dtype=np.float64)
        log_tpl = np.empty(log_cap, dtype=np.int64)
        log_anchor = np.empty(log_cap, dtype=np.int64)
        n_log, status, _, n_events, final_time = K.dense_run(
            bits, *tables.kernel_args(), st, _U64(seed), samples,
            log_times, log_tpl, log_anchor, keep_log, toggles_buf,
        )
        if status != K.OVERFLOW:
            break
        log_cap *= 4

    log = None
    if keep_log:
        anchors = np.empty((n_log, r.d), dtype=np.int64)
        for i in range(n_log):
            anchors[i] = x0.shape.site_of_flat(int(log_anchor[i]))
        log = EventLog(log_times[:n_log].copy(), log_tpl[:n_log].copy(), anchors)
    states = tuple(SpinConfig(x0.shape, bits=samples[i].copy()) for i in range(st.size))
    return Trajectory(
        ruleset=r, shape=x0.shape, initial=x0, seed=seed, sample_times=st,
        samples=states, event_log=log, n_events=int(n_events),
        final_time=float(final_time),
    )


def dense_endstates_batch(r: RuleSet, x0: SpinConfig, t_end: float,
                          seeds: np.ndarray, threads: int = 1):
    """End state and first-event time for each replica seed."""
    tables = DenseTables(r, x0.shape)
    n = x0.shape.n_sites
    seeds = np.asarray(seeds, dtype=np.uint64)
    ends = np.empty((seeds.size, n), dtype=np.uint8)
    first = np.empty(seeds.size, dtype=np.float64)

    def work(lo: int, hi: int):
        K.dense_endstates(x0.bits, *tables.kernel_args(), float(t_end),
                          seeds[lo:hi], ends[lo:hi], first[lo:hi])

    _run_chunked(work, seeds.size, threads)
    return ends, first


def graphical_endstates_batch(r: RuleSet, x0: SpinConfig, t_end: float,
                              seeds: np.ndarray, threads: int = 1) -> np.ndarray:
    """End states computed through the arrow-field representation."""
    tables = DenseTables(r, x0.shape)
    n = x0.shape.n_sites
    lam_total = r.total_rate_per_site * n * t_end
    if lam_total > 1e5:
        raise ValueError("arrow field too dense; reduce t_end or the torus size")
    seeds = np.asarray(seeds, dtype=np.uint64)
    ends = np.empty((seeds.size, n), dtype=np.uint8)
    counts = np.empty(seeds.size, dtype=np.int64)
    arrow_cap = int(lam_total + 12 * math.sqrt(lam_total + 1) + 64)

    def work(lo: int, hi: int):
        nonlocal arrow_cap
        while True:
            status = K.graphical_endstates(
                x0.bits, tables.rates, tables.site_map, tables.trow_ptr,
                tables.trow_ids, tables.rowcol_ptr, tables.rowcol_ids,
                float(t_end), seeds[lo:hi], arrow_cap, ends[lo:hi], counts[lo:hi],
            )
            if status != K.OVERFLOW:
                return
            arrow_cap *= 4

    _run_chunked(work, seeds.size, threads)
    return ends


@dataclass(frozen=True)
class ArrowRecord:
    """The sorted arrow field of one graphical run."""

    times: np.ndarray
    template_idx: np.ndarray
    anchors: np.ndarray  # (n, d)


@dataclass(frozen=True)
class GraphicalRun:
    ruleset: RuleSet
    shape: LatticeShape
    t_end: float
    seed: int
    initial: SpinConfig
    arrows: ArrowRecord
    final: SpinConfig

    def evaluate(self, site) -> int:
        """Spin at ``site`` after sweeping the whole arrow field."""
        return self.final.value_at(site)


def run_graphical(r: RuleSet, x0: SpinConfig, t_end: float, seed: int) -> GraphicalRun:
    """Arrow-field construction of one trajectory endpoint.

    Draws a Poisson number of firings per instance, sorts them in time and
    sweeps forward from ``x0``.  Uses the same draw contract as the batched
    kernel, so the end state is reproducible either way.
    """
    if not x0.is_dense:
        raise ValueError("graphical runs use dense configurations")
    tables = DenseTables(r, x0.shape)
    shape = x0.shape
    n = shape.n_sites
    stream = Stream(_int_seed(seed))
    times: list[float] = []
    tpls: list[int] = []
    anchors: list[int] = []
    for t_idx, t in enumerate(r.templates):
        lam = t.rate * t_end
        thresh = math.exp(-lam)
        for a in range(n):
            k = 0
            p = 1.0
            while True:
                p *= stream.uniform()
                if p <= thresh:
                    break
                k += 1
            for _ in range(k):
                times.append(stream.uniform() * t_end)
                tpls.append(t_idx)
                anchors.append(a)
    order = np.argsort(np.array(times), kind="mergesort") if times else np.empty(0, int)
    ev_t = np.array([times[i] for i in order], dtype=np.float64)
    ev_k = np.array([tpls[i] for i in order], dtype=np.int64)
    ev_a_flat = [anchors[i] for i in order]
    x = x0
    for i, k in zip(ev_a_flat, ev_k):
        x = apply_rule(x, r.templates[int(k)], shape.site_of_flat(int(i)))
    ev_a = np.array([shape.site_of_flat(int(i)) for i in ev_a_flat], dtype=np.int64).reshape(-1, r.d)
    return GraphicalRun(
        ruleset=r, shape=shape, t_end=t_end, seed=seed, initial=x0,
        arrows=ArrowRecord(ev_t, ev_k, ev_a), final=x,
    )


# ---------------------------------------------------------------------------
# sparse runs

def _sparse_kernel_inputs(y0: SpinConfig, caps: EngineCaps):
    sites = np.array(sorted(s[0] for s in y0.support), dtype=np.int64)
    if sites.size == 0:
        return sites, np.int64(caps.window_start), np.int64(0)
    smin, smax = int(sites[0]), int(sites[-1])
    span = smax - smin + 1
    W = caps.window_start
    while span + 64 > W // 2:
        W *= 2
    origin = smin - (W - span) // 2
    return sites - origin, np.int64(W), np.int64(origin)


def run_sparse(r: RuleSet, y0: SpinConfig, sample_times, seed: int,
               keep_log: bool = False, caps: EngineCaps = EngineCaps()) -> Trajectory:
    """Simulate a finite-support configuration on the infinite line.

    The empty configuration is absorbing; trajectories that trip a resource
    cap freeze at the cap time and are flagged, never silently truncated.
    """
    if y0.is_dense:
        raise ValueError("run_sparse needs a sparse configuration on Z^d")
    if r.d != y0.shape.d:
        raise ValueError("rule set and configuration dimensions differ")
    if r.d != 1:
        return _python_sparse_run(r, y0, sample_times, seed, keep_log, caps)
    st = _check_sample_times(sample_times)
    tables = SparseTables(r)
    y0_idx, W, origin = _sparse_kernel_inputs(y0, caps)
    counts = np.empty(st.size, dtype=np.int64)
    ext_out = np.empty(1, dtype=np.float64)
    cap_out = np.empty(1, dtype=np.float64)
    log_cap = 1 << 14 if keep_log else 0
    snap_cap = max(1 << 12, 8 * (len(y0.support) + 4) * st.size)
    while True:
        snap_sites = np.empty(snap_cap, dtype=np.int64)
        snap_ptr = np.zeros(st.size + 1, dtype=np.int64)
        log_times = np.empty(log_cap, dtype=np.float64)
        log_tpl = np.empty(log_cap, dtype=np.int64)
        log_anchor = np.empty(log_cap, dtype=np.int64)
        n_log, status, n_events, final_time = K.sparse_run(
            y0_idx, W, origin, *tables.kernel_args(), st, _U64(seed),
            caps.max_particles, caps.max_radius, caps.window_max,
            snap_sites, snap_ptr, log_times, log_tpl, log_anchor, keep_log,
            counts, ext_out, cap_out,
        )
        if status != K.OVERFLOW:
            break
        log_cap = max(4 * log_cap, 1 << 14)
        snap_cap *= 4

    shape = y0.shape
    states = []
    for i in range(st.size):
        seg = snap_sites[snap_ptr[i]:snap_ptr[i + 1]]
        states.append(sparse_config(shape, [int(s) for s in seg]))
    log = None
    if keep_log:
        log = EventLog(
            log_times[:n_log].copy(), log_tpl[:n_log].copy(),
            log_anchor[:n_log].copy().reshape(-1, 1),
        )
    capped = status in (K.CAP_PARTICLES, K.CAP_RADIUS)
    return Trajectory(
        ruleset=r, shape=shape, initial=y0, seed=seed, sample_times=st,
        samples=tuple(states), event_log=log, n_events=int(n_events),
        final_time=float(final_time), capped=capped,
        cap_reason={K.CAP_PARTICLES: "particles", K.CAP_RADIUS: "radius"}.get(status),
        cap_time=float(cap_out[0]), extinction_time=float(ext_out[0]),
    )


def sparse_counts(r: RuleSet, y0: SpinConfig, sample_times, seeds,
                  caps: EngineCaps = EngineCaps(), threads: int = 1):
    """Batched particle counts: (counts[R, S], ext_times[R], cap_times[R])."""
    if y0.is_dense or r.d != 1:
        raise ValueError("batched counts run on the one-dimensional sparse engine")
    st = _check_sample_times(sample_times)
    tables = SparseTables(r)
    sites = np.array(sorted(s[0] for s in y0.support), dtype=np.int64)
    if sites.size == 0:
        raise ValueError("batched counts need a nonempty initial configuration")
    seeds = np.asarray(seeds, dtype=np.uint64)
    R = seeds.size
    counts = np.empty((R, st.size), dtype=np.int64)
    ext = np.empty(R, dtype=np.float64)
    capt = np.empty(R, dtype=np.float64)

    def work(lo: int, hi: int):
        K.sparse_counts_batch(
            sites, *tables.kernel_args(), st, seeds[lo:hi],
            caps.max_particles, caps.max_radius, caps.window_start,
            caps.window_max, counts[lo:hi], ext[lo:hi], capt[lo:hi],
        )

    _run_chunked(work, R, threads)
    return counts, ext, capt


@dataclass(frozen=True)
class SurvivalSample:
    """Empirical survival at a horizon, capped runs counted as alive."""

    replicas: int
    n_alive: int
    p_alive: float
    ci_low: float
    ci_high: float
    n_capped: int
    extinction_times: np.ndarray = field(repr=False)


def wilson_interval(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """95 percent Wilson score interval for a binomial proportion."""
    if n == 0:
        return 0.0, 1.0
    p = k / n
    den = 1 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return max(0.0, mid - half), min(1.0, mid + half)


def sample_survival(r: RuleSet, y0: SpinConfig, t_end: float, replicas: int,
                    seed: int, caps: EngineCaps = EngineCaps(),
                    threads: int = 1) -> SurvivalSample:
    """Estimate P[support nonempty at t_end] over independent replicas."""
    seeds = replica_seeds(seed, EVENTS, replicas)
    counts, ext, capt = sparse_counts(r, y0, [t_end], seeds, caps, threads)
    capped = np.isfinite(capt)
    alive = (counts[:, -1] > 0) | capped
    n_alive = int(alive.sum())
    lo, hi = wilson_interval(n_alive, replicas)
    return SurvivalSample(
        replicas=replicas, n_alive=n_alive, p_alive=n_alive / replicas,
        ci_low=lo, ci_high=hi, n_capped=int(capped.sum()), extinction_times=ext,
    )


def box_survival_events(r: RuleSet, y0: SpinConfig, probes: np.ndarray,
                        box_scale: int, horizon: float, seeds,
                        caps: EngineCaps = EngineCaps(), threads: int = 1):
    """Per replica and probe x: support meets [2Lx - L, 2Lx + L] at the
    horizon and never leaves [2Lx - 4L, 2Lx + 4L] on the way.

    Returns (ok[R, P] uint8, capped[R] bool); capped replicas report all
    zeros and must be handled by the caller.
    """
    if y0.is_dense or r.d != 1:
        raise ValueError("box survival runs on the one-dimensional sparse engine")
    tables = SparseTables(r)
    sites = np.array(sorted(s[0] for s in y0.support), dtype=np.int64)
    if sites.size == 0:
        raise ValueError("box survival needs a nonempty initial configuration")
    probes = np.asarray(probes, dtype=np.int64).reshape(-1)
    seeds = np.asarray(seeds, dtype=np.uint64)
    R = seeds.size
    ok = np.empty((R, probes.size), dtype=np.uint8)
    capped = np.empty(R, dtype=np.uint8)

    def work(lo: int, hi: int):
        K.sparse_chi1_batch(
            sites, *tables.kernel_args(), int(box_scale), float(horizon),
            probes, seeds[lo:hi], caps.max_particles, caps.max_radius,
            caps.window_start, caps.window_max, ok[lo:hi], capped[lo:hi],
        )

    _run_chunked(work, R, threads)
    return ok, capped.astype(bool)


@dataclass(frozen=True)
class EdgeDriftSample:
    """Rightmost-particle displacement statistics keyed by the edge pattern.

    Pattern p encodes the two spins just left of the edge, high bit first:
    p = 2 y(r - 2) + y(r - 1) read immediately before each event.
    """

    episodes: int
    moves: np.ndarray        # (4,) number of edge-moving events per pattern
    mean_step: np.ndarray    # (4,) average displacement per edge move
    step_rate: np.ndarray    # (4,) displacement per unit time in the pattern
    time_in: np.ndarray      # (4,) total time spent in the pattern


def sample_edge_drift(r: RuleSet, seed: int, n_target: int = 100_000,
                      burn_in: int = 500, max_particles: int = 128,
                      episodes: int = 500_000) -> EdgeDriftSample:
    """Accumulate edge displacement per pattern until each has enough moves.

    Episodes restart from a single particle and end at the particle cap;
    the cap is kept small on purpose, since the event rate grows with the
    population while the edge only contributes O(1) statistics per unit
    time.  The first ``burn_in`` events of each episode are discarded.
    Runs until all four patterns have at least ``n_target`` moves or the
    episode budget is exhausted.
    """
    if r.d != 1:
        raise ValueError("edge drift is a one-dimensional diagnostic")
    tables = SparseTables(r)
    seeds = replica_seeds(seed, EVENTS, episodes)
    time_in = np.zeros(4, dtype=np.float64)
    dr_sum = np.zeros(4, dtype=np.float64)
    moves = np.zeros(4, dtype=np.int64)
    events_seen = np.zeros(4, dtype=np.int64)
    used = K.sparse_drift_batch(
        tables.rates, tables.srow_ptr, tables.srow_off, tables.srowcol_ptr,
        tables.srowcol_off, tables.srev_ptr, tables.srev_off, tables.radius,
        seeds, n_target, burn_in, max_particles, 1 << 12, 1 << 22,
        time_in, dr_sum, moves, events_seen,
    )
    mean_step = np.where(moves > 0, dr_sum / np.maximum(moves, 1), np.nan)
    step_rate = np.where(time_in > 0, dr_sum / np.maximum(time_in, 1e-300), np.nan)
    return EdgeDriftSample(
        episodes=int(used), moves=moves, mean_step=mean_step,
        step_rate=step_rate, time_in=time_in,
    )


# ---------------------------------------------------------------------------
# event-log replay and the pure-python mirrors

def replay_event_log(r: RuleSet, x0: SpinConfig, log: EventLog,
                     keep_states: bool = False):
    """Re-apply a logged event sequence; returns the final state.

    With ``keep_states`` the full post-event state sequence comes back too.
    Replays are exact: the log determines the trajectory with no sampling.
    """
    x = x0
    states = []
    for i in range(len(log)):
        tpl = r.templates[int(log.template_idx[i])]
        anchor = tuple(int(c) for c in log.anchors[i])
        x = apply_rule(x, tpl, anchor)
        if keep_states:
            states.append(x)
    return (x, states) if keep_states else x


def python_dense_run(r: RuleSet, x0: SpinConfig, sample_times, seed: int,
                     keep_log: bool = False) -> Trajectory:
    """Pure-python twin of :func:`run_dense`, draw for draw.

    Kept deliberately close to the kernel so the two can be compared on
    identical seeds; used by the test suite and as a readable statement of
    the event-loop contract.
    """
    if not x0.is_dense:
        raise ValueError("python_dense_run needs a dense configuration")
    st = _check_sample_times(sample_times)
    tables = DenseTables(r, x0.shape)
    n = x0.shape.n_sites
    T = tables.rates.size
    rates = tables.rates
    site_map = tables.site_map
    trow_ptr, trow_ids = tables.trow_ptr, tables.trow_ids
    rowcol_ptr, rowcol_ids = tables.rowcol_ptr, tables.rowcol_ids
    trev_ptr, trev_ids = tables.trev_ptr, tables.trev_ids
    bits = x0.bits.astype(np.uint8).copy()

    def active(t: int, a: int) -> bool:
        for rp in range(trow_ptr[t], trow_ptr[t + 1]):
            par = 0
            for cp in range(rowcol_ptr[rp], rowcol_ptr[rp + 1]):
                par ^= bits[site_map[rowcol_ids[cp], a]]
            if par:
                return True
        return False

    act_arr: list[list[int]] = [[] for _ in range(T)]
    act_pos = np.full((T, n), -1, dtype=np.int64)
    for t in range(T):
        for a in range(n):
            if active(t, a):
                act_pos[t, a] = len(act_arr[t])
                act_arr[t].append(a)

    def set_membership(t: int, a: int, want: bool):
        p = act_pos[t, a]
        if want and p < 0:
            act_pos[t, a] = len(act_arr[t])
            act_arr[t].append(a)
        elif not want and p >= 0:
            last = act_arr[t][-1]
            act_arr[t][p] = last
            act_pos[t, last] = p
            act_arr[t].pop()
            act_pos[t, a] = -1

    stream = Stream(_int_seed(seed))
    t_now = 0.0
    si = 0
    S = st.size
    t_end = st[-1]
    samples: list[np.ndarray] = [None] * S
    log_t: list[float] = []
    log_k: list[int] = []
    log_a: list[int] = []
    n_events = 0
    while si < S:
        total = 0.0
        for t in range(T):
            total += rates[t] * len(act_arr[t])
        if total <= 0.0:
            break
        t_next = t_now - math.log(stream.uniform()) / total
        while si < S and st[si] < t_next:
            samples[si] = bits.copy()
            si += 1
        if si >= S or t_next > t_end:
            t_now = min(t_next, t_end)
            break
        x = stream.uniform() * total
        acc = 0.0
        tpl = -1
        for t in range(T):
            acc += rates[t] * len(act_arr[t])
            if x < acc:
                tpl = t
                break
        if tpl < 0:
            for t in range(T - 1, -1, -1):
                if act_arr[t]:
                    tpl = t
                    break
        j = int(stream.uniform() * len(act_arr[tpl]))
        if j >= len(act_arr[tpl]):
            j = len(act_arr[tpl]) - 1
        a = act_arr[tpl][j]
        toggles = []
        for rp in range(trow_ptr[tpl], trow_ptr[tpl + 1]):
            par = 0
            for cp in range(rowcol_ptr[rp], rowcol_ptr[rp + 1]):
                par ^= bits[site_map[rowcol_ids[cp], a]]
            if par:
                toggles.append(int(site_map[trow_ids[rp], a]))
        for s in toggles:
            bits[s] ^= 1
        t_now = t_next
        n_events += 1
        if keep_log:
            log_t.append(t_now)
            log_k.append(tpl)
            log_a.append(a)
        for s in toggles:
            for t in range(T):
                for rv in range(trev_ptr[t], trev_ptr[t + 1]):
                    aa = int(site_map[trev_ids[rv], s])
                    set_membership(t, aa, active(t, aa))
    while si < S:
        samples[si] = bits.copy()
        si += 1

    log = None
    if keep_log:
        anchors = np.array(
            [x0.shape.site_of_flat(a) for a in log_a], dtype=np.int64
        ).reshape(-1, r.d)
        log = EventLog(np.array(log_t), np.array(log_k, dtype=np.int64), anchors)
    states = tuple(SpinConfig(x0.shape, bits=s) for s in samples)
    return Trajectory(
        ruleset=r, shape=x0.shape, initial=x0, seed=seed, sample_times=st,
        samples=states, event_log=log, n_events=n_events,
        final_time=float(t_now),
    )


def _python_sparse_run(r: RuleSet, y0: SpinConfig, sample_times, seed: int,
                       keep_log: bool, caps: EngineCaps) -> Trajectory:
    """Reference sparse engine for dimensions the kernels do not cover."""
    st = _check_sample_times(sample_times)
    d = r.d
    supp: set = set(y0.support)
    col_offs = [
        sorted({c for _, c in t.pairs}) for t in r.templates
    ]
    T = len(r.templates)

    def active_anchor(ti: int, anchor) -> bool:
        t = r.templates[ti]
        for row in t.rows:
            par = 0
            for col in t.cols_of(row):
                site = tuple(ai + ci for ai, ci in zip(anchor, col))
                par ^= 1 if site in supp else 0
            if par:
                return True
        return False

    act_arr: list[list] = [[] for _ in range(T)]
    act_pos: list[dict] = [dict() for _ in range(T)]
    cands: list[set] = [set() for _ in range(T)]
    for ti in range(T):
        for s in sorted(supp):
            for c in col_offs[ti]:
                cands[ti].add(tuple(si - ci for si, ci in zip(s, c)))
    for ti in range(T):
        for a in sorted(cands[ti]):
            if active_anchor(ti, a):
                act_pos[ti][a] = len(act_arr[ti])
                act_arr[ti].append(a)

    def set_membership(ti: int, a, want: bool):
        pos = act_pos[ti]
        if want and a not in pos:
            pos[a] = len(act_arr[ti])
            act_arr[ti].append(a)
        elif not want and a in pos:
            p = pos.pop(a)
            last = act_arr[ti].pop()
            if last != a:
                act_arr[ti][p] = last
                pos[last] = p

    stream = Stream(_int_seed(seed))
    t_now = 0.0
    si = 0
    S = st.size
    t_end = st[-1]
    samples: list[frozenset] = [None] * S
    log_t: list[float] = []
    log_k: list[int] = []
    log_a: list[tuple] = []
    n_events = 0
    capped = False
    cap_reason = None
    cap_time = math.inf
    ext_time = 0.0 if not supp else math.inf
    rates = [t.rate for t in r.templates]
    while si < S:
        if not supp:
            break
        total = 0.0
        for ti in range(T):
            total += rates[ti] * len(act_arr[ti])
        if total <= 0.0:
            break
        t_next = t_now - math.log(stream.uniform()) / total
        while si < S and st[si] < t_next:
            samples[si] = frozenset(supp)
            si += 1
        if si >= S or t_next > t_end:
            t_now = min(t_next, t_end)
            break
        x = stream.uniform() * total
        acc = 0.0
        tpl = -1
        for ti in range(T):
            acc += rates[ti] * len(act_arr[ti])
            if x < acc:
                tpl = ti
                break
        if tpl < 0:
            for ti in range(T - 1, -1, -1):
                if act_arr[ti]:
                    tpl = ti
                    break
        j = int(stream.uniform() * len(act_arr[tpl]))
        if j >= len(act_arr[tpl]):
            j = len(act_arr[tpl]) - 1
        a = act_arr[tpl][j]
        t = r.templates[tpl]
        toggles = []
        for row in t.rows:
            par = 0
            for col in t.cols_of(row):
                site = tuple(ai + ci for ai, ci in zip(a, col))
                par ^= 1 if site in supp else 0
            if par:
                toggles.append(tuple(ai + ri for ai, ri in zip(a, row)))
        for s in toggles:
            if s in supp:
                supp.discard(s)
            else:
                supp.add(s)
        t_now = t_next
        n_events += 1
        if keep_log:
            log_t.append(t_now)
            log_k.append(tpl)
            log_a.append(a)
        for s in toggles:
            for ti in range(T):
                for c in col_offs[ti]:
                    aa = tuple(si2 - ci for si2, ci in zip(s, c))
                    set_membership(ti, aa, active_anchor(ti, aa))
        if not supp:
            ext_time = t_now
            break
        if len(supp) > caps.max_particles:
            capped, cap_reason, cap_time = True, "particles", t_now
            break
        if any(abs(c) > caps.max_radius for s2 in toggles for c in s2):
            capped, cap_reason, cap_time = True, "radius", t_now
            break
    while si < S:
        samples[si] = frozenset(supp)
        si += 1

    log = None
    if keep_log:
        log = EventLog(
            np.array(log_t), np.array(log_k, dtype=np.int64),
            np.array(log_a, dtype=np.int64).reshape(-1, d),
        )
    states = tuple(SpinConfig(y0.shape, support=s) for s in samples)
    return Trajectory(
        ruleset=r, shape=y0.shape, initial=y0, seed=seed, sample_times=st,
        samples=states, event_log=log, n_events=n_events,
        final_time=float(t_now), capped=capped, cap_reason=cap_reason, cap_time=cap_time,
        extinction_time=ext_time,
    )


# ---------------------------------------------------------------------------
# helpers

def _int_seed(seed: int) -> int:
    return int(seed) & 0xFFFFFFFFFFFFFFFF


def _run_chunked(work: Callable[[int, int], None], n: int, threads: int):
    """Run ``work(lo, hi)`` over [0, n) in chunks, optionally in parallel.

    Output slices are disjoint per chunk and seeds are per replica, so the
    result is identical for any thread count.
    """
    threads = max(1, int(threads))
    if threads == 1 or n < 256:
        work(0, n)
        return
    bounds = np.linspace(0, n, threads + 1, dtype=int)
    with ThreadPoolExecutor(max_workers=threads) as ex:
        futs = [
            ex.submit(work, int(bounds[i]), int(bounds[i + 1]))
            for i in range(threads)
            if bounds[i] < bounds[i + 1]
        ]
        for f in futs:
            f.result()
