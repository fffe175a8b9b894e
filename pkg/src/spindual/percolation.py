"""Oriented site percolation and renormalization-box statistics.

The comparison object is site percolation on Z^2_even = {(x, n): x + n even}
with i.i.d. Bernoulli(p) openness: a site of level n is reached when it is
open and has a reached neighbor at level n - 1.  The particle-side
counterpart coarse-grains a trajectory into boxes I_x = [2Lx - L, 2Lx + L]
of width 2L + 1 and declares (x, n) good when the process occupies I_x at
time nT without having deserted the enlarged box I'_x = [2Lx - 4L, 2Lx + 4L]
at any time in between.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .engine import (EngineCaps, Trajectory, box_survival_events,
                     replay_event_log, run_sparse, wilson_interval)
from .lattice import LatticeShape, SpinConfig, sparse_config
from .rng import EVENTS, FIELD, derive_seed, hash_uniform, replica_seeds
from .rules import RuleSet, model


# ---------------------------------------------------------------------------
# oriented site percolation

@dataclass(frozen=True)
class PercolationRun:
    """Levels of the reached-set recursion together with its driving field."""

    p: float
    seed: int
    region_halfwidth: int
    levels: tuple[frozenset[int], ...]
    omega: dict

    @property
    def n_levels(self) -> int:
        return len(self.levels) - 1

    @property
    def survives(self) -> bool:
        return bool(self.levels[-1])


def _site_open(seed: int, p: float, level: int, x: int) -> int:
    return 1 if hash_uniform(seed, FIELD, level, x) < p else 0


def run_percolation(p: float, W0: Iterable[int], n_levels: int,
                    region_halfwidth: int, seed: int) -> PercolationRun:
    """Exact reached-set recursion on a truncated region.

    Sites outside [-region_halfwidth, region_halfwidth] are closed, so the
    region must contain the light cone of W0 for the truncation to be
    invisible; a too-small region is an error rather than a silent bias.
    The openness field is a pure hash of (seed, level, x): evaluating a
    site does not consume draws, which makes runs with shared seed and
    increasing p a monotone coupling.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    W0 = frozenset(int(x) for x in W0)
    if any(x % 2 for x in W0):
        raise ValueError("level-0 sites must be even integers")
    if W0 and max(abs(x) for x in W0) + n_levels > region_halfwidth:
        raise ValueError(
            "region_halfwidth %d cannot hold the light cone of W0 after %d "
            "levels; widen the region" % (region_halfwidth, n_levels)
        )
    levels = [W0]
    omega: dict = {}
    prev = W0
    for n in range(1, n_levels + 1):
        cur = set()
        for x0 in prev:
            for x in (x0 - 1, x0 + 1):
                if abs(x) > region_halfwidth or x in cur:
                    continue
                key = (n, x)
                if key not in omega:
                    omega[key] = _site_open(seed, p, n, x)
                if omega[key]:
                    cur.add(x)
        prev = frozenset(cur)
        levels.append(prev)
    return PercolationRun(
        p=p, seed=seed, region_halfwidth=region_halfwidth,
        levels=tuple(levels), omega=omega,
    )


def percolation_survival(p: float, n_levels: int, replicas: int, seed: int,
                         W0: Iterable[int] = (0,)) -> dict:
    """Fraction of independent runs whose top level is nonempty."""
    W0 = tuple(W0)
    halfwidth = max(abs(x) for x in W0) + n_levels
    seeds = replica_seeds(seed, FIELD, replicas)
    alive = 0
    for s in seeds:
        if run_percolation(p, W0, n_levels, halfwidth, int(s)).survives:
            alive += 1
    lo, hi = wilson_interval(alive, replicas)
    return {
        "p": p, "n_levels": n_levels, "replicas": replicas,
        "survival": alive / replicas, "ci_low": lo, "ci_high": hi,
    }


# ---------------------------------------------------------------------------
# good points of a trajectory

def _box(L: int, x: int) -> tuple[int, int]:
    return 2 * L * x - L, 2 * L * x + L


def _big_box(L: int, x: int) -> tuple[int, int]:
    return 2 * L * x - 4 * L, 2 * L * x + 4 * L


def _hits(support: Sequence[int], lo: int, hi: int) -> bool:
    import bisect

    i = bisect.bisect_left(support, lo)
    return i < len(support) and support[i] <= hi


@dataclass(frozen=True)
class ChiSeries:
    """Per-level good-point sets chi_n of one trajectory."""

    L: int
    T: float
    levels: tuple[frozenset[int], ...]

    @property
    def n_levels(self) -> int:
        return len(self.levels) - 1


def chi_series(traj: Trajectory, L: int, T: float) -> ChiSeries:
    """Good points of a logged trajectory, exact between events.

    Level n >= 1 asks for occupancy of I_x at time nT together with
    occupancy of I'_x at every intermediate time; the trajectory is
    piecewise constant, so the quantifier reduces to the finitely many
    states in force during ((n-1)T, nT].  Levels keep the x + n even
    convention of the percolation lattice.
    """
    if traj.event_log is None:
        raise ValueError("chi_series needs a trajectory recorded with keep_log")
    if traj.capped:
        raise ValueError("capped trajectory: good points would be censored")
    if L < 1 or T <= 0:
        raise ValueError("L >= 1 and T > 0 are required")
    n_levels = int(math.floor(traj.sample_times[-1] / T + 1e-9))

    x0 = traj.initial
    _, states = replay_event_log(traj.ruleset, x0, traj.event_log, keep_states=True)
    supports = [sorted(s[0] for s in x0.support)]
    supports.extend(sorted(p[0] for p in st.support) for st in states)
    times = np.concatenate([[0.0], traj.event_log.times])

    def level_set(n: int) -> frozenset[int]:
        if n == 0:
            supp = supports[0]
            if not supp:
                return frozenset()
            xs = _boxes_hit(supp, L)
            return frozenset(x for x in xs if x % 2 == 0)
        a, b = (n - 1) * T, n * T
        i_enter = int(np.searchsorted(times, a, side="right")) - 1
        i_exit = int(np.searchsorted(times, b, side="right")) - 1
        at_b = supports[i_exit]
        if not at_b:
            return frozenset()
        out = set()
        for x in _boxes_hit(at_b, L):
            if (x + n) % 2:
                continue
            blo, bhi = _big_box(L, x)
            if all(
                _hits(supports[i], blo, bhi)
                for i in range(i_enter, i_exit + 1)
            ):
                out.add(x)
        return frozenset(out)

    return ChiSeries(L=L, T=T, levels=tuple(level_set(n) for n in range(n_levels + 1)))


def _boxes_hit(support: Sequence[int], L: int) -> list[int]:
    """All x whose box I_x meets the support."""
    xs: set[int] = set()
    for i in support:
        lo = math.ceil((i - L) / (2 * L))
        hi = math.floor((i + L) / (2 * L))
        xs.update(range(lo, hi + 1))
    return sorted(xs)


# ---------------------------------------------------------------------------
# the one-step good-event estimate

_PRESETS = ("interval", "far-edge")


def preset_sampler(preset: str, L: int, probes: Sequence[int]) -> Callable[[int], list[int]]:
    """Initial states with the neighbor-box precondition built in.

    'interval' fills every neighbor box of every probe, the bulk regime of
    the renormalization step.  'far-edge' is the adversarial corner: one
    particle at the far edge of a neighbor box, alternating sides per
    replica, exercising the claim that the one-step bound does not depend
    on the initial state.
    """
    probes = list(probes)
    if preset == "interval":
        lo = 2 * L * (min(probes) - 1) - L
        hi = 2 * L * (max(probes) + 1) + L
        sites = list(range(lo, hi + 1))
        return lambda k: sites
    if preset == "far-edge":
        if len(probes) != 1:
            raise ValueError("the far-edge preset serves a single probe")
        x = probes[0]
        left = 2 * L * (x - 1) - L
        right = 2 * L * (x + 1) + L
        return lambda k: [left] if k % 2 == 0 else [right]
    raise ValueError(f"unknown preset {preset!r}; expected one of {_PRESETS}")


@dataclass(frozen=True)
class GoodEventEstimate:
    """Empirical one-step good-event frequencies and their dependence."""

    alpha: float
    L: int
    T: float
    replicas: int
    probes: tuple[int, ...]
    p_hat: np.ndarray            # per probe
    ci_low: np.ndarray
    ci_high: np.ndarray
    n_capped: int
    dependence_profile: np.ndarray  # correlation at offsets 1..15, NaN if no pair


def good_event_estimate(alpha: float, L: int, T: float, replicas: int,
                        initial_sampler, seed: int,
                        probes: Sequence[int] | None = None,
                        caps: EngineCaps = EngineCaps(),
                        threads: int = 1) -> GoodEventEstimate:
    """Estimate P[x in chi_1] per probe for the branching-annihilating dual.

    ``initial_sampler`` maps the replica index to the level-0 support; a
    preset name from :func:`preset_sampler` is also accepted.  Every
    sampled state must meet chi_0 in a neighbor of every probe, otherwise
    the estimate would not be conditioning on the percolation premise.
    Replicas with distinct initial states cannot share one kernel batch,
    so states are grouped before dispatch.
    """
    if probes is None:
        probes = tuple(range(1, 30, 2))
    probes = tuple(int(x) for x in probes)
    if any(x % 2 == 0 for x in probes):
        raise ValueError("level-1 probes live on odd x")
    if isinstance(initial_sampler, str):
        initial_sampler = preset_sampler(initial_sampler, L, probes)
    shape = LatticeShape.infinite(1)
    r = model("adbarw", alpha)
    seeds = replica_seeds(seed, EVENTS, replicas)

    groups: dict[tuple[int, ...], list[int]] = {}
    for k in range(replicas):
        sites = tuple(sorted(int(s) for s in initial_sampler(k)))
        if not sites:
            raise ValueError("initial sampler produced an empty state")
        for x in probes:
            lo_m, hi_m = _box(L, x - 1)
            lo_p, hi_p = _box(L, x + 1)
            if not (_hits(sites, lo_m, hi_m) or _hits(sites, lo_p, hi_p)):
                raise ValueError(
                    f"initial state of replica {k} misses both neighbor "
                    f"boxes of probe {x}"
                )
        groups.setdefault(sites, []).append(k)

    ok = np.zeros((replicas, len(probes)), dtype=np.uint8)
    capped = np.zeros(replicas, dtype=bool)
    probe_arr = np.asarray(probes, dtype=np.int64)
    for sites, idx in groups.items():
        y0 = sparse_config(shape, sites)
        sub_ok, sub_cap = box_survival_events(
            r, y0, probe_arr, L, T, seeds[np.asarray(idx)], caps, threads
        )
        ok[np.asarray(idx)] = sub_ok
        capped[np.asarray(idx)] = sub_cap

    # capped replicas give no verdict either way; drop them from the counts
    keep = ~capped
    n_keep = int(keep.sum())
    p_hat = np.full(len(probes), np.nan)
    lo = np.full(len(probes), np.nan)
    hi = np.full(len(probes), np.nan)
    if n_keep:
        wins = ok[keep].sum(axis=0)
        p_hat = wins / n_keep
        for j, w in enumerate(wins):
            lo[j], hi[j] = wilson_interval(int(w), n_keep)

    profile = np.full(15, np.nan)
    if n_keep >= 2:
        cols = ok[keep].astype(np.float64)
        for off in range(1, 16):
            pairs = [
                (i, j) for i, xi in enumerate(probes)
                for j, xj in enumerate(probes) if xj - xi == off
            ]
            if not pairs:
                continue
            acc = []
            for i, j in pairs:
                a, b = cols[:, i], cols[:, j]
                sa, sb = a.std(), b.std()
                if sa > 0 and sb > 0:
                    acc.append(float(np.mean((a - a.mean()) * (b - b.mean())) / (sa * sb)))
            if acc:
                profile[off - 1] = float(np.mean(acc))
    return GoodEventEstimate(
        alpha=alpha, L=L, T=T, replicas=replicas, probes=probes,
        p_hat=p_hat, ci_low=lo, ci_high=hi, n_capped=int(capped.sum()),
        dependence_profile=profile,
    )


# ---------------------------------------------------------------------------
# proximity statistics

def proximity_stats(y: SpinConfig, y2: SpinConfig, K: int, L: int) -> dict:
    """Close-pair count between two states and the coarse boxes of the first.

    d_k counts ordered pairs (i, j) with y(i) = 1 = y2(j) and |i - j| <= K;
    eta lists the even x whose box I_x meets the support of y.
    """
    if y.is_dense or y2.is_dense:
        raise ValueError("proximity statistics expect sparse states")
    a = sorted(s[0] for s in y.support)
    b = sorted(s[0] for s in y2.support)
    d_k = 0
    import bisect

    for i in a:
        lo = bisect.bisect_left(b, i - K)
        hi = bisect.bisect_right(b, i + K)
        d_k += hi - lo
    eta = frozenset(x for x in _boxes_hit(a, L) if x % 2 == 0)
    return {"d_k": d_k, "eta": eta}
