"""numba event-loop kernels behind the Monte Carlo engines.

The hot loops operate on flat arrays prepared by :mod:`spindual.engine`:

* dense tori of any dimension, via per-offset site index maps;
* sparse one-dimensional configurations, via a moving occupancy window.

Both maintain, per template, the set of anchors whose action is currently
nonzero (an array plus a position index, so insert/remove/random-pick are
O(1)), draw the next event time from the summed active rate, and update
only the anchors whose reads touched a toggled site.  Null events therefore
never occur; the jump chain is sampled directly.

Randomness is a splitmix64 stream per run: state advances by the golden
gamma once per draw.  Each event consumes exactly three draws (waiting
time, template, anchor), which is the contract the pure-python mirror in
``engine.py`` follows so that trajectories agree draw for draw.
"""

from __future__ import annotations

import numpy as np
from numba import njit

GOLD = np.uint64(0x9E3779B97F4A7C15)
_DNORM = 1.0 / 4503599627370496.0  # 2**-52

# status codes shared with engine.py
OK = 0
OVERFLOW = 1          # a caller-sized buffer filled up; rerun with a bigger one
CAP_PARTICLES = 2
CAP_RADIUS = 3


@njit(cache=True, nogil=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True, inline="always")
def _next_u64(state):
    state = state + GOLD
    return state, _mix64(state)


@njit(cache=True, nogil=True, inline="always")
def _next_unit(state):
    # 52-bit resolution: both endpoints of (0, 1) are exactly excluded,
    # so downstream int(u * n) can never yield n
    state, z = _next_u64(state)
    return state, (np.float64(z >> np.uint64(12)) + 0.5) * _DNORM


@njit(cache=True, nogil=True, inline="always")
def _set_membership(act_arr, act_pos, act_cnt, t, a, want):
    p = act_pos[t, a]
    if want:
        if p < 0:
            c = act_cnt[t]
            act_arr[t, c] = a
            act_pos[t, a] = c
            act_cnt[t] = c + 1
    else:
        if p >= 0:
            c = act_cnt[t] - 1
            last = act_arr[t, c]
            act_arr[t, p] = last
            act_pos[t, last] = p
            act_pos[t, a] = -1
            act_cnt[t] = c


@njit(cache=True, nogil=True, inline="always")
def _pick_event(state, rates, act_cnt, total):
    """Three-way draw contract, parts two and three: template and slot."""
    state, u = _next_unit(state)
    x = u * total
    acc = 0.0
    tpl = -1
    T = rates.size
    for t in range(T):
        acc += rates[t] * act_cnt[t]
        if x < acc:
            tpl = t
            break
    if tpl < 0:
        for t in range(T - 1, -1, -1):
            if act_cnt[t] > 0:
                tpl = t
                break
    state, u = _next_unit(state)
    j = np.int64(u * act_cnt[tpl])
    if j >= act_cnt[tpl]:
        j = act_cnt[tpl] - 1
    return state, tpl, j


# ---------------------------------------------------------------------------
# dense torus engine
#
# table arrays (built in engine.py):
#   rates[T]                      template rates
#   site_map[n_off, n]            flat index of site_s + offset_o on the torus
#   trow_ptr[T+1], trow_ids[...]  offset id of each row, grouped by template
#   rowcol_ptr[...], rowcol_ids   per row position: its column offset ids
#   trev_ptr[T+1], trev_ids[...]  distinct negated column offset ids

@njit(cache=True, nogil=True, inline="always")
def _dense_active(bits, site_map, trow_ptr, trow_ids, rowcol_ptr, rowcol_ids, t, a):
    for rp in range(trow_ptr[t], trow_ptr[t + 1]):
        par = np.uint8(0)
        for cp in range(rowcol_ptr[rp], rowcol_ptr[rp + 1]):
            par ^= bits[site_map[rowcol_ids[cp], a]]
        if par:
            return True
    return False


@njit(cache=True, nogil=True)
def _dense_build_active(bits, rates, site_map, trow_ptr, trow_ids,
                        rowcol_ptr, rowcol_ids, act_arr, act_pos, act_cnt):
    T = rates.size
    n = bits.size
    for t in range(T):
        act_cnt[t] = 0
        for a in range(n):
            act_pos[t, a] = -1
    for t in range(T):
        for a in range(n):
            if _dense_active(bits, site_map, trow_ptr, trow_ids,
                             rowcol_ptr, rowcol_ids, t, a):
                _set_membership(act_arr, act_pos, act_cnt, t, a, True)


@njit(cache=True, nogil=True)
def _dense_apply(bits, site_map, trow_ptr, trow_ids, rowcol_ptr, rowcol_ids,
                 tpl, a, toggles_buf):
    """Toggle the odd-parity rows of one instance; returns the toggle count.

    Parities are collected before any bit changes so templates whose rows
    read each other stay well defined.
    """
    n_tog = 0
    for rp in range(trow_ptr[tpl], trow_ptr[tpl + 1]):
        par = np.uint8(0)
        for cp in range(rowcol_ptr[rp], rowcol_ptr[rp + 1]):
            par ^= bits[site_map[rowcol_ids[cp], a]]
        if par:
            toggles_buf[n_tog] = site_map[trow_ids[rp], a]
            n_tog += 1
    for k in range(n_tog):
        bits[toggles_buf[k]] ^= np.uint8(1)
    return n_tog


@njit(cache=True, nogil=True)
def dense_run(bits, rates, site_map, trow_ptr, trow_ids, rowcol_ptr, rowcol_ids,
              trev_ptr, trev_ids, sample_times, seed, samples,
              log_times, log_tpl, log_anchor, want_log, toggles_buf):
    """Single trajectory on a torus; fills ``samples`` row by row.

    Returns (n_log, status, first_event_time, n_events, final_time).
    ``bits`` is mutated in place and holds the final state on return.
    """
    T = rates.size
    n = bits.size
    act_arr = np.empty((T, n), dtype=np.int64)
    act_pos = np.empty((T, n), dtype=np.int64)
    act_cnt = np.zeros(T, dtype=np.int64)
    _dense_build_active(bits, rates, site_map, trow_ptr, trow_ids,
                        rowcol_ptr, rowcol_ids, act_arr, act_pos, act_cnt)

    state = seed
    t_now = 0.0
    si = 0
    S = sample_times.size
    t_end = sample_times[S - 1] if S > 0 else 0.0
    n_log = 0
    n_events = 0
    first_event = np.inf
    status = OK

    while si < S:
        total = 0.0
        for t in range(T):
            total += rates[t] * act_cnt[t]
        if total <= 0.0:
            break
        state, u = _next_unit(state)
        t_next = t_now - np.log(u) / total
        while si < S and sample_times[si] < t_next:
            samples[si, :] = bits
            si += 1
        if si >= S or t_next > t_end:
            t_now = min(t_next, t_end)
            break

        state, tpl, j = _pick_event(state, rates, act_cnt, total)
        a = act_arr[tpl, j]
        n_tog = _dense_apply(bits, site_map, trow_ptr, trow_ids,
                             rowcol_ptr, rowcol_ids, tpl, a, toggles_buf)

        t_now = t_next
        n_events += 1
        if t_now < first_event:
            first_event = t_now
        if want_log:
            if n_log >= log_times.size:
                status = OVERFLOW
                break
            log_times[n_log] = t_now
            log_tpl[n_log] = tpl
            log_anchor[n_log] = a
            n_log += 1

        # refresh activity of every instance reading a toggled site
        for k in range(n_tog):
            s = toggles_buf[k]
            for t in range(T):
                for rv in range(trev_ptr[t], trev_ptr[t + 1]):
                    aa = site_map[trev_ids[rv], s]
                    want = _dense_active(bits, site_map, trow_ptr, trow_ids,
                                         rowcol_ptr, rowcol_ids, t, aa)
                    _set_membership(act_arr, act_pos, act_cnt, t, aa, want)

    while si < S:
        samples[si, :] = bits
        si += 1
    return n_log, status, first_event, n_events, t_now


@njit(cache=True, nogil=True)
def dense_endstates(bits0, rates, site_map, trow_ptr, trow_ids, rowcol_ptr,
                    rowcol_ids, trev_ptr, trev_ids, t_end, seeds,
                    ends, first_times):
    """Batched replicas: end state and first-event time per replica."""
    R = seeds.size
    n = bits0.size
    T = rates.size
    bits = np.empty(n, dtype=np.uint8)
    samples = np.empty((1, n), dtype=np.uint8)
    sample_times = np.empty(1, dtype=np.float64)
    sample_times[0] = t_end
    log_f = np.empty(0, dtype=np.float64)
    log_i = np.empty(0, dtype=np.int64)
    toggles_buf = np.empty(trow_ptr[T] + 1, dtype=np.int64)
    for r in range(R):
        bits[:] = bits0
        _, _, fe, _, _ = dense_run(
            bits, rates, site_map, trow_ptr, trow_ids, rowcol_ptr, rowcol_ids,
            trev_ptr, trev_ids, sample_times, seeds[r], samples,
            log_f, log_i, log_i, False, toggles_buf,
        )
        ends[r, :] = samples[0, :]
        first_times[r] = fe


@njit(cache=True, nogil=True)
def graphical_endstates(bits0, rates, site_map, trow_ptr, trow_ids, rowcol_ptr,
                        rowcol_ids, t_end, seeds, arrow_cap, ends, counts_out):
    """Poisson arrow field per instance, then a forward parity sweep.

    For each replica the arrows of instance (template, anchor) form a
    Poisson process of intensity rate * t_end: the count comes from Knuth's
    product-of-uniforms method (callers keep rate * t_end modest), the
    times are uniform draws.  The sweep applies instances in time order;
    firings with a fully even read are the identity.  Returns a status.
    """
    R = seeds.size
    n = bits0.size
    T = rates.size
    ev_time = np.empty(arrow_cap, dtype=np.float64)
    ev_tpl = np.empty(arrow_cap, dtype=np.int64)
    ev_anchor = np.empty(arrow_cap, dtype=np.int64)
    bits = np.empty(n, dtype=np.uint8)
    toggles_buf = np.empty(trow_ptr[T] + 1, dtype=np.int64)
    for r in range(R):
        state = seeds[r]
        m = 0
        for t in range(T):
            lam = rates[t] * t_end
            thresh = np.exp(-lam)
            for a in range(n):
                k = 0
                p = 1.0
                while True:
                    state, u = _next_unit(state)
                    p *= u
                    if p <= thresh:
                        break
                    k += 1
                for _ in range(k):
                    state, u = _next_unit(state)
                    if m >= arrow_cap:
                        return OVERFLOW
                    ev_time[m] = u * t_end
                    ev_tpl[m] = t
                    ev_anchor[m] = a
                    m += 1
        order = np.argsort(ev_time[:m], kind="mergesort")
        bits[:] = bits0
        for oi in range(m):
            e = order[oi]
            _dense_apply(bits, site_map, trow_ptr, trow_ids, rowcol_ptr,
                         rowcol_ids, ev_tpl[e], ev_anchor[e], toggles_buf)
        ends[r, :] = bits
        counts_out[r] = m
    return OK


# ---------------------------------------------------------------------------
# sparse one-dimensional engine
#
# template arrays (offsets are plain integers):
#   rates[T]
#   srow_ptr[T+1], srow_off[...]            row offsets per template
#   srowcol_ptr[...], srowcol_off[...]      column offsets per row position
#   srev_ptr[T+1], srev_off[...]            distinct negated column offsets

@njit(cache=True, nogil=True, inline="always")
def _sparse_active(occ, srow_ptr, srow_off, srowcol_ptr, srowcol_off, t, a):
    for rp in range(srow_ptr[t], srow_ptr[t + 1]):
        par = np.uint8(0)
        for cp in range(srowcol_ptr[rp], srowcol_ptr[rp + 1]):
            par ^= occ[a + srowcol_off[cp]]
        if par:
            return True
    return False


@njit(cache=True, nogil=True)
def _sparse_build_active(occ, rates, srow_ptr, srow_off, srowcol_ptr,
                         srowcol_off, lo, hi, radius, act_arr, act_pos, act_cnt):
    T = rates.size
    W = occ.size
    for t in range(T):
        act_cnt[t] = 0
        for a in range(W):
            act_pos[t, a] = -1
    for t in range(T):
        for a in range(max(0, lo - radius), min(W, hi + radius + 1)):
            if _sparse_active(occ, srow_ptr, srow_off, srowcol_ptr, srowcol_off, t, a):
                _set_membership(act_arr, act_pos, act_cnt, t, a, True)


@njit(cache=True, nogil=True)
def _sparse_fire(occ, act_arr, act_pos, act_cnt, origin, lo, hi, W, n_occ,
                 state, total, rates, srow_ptr, srow_off, srowcol_ptr,
                 srowcol_off, srev_ptr, srev_off, radius,
                 max_particles, max_radius, w_max, tog_abs, tog_sign):
    """Draw and apply one event; maintain hull, caps and the moving window.

    Absolute toggled sites land in ``tog_abs`` with their post-event value
    sign in ``tog_sign`` (+1 created, -1 removed).  The occupancy window is
    recentered, and grown geometrically, whenever the support hull comes
    within one update radius of its edges; the active-set arrays shift with
    it, preserving their order so the draw sequence is reproducible.

    Returns (occ, act_arr, act_pos, origin, lo, hi, W, n_occ, state,
    n_tog, tpl, anchor_abs, status).
    """
    T = rates.size
    state, tpl, j = _pick_event(state, rates, act_cnt, total)
    a = act_arr[tpl, j]
    anchor_abs = origin + a

    n_tog = 0
    for rp in range(srow_ptr[tpl], srow_ptr[tpl + 1]):
        par = np.uint8(0)
        for cp in range(srowcol_ptr[rp], srowcol_ptr[rp + 1]):
            par ^= occ[a + srowcol_off[cp]]
        if par:
            tog_abs[n_tog] = a + srow_off[rp]  # window index, made absolute below
            n_tog += 1
    for k in range(n_tog):
        i = tog_abs[k]
        if occ[i]:
            occ[i] = 0
            n_occ -= 1
            tog_sign[k] = -1
        else:
            occ[i] = 1
            n_occ += 1
            tog_sign[k] = 1
            if i < lo:
                lo = i
            if i > hi:
                hi = i

    for k in range(n_tog):
        s = tog_abs[k]
        for t in range(T):
            for rv in range(srev_ptr[t], srev_ptr[t + 1]):
                aa = s + srev_off[rv]
                want = _sparse_active(occ, srow_ptr, srow_off,
                                      srowcol_ptr, srowcol_off, t, aa)
                _set_membership(act_arr, act_pos, act_cnt, t, aa, want)

    for k in range(n_tog):
        tog_abs[k] += origin

    status = OK
    if n_occ == 0:
        return occ, act_arr, act_pos, origin, lo, hi, W, n_occ, state, n_tog, tpl, anchor_abs, status

    while occ[lo] == 0:
        lo += 1
    while occ[hi] == 0:
        hi -= 1
    if n_occ > max_particles:
        status = CAP_PARTICLES
    elif origin + hi > max_radius or origin + lo < -max_radius:
        status = CAP_RADIUS
    else:
        margin = 2 * radius + 2
        if lo < margin or hi >= W - margin:
            span = hi - lo + 1
            newW = W
            while span + 6 * margin > newW // 2:
                newW *= 2
            if newW > w_max:
                status = CAP_RADIUS
            else:
                new_lo = (newW - span) // 2
                shift = lo - new_lo  # old index -> new index: i - shift
                new_occ = np.zeros(newW, dtype=np.uint8)
                for i in range(lo, hi + 1):
                    new_occ[i - shift] = occ[i]
                new_arr = np.empty((T, newW), dtype=np.int64)
                new_pos = np.full((T, newW), -1, dtype=np.int64)
                for t in range(T):
                    for k in range(act_cnt[t]):
                        aa = act_arr[t, k] - shift
                        new_arr[t, k] = aa
                        new_pos[t, aa] = k
                occ = new_occ
                act_arr = new_arr
                act_pos = new_pos
                origin += shift
                lo -= shift
                hi -= shift
                W = newW
    return occ, act_arr, act_pos, origin, lo, hi, W, n_occ, state, n_tog, tpl, anchor_abs, status


@njit(cache=True, nogil=True)
def sparse_run(y0_idx, w0, origin0, rates, srow_ptr, srow_off, srowcol_ptr,
               srowcol_off, srev_ptr, srev_off, radius, sample_times, seed,
               max_particles, max_radius, w_max,
               snap_sites, snap_ptr, log_times, log_tpl, log_anchor, want_log,
               counts_out, ext_time_out, cap_time_out):
    """Sparse trajectory with support snapshots at the sample times.

    ``y0_idx`` are window indices of the initially occupied sites in a
    window of ``w0`` cells whose index 0 is absolute site ``origin0``.
    Snapshots write absolute sites into ``snap_sites`` with extents in
    ``snap_ptr`` (pass empty arrays to skip them); ``counts_out`` always
    receives the particle count per sample time.  ``ext_time_out[0]`` gets
    the extinction time (inf if the support never empties), and
    ``cap_time_out[0]`` the time a resource cap fired (inf otherwise).
    Returns (n_log, status, n_events, final_time).
    """
    T = rates.size
    W = np.int64(w0)
    occ = np.zeros(W, dtype=np.uint8)
    origin = np.int64(origin0)
    n_occ = 0
    lo = W - 1
    hi = 0
    for k in range(y0_idx.size):
        i = y0_idx[k]
        if occ[i] == 0:
            occ[i] = 1
            n_occ += 1
            if i < lo:
                lo = i
            if i > hi:
                hi = i
    act_arr = np.empty((T, W), dtype=np.int64)
    act_pos = np.empty((T, W), dtype=np.int64)
    act_cnt = np.zeros(T, dtype=np.int64)
    if n_occ > 0:
        _sparse_build_active(occ, rates, srow_ptr, srow_off, srowcol_ptr,
                             srowcol_off, lo, hi, radius, act_arr, act_pos, act_cnt)

    state = seed
    t_now = 0.0
    si = 0
    S = sample_times.size
    t_end = sample_times[S - 1] if S > 0 else 0.0
    n_log = 0
    n_events = 0
    status = OK
    ext_time_out[0] = 0.0 if n_occ == 0 else np.inf
    cap_time_out[0] = np.inf
    snap_used = 0
    tog_abs = np.empty(srow_ptr[T] + 1, dtype=np.int64)
    tog_sign = np.empty(srow_ptr[T] + 1, dtype=np.int8)

    while si < S:
        if n_occ == 0:
            break
        total = 0.0
        for t in range(T):
            total += rates[t] * act_cnt[t]
        if total <= 0.0:
            break
        state, u = _next_unit(state)
        t_next = t_now - np.log(u) / total
        while si < S and sample_times[si] < t_next:
            counts_out[si] = n_occ
            if snap_ptr.size > 0:
                if snap_used + n_occ > snap_sites.size:
                    return n_log, OVERFLOW, n_events, t_now
                for i in range(lo, hi + 1):
                    if occ[i]:
                        snap_sites[snap_used] = origin + i
                        snap_used += 1
                snap_ptr[si + 1] = snap_used
            si += 1
        if si >= S or t_next > t_end:
            t_now = min(t_next, t_end)
            break

        occ, act_arr, act_pos, origin, lo, hi, W, n_occ, state, n_tog, tpl, a_abs, status = \
            _sparse_fire(occ, act_arr, act_pos, act_cnt, origin, lo, hi, W,
                         n_occ, state, total, rates, srow_ptr, srow_off,
                         srowcol_ptr, srowcol_off, srev_ptr, srev_off, radius,
                         max_particles, max_radius, w_max, tog_abs, tog_sign)
        t_now = t_next
        n_events += 1
        if want_log:
            if n_log >= log_times.size:
                return n_log, OVERFLOW, n_events, t_now
            log_times[n_log] = t_now
            log_tpl[n_log] = tpl
            log_anchor[n_log] = a_abs
            n_log += 1
        if n_occ == 0:
            ext_time_out[0] = t_now
            break
        if status != OK:
            cap_time_out[0] = t_now
            break

    while si < S:
        counts_out[si] = n_occ
        if snap_ptr.size > 0:
            if snap_used + n_occ > snap_sites.size:
                return n_log, OVERFLOW, n_events, t_now
            if n_occ > 0:
                for i in range(lo, hi + 1):
                    if occ[i]:
                        snap_sites[snap_used] = origin + i
                        snap_used += 1
            snap_ptr[si + 1] = snap_used
        si += 1
    return n_log, status, n_events, t_now


@njit(cache=True, nogil=True, inline="always")
def _window_for(y0_sites, radius, w0):
    smin = y0_sites[0]
    smax = y0_sites[0]
    for k in range(y0_sites.size):
        if y0_sites[k] < smin:
            smin = y0_sites[k]
        if y0_sites[k] > smax:
            smax = y0_sites[k]
    span = smax - smin + 1
    W = np.int64(w0)
    while span + 12 * (radius + 1) > W // 2:
        W *= 2
    origin = smin - (W - span) // 2
    return W, origin


@njit(cache=True, nogil=True)
def sparse_counts_batch(y0_sites, rates, srow_ptr, srow_off, srowcol_ptr,
                        srowcol_off, srev_ptr, srev_off, radius, sample_times,
                        seeds, max_particles, max_radius, w0, w_max,
                        counts, ext_times, cap_times):
    """Particle counts at the sample times for a batch of replicas."""
    R = seeds.size
    S = sample_times.size
    counts_row = np.empty(S, dtype=np.int64)
    ext_out = np.empty(1, dtype=np.float64)
    cap_out = np.empty(1, dtype=np.float64)
    empty_f = np.empty(0, dtype=np.float64)
    empty_i = np.empty(0, dtype=np.int64)
    W, origin = _window_for(y0_sites, radius, w0)
    idx = np.empty(y0_sites.size, dtype=np.int64)
    for k in range(y0_sites.size):
        idx[k] = y0_sites[k] - origin
    for r in range(R):
        _, status, _, _ = sparse_run(
            idx, W, origin, rates, srow_ptr, srow_off, srowcol_ptr,
            srowcol_off, srev_ptr, srev_off, radius, sample_times, seeds[r],
            max_particles, max_radius, w_max,
            empty_i, empty_i, empty_f, empty_i, empty_i, False,
            counts_row, ext_out, cap_out,
        )
        counts[r, :] = counts_row
        ext_times[r] = ext_out[0]
        cap_times[r] = cap_out[0]


@njit(cache=True, nogil=True)
def sparse_chi1_batch(y0_sites, rates, srow_ptr, srow_off, srowcol_ptr,
                      srowcol_off, srev_ptr, srev_off, radius,
                      box_scale, horizon, probes, seeds,
                      max_particles, max_radius, w0, w_max,
                      ok_out, capped_out):
    """First-level block indicators for a batch of replicas.

    For each probe ``x`` the replica scores 1 when the support intersects
    the target box [2Lx - L, 2Lx + L] at the horizon AND intersected the
    enlarged box [2Lx - 4L, 2Lx + 4L] at every time in (0, horizon], with
    L = ``box_scale``.  Box occupancies are tracked incrementally from the
    toggled sites of each event, and the continuity clause is evaluated
    after every event (states are right continuous, so the pre-first-event
    state is the initial one).  Capped replicas score 0 and are flagged.
    """
    R = seeds.size
    P = probes.size
    T = rates.size
    L = box_scale
    cnt_in = np.empty(P, dtype=np.int64)
    cnt_out = np.empty(P, dtype=np.int64)
    ok = np.empty(P, dtype=np.uint8)
    tog_abs = np.empty(srow_ptr[T] + 1, dtype=np.int64)
    tog_sign = np.empty(srow_ptr[T] + 1, dtype=np.int8)
    W0, origin0 = _window_for(y0_sites, radius, w0)

    for r in range(R):
        W = W0
        origin = origin0
        occ = np.zeros(W, dtype=np.uint8)
        n_occ = 0
        lo = W - 1
        hi = 0
        for k in range(y0_sites.size):
            i = y0_sites[k] - origin
            if occ[i] == 0:
                occ[i] = 1
                n_occ += 1
                if i < lo:
                    lo = i
                if i > hi:
                    hi = i
        act_arr = np.empty((T, W), dtype=np.int64)
        act_pos = np.empty((T, W), dtype=np.int64)
        act_cnt = np.zeros(T, dtype=np.int64)
        _sparse_build_active(occ, rates, srow_ptr, srow_off, srowcol_ptr,
                             srowcol_off, lo, hi, radius, act_arr, act_pos, act_cnt)
        for p in range(P):
            cnt_in[p] = 0
            cnt_out[p] = 0
        for k in range(y0_sites.size):
            s = y0_sites[k]
            for p in range(P):
                dx = s - 2 * L * probes[p]
                if -L <= dx <= L:
                    cnt_in[p] += 1
                if -4 * L <= dx <= 4 * L:
                    cnt_out[p] += 1
        for p in range(P):
            ok[p] = 1 if cnt_out[p] > 0 else 0

        state = seeds[r]
        t_now = 0.0
        capped = False
        while True:
            if n_occ == 0:
                break
            total = 0.0
            for t in range(T):
                total += rates[t] * act_cnt[t]
            if total <= 0.0:
                break
            state, u = _next_unit(state)
            t_next = t_now - np.log(u) / total
            if t_next > horizon:
                t_now = horizon
                break
            occ, act_arr, act_pos, origin, lo, hi, W, n_occ, state, n_tog, tpl, a_abs, status = \
                _sparse_fire(occ, act_arr, act_pos, act_cnt, origin, lo, hi, W,
                             n_occ, state, total, rates, srow_ptr, srow_off,
                             srowcol_ptr, srowcol_off, srev_ptr, srev_off,
                             radius, max_particles, max_radius, w_max,
                             tog_abs, tog_sign)
            t_now = t_next
            for k in range(n_tog):
                s = tog_abs[k]
                sgn = tog_sign[k]
                for p in range(P):
                    dx = s - 2 * L * probes[p]
                    if -L <= dx <= L:
                        cnt_in[p] += sgn
                    if -4 * L <= dx <= 4 * L:
                        cnt_out[p] += sgn
            for p in range(P):
                if cnt_out[p] == 0:
                    ok[p] = 0
            if status != OK:
                capped = True
                break
        capped_out[r] = 1 if capped else 0
        for p in range(P):
            good = ok[p] == 1 and cnt_in[p] > 0 and not capped
            ok_out[r, p] = 1 if good else 0


@njit(cache=True, nogil=True)
def sparse_drift_batch(rates, srow_ptr, srow_off, srowcol_ptr, srowcol_off,
                       srev_ptr, srev_off, radius, seeds, n_target, burn_in,
                       max_particles, w0, w_max,
                       time_in, dr_sum, moves, events_seen):
    """Rightmost-particle drift conditioned on the two sites behind it.

    Episodes start from a single particle at the origin and end when the
    particle cap trips (the dynamics here branch fast, so caps stand in
    for episode length).  Between events the dwell time accrues to the
    pattern code ``2*y(r-2) + y(r-1)`` read off behind the rightmost
    particle ``r``; displacements of ``r`` accrue to the pattern that was
    in force when the event fired.  The first ``burn_in`` events of each
    episode are discarded.  Episodes stop early once every pattern has at
    least ``n_target`` recorded moves.  Returns the episode count used.
    """
    T = rates.size
    tog_abs = np.empty(srow_ptr[T] + 1, dtype=np.int64)
    tog_sign = np.empty(srow_ptr[T] + 1, dtype=np.int8)
    episodes = 0
    for ep in range(seeds.size):
        done = True
        for p in range(4):
            if moves[p] < n_target:
                done = False
                break
        if done:
            break
        episodes += 1

        W = np.int64(w0)
        origin = -(W // 2)
        occ = np.zeros(W, dtype=np.uint8)
        occ[W // 2] = 1
        n_occ = 1
        lo = W // 2
        hi = W // 2
        act_arr = np.empty((T, W), dtype=np.int64)
        act_pos = np.empty((T, W), dtype=np.int64)
        act_cnt = np.zeros(T, dtype=np.int64)
        _sparse_build_active(occ, rates, srow_ptr, srow_off, srowcol_ptr,
                             srowcol_off, lo, hi, radius, act_arr, act_pos, act_cnt)
        state = seeds[ep]
        t_now = 0.0
        ev_in_episode = 0
        while True:
            if n_occ == 0:
                break
            total = 0.0
            for t in range(T):
                total += rates[t] * act_cnt[t]
            if total <= 0.0:
                break
            state, u = _next_unit(state)
            dt = -np.log(u) / total
            pat = np.int64(occ[hi - 2]) * 2 + np.int64(occ[hi - 1])
            r_before = origin + hi
            occ, act_arr, act_pos, origin, lo, hi, W, n_occ, state, n_tog, tpl, a_abs, status = \
                _sparse_fire(occ, act_arr, act_pos, act_cnt, origin, lo, hi, W,
                             n_occ, state, total, rates, srow_ptr, srow_off,
                             srowcol_ptr, srowcol_off, srev_ptr, srev_off,
                             radius, max_particles, 1 << 62, w_max,
                             tog_abs, tog_sign)
            t_now += dt
            ev_in_episode += 1
            if ev_in_episode > burn_in:
                time_in[pat] += dt
                events_seen[pat] += 1
                if n_occ > 0:
                    dr = (origin + hi) - r_before
                    if dr != 0:
                        dr_sum[pat] += dr
                        moves[pat] += 1
            if n_occ == 0 or status != OK:
                break
    return episodes
