"""Compiled event loops for :mod:`photonlock.sim`.

Kept free of Python objects so numba can compile them in nopython mode. The
controller update is shared by the closed-loop simulator and the open-loop
replay so both produce identical command sequences for identical clicks.
"""

import math

import numba
import numpy as np

VARIANT_IMMEDIATE = 0
VARIANT_AVERAGING = 1
VARIANT_PI = 2

# integer controller state slots
I_C0, I_C1, I_P0, I_P1, I_W0, I_W1, I_RPOS, I_RFILL = range(8)
# float controller state slots
F_BLOCK_TSUM = 0

QUEUE_CAP = 1 << 16


@numba.njit(cache=True, inline="always")
def _ctrl_click(variant, n_avg, kp, ki, eps0, eps1, ist, fst, ring, ch, t):
    """Register a click; returns (updated, new_command, latency_sum, latency_count).

    Latencies exclude the loop delay, which the caller adds.
    """
    if variant == VARIANT_AVERAGING:
        if ch == 0:
            ist[I_P0] += 1
        else:
            ist[I_P1] += 1
        fst[F_BLOCK_TSUM] += t
        n_pend = ist[I_P0] + ist[I_P1]
        if n_pend < n_avg:
            return False, 0.0, 0.0, 0
        ist[I_C0] += ist[I_P0]
        ist[I_C1] += ist[I_P1]
        ist[I_P0] = 0
        ist[I_P1] = 0
        lat = n_pend * t - fst[F_BLOCK_TSUM]
        fst[F_BLOCK_TSUM] = 0.0
        return True, ist[I_C0] * eps0 + ist[I_C1] * eps1, lat, n_pend
    if ch == 0:
        ist[I_C0] += 1
    else:
        ist[I_C1] += 1
    cmd = ist[I_C0] * eps0 + ist[I_C1] * eps1
    if variant == VARIANT_PI:
        w = ring.shape[0]
        if ist[I_RFILL] == w:
            old = ring[ist[I_RPOS]]
            if old == 0:
                ist[I_W0] -= 1
            else:
                ist[I_W1] -= 1
        else:
            ist[I_RFILL] += 1
        ring[ist[I_RPOS]] = ch
        ist[I_RPOS] = (ist[I_RPOS] + 1) % w
        if ch == 0:
            ist[I_W0] += 1
        else:
            ist[I_W1] += 1
        cmd = ki * cmd + kp * (ist[I_W0] * eps0 + ist[I_W1] * eps1)
    return True, cmd, 0.0, 1


@numba.njit(cache=True, inline="always")
def _actuate(cmd, has_act, lsb, rng_rad, mid, recenter, offset):
    """Map a controller command to the applied phase.

    Returns (applied, saturated, new_offset). ``offset`` collects the 2 pi
    shifts introduced by recentering.
    """
    if not has_act:
        return cmd, False, offset
    x = mid + cmd + offset
    sat = x < 0.0 or x > rng_rad
    if sat and recenter:
        k = math.floor((x - mid) / (2.0 * math.pi) + 0.5)
        offset -= 2.0 * math.pi * k
        x = mid + cmd + offset
        sat = x < 0.0 or x > rng_rad
    if x < 0.0:
        x = 0.0
    elif x > rng_rad:
        x = rng_rad
    return math.floor(x / lsb + 0.5) * lsb - mid, sat, offset


@numba.njit(cache=True, inline="always")
def _asd_at(grid, fs, t):
    if grid.shape[0] == 0:
        return 0.0
    x = t * fs
    i = int(x)
    if i >= grid.shape[0] - 1:
        return grid[grid.shape[0] - 1]
    w = x - i
    return grid[i] * (1.0 - w) + grid[i + 1] * w


@numba.njit(cache=True)
def simulate(rng, duration, f_total, p_signal, p_dark0, vis, fr_off, phi0, err0,
             eps0, eps1, variant, n_avg, kp, ki, window,
             has_act, lsb, rng_rad, recenter, loop_delay,
             diff, rate, asd_grid, asd_fs,
             sample_rate, burn_in, record_clicks, click_cap):
    """Closed-loop event simulation.

    Phase at time t is ``phi0 + err0 + drift(t) + applied(t)``; errors are
    reported relative to ``phi0`` with recentering shifts removed.
    """
    n_samp = int(math.floor(duration * sample_rate + 1e-9)) + 1 if sample_rate > 0 else 0
    tr_err = np.empty(n_samp)
    tr_cmd = np.empty(n_samp)
    ck_t = np.empty(click_cap if record_clicks else 0)
    ck_ch = np.empty(click_cap if record_clicks else 0, dtype=np.int8)

    ist = np.zeros(8, dtype=np.int64)
    fst = np.zeros(1)
    ring = np.zeros(max(window, 1), dtype=np.int8)
    q_t = np.empty(QUEUE_CAP)
    q_v = np.empty(QUEUE_CAP)
    q_head = 0
    q_len = 0

    mid = 0.5 * rng_rad
    offset = 0.0
    applied, _, offset = _actuate(0.0, has_act, lsb, rng_rad, mid, recenter, offset)
    out_cmd = applied - offset
    wiener = 0.0
    t_drift = 0.0
    t = 0.0
    k_samp = 0
    n_events = 0
    n_clicks0 = 0
    n_clicks1 = 0
    n_sat = 0
    n_stat = 0
    n_wide = 0
    st_c0 = 0
    s1 = 0.0
    s2 = 0.0
    lat_sum = 0.0
    lat_n = 0
    n_rec = 0
    overflow = False
    half_pi = 0.5 * math.pi

    while True:
        t_next = t + rng.exponential(1.0 / f_total)
        t_stop = min(t_next, duration)
        # samples falling before the next event see the current command
        while k_samp < n_samp and k_samp / sample_rate <= t_stop:
            ts = k_samp / sample_rate
            while q_len > 0 and q_t[q_head] <= ts:
                applied, sat, offset = _actuate(q_v[q_head], has_act, lsb, rng_rad, mid, recenter, offset)
                out_cmd = applied - offset
                if sat:
                    n_sat += 1
                q_head = (q_head + 1) % QUEUE_CAP
                q_len -= 1
            if diff > 0.0 and ts > t_drift:
                wiener += math.sqrt(diff * (ts - t_drift)) * rng.standard_normal()
                t_drift = ts
            drift = wiener + rate * ts + _asd_at(asd_grid, asd_fs, ts)
            tr_err[k_samp] = err0 + drift + out_cmd
            tr_cmd[k_samp] = out_cmd
            k_samp += 1
        if t_next > duration:
            break
        t = t_next
        n_events += 1
        while q_len > 0 and q_t[q_head] <= t:
            applied, sat, offset = _actuate(q_v[q_head], has_act, lsb, rng_rad, mid, recenter, offset)
            out_cmd = applied - offset
            if sat:
                n_sat += 1
            q_head = (q_head + 1) % QUEUE_CAP
            q_len -= 1
        if diff > 0.0:
            wiener += math.sqrt(diff * (t - t_drift)) * rng.standard_normal()
            t_drift = t
        err = err0 + wiener + rate * t + _asd_at(asd_grid, asd_fs, t) + out_cmd

        # classify: signal clicks follow the fringe, dark clicks their channel
        if p_signal >= 1.0 or rng.random() < p_signal:
            r = 0.5 * (1.0 + vis * math.cos(phi0 + err + offset - fr_off))
            ch = 0 if rng.random() < r else 1
        else:
            ch = 0 if rng.random() < p_dark0 else 1

        if t >= burn_in:
            n_stat += 1
            s1 += err
            s2 += err * err
            if abs(err) > half_pi:
                n_wide += 1
            if ch == 0:
                st_c0 += 1
        if ch == 0:
            n_clicks0 += 1
        else:
            n_clicks1 += 1
        if record_clicks:
            if n_rec < click_cap:
                ck_t[n_rec] = t
                ck_ch[n_rec] = ch
                n_rec += 1
            else:
                overflow = True

        updated, cmd, lat, nlat = _ctrl_click(variant, n_avg, kp, ki, eps0, eps1, ist, fst, ring, ch, t)
        if updated:
            lat_sum += lat + nlat * loop_delay
            lat_n += nlat
            if loop_delay > 0.0:
                if q_len == QUEUE_CAP:
                    raise RuntimeError("loop-delay queue overflow")
                q_t[(q_head + q_len) % QUEUE_CAP] = t + loop_delay
                q_v[(q_head + q_len) % QUEUE_CAP] = cmd
                q_len += 1
            else:
                applied, sat, offset = _actuate(cmd, has_act, lsb, rng_rad, mid, recenter, offset)
                out_cmd = applied - offset
                if sat:
                    n_sat += 1

    counts = np.array([n_events, n_clicks0, n_clicks1, n_sat, n_stat, n_wide, st_c0, n_rec, lat_n,
                       ist[I_P0] + ist[I_P1]], dtype=np.int64)
    sums = np.array([s1, s2, lat_sum])
    return tr_err, tr_cmd, ck_t[:n_rec], ck_ch[:n_rec], counts, sums, overflow


@numba.njit(cache=True)
def replay(times, channels, duration, eps0, eps1, variant, n_avg, kp, ki, window,
           has_act, lsb, rng_rad, recenter, loop_delay, sample_rate):
    """Drive the controller with recorded clicks; sample the applied command."""
    n_samp = int(math.floor(duration * sample_rate + 1e-9)) + 1 if sample_rate > 0 else 0
    tr_cmd = np.empty(n_samp)
    ist = np.zeros(8, dtype=np.int64)
    fst = np.zeros(1)
    ring = np.zeros(max(window, 1), dtype=np.int8)
    q_t = np.empty(QUEUE_CAP)
    q_v = np.empty(QUEUE_CAP)
    q_head = 0
    q_len = 0
    mid = 0.5 * rng_rad
    offset = 0.0
    applied, _, offset = _actuate(0.0, has_act, lsb, rng_rad, mid, recenter, offset)
    out_cmd = applied - offset
    n_sat = 0
    lat_sum = 0.0
    lat_n = 0
    k_samp = 0
    n = times.shape[0]
    n_events = 0
    for i in range(n + 1):
        t_stop = times[i] if i < n else duration
        while k_samp < n_samp and k_samp / sample_rate <= t_stop:
            ts = k_samp / sample_rate
            while q_len > 0 and q_t[q_head] <= ts:
                applied, sat, offset = _actuate(q_v[q_head], has_act, lsb, rng_rad, mid, recenter, offset)
                out_cmd = applied - offset
                if sat:
                    n_sat += 1
                q_head = (q_head + 1) % QUEUE_CAP
                q_len -= 1
            tr_cmd[k_samp] = out_cmd
            k_samp += 1
        if i == n or times[i] > duration:
            break
        t = times[i]
        n_events += 1
        while q_len > 0 and q_t[q_head] <= t:
            applied, sat, offset = _actuate(q_v[q_head], has_act, lsb, rng_rad, mid, recenter, offset)
            out_cmd = applied - offset
            if sat:
                n_sat += 1
            q_head = (q_head + 1) % QUEUE_CAP
            q_len -= 1
        updated, cmd, lat, nlat = _ctrl_click(variant, n_avg, kp, ki, eps0, eps1, ist, fst, ring,
                                              channels[i], t)
        if updated:
            lat_sum += lat + nlat * loop_delay
            lat_n += nlat
            if loop_delay > 0.0:
                if q_len == QUEUE_CAP:
                    raise RuntimeError("loop-delay queue overflow")
                q_t[(q_head + q_len) % QUEUE_CAP] = t + loop_delay
                q_v[(q_head + q_len) % QUEUE_CAP] = cmd
                q_len += 1
            else:
                applied, sat, offset = _actuate(cmd, has_act, lsb, rng_rad, mid, recenter, offset)
                out_cmd = applied - offset
                if sat:
                    n_sat += 1
    counts = np.array([n_events, ist[I_C0], ist[I_C1], n_sat, lat_n, ist[I_P0], ist[I_P1]], dtype=np.int64)
    return tr_cmd, counts, np.array([lat_sum, out_cmd])
