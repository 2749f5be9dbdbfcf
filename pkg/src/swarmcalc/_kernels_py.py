"""Pure-Python/numpy simulation kernels (fallback backend).

Every kernel consumes exactly three float64 uniforms per step from the
supplied ``numpy.random.Generator``, in the order (marble draw, feedback
sign, payoff magnitude). Uniforms are bulk-generated, which walks the
underlying bit stream in the same order as the compiled backend's
per-step ``next_double`` calls, so both backends produce bit-identical
results for the same generator state.
"""
from __future__ import annotations

import numpy as np

_CHUNK = 1 << 20  # steps per bulk uniform draw; bounds memory at ~24 MB


def _walk(b, n, u, s_of, pos, pay, out=None, r_b=None, r_r=None, visits=None):
    """Advance the urn through len(u) steps; optionally record outputs."""
    record_traj = out is not None
    record_log = r_b is not None
    u1 = u[:, 0].tolist()
    u2 = u[:, 1].tolist()
    u3 = u[:, 2].tolist()
    s_l, pos_l, pay_l = s_of.tolist(), pos.tolist(), pay.tolist()
    for t in range(len(u1)):
        if record_log:
            visits[b] += 1
        direction = 1 if (u1[t] < s_l[b]) == (u2[t] < pos_l[b]) else -1
        if u3[t] < pay_l[b]:
            if direction > 0 and b < n:
                b += 1
                if record_log:
                    r_b[b - 1] += 1
            elif direction < 0 and b > 0:
                b -= 1
                if record_log:
                    r_r[b + 1] += 1
        if record_traj:
            out[t] = b
    return b


def trajectory(n, b0, steps, s_of, pos, pay, gen):
    out = np.empty(steps + 1, dtype=np.int64)
    out[0] = b0
    b = b0
    done = 0
    while done < steps:
        m = min(_CHUNK, steps - done)
        u = gen.random((m, 3))
        b = _walk(b, n, u, s_of, pos, pay, out=out[done + 1 : done + 1 + m])
        done += m
    return out


def revisions(n, b0, steps, s_of, pos, pay, gen):
    r_b = [0] * (n + 1)
    r_r = [0] * (n + 1)
    visits = [0] * (n + 1)
    b = b0
    done = 0
    while done < steps:
        m = min(_CHUNK, steps - done)
        u = gen.random((m, 3))
        b = _walk(b, n, u, s_of, pos, pay, r_b=r_b, r_r=r_r, visits=visits)
        done += m
    return (
        np.asarray(r_b, dtype=np.int64),
        np.asarray(r_r, dtype=np.int64),
        np.asarray(visits, dtype=np.int64),
        b,
    )


def state_samples(n, k, samples, s_of, pos, pay, gen):
    """Independent single steps from fixed state k; returns (#up, #down)."""
    n_up = 0
    n_down = 0
    done = 0
    while done < samples:
        m = min(_CHUNK, samples - done)
        u = gen.random((m, 3))
        same = (u[:, 0] < s_of[k]) == (u[:, 1] < pos[k])
        paid = u[:, 2] < pay[k]
        if k < n:
            n_up += int(np.count_nonzero(same & paid))
        if k > 0:
            n_down += int(np.count_nonzero(~same & paid))
        done += m
    return n_up, n_down


def final_state(n, b0, steps, s_of, pos, pay, gen):
    b = b0
    done = 0
    while done < steps:
        m = min(_CHUNK, steps - done)
        u = gen.random((m, 3))
        b = _walk(b, n, u, s_of, pos, pay)
        done += m
    return b


def hitting_time(n, b0, target, max_steps, s_of, pos, pay, gen):
    """Steps until the urn first reaches ``target``; -1 if censored."""
    if b0 == target:
        return 0
    b = b0
    s_l, pos_l, pay_l = s_of.tolist(), pos.tolist(), pay.tolist()
    taken = 0
    chunk = 4096
    while taken < max_steps:
        m = min(chunk, max_steps - taken)
        u = gen.random((m, 3))
        u1, u2, u3 = u[:, 0].tolist(), u[:, 1].tolist(), u[:, 2].tolist()
        for t in range(m):
            direction = 1 if (u1[t] < s_l[b]) == (u2[t] < pos_l[b]) else -1
            if u3[t] < pay_l[b]:
                if direction > 0 and b < n:
                    b += 1
                elif direction < 0 and b > 0:
                    b -= 1
            taken += 1
            if b == target:
                return taken
    return -1


def final_states_batch(n, inits, steps, s_of, pos, pay, gens):
    """Endpoint of ``steps``-step runs for many replicates, lockstep-vectorized."""
    reps = len(gens)
    out = np.empty(reps, dtype=np.int64)
    block = max(1, int(1.2e7) // max(3 * steps, 1))
    for lo in range(0, reps, block):
        hi = min(lo + block, reps)
        b = np.asarray(inits[lo:hi], dtype=np.int64).copy()
        if steps:
            u = np.stack([gens[i].random((steps, 3)) for i in range(lo, hi)])
            for t in range(steps):
                same = (u[:, t, 0] < s_of[b]) == (u[:, t, 1] < pos[b])
                delta = np.where(same, 1, -1)
                delta[~(u[:, t, 2] < pay[b])] = 0
                delta[(delta > 0) & (b == n)] = 0
                delta[(delta < 0) & (b == 0)] = 0
                b += delta
        out[lo:hi] = b
    return out


def hitting_times_batch(n, b0, target, max_steps, s_of, pos, pay, gens):
    """First hitting times of ``target`` for many replicates; -1 if censored."""
    reps = len(gens)
    times = np.full(reps, -1, dtype=np.int64)
    if b0 == target:
        times[:] = 0
        return times
    b = np.full(reps, b0, dtype=np.int64)
    active = np.arange(reps)
    taken = 0
    while active.size and taken < max_steps:
        # chunk length adapts to the surviving population to bound the
        # uniform buffer at ~50 MB regardless of replicate count
        chunk = min(4096, max(64, int(2e6) // active.size))
        m = min(chunk, max_steps - taken)
        u = np.stack([gens[i].random((m, 3)) for i in active])
        ba = b[active]
        alive = np.ones(active.size, dtype=bool)
        for t in range(m):
            same = (u[alive, t, 0] < s_of[ba[alive]]) == (u[alive, t, 1] < pos[ba[alive]])
            delta = np.where(same, 1, -1)
            delta[~(u[alive, t, 2] < pay[ba[alive]])] = 0
            delta[(delta > 0) & (ba[alive] == n)] = 0
            delta[(delta < 0) & (ba[alive] == 0)] = 0
            ba[alive] += delta
            hit = alive & (ba == target)
            if hit.any():
                times[active[hit]] = taken + t + 1
                alive &= ~hit
                if not alive.any():
                    break
        b[active] = ba
        active = active[alive]
        taken += m
    return times
