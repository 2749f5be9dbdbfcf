#cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled simulation kernels.

Semantics and bit-stream consumption match ``swarmcalc._kernels_py``
exactly: three float64 uniforms per step, drawn straight from the
generator's PCG64 (or other) bit stream via ``next_double``.
"""
import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from numpy.random cimport bitgen_t

cnp.import_array()

cdef const char *_CAPSULE = "BitGenerator"


cdef bitgen_t *_state(object gen) except NULL:
    capsule = gen.bit_generator.capsule
    if not PyCapsule_IsValid(capsule, _CAPSULE):
        raise ValueError("expected a numpy Generator backed by a BitGenerator")
    return <bitgen_t *> PyCapsule_GetPointer(capsule, _CAPSULE)


cdef inline long _one_step(long b, long n, const double *s_of, const double *pos,
                           const double *pay, bitgen_t *rng) noexcept nogil:
    cdef double u1 = rng.next_double(rng.state)
    cdef double u2 = rng.next_double(rng.state)
    cdef double u3 = rng.next_double(rng.state)
    cdef long direction = 1 if (u1 < s_of[b]) == (u2 < pos[b]) else -1
    if u3 >= pay[b]:
        return b
    if direction > 0:
        return b + 1 if b < n else b
    return b - 1 if b > 0 else b


def trajectory(long n, long b0, long steps, double[::1] s_of, double[::1] pos,
               double[::1] pay, object gen):
    cdef bitgen_t *rng = _state(gen)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(steps + 1, dtype=np.int64)
    cdef long[::1] view = out
    cdef long b = b0, t
    view[0] = b0
    with gen.bit_generator.lock, nogil:
        for t in range(steps):
            b = _one_step(b, n, &s_of[0], &pos[0], &pay[0], rng)
            view[t + 1] = b
    return out


def revisions(long n, long b0, long steps, double[::1] s_of, double[::1] pos,
              double[::1] pay, object gen):
    cdef bitgen_t *rng = _state(gen)
    r_b_arr = np.zeros(n + 1, dtype=np.int64)
    r_r_arr = np.zeros(n + 1, dtype=np.int64)
    visits_arr = np.zeros(n + 1, dtype=np.int64)
    cdef long[::1] r_b = r_b_arr
    cdef long[::1] r_r = r_r_arr
    cdef long[::1] visits = visits_arr
    cdef long b = b0, prev, t
    with gen.bit_generator.lock, nogil:
        for t in range(steps):
            prev = b
            visits[prev] += 1
            b = _one_step(b, n, &s_of[0], &pos[0], &pay[0], rng)
            if b > prev:
                r_b[prev] += 1
            elif b < prev:
                r_r[prev] += 1
    return r_b_arr, r_r_arr, visits_arr, b


def state_samples(long n, long k, long samples, double[::1] s_of, double[::1] pos,
                  double[::1] pay, object gen):
    cdef bitgen_t *rng = _state(gen)
    cdef long n_up = 0, n_down = 0, i, b
    with gen.bit_generator.lock, nogil:
        for i in range(samples):
            b = _one_step(k, n, &s_of[0], &pos[0], &pay[0], rng)
            if b > k:
                n_up += 1
            elif b < k:
                n_down += 1
    return n_up, n_down


def final_state(long n, long b0, long steps, double[::1] s_of, double[::1] pos,
                double[::1] pay, object gen):
    cdef bitgen_t *rng = _state(gen)
    cdef long b = b0, t
    with gen.bit_generator.lock, nogil:
        for t in range(steps):
            b = _one_step(b, n, &s_of[0], &pos[0], &pay[0], rng)
    return b


def hitting_time(long n, long b0, long target, long max_steps, double[::1] s_of,
                 double[::1] pos, double[::1] pay, object gen):
    cdef bitgen_t *rng = _state(gen)
    cdef long b = b0, t
    cdef long result = -1
    if b0 == target:
        return 0
    with gen.bit_generator.lock, nogil:
        for t in range(max_steps):
            b = _one_step(b, n, &s_of[0], &pos[0], &pay[0], rng)
            if b == target:
                result = t + 1
                break
    return result
