# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Native batch propagation for the built-in vector fields.

Arithmetic is ordered exactly as in ``_pykernels`` so both backends agree
bit for bit. The per-sample loop runs without the GIL.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, isfinite
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef enum:
    SGN_CUBIC = 1
    LINEAR = 2
    BLOCK = 256


cdef inline void _field(int code, double gain, const double* A, int n,
                        const double* x, double* out) noexcept nogil:
    cdef int i, j
    cdef double s, v
    if code == SGN_CUBIC:
        for i in range(n):
            v = x[i]
            s = (v > 0.0) - (v < 0.0)
            out[i] = (-gain) * s + v * v * v / 3.0
    else:
        for i in range(n):
            s = x[0] * A[i * n]
            for j in range(1, n):
                s = s + x[j] * A[i * n + j]
            out[i] = s


cdef inline void _step(int code, double gain, const double* A, int n, int kind,
                       double dt, double* x, double* k1, double* k2, double* k3,
                       double* k4, double* tmp) noexcept nogil:
    cdef int i
    cdef double hdt = 0.5 * dt
    cdef double dt6 = dt / 6.0
    _field(code, gain, A, n, x, k1)
    if kind == 0:
        for i in range(n):
            x[i] = x[i] + k1[i] * dt
        return
    for i in range(n):
        tmp[i] = x[i] + k1[i] * hdt
    _field(code, gain, A, n, tmp, k2)
    for i in range(n):
        tmp[i] = x[i] + k2[i] * hdt
    _field(code, gain, A, n, tmp, k3)
    for i in range(n):
        tmp[i] = x[i] + k3[i] * dt
    _field(code, gain, A, n, tmp, k4)
    for i in range(n):
        x[i] = x[i] + dt6 * (((k1[i] + 2.0 * k2[i]) + 2.0 * k3[i]) + k4[i])


cdef inline bint _ok(const double* x, int n, double guard) noexcept nogil:
    cdef int i
    cdef double s = 0.0
    for i in range(n):
        if not isfinite(x[i]):
            return False
        s += x[i] * x[i]
    return sqrt(s) <= guard


def propagate_batch(int code, tuple params, const double[:, ::1] X0, double dt,
                    Py_ssize_t n_steps, int kind, double guard, bint record):
    """Propagate every row of ``X0``.

    Returns ``(states, steps_done)``; ``states`` has shape ``(n_steps+1, m, n)``
    when ``record`` else ``(m, n)`` holding the last state that passed the guard.
    """
    cdef Py_ssize_t m = X0.shape[0]
    cdef int n = <int>X0.shape[1]
    cdef double gain = 0.0
    cdef const double[:, ::1] Amv
    cdef const double* Ap = NULL
    if code == SGN_CUBIC:
        gain = params[0]
    elif code == LINEAR:
        Aarr = np.ascontiguousarray(params[0], dtype=np.float64)
        if Aarr.shape[0] != n or Aarr.shape[1] != n:
            raise ValueError("matrix shape does not match state dimension")
        Amv = Aarr
        Ap = &Amv[0, 0]
    else:
        raise ValueError(f"unknown kernel code {code}")

    cdef cnp.ndarray[cnp.int64_t, ndim=1] done_arr = np.zeros(m, dtype=np.int64)
    cdef cnp.int64_t[::1] done = done_arr
    cdef double[:, ::1] final
    cdef double[:, :, ::1] hist
    if record:
        hist_arr = np.full((n_steps + 1, m, n), np.nan)
        hist = hist_arr
        hist[0, :, :] = X0
        final = np.empty((1, n))
    else:
        final_arr = np.array(X0, dtype=np.float64, copy=True)
        final = final_arr
        hist = np.empty((1, 1, n))

    cdef Py_ssize_t s, s0, s1, it, r, nb
    cdef int i, alive
    cdef double* buf
    cdef double* x
    cdef double* y
    cdef double* w
    cdef char* active
    # rows are advanced in blocks, one step for every row of the block at a
    # time, so independent rows overlap in the pipeline
    cdef Py_ssize_t B = BLOCK
    with nogil:
        buf = <double*>malloc(7 * n * B * sizeof(double))
        active = <char*>malloc(B * sizeof(char))
        if buf != NULL and active != NULL:
            s0 = 0
            while s0 < m:
                s1 = s0 + B if s0 + B < m else m
                nb = s1 - s0
                for r in range(nb):
                    x = buf + 7 * n * r
                    for i in range(n):
                        x[i] = X0[s0 + r, i]
                    active[r] = 1
                    done[s0 + r] = 0
                alive = <int>nb
                it = 0
                while it < n_steps and alive > 0:
                    it += 1
                    for r in range(nb):
                        if not active[r]:
                            continue
                        w = buf + 7 * n * r
                        x = w
                        y = w + n
                        for i in range(n):
                            y[i] = x[i]
                        _step(code, gain, Ap, n, kind, dt, y, w + 2 * n, w + 3 * n,
                              w + 4 * n, w + 5 * n, w + 6 * n)
                        if not _ok(y, n, guard):
                            active[r] = 0
                            alive -= 1
                            continue
                        for i in range(n):
                            x[i] = y[i]
                        done[s0 + r] = it
                        if record:
                            for i in range(n):
                                hist[it, s0 + r, i] = x[i]
                if not record:
                    for r in range(nb):
                        x = buf + 7 * n * r
                        for i in range(n):
                            final[s0 + r, i] = x[i]
                s0 = s1
        free(buf)
        free(active)
    if buf == NULL or active == NULL:
        raise MemoryError()
    if record:
        return hist_arr, done_arr
    return final_arr, done_arr
