# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled tally kernels; semantics mirror ``_kernels_py`` exactly."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def plurality(const long long[:, ::1] answers, long long K):
    cdef Py_ssize_t T = answers.shape[0], N = answers.shape[1]
    cdef Py_ssize_t t, i
    cdef long long a, best, bestc
    winner_arr = np.empty(T, dtype=np.int64)
    kmax_arr = np.empty(T, dtype=np.int64)
    counts_arr = np.zeros(K, dtype=np.int64)
    cdef long long[::1] winner = winner_arr
    cdef long long[::1] kmax = kmax_arr
    cdef long long[::1] counts = counts_arr
    with nogil:
        for t in range(T):
            for i in range(N):
                counts[answers[t, i]] += 1
            best = -1
            bestc = 0
            for i in range(N):
                a = answers[t, i]
                if counts[a] > bestc:
                    bestc = counts[a]
                    best = a
            winner[t] = best
            kmax[t] = bestc
            for i in range(N):
                counts[answers[t, i]] = 0
    return winner_arr, kmax_arr


def refine_step(
    const long long[:, ::1] answers,
    const long long[::1] winner,
    const long long[:, ::1] fresh,
    const double[:, ::1] u,
    double adopt,
    double improve,
    bint anchored,
):
    cdef Py_ssize_t T = answers.shape[0], N = answers.shape[1]
    cdef Py_ssize_t t, i
    cdef double x
    out_arr = np.empty((T, N), dtype=np.int64)
    cdef long long[:, ::1] out = out_arr
    with nogil:
        for t in range(T):
            for i in range(N):
                if anchored and answers[t, i] == winner[t]:
                    out[t, i] = answers[t, i]
                    continue
                x = u[t, i]
                if x < adopt:
                    out[t, i] = winner[t]
                elif x < adopt + improve:
                    out[t, i] = fresh[t, i]
                else:
                    out[t, i] = answers[t, i]
    return out_arr


def level_tally(const long long[::1] kmax, const unsigned char[::1] correct, long long N):
    cdef Py_ssize_t T = kmax.shape[0], t
    total_arr = np.zeros(N + 1, dtype=np.int64)
    hits_arr = np.zeros(N + 1, dtype=np.int64)
    cdef long long[::1] total = total_arr
    cdef long long[::1] hits = hits_arr
    with nogil:
        for t in range(T):
            total[kmax[t]] += 1
            if correct[t]:
                hits[kmax[t]] += 1
    return total_arr, hits_arr


def transition_counts(const long long[::1] kpre, const long long[::1] kpost, long long N):
    cdef Py_ssize_t T = kpre.shape[0], t
    m_arr = np.zeros((N + 1, N + 1), dtype=np.int64)
    cdef long long[:, ::1] m = m_arr
    with nogil:
        for t in range(T):
            m[kpre[t], kpost[t]] += 1
    return m_arr
