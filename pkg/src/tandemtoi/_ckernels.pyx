# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops; see _pykernels for the reference semantics."""
import numpy as np

cimport numpy as cnp

cnp.import_array()


def fifo_departures(double[::1] arrivals, double[::1] services):
    cdef Py_ssize_t n = arrivals.shape[0], i
    if services.shape[0] != n:
        raise ValueError("arrivals and services must have equal length")
    start_arr = np.empty(n, dtype=np.float64)
    end_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] start = start_arr
    cdef double[::1] end = end_arr
    cdef double free_at = -np.inf, a
    with nogil:
        for i in range(n):
            a = arrivals[i]
            if a < free_at:
                a = free_at
            start[i] = a
            free_at = a + services[i]
            end[i] = free_at
    return start_arr, end_arr


def ar1_filter(double[::1] rho, double[::1] innov, double x0):
    cdef Py_ssize_t n = rho.shape[0], k
    if innov.shape[0] != n:
        raise ValueError("rho and innov must have equal length")
    out_arr = np.empty(n + 1, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double prev = x0
    out[0] = x0
    with nogil:
        for k in range(n):
            prev = rho[k] * prev + innov[k]
            out[k + 1] = prev
    return out_arr
