"""Pure-Python implementations of the hot loops.

Used when the compiled extension is unavailable, and as the reference the
compiled versions are tested against.
"""
import math

import numpy as np


def fifo_departures(arrivals, services):
    """Start and end of service at a work-conserving single-server FIFO queue.

    Lindley recursion: start_n = max(arrival_n, end_{n-1}).
    """
    arrivals = np.ascontiguousarray(arrivals, dtype=np.float64)
    services = np.ascontiguousarray(services, dtype=np.float64)
    if arrivals.shape != services.shape:
        raise ValueError("arrivals and services must have equal length")
    start = [0.0] * len(arrivals)
    end = [0.0] * len(arrivals)
    free_at = -math.inf
    for i, (a, s) in enumerate(zip(arrivals.tolist(), services.tolist())):
        if a < free_at:
            a = free_at
        start[i] = a
        free_at = a + s
        end[i] = free_at
    return np.array(start, dtype=np.float64), np.array(end, dtype=np.float64)


def ar1_filter(rho, innov, x0):
    """x_{k+1} = rho_k x_k + innov_k, returned with x_0 prepended."""
    rho = np.ascontiguousarray(rho, dtype=np.float64)
    innov = np.ascontiguousarray(innov, dtype=np.float64)
    if rho.shape != innov.shape:
        raise ValueError("rho and innov must have equal length")
    out = [float(x0)]
    prev = float(x0)
    for r, e in zip(rho.tolist(), innov.tolist()):
        prev = r * prev + e
        out.append(prev)
    return np.array(out, dtype=np.float64)
