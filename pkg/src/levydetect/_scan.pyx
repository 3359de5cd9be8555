# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled path-scan kernels.

Semantics (carry contracts, step numbering, unspecified-after-stop rules)
match the numpy reference in ``_scan_py.py``; see that module's docstring.
The compiled versions walk each row sequentially and exit at the first
barrier crossing, which is what makes long in-control runs cheap.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, log1p

cnp.import_array()

ctypedef cnp.float64_t f64
ctypedef cnp.int64_t i64


cdef inline double _logaddexp(double a, double b) nogil:
    if a == b:
        return a + 0.6931471805599453
    if a > b:
        return a + log1p(exp(b - a))
    return b + log1p(exp(a - b))


def cusum_scan(cnp.ndarray[f64, ndim=2] inc,
               cnp.ndarray[f64, ndim=1] u,
               cnp.ndarray[f64, ndim=1] mn,
               cnp.ndarray[i64, ndim=1] lastref,
               long long start_step,
               double hbar):
    cdef Py_ssize_t n = inc.shape[0]
    cdef Py_ssize_t m = inc.shape[1]
    cdef cnp.ndarray[i64, ndim=1] off = np.full(n, -1, dtype=np.int64)
    cdef cnp.ndarray[f64, ndim=1] stat = np.full(n, np.nan)
    cdef cnp.ndarray[f64, ndim=1] yend = np.empty(n)
    cdef Py_ssize_t i, k
    cdef double ui, mi, y
    cdef i64 ref
    with nogil:
        for i in range(n):
            ui = u[i]
            mi = mn[i]
            ref = lastref[i]
            y = 0.0
            for k in range(m):
                ui = ui + inc[i, k]
                y = ui - mi
                if y <= 0.0:
                    ref = start_step + k + 1
                if y >= hbar:
                    off[i] = k
                    stat[i] = y
                    break
                if ui < mi:
                    mi = ui
            u[i] = ui
            mn[i] = mi
            lastref[i] = ref
            yend[i] = y
    return off, stat, yend


def sr_scan(cnp.ndarray[f64, ndim=2] inc,
            cnp.ndarray[f64, ndim=1] u,
            cnp.ndarray[f64, ndim=1] logA,
            long long start_step,
            double log_thresh):
    cdef Py_ssize_t n = inc.shape[0]
    cdef Py_ssize_t m = inc.shape[1]
    cdef cnp.ndarray[i64, ndim=1] off = np.full(n, -1, dtype=np.int64)
    cdef cnp.ndarray[f64, ndim=1] stat = np.full(n, np.nan)
    cdef cnp.ndarray[f64, ndim=1] rend = np.empty(n)
    cdef Py_ssize_t i, k
    cdef double ui, la, logr
    with nogil:
        for i in range(n):
            ui = u[i]
            la = logA[i]
            logr = 0.0
            for k in range(m):
                ui = ui + inc[i, k]
                logr = ui + la
                if logr >= log_thresh:
                    off[i] = k
                    stat[i] = logr
                    break
                la = _logaddexp(la, -ui)
            u[i] = ui
            logA[i] = la
            rend[i] = logr
    return off, stat, rend


def lb_cusum_scan(cnp.ndarray[f64, ndim=2] inc,
                  cnp.ndarray[f64, ndim=1] u,
                  cnp.ndarray[f64, ndim=1] mn,
                  cnp.ndarray[f64, ndim=1] num,
                  cnp.ndarray[f64, ndim=1] den,
                  long long start_step,
                  double hbar):
    cdef Py_ssize_t n = inc.shape[0]
    cdef Py_ssize_t m = inc.shape[1]
    cdef cnp.ndarray[i64, ndim=1] off = np.full(n, -1, dtype=np.int64)
    cdef cnp.ndarray[f64, ndim=1] stat = np.full(n, np.nan)
    cdef cnp.ndarray[f64, ndim=1] yend = np.empty(n)
    cdef Py_ssize_t i, k
    cdef double ui, mi, y, s, acc_n, acc_d
    with nogil:
        for i in range(n):
            ui = u[i]
            mi = mn[i]
            acc_n = num[i]
            acc_d = den[i]
            y = 0.0
            for k in range(m):
                ui = ui + inc[i, k]
                y = ui - mi
                if y >= hbar:
                    off[i] = k
                    stat[i] = y
                    break
                s = exp(y)
                acc_n = acc_n + (s if s > 1.0 else 1.0)
                acc_d = acc_d + (1.0 - s if s < 1.0 else 0.0)
                if ui < mi:
                    mi = ui
            u[i] = ui
            mn[i] = mi
            num[i] = acc_n
            den[i] = acc_d
            yend[i] = y
    return off, stat, yend


def lb_until_scan(cnp.ndarray[f64, ndim=2] inc,
                  cnp.ndarray[f64, ndim=1] u,
                  cnp.ndarray[f64, ndim=1] mn,
                  cnp.ndarray[f64, ndim=1] num,
                  cnp.ndarray[f64, ndim=1] den,
                  long long start_step,
                  cnp.ndarray[i64, ndim=1] stop_steps):
    cdef Py_ssize_t n = inc.shape[0]
    cdef Py_ssize_t m = inc.shape[1]
    cdef Py_ssize_t i, k
    cdef double ui, mi, y, s, acc_n, acc_d
    cdef i64 g
    with nogil:
        for i in range(n):
            ui = u[i]
            mi = mn[i]
            acc_n = num[i]
            acc_d = den[i]
            for k in range(m):
                g = start_step + k + 1
                ui = ui + inc[i, k]
                y = ui - mi
                if g < stop_steps[i]:
                    s = exp(y)
                    acc_n = acc_n + (s if s > 1.0 else 1.0)
                    acc_d = acc_d + (1.0 - s if s < 1.0 else 0.0)
                if ui < mi:
                    mi = ui
            u[i] = ui
            mn[i] = mi
            num[i] = acc_n
            den[i] = acc_d
