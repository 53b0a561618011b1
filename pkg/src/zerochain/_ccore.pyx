# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled chain kernels; same API and semantics as ``_pycore``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, erfc, sqrt, fabs, floor

cnp.import_array()

NAME = "cython"

cdef double SQRT_E = 1.6487212707001282
cdef double PHI_SCALE = 4.132731354122493
cdef double INV_SQRT2 = 0.7071067811865475
cdef double UNDERFLOW = -745.0
cdef double NORM_FLOOR = 1e-300

cdef double[::1] _gvals
cdef double[::1] _gslopes
cdef double _glo = 0.25
cdef double _gstep = 1.0
cdef double _gmass = 1.0
cdef Py_ssize_t _gn = 0


def init_gamma_table(values, slopes, double lo, double step, double mass):
    global _gvals, _gslopes, _glo, _gstep, _gmass, _gn
    _gvals = np.array(values, dtype=np.float64, copy=True)
    _gslopes = np.array(slopes, dtype=np.float64, copy=True)
    _glo = lo
    _gstep = step
    _gmass = mass
    _gn = _gvals.shape[0]


cdef inline double c_psi(double t) noexcept nogil:
    cdef double u, e
    if t <= 0.5:
        return 0.0
    u = 2.0 * t - 1.0
    e = 1.0 - 1.0 / (u * u)
    if e < UNDERFLOW:
        return 0.0
    return exp(e)


cdef inline double c_dpsi(double t) noexcept nogil:
    cdef double u, inv2, e
    if t <= 0.5:
        return 0.0
    u = 2.0 * t - 1.0
    inv2 = 1.0 / (u * u)
    e = 1.0 - inv2
    if e < UNDERFLOW:
        return 0.0
    return exp(e) * 4.0 * inv2 / u


cdef inline double c_d2psi(double t) noexcept nogil:
    cdef double u, inv2, e
    if t <= 0.5:
        return 0.0
    u = 2.0 * t - 1.0
    inv2 = 1.0 / (u * u)
    e = 1.0 - inv2
    if e < UNDERFLOW:
        return 0.0
    return exp(e) * (16.0 * inv2 * inv2 * inv2 - 24.0 * inv2 * inv2)


cdef inline double c_phi(double t) noexcept nogil:
    return PHI_SCALE * (0.5 * erfc(-t * INV_SQRT2))


cdef inline double c_dphi(double t) noexcept nogil:
    return SQRT_E * exp(-0.5 * t * t)


cdef inline double c_d2phi(double t) noexcept nogil:
    return -t * SQRT_E * exp(-0.5 * t * t)


cdef inline double c_lam(double t) noexcept nogil:
    cdef double e
    if t <= 0.25 or t >= 0.5:
        return 0.0
    e = -1.0 / (100.0 * (t - 0.25) * (0.5 - t))
    if e < UNDERFLOW:
        return 0.0
    return exp(e)


cdef inline double c_gamma(double t) noexcept nogil:
    cdef double s, u, u2, u3, v
    cdef Py_ssize_t k
    if t <= 0.25:
        return 0.0
    if t >= 0.5:
        return 1.0
    s = (t - _glo) / _gstep
    k = <Py_ssize_t> floor(s)
    if k < 0:
        k = 0
    elif k > _gn - 2:
        k = _gn - 2
    u = s - k
    u2 = u * u
    u3 = u2 * u
    v = ((2 * u3 - 3 * u2 + 1) * _gvals[k]
         + (u3 - 2 * u2 + u) * _gstep * _gslopes[k]
         + (-2 * u3 + 3 * u2) * _gvals[k + 1]
         + (u3 - u2) * _gstep * _gslopes[k + 1])
    # Gamma is monotone: keep the cubic between its node values
    if v < _gvals[k]:
        return _gvals[k]
    if v > _gvals[k + 1]:
        return _gvals[k + 1]
    return v


cdef inline double c_dgamma(double t) noexcept nogil:
    return c_lam(t) / _gmass


cdef inline double c_sign(double t) noexcept nogil:
    if t > 0:
        return 1.0
    if t < 0:
        return -1.0
    return 0.0


cdef inline double c_H(double a, double b) noexcept nogil:
    return c_psi(-a) * c_phi(-b) - c_psi(a) * c_phi(b)


cdef inline double c_h1(double a, double b) noexcept nogil:
    return c_psi(-a) * c_dphi(-b) + c_psi(a) * c_dphi(b)


cdef inline double c_h2(double a, double b) noexcept nogil:
    return c_dpsi(-a) * c_phi(-b) + c_dpsi(a) * c_phi(b)


cdef void _grad_row(const double[::1] x, double[::1] g) noexcept nogil:
    cdef Py_ssize_t T = x.shape[0], k
    cdef double a
    for k in range(T):
        a = 1.0 if k == 0 else x[k - 1]
        g[k] = -c_h1(a, x[k])
        if k < T - 1:
            g[k] -= c_h2(x[k], x[k + 1])


cdef Py_ssize_t _prog(const double[::1] x, double alpha) noexcept nogil:
    cdef Py_ssize_t k
    for k in range(x.shape[0] - 1, -1, -1):
        if fabs(x[k]) > alpha:
            return k + 1
    return 0


cdef void _suffix_norms(const double[::1] x, double[::1] G, double[::1] nrm) noexcept nogil:
    cdef Py_ssize_t T = x.shape[0], k
    cdef double s = 0.0
    for k in range(T):
        G[k] = c_gamma(fabs(x[k]))
    for k in range(T - 1, -1, -1):
        s = s + G[k] * G[k]
        nrm[k] = sqrt(s)


def chain_value(const double[:, ::1] X):
    cdef Py_ssize_t n = X.shape[0], T = X.shape[1], r, k
    cdef double acc, a
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for r in range(n):
            acc = 0.0
            for k in range(T):
                a = 1.0 if k == 0 else X[r, k - 1]
                acc = acc + c_H(a, X[r, k])
            o[r] = acc
    return out


def chain_grad(const double[:, ::1] X):
    cdef Py_ssize_t n = X.shape[0], r
    out = np.empty((n, X.shape[1]))
    cdef double[:, ::1] o = out
    with nogil:
        for r in range(n):
            _grad_row(X[r], o[r])
    return out


def chain_hess_bands(const double[:, ::1] X):
    cdef Py_ssize_t n = X.shape[0], T = X.shape[1], r, k
    cdef double a, b, c
    diag = np.empty((n, T))
    off = np.empty((n, max(T - 1, 0)))
    cdef double[:, ::1] d = diag
    cdef double[:, ::1] o = off
    with nogil:
        for r in range(n):
            for k in range(T):
                a = 1.0 if k == 0 else X[r, k - 1]
                b = X[r, k]
                d[r, k] = -(-c_psi(-a) * c_d2phi(-b) + c_psi(a) * c_d2phi(b))
                if k < T - 1:
                    c = X[r, k + 1]
                    d[r, k] -= -c_d2psi(-b) * c_phi(-c) + c_d2psi(b) * c_phi(c)
                    o[r, k] = c_dpsi(-b) * c_dphi(-c) - c_dpsi(b) * c_dphi(c)
    return diag, off


def theta(const double[:, ::1] X):
    cdef Py_ssize_t n = X.shape[0], T = X.shape[1], r, k
    out = np.empty((n, T))
    cdef double[:, ::1] o = out
    cdef double[::1] G = np.empty(T)
    cdef double[::1] nrm = np.empty(T)
    with nogil:
        for r in range(n):
            _suffix_norms(X[r], G, nrm)
            for k in range(T):
                o[r, k] = c_gamma(1.0 - nrm[k])
    return out


def theta_grad(const double[:, ::1] X, Py_ssize_t j):
    cdef Py_ssize_t n = X.shape[0], T = X.shape[1], r, k
    cdef double s, nrm, c, ax
    out = np.zeros((n, T))
    cdef double[:, ::1] o = out
    with nogil:
        for r in range(n):
            s = 0.0
            for k in range(T - 1, j - 2, -1):
                ax = c_gamma(fabs(X[r, k]))
                s = s + ax * ax
            nrm = sqrt(s)
            if nrm < NORM_FLOOR:
                continue
            c = -c_dgamma(1.0 - nrm) / nrm
            for k in range(j - 1, T):
                ax = fabs(X[r, k])
                o[r, k] = c * c_gamma(ax) * c_dgamma(ax) * c_sign(X[r, k])
    return out


def g_basic(const double[:, ::1] X, const double[::1] m):
    cdef Py_ssize_t n = X.shape[0], T = X.shape[1], r, k, p
    out = np.empty((n, T))
    cdef double[:, ::1] o = out
    with nogil:
        for r in range(n):
            _grad_row(X[r], o[r])
            p = _prog(X[r], 0.25)
            for k in range(p, T):
                o[r, k] = o[r, k] * m[r]
    return out


def g_coord(const double[:, ::1] X, const double[:, ::1] M):
    cdef Py_ssize_t n = X.shape[0], T = X.shape[1], r, k, p
    out = np.empty((n, T))
    cdef double[:, ::1] o = out
    with nogil:
        for r in range(n):
            _grad_row(X[r], o[r])
            p = _prog(X[r], 0.25)
            for k in range(p, T):
                o[r, k] = o[r, k] * M[r, k]
    return out


def g_smooth(const double[:, ::1] X, const double[::1] m):
    cdef Py_ssize_t n = X.shape[0], T = X.shape[1], r, k
    out = np.empty((n, T))
    cdef double[:, ::1] o = out
    cdef double[::1] G = np.empty(T)
    cdef double[::1] nrm = np.empty(T)
    with nogil:
        for r in range(n):
            _grad_row(X[r], o[r])
            _suffix_norms(X[r], G, nrm)
            for k in range(T):
                o[r, k] = o[r, k] * (1.0 + c_gamma(1.0 - nrm[k]) * (m[r] - 1.0))
    return out


def f_stat(const double[:, ::1] X, const double[::1] m):
    cdef Py_ssize_t n = X.shape[0], T = X.shape[1], r, k
    cdef double acc, a
    out = np.empty(n)
    cdef double[::1] o = out
    cdef double[::1] G = np.empty(T)
    cdef double[::1] nrm = np.empty(T)
    with nogil:
        for r in range(n):
            _suffix_norms(X[r], G, nrm)
            acc = 0.0
            for k in range(T):
                a = 1.0 if k == 0 else X[r, k - 1]
                acc = acc + c_H(a, X[r, k]) * (1.0 + c_gamma(1.0 - nrm[k]) * (m[r] - 1.0))
            o[r] = acc
    return out


def g_stat(const double[:, ::1] X, const double[::1] m):
    cdef Py_ssize_t n = X.shape[0], T = X.shape[1], r, k
    cdef double a, b, acc, nu_k, nu_next, ax, c, mm
    out = np.empty((n, T))
    cdef double[:, ::1] o = out
    cdef double[::1] G = np.empty(T)
    cdef double[::1] nrm = np.empty(T)
    with nogil:
        for r in range(n):
            mm = m[r] - 1.0
            _suffix_norms(X[r], G, nrm)
            acc = 0.0
            for k in range(T):
                a = 1.0 if k == 0 else X[r, k - 1]
                b = X[r, k]
                nu_k = 1.0 + c_gamma(1.0 - nrm[k]) * mm
                o[r, k] = -c_h1(a, b) * nu_k
                if k < T - 1:
                    nu_next = 1.0 + c_gamma(1.0 - nrm[k + 1]) * mm
                    o[r, k] -= c_h2(b, X[r, k + 1]) * nu_next
                if nrm[k] >= NORM_FLOOR:
                    c = -c_dgamma(1.0 - nrm[k]) / nrm[k]
                    acc = acc + c_H(a, b) * c
                ax = fabs(b)
                o[r, k] += mm * acc * G[k] * c_dgamma(ax) * c_sign(b)
    return out


def link_terms(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    fa = np.ascontiguousarray(np.broadcast_to(a, np.broadcast(a, b).shape), dtype=np.float64).ravel()
    fb = np.ascontiguousarray(np.broadcast_to(b, np.broadcast(a, b).shape), dtype=np.float64).ravel()
    cdef Py_ssize_t i, n = fa.shape[0]
    H = np.empty(n)
    h1 = np.empty(n)
    h2 = np.empty(n)
    cdef const double[::1] va = fa, vb = fb
    cdef double[::1] vH = H, v1 = h1, v2 = h2
    for i in range(n):
        vH[i] = c_H(va[i], vb[i])
        v1[i] = c_h1(va[i], vb[i])
        v2[i] = c_h2(va[i], vb[i])
    shape = np.broadcast(a, b).shape
    return H.reshape(shape), h1.reshape(shape), h2.reshape(shape)
