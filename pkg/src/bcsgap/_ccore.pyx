# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot kernels in ``_pycore``; same signatures and semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, tanh, exp, log, fabs, hypot, pow
from libc.float cimport DBL_EPSILON, DBL_MIN

cnp.import_array()

NAME = "cython"

cdef double G_TAYLOR_SWITCH = 1e-2

cdef double[8] XGK = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0]
cdef double[8] WGK = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714]
cdef double[4] WG = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327]

cdef enum:
    MAX_PANELS = 2000


cdef inline double _phi(double xi, double u, double T) noexcept nogil:
    cdef double E = hypot(xi, u)
    if T == 0.0:
        return u / E
    return u * tanh(E / (2.0 * T)) / E


cdef inline void _phi_derivs(double xi, double u, double T,
                             double* phi, double* dphi, double* dT) noexcept nogil:
    cdef double E = hypot(xi, u)
    cdef double t, q, sech2, edge
    if T == 0.0:
        phi[0] = u / E
        dphi[0] = xi * xi / (E * E * E)
        dT[0] = 0.0
        return
    t = tanh(E / (2.0 * T))
    # 1 - t^2 cancels once t is close to 1
    q = exp(-E / T)
    sech2 = 4.0 * q / ((1.0 + q) * (1.0 + q))
    phi[0] = u * t / E
    # 2 T E can underflow to zero when sech2 already has
    edge = 0.0 if sech2 == 0.0 else sech2 / (2.0 * T * E)
    dphi[0] = t / E + (u * u / E) * (edge - t / (E * E))
    dT[0] = 0.0 if sech2 == 0.0 else -u * sech2 / (2.0 * T * T)


def gap_phi(xi, u, double T):
    cdef const double[::1] xv = np.ascontiguousarray(xi, dtype=np.float64).ravel()
    cdef const double[::1] uv = np.ascontiguousarray(np.broadcast_to(u, np.shape(xi)), dtype=np.float64).ravel()
    cdef Py_ssize_t n = xv.shape[0], j
    out = np.empty(n)
    cdef double[::1] ov = out
    for j in range(n):
        ov[j] = _phi(xv[j], uv[j], T)
    return out.reshape(np.shape(xi))


def gap_phi_derivs(xi, u, double T):
    cdef const double[::1] xv = np.ascontiguousarray(xi, dtype=np.float64).ravel()
    cdef const double[::1] uv = np.ascontiguousarray(np.broadcast_to(u, np.shape(xi)), dtype=np.float64).ravel()
    cdef Py_ssize_t n = xv.shape[0], j
    phi = np.empty(n)
    dphi = np.empty(n)
    dT = np.empty(n)
    cdef double[::1] pv = phi, dv = dphi, tv = dT
    for j in range(n):
        _phi_derivs(xv[j], uv[j], T, &pv[j], &dv[j], &tv[j])
    shape = np.shape(xi)
    return phi.reshape(shape), dphi.reshape(shape), dT.reshape(shape)


def nystrom_apply(kmat, weights, xi, u, double T):
    cdef const double[:, ::1] K = np.ascontiguousarray(kmat, dtype=np.float64)
    cdef const double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef const double[::1] x = np.ascontiguousarray(xi, dtype=np.float64)
    cdef const double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], j
    wphi_arr = np.empty(n)
    cdef double[::1] wphi = wphi_arr
    with nogil:
        for j in range(n):
            wphi[j] = w[j] * _phi(x[j], uv[j], T)
    # the matrix-vector product goes to BLAS
    return np.asarray(K) @ wphi_arr


def nystrom_system(kmat, weights, xi, u, double T):
    cdef const double[:, ::1] K = np.ascontiguousarray(kmat, dtype=np.float64)
    cdef const double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef const double[::1] x = np.ascontiguousarray(xi, dtype=np.float64)
    cdef const double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], m = K.shape[0], i, j
    cdef double acc, acc_t, p, dp, dt
    wphi_arr = np.empty(n)
    wdphi_arr = np.empty(n)
    wdt_arr = np.empty(n)
    Bu = np.empty(m)
    dBdT = np.empty(m)
    jac = np.empty((m, n))
    cdef double[::1] wphi = wphi_arr, wdphi = wdphi_arr, wdt = wdt_arr
    cdef double[::1] bv = Bu, tv = dBdT
    cdef double[:, ::1] J = jac
    with nogil:
        for j in range(n):
            _phi_derivs(x[j], uv[j], T, &p, &dp, &dt)
            wphi[j] = w[j] * p
            wdphi[j] = w[j] * dp
            wdt[j] = w[j] * dt
        for i in range(m):
            acc = 0.0
            acc_t = 0.0
            for j in range(n):
                acc += K[i, j] * wphi[j]
                acc_t += K[i, j] * wdt[j]
                J[i, j] = K[i, j] * wdphi[j]
            bv[i] = acc
            tv[i] = acc_t
    return Bu, jac, dBdT


cdef inline double _gap_integrand(double s, double T, double d2) noexcept nogil:
    cdef double xi = exp(s)
    cdef double E = sqrt(xi * xi + d2)
    if T == 0.0:
        return xi / E
    return tanh(E / (2.0 * T)) * xi / E


cdef void _gk15(double lo, double hi, double T, double d2,
                double* result, double* error) noexcept nogil:
    cdef double c = 0.5 * (lo + hi)
    cdef double h = 0.5 * (hi - lo)
    cdef double fv[15]
    cdef int k
    cdef double resk, resg, resabs, resasc, mean, err
    for k in range(7):
        fv[k] = _gap_integrand(c - h * XGK[k], T, d2)
        fv[14 - k] = _gap_integrand(c + h * XGK[k], T, d2)
    fv[7] = _gap_integrand(c, T, d2)
    resk = WGK[7] * fv[7]
    resg = WG[3] * fv[7]
    resabs = WGK[7] * fabs(fv[7])
    for k in range(7):
        resk += WGK[k] * (fv[k] + fv[14 - k])
        resabs += WGK[k] * (fabs(fv[k]) + fabs(fv[14 - k]))
    for k in range(3):
        resg += WG[k] * (fv[2 * k + 1] + fv[13 - 2 * k])
    mean = 0.5 * resk
    resasc = WGK[7] * fabs(fv[7] - mean)
    for k in range(7):
        resasc += WGK[k] * (fabs(fv[k] - mean) + fabs(fv[14 - k] - mean))
    resk *= h
    resg *= h
    resabs *= fabs(h)
    resasc *= fabs(h)
    err = fabs(resk - resg)
    if resasc != 0.0 and err != 0.0:
        err = resasc * min(1.0, pow(200.0 * err / resasc, 1.5))
    if resabs > DBL_MIN / (50.0 * DBL_EPSILON):
        err = max(50.0 * DBL_EPSILON * resabs, err)
    result[0] = resk
    error[0] = err


def gap_integral(double T, double delta, double a, double b, double tol):
    cdef double plo[MAX_PANELS]
    cdef double phi_[MAX_PANELS]
    cdef double pval[MAX_PANELS]
    cdef double perr[MAX_PANELS]
    cdef int npan = 1, k, worst
    cdef double d2 = delta * delta
    cdef double total, total_err, lo, hi, mid, v1, e1, v2, e2
    cdef long evaluations = 15
    with nogil:
        plo[0] = log(a)
        phi_[0] = log(b)
        _gk15(plo[0], phi_[0], T, d2, &pval[0], &perr[0])
        total = pval[0]
        total_err = perr[0]
        while total_err > tol and npan < MAX_PANELS:
            worst = 0
            for k in range(1, npan):
                if perr[k] > perr[worst]:
                    worst = k
            lo = plo[worst]
            hi = phi_[worst]
            mid = 0.5 * (lo + hi)
            if not (lo < mid and mid < hi) or perr[worst] <= 50.0 * DBL_EPSILON * fabs(pval[worst]):
                break
            _gk15(lo, mid, T, d2, &v1, &e1)
            _gk15(mid, hi, T, d2, &v2, &e2)
            evaluations += 30
            phi_[worst] = mid
            pval[worst] = v1
            perr[worst] = e1
            plo[npan] = mid
            phi_[npan] = hi
            pval[npan] = v2
            perr[npan] = e2
            npan += 1
            total = 0.0
            total_err = 0.0
            for k in range(npan):
                total += pval[k]
                total_err += perr[k]
    return total, total_err, evaluations


def g_function(eta):
    cdef const double[::1] ev = np.ascontiguousarray(eta, dtype=np.float64).ravel()
    cdef Py_ssize_t n = ev.shape[0], j
    out = np.empty(n)
    cdef double[::1] ov = out
    cdef double e, e2, q, sech2
    with nogil:
        for j in range(n):
            e = ev[j]
            if e < G_TAYLOR_SWITCH:
                e2 = e * e
                ov[j] = -2.0 / 3.0 + e2 * (8.0 / 15.0 + e2 * (-34.0 / 105.0 + e2 * (496.0 / 2835.0)))
            else:
                q = exp(-2.0 * e)
                sech2 = 4.0 * q / ((1.0 + q) * (1.0 + q))
                ov[j] = (sech2 - tanh(e) / e) / (e * e)
    return out.reshape(np.shape(eta))
