# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; see ``_pykernels`` for the reference semantics."""
import numpy as np

from libc.math cimport atan2, cos, fabs, sin, sqrt
from libc.stdlib cimport free, malloc
from scipy.linalg.cython_lapack cimport dsyev


cdef inline double complex _cdot2(double complex[:, :, ::1] a, Py_ssize_t i, Py_ssize_t j,
                                  double complex[:, :, ::1] b, Py_ssize_t k, Py_ssize_t l) noexcept nogil:
    return a[i, j, 0].conjugate() * b[k, l, 0] + a[i, j, 1].conjugate() * b[k, l, 1]


def plaquette_sum(double complex[:, :, ::1] right, double complex[:, :, ::1] left):
    cdef Py_ssize_t nk = right.shape[0], nq = right.shape[1]
    cdef Py_ssize_t i, j, ip, jp
    cdef double complex uk, uq, uk_up, uq_right, w
    cdef double f, total = 0.0, fmax = 0.0
    with nogil:
        for i in range(nk):
            ip = i + 1 if i + 1 < nk else 0
            for j in range(nq):
                jp = j + 1 if j + 1 < nq else 0
                # link moduli do not change the plaquette phase
                uk = _cdot2(left, i, j, right, ip, j)
                uq = _cdot2(left, i, j, right, i, jp)
                uq_right = _cdot2(left, ip, j, right, ip, jp)
                uk_up = _cdot2(left, i, jp, right, ip, jp)
                w = uk * uq_right * uk_up.conjugate() * uq.conjugate()
                f = atan2(w.imag, w.real)
                total += f
                if fabs(f) > fmax:
                    fmax = fabs(f)
    return total, fmax


cdef void _fill_hermitian(double* a, int n, double delta, double V, double link) noexcept nogil:
    # column-major symmetric matrix D H D^-1 (sites 1..n stored 0..n-1)
    cdef int i
    cdef double t
    for i in range(n * n):
        a[i] = 0.0
    for i in range(n):
        # site l = i + 1: onsite -V (-1)^l; bond l joins l and l + 1
        if (i + 1) % 2 == 0:
            a[i + i * n] = -V
            t = 0.5 * (1.0 + delta)
        else:
            a[i + i * n] = V
            t = 0.5 * (1.0 - delta)
        if i == n - 1:
            t = t * link
            a[(n - 1) + 0 * n] += t
            a[0 + (n - 1) * n] += t
        else:
            a[i + (i + 1) * n] = t
            a[(i + 1) + i * n] = t


cdef int _eigh(double* a, double* w, double* work, int lwork, int n) noexcept nogil:
    cdef char jobz = b'V'
    cdef char uplo = b'U'
    cdef int info = 0
    dsyev(&jobz, &uplo, &n, a, &n, w, work, &lwork, &info)
    return info


cdef void _propagate(double complex* x, double* a, double* w, double dt,
                     double complex* tmp, int n) noexcept nogil:
    # x <- U exp(-i E dt) U^T x
    cdef int i, j
    cdef double complex acc
    cdef double ph
    for j in range(n):
        acc = 0.0
        for i in range(n):
            acc = acc + a[i + j * n] * x[i]
        ph = -w[j] * dt
        tmp[j] = acc * (cos(ph) + 1j * sin(ph))
    for i in range(n):
        acc = 0.0
        for j in range(n):
            acc = acc + a[i + j * n] * tmp[j]
        x[i] = acc


def evolve_chain(int N, double lam, double link,
                 double[::1] d_mid, double[::1] v_mid,
                 double[::1] d_s, double[::1] v_s, double dt,
                 double complex[::1] right0, double complex[::1] left0,
                 int branch, int stride):
    cdef int n = 2 * N
    cdef Py_ssize_t nsamp = d_s.shape[0]
    cdef Py_ssize_t nstore = len(range(0, nsamp, stride)) + (0 if (nsamp - 1) % stride == 0 else 1)
    rights_arr = np.empty((nstore, n), dtype=complex)
    lefts_arr = np.empty((nstore, n), dtype=complex)
    currents_arr = np.empty((nsamp, n), dtype=complex)
    fidelity_arr = np.empty(nsamp, dtype=float)
    overlap_arr = np.empty(nsamp, dtype=complex)
    cdef double complex[:, ::1] rights = rights_arr
    cdef double complex[:, ::1] lefts = lefts_arr
    cdef double complex[:, ::1] currents = currents_arr
    cdef double[::1] fidelity = fidelity_arr
    cdef double complex[::1] overlap = overlap_arr

    cdef int lwork = 66 * n
    cdef double* a = <double*> malloc(n * n * sizeof(double))
    cdef double* w = <double*> malloc(n * sizeof(double))
    cdef double* work = <double*> malloc(lwork * sizeof(double))
    cdef double* dsim = <double*> malloc(n * sizeof(double))
    cdef double* fwd = <double*> malloc(n * sizeof(double))
    cdef double* bwd = <double*> malloc(n * sizeof(double))
    cdef double complex* r = <double complex*> malloc(n * sizeof(double complex))
    cdef double complex* l = <double complex*> malloc(n * sizeof(double complex))
    cdef double complex* tmp = <double complex*> malloc(n * sizeof(double complex))
    if not (a and w and work and dsim and fwd and bwd and r and l and tmp):
        raise MemoryError()

    cdef int i, ip, info = 0
    cdef Py_ssize_t s, slot = 0
    cdef double amp, sgn
    cdef double complex pl, pr, ov
    try:
        with nogil:
            for i in range(n):
                dsim[i] = lam if (i + 1) % 2 == 0 else 1.0
                r[i] = right0[i]
                l[i] = left0[i]
            for s in range(nsamp):
                if s > 0:
                    _fill_hermitian(a, n, d_mid[s - 1], v_mid[s - 1], link)
                    info = _eigh(a, w, work, lwork, n)
                    if info != 0:
                        break
                    for i in range(n):
                        r[i] = r[i] * dsim[i]
                        l[i] = l[i] / dsim[i]
                    _propagate(r, a, w, dt, tmp, n)
                    _propagate(l, a, w, dt, tmp, n)
                    for i in range(n):
                        r[i] = r[i] / dsim[i]
                        l[i] = l[i] * dsim[i]
                _fill_hermitian(a, n, d_s[s], v_s[s], link)
                info = _eigh(a, w, work, lwork, n)
                if info != 0:
                    break
                pl = 0.0
                pr = 0.0
                ov = 0.0
                for i in range(n):
                    pl = pl + a[i + branch * n] * l[i] / dsim[i]
                    pr = pr + a[i + branch * n] * r[i] * dsim[i]
                    ov = ov + l[i].conjugate() * r[i]
                pl = pl.conjugate() * pr
                fidelity[s] = sqrt(sqrt(pl.real * pl.real + pl.imag * pl.imag))
                overlap[s] = ov
                for i in range(n):
                    sgn = 1.0 if (i + 1) % 2 == 0 else -1.0
                    amp = 0.5 * (1.0 + sgn * d_s[s])
                    if sgn > 0:
                        fwd[i] = amp / lam
                        bwd[i] = amp * lam
                    else:
                        fwd[i] = amp * lam
                        bwd[i] = amp / lam
                fwd[n - 1] *= link
                bwd[n - 1] *= link
                for i in range(n):
                    ip = i + 1 if i + 1 < n else 0
                    currents[s, i] = -1j * (l[i].conjugate() * fwd[i] * r[ip]
                                            - l[ip].conjugate() * bwd[i] * r[i])
                if s % stride == 0 or s == nsamp - 1:
                    for i in range(n):
                        rights[slot, i] = r[i]
                        lefts[slot, i] = l[i]
                    slot += 1
        if info != 0:
            raise RuntimeError(f"dsyev failed with info={info}")
    finally:
        free(a); free(w); free(work); free(dsim); free(fwd); free(bwd)
        free(r); free(l); free(tmp)
    return rights_arr, lefts_arr, currents_arr, fidelity_arr, overlap_arr
