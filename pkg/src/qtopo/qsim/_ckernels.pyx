# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled gate kernels; same signatures as ``_pykernels``."""
from libc.math cimport cos, sin, sqrt
from libc.stdlib cimport malloc, free

ctypedef double complex cplx

cdef enum:
    C_RY = 0
    C_X = 1
    C_H = 2
    C_CZ = 3
    C_PERM = 4

RY, X, H, CZ, PERM = C_RY, C_X, C_H, C_CZ, C_PERM


cdef void _ry(cplx* a, int nq, int q, double theta) noexcept nogil:
    cdef Py_ssize_t stride = (<Py_ssize_t>1) << (nq - 1 - q)
    cdef Py_ssize_t dim = (<Py_ssize_t>1) << nq
    cdef Py_ssize_t base = 0, k, i0, i1
    cdef double c = cos(0.5 * theta), s = sin(0.5 * theta)
    cdef cplx a0, a1
    while base < dim:
        for k in range(stride):
            i0 = base + k
            i1 = i0 + stride
            a0 = a[i0]
            a1 = a[i1]
            a[i0] = c * a0 - s * a1
            a[i1] = s * a0 + c * a1
        base += 2 * stride


cdef void _h(cplx* a, int nq, int q) noexcept nogil:
    cdef Py_ssize_t stride = (<Py_ssize_t>1) << (nq - 1 - q)
    cdef Py_ssize_t dim = (<Py_ssize_t>1) << nq
    cdef Py_ssize_t base = 0, k, i0, i1
    cdef double r = 1.0 / sqrt(2.0)
    cdef cplx a0, a1
    while base < dim:
        for k in range(stride):
            i0 = base + k
            i1 = i0 + stride
            a0 = a[i0]
            a1 = a[i1]
            a[i0] = (a0 + a1) * r
            a[i1] = (a0 - a1) * r
        base += 2 * stride


cdef void _x(cplx* a, int nq, int q) noexcept nogil:
    cdef Py_ssize_t stride = (<Py_ssize_t>1) << (nq - 1 - q)
    cdef Py_ssize_t dim = (<Py_ssize_t>1) << nq
    cdef Py_ssize_t base = 0, k, i0
    cdef cplx t
    while base < dim:
        for k in range(stride):
            i0 = base + k
            t = a[i0]
            a[i0] = a[i0 + stride]
            a[i0 + stride] = t
        base += 2 * stride


cdef void _cz(cplx* a, int nq, int q1, int q2) noexcept nogil:
    cdef Py_ssize_t dim = (<Py_ssize_t>1) << nq
    cdef Py_ssize_t mask = ((<Py_ssize_t>1) << (nq - 1 - q1)) | ((<Py_ssize_t>1) << (nq - 1 - q2))
    cdef Py_ssize_t i
    for i in range(dim):
        if (i & mask) == mask:
            a[i] = -a[i]


cdef int _perm(cplx* a, int nq, int q0, int width, const long long* perm) noexcept nogil:
    cdef Py_ssize_t dim = (<Py_ssize_t>1) << nq
    cdef int lo_bits = nq - q0 - width
    cdef Py_ssize_t lo_mask = ((<Py_ssize_t>1) << lo_bits) - 1
    cdef Py_ssize_t mid_mask = ((<Py_ssize_t>1) << width) - 1
    cdef Py_ssize_t i, hi, mid, lo, j
    cdef cplx* tmp = <cplx*>malloc(dim * sizeof(cplx))
    if tmp == NULL:
        return -1
    for i in range(dim):
        lo = i & lo_mask
        mid = (i >> lo_bits) & mid_mask
        hi = i >> (lo_bits + width)
        j = (hi << (lo_bits + width)) | ((<Py_ssize_t>perm[mid]) << lo_bits) | lo
        tmp[j] = a[i]
    for i in range(dim):
        a[i] = tmp[i]
    free(tmp)
    return 0


def apply_ry(cplx[::1] amps, int nq, int q, double theta):
    _ry(&amps[0], nq, q, theta)


def apply_x(cplx[::1] amps, int nq, int q):
    _x(&amps[0], nq, q)


def apply_h(cplx[::1] amps, int nq, int q):
    _h(&amps[0], nq, q)


def apply_cz(cplx[::1] amps, int nq, int q1, int q2):
    _cz(&amps[0], nq, q1, q2)


def apply_perm(cplx[::1] amps, int nq, int q0, int width, const long long[::1] perm):
    if _perm(&amps[0], nq, q0, width, &perm[0]) != 0:
        raise MemoryError()


def run_program(cplx[::1] amps, int nq, const int[::1] codes, const int[::1] qa,
                const int[::1] qb, const double[::1] angles,
                const long long[::1] perm_data, const long long[::1] perm_offsets):
    cdef Py_ssize_t k, ng = codes.shape[0]
    cdef cplx* a = &amps[0]
    cdef const long long* pd = NULL
    cdef int code, status = 0
    if perm_data.shape[0] > 0:
        pd = &perm_data[0]
    with nogil:
        for k in range(ng):
            code = codes[k]
            if code == C_RY:
                _ry(a, nq, qa[k], angles[k])
            elif code == C_CZ:
                _cz(a, nq, qa[k], qb[k])
            elif code == C_H:
                _h(a, nq, qa[k])
            elif code == C_X:
                _x(a, nq, qa[k])
            elif code == C_PERM:
                status = _perm(a, nq, qa[k], qb[k], pd + perm_offsets[k])
                if status != 0:
                    break
            else:
                status = -2
                break
    if status == -1:
        raise MemoryError()
    if status == -2:
        raise ValueError("unknown gate code")
