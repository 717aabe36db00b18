# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled conv1d kernels. Same contract as ``rawdann._conv_py``.

Per sample: unfold the input into a contiguous column buffer in C, then one
BLAS dgemm. Arrays are row-major; BLAS is column-major, so every product is
issued on the transposed operands.
"""
import numpy as np
from scipy.linalg.cython_blas cimport dgemm


cdef inline void _im2col(const double[:, ::1] x, double[:, ::1] cols,
                         Py_ssize_t K, Py_ssize_t stride) noexcept nogil:
    cdef Py_ssize_t C_in = x.shape[0], T_out = cols.shape[0]
    cdef Py_ssize_t m, c, j, base
    for m in range(T_out):
        base = m * stride
        for c in range(C_in):
            for j in range(K):
                cols[m, c * K + j] = x[c, base + j]


def conv1d_forward(const double[:, :, ::1] x, const double[:, :, ::1] w,
                   const double[::1] b, Py_ssize_t stride):
    cdef Py_ssize_t B = x.shape[0], C_in = x.shape[1], T = x.shape[2]
    cdef Py_ssize_t C_out = w.shape[0], K = w.shape[2]
    cdef Py_ssize_t T_out = (T - K) // stride + 1
    cdef int CK = <int>(C_in * K), m_ = <int>T_out, n_ = <int>C_out
    cdef double one = 1.0, zero = 0.0
    cdef char tr = b'T', nt = b'N'
    out_arr = np.empty((B, C_out, T_out), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef double[:, ::1] cols = np.empty((T_out, C_in * K), dtype=np.float64)
    cdef Py_ssize_t n, o, t
    with nogil:
        for n in range(B):
            _im2col(x[n], cols, K, stride)
            # out[n] (C_out x T_out) = W (C_out x CK) @ cols^T
            dgemm(&tr, &nt, &m_, &n_, &CK, &one, &cols[0, 0], &CK,
                  <double*>&w[0, 0, 0], &CK, &zero, &out[n, 0, 0], &m_)
            for o in range(C_out):
                for t in range(T_out):
                    out[n, o, t] += b[o]
    return out_arr


def conv1d_backward(const double[:, :, ::1] x, const double[:, :, ::1] w,
                    const double[:, :, ::1] grad_out, Py_ssize_t stride):
    cdef Py_ssize_t B = x.shape[0], C_in = x.shape[1], T = x.shape[2]
    cdef Py_ssize_t C_out = w.shape[0], K = w.shape[2]
    cdef Py_ssize_t T_out = grad_out.shape[2]
    cdef int CK = <int>(C_in * K), To = <int>T_out, Co = <int>C_out
    cdef double one = 1.0, zero = 0.0
    cdef char tr = b'T', nt = b'N'
    gx_arr = np.zeros((B, C_in, T), dtype=np.float64)
    gw_arr = np.zeros((C_out, C_in, K), dtype=np.float64)
    gb_arr = np.zeros(C_out, dtype=np.float64)
    cdef double[:, :, ::1] gx = gx_arr
    cdef double[:, :, ::1] gw = gw_arr
    cdef double[::1] gb = gb_arr
    cdef double[:, ::1] cols = np.empty((T_out, C_in * K), dtype=np.float64)
    cdef double[:, ::1] gcols = np.empty((T_out, C_in * K), dtype=np.float64)
    cdef Py_ssize_t n, o, c, j, m, base
    cdef double acc
    with nogil:
        for n in range(B):
            for o in range(C_out):
                acc = 0.0
                for m in range(T_out):
                    acc = acc + grad_out[n, o, m]
                gb[o] += acc
            _im2col(x[n], cols, K, stride)
            # grad_w (C_out x CK) += g_n (C_out x T_out) @ cols
            dgemm(&nt, &nt, &CK, &Co, &To, &one, &cols[0, 0], &CK,
                  <double*>&grad_out[n, 0, 0], &To, &one, &gw[0, 0, 0], &CK)
            # gcols (T_out x CK) = g_n^T @ W
            dgemm(&nt, &tr, &CK, &To, &Co, &one, <double*>&w[0, 0, 0], &CK,
                  <double*>&grad_out[n, 0, 0], &To, &zero, &gcols[0, 0], &CK)
            for m in range(T_out):
                base = m * stride
                for c in range(C_in):
                    for j in range(K):
                        gx[n, c, base + j] += gcols[m, c * K + j]
    return gx_arr, gw_arr, gb_arr
