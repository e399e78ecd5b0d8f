# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled convolution kernels: C im2col/col2im plus direct BLAS gemm.

Same contracts and layouts as conv_np. Everything between the def
wrappers runs without the GIL so actor-learner threads overlap on
multicore machines.
"""

import numpy as np

from libc.math cimport sqrt
from scipy.linalg.cython_blas cimport dgemm, sgemm

from .common import same_pad

NAME = "cython"

ctypedef fused real:
    float
    double


# Row-major wrappers around Fortran gemm (c and the operands are C-ordered).

cdef inline void gemm_nn(real* a, real* b, real* c, int m, int n, int k, real beta) noexcept nogil:
    # c[m,n] = a[m,k] @ b[k,n] + beta*c
    cdef real one = 1
    cdef char nt = b'N'
    if real is float:
        sgemm(&nt, &nt, &n, &m, &k, &one, <float*>b, &n, <float*>a, &k, <float*>&beta, <float*>c, &n)
    else:
        dgemm(&nt, &nt, &n, &m, &k, &one, <double*>b, &n, <double*>a, &k, <double*>&beta, <double*>c, &n)


cdef inline void gemm_tn(real* a, real* b, real* c, int m, int n, int k, real beta) noexcept nogil:
    # c[m,n] = a[k,m].T @ b[k,n] + beta*c
    cdef real one = 1
    cdef char nt = b'N', tt = b'T'
    if real is float:
        sgemm(&nt, &tt, &n, &m, &k, &one, <float*>b, &n, <float*>a, &m, <float*>&beta, <float*>c, &n)
    else:
        dgemm(&nt, &tt, &n, &m, &k, &one, <double*>b, &n, <double*>a, &m, <double*>&beta, <double*>c, &n)


cdef inline void gemm_nt(real* a, real* b, real* c, int m, int n, int k, real beta) noexcept nogil:
    # c[m,n] = a[m,k] @ b[n,k].T + beta*c
    cdef real one = 1
    cdef char nt = b'N', tt = b'T'
    if real is float:
        sgemm(&tt, &nt, &n, &m, &k, &one, <float*>b, &k, <float*>a, &k, <float*>&beta, <float*>c, &n)
    else:
        dgemm(&tt, &nt, &n, &m, &k, &one, <double*>b, &k, <double*>a, &k, <double*>&beta, <double*>c, &n)


cdef void im2col(real[:, :, ::1] x, real[:, ::1] cols, int kh, int kw,
                 int stride, int pt, int pl, int ho, int wo) noexcept nogil:
    cdef Py_ssize_t H = x.shape[0], W = x.shape[1], C = x.shape[2]
    cdef Py_ssize_t i, j, u, v, ci, ih, iw, row, col
    for i in range(ho):
        for j in range(wo):
            row = i * wo + j
            col = 0
            for u in range(kh):
                ih = i * stride - pt + u
                for v in range(kw):
                    iw = j * stride - pl + v
                    if 0 <= ih < H and 0 <= iw < W:
                        for ci in range(C):
                            cols[row, col + ci] = x[ih, iw, ci]
                    else:
                        for ci in range(C):
                            cols[row, col + ci] = 0
                    col += C


cdef void col2im_add(real[:, ::1] cols, real[:, :, ::1] gx, int kh, int kw,
                     int stride, int pt, int pl, int ho, int wo) noexcept nogil:
    cdef Py_ssize_t H = gx.shape[0], W = gx.shape[1], C = gx.shape[2]
    cdef Py_ssize_t i, j, u, v, ci, ih, iw, row, col
    for i in range(ho):
        for j in range(wo):
            row = i * wo + j
            col = 0
            for u in range(kh):
                ih = i * stride - pt + u
                for v in range(kw):
                    iw = j * stride - pl + v
                    if 0 <= ih < H and 0 <= iw < W:
                        for ci in range(C):
                            gx[ih, iw, ci] += cols[row, col + ci]
                    col += C


cdef void add_bias(real[:, ::1] y, real[::1] b) noexcept nogil:
    cdef Py_ssize_t m = y.shape[0], n = y.shape[1], i, j
    for i in range(m):
        for j in range(n):
            y[i, j] += b[j]


def _prep(a, dtype=None):
    return np.ascontiguousarray(a, dtype=dtype)


def conv2d_fwd(x, w, b, int stride):
    cdef int kh = w.shape[0], kw = w.shape[1], cin = w.shape[2], cout = w.shape[3]
    cdef int pt, pl, ho, wo
    ho, pt = same_pad(x.shape[1], kh, stride)
    wo, pl = same_pad(x.shape[2], kw, stride)
    x = _prep(x)
    w = _prep(w, x.dtype)
    if b is None:
        b = np.zeros(cout, dtype=x.dtype)
    b = _prep(b, x.dtype)
    cdef int B = x.shape[0], m = ho * wo, k = kh * kw * cin
    y = np.empty((B, ho, wo, cout), dtype=x.dtype)
    cols = np.empty((m, k), dtype=x.dtype)
    cdef float[:, :, :, ::1] xf
    cdef float[:, ::1] wf, cf
    cdef float[::1] bf
    cdef float[:, :, ::1] yf
    cdef double[:, :, :, ::1] xd
    cdef double[:, ::1] wd, cd
    cdef double[::1] bd
    cdef double[:, :, ::1] yd
    if x.dtype == np.float32:
        xf, wf, bf, yf, cf = x, w.reshape(k, cout), b, y.reshape(B, m, cout), cols
        with nogil:
            _fwd_run[float](xf, wf, bf, yf, cf, kh, kw, stride, pt, pl, ho, wo)
    else:
        xd, wd, bd, yd, cd = x, w.reshape(k, cout), b, y.reshape(B, m, cout), cols
        with nogil:
            _fwd_run[double](xd, wd, bd, yd, cd, kh, kw, stride, pt, pl, ho, wo)
    return y


cdef void _fwd_run(real[:, :, :, ::1] x, real[:, ::1] w2, real[::1] b,
                   real[:, :, ::1] y2, real[:, ::1] cols,
                   int kh, int kw, int stride, int pt, int pl, int ho, int wo) noexcept nogil:
    cdef int B = x.shape[0], m = cols.shape[0], k = cols.shape[1], n = w2.shape[1]
    cdef Py_ssize_t i
    for i in range(B):
        im2col(x[i], cols, kh, kw, stride, pt, pl, ho, wo)
        gemm_nn(&cols[0, 0], &w2[0, 0], &y2[i, 0, 0], m, n, k, <real>0)
        add_bias(y2[i], b)


def conv2d_bwd_input(gy, w, int stride, int h, int wd):
    cdef int kh = w.shape[0], kw = w.shape[1], cin = w.shape[2], cout = w.shape[3]
    cdef int pt, pl
    _, pt = same_pad(h, kh, stride)
    _, pl = same_pad(wd, kw, stride)
    gy = _prep(gy)
    w = _prep(w, gy.dtype)
    cdef int B = gy.shape[0], ho = gy.shape[1], wo = gy.shape[2]
    cdef int m = ho * wo, k = kh * kw * cin
    gx = np.zeros((B, h, wd, cin), dtype=gy.dtype)
    gcols = np.empty((m, k), dtype=gy.dtype)
    cdef float[:, :, ::1] gyf
    cdef float[:, ::1] wf, cf
    cdef float[:, :, :, ::1] gxf
    cdef double[:, :, ::1] gyd
    cdef double[:, ::1] wd_, cd
    cdef double[:, :, :, ::1] gxd
    if gy.dtype == np.float32:
        gyf, wf, gxf, cf = gy.reshape(B, m, cout), w.reshape(k, cout), gx, gcols
        with nogil:
            _bwd_input_run[float](gyf, wf, gxf, cf, kh, kw, stride, pt, pl, ho, wo)
    else:
        gyd, wd_, gxd, cd = gy.reshape(B, m, cout), w.reshape(k, cout), gx, gcols
        with nogil:
            _bwd_input_run[double](gyd, wd_, gxd, cd, kh, kw, stride, pt, pl, ho, wo)
    return gx


cdef void _bwd_input_run(real[:, :, ::1] gy2, real[:, ::1] w2, real[:, :, :, ::1] gx,
                         real[:, ::1] gcols, int kh, int kw, int stride,
                         int pt, int pl, int ho, int wo) noexcept nogil:
    cdef int B = gx.shape[0], m = gcols.shape[0], k = gcols.shape[1], n = w2.shape[1]
    cdef Py_ssize_t i
    for i in range(B):
        gemm_nt(&gy2[i, 0, 0], &w2[0, 0], &gcols[0, 0], m, k, n, <real>0)
        col2im_add(gcols, gx[i], kh, kw, stride, pt, pl, ho, wo)


def conv2d_bwd_weights(x, gy, int stride, int kh, int kw):
    cdef int pt, pl
    _, pt = same_pad(x.shape[1], kh, stride)
    _, pl = same_pad(x.shape[2], kw, stride)
    x = _prep(x)
    gy = _prep(gy, x.dtype)
    cdef int B = x.shape[0], cin = x.shape[3], cout = gy.shape[3]
    cdef int ho = gy.shape[1], wo = gy.shape[2]
    cdef int m = ho * wo, k = kh * kw * cin
    gw = np.zeros((kh, kw, cin, cout), dtype=x.dtype)
    cols = np.empty((m, k), dtype=x.dtype)
    cdef float[:, :, :, ::1] xf
    cdef float[:, :, ::1] gyf
    cdef float[:, ::1] gwf, cf
    cdef double[:, :, :, ::1] xd
    cdef double[:, :, ::1] gyd
    cdef double[:, ::1] gwd, cd
    if x.dtype == np.float32:
        xf, gyf, gwf, cf = x, gy.reshape(B, m, cout), gw.reshape(k, cout), cols
        with nogil:
            _bwd_weights_run[float](xf, gyf, gwf, cf, kh, kw, stride, pt, pl, ho, wo)
    else:
        xd, gyd, gwd, cd = x, gy.reshape(B, m, cout), gw.reshape(k, cout), cols
        with nogil:
            _bwd_weights_run[double](xd, gyd, gwd, cd, kh, kw, stride, pt, pl, ho, wo)
    return gw


cdef void _bwd_weights_run(real[:, :, :, ::1] x, real[:, :, ::1] gy2, real[:, ::1] gw2,
                           real[:, ::1] cols, int kh, int kw, int stride,
                           int pt, int pl, int ho, int wo) noexcept nogil:
    cdef int B = x.shape[0], m = cols.shape[0], k = cols.shape[1], n = gw2.shape[1]
    cdef Py_ssize_t i
    for i in range(B):
        im2col(x[i], cols, kh, kw, stride, pt, pl, ho, wo)
        gemm_tn(&cols[0, 0], &gy2[i, 0, 0], &gw2[0, 0], k, n, m, <real>1)


# ---------------------------------------------------------------------------
# fused optimizer updates (also hot: per-block, per asynchronous step)
# ---------------------------------------------------------------------------

cdef double _sq_sum(real* g, Py_ssize_t n) noexcept nogil:
    cdef double acc = 0
    cdef Py_ssize_t i
    for i in range(n):
        acc += <double>g[i] * <double>g[i]
    return acc


def sq_sum(g):
    cdef float[::1] gf
    cdef double[::1] gd
    cdef double out
    g = np.ascontiguousarray(g).reshape(-1)
    if g.size == 0:
        return 0.0
    if g.dtype == np.float32:
        gf = g
        with nogil:
            out = _sq_sum[float](&gf[0], gf.shape[0])
    else:
        gd = g
        with nogil:
            out = _sq_sum[double](&gd[0], gd.shape[0])
    return out


cdef void _rmsprop(real* value, real* ms, real* g, Py_ssize_t n, double scale,
                   double lr, double decay, double eps) noexcept nogil:
    cdef Py_ssize_t i
    cdef double gi
    for i in range(n):
        gi = <double>g[i] * scale
        ms[i] = <real>(decay * <double>ms[i] + (1.0 - decay) * gi * gi)
        value[i] -= <real>(lr * gi / sqrt(<double>ms[i] + eps))


def rmsprop_update(value, ms, g, double scale, double lr, double decay, double eps):
    """value/ms updated in place; g is scaled by `scale` (norm clipping)."""
    cdef float[::1] vf, mf, gf
    cdef double[::1] vd, md, gd
    if value.dtype == np.float32:
        vf, mf, gf = value.reshape(-1), ms.reshape(-1), np.ascontiguousarray(g).reshape(-1)
        with nogil:
            _rmsprop[float](&vf[0], &mf[0], &gf[0], vf.shape[0], scale, lr, decay, eps)
    else:
        vd, md, gd = value.reshape(-1), ms.reshape(-1), np.ascontiguousarray(g).reshape(-1)
        with nogil:
            _rmsprop[double](&vd[0], &md[0], &gd[0], vd.shape[0], scale, lr, decay, eps)


cdef void _adam(real* value, real* m, real* v, real* g, Py_ssize_t n, double scale,
                double lr, double b1, double b2, double eps, double c1, double c2) noexcept nogil:
    cdef Py_ssize_t i
    cdef double gi, mh, vh
    for i in range(n):
        gi = <double>g[i] * scale
        m[i] = <real>(b1 * <double>m[i] + (1.0 - b1) * gi)
        v[i] = <real>(b2 * <double>v[i] + (1.0 - b2) * gi * gi)
        mh = <double>m[i] / c1
        vh = <double>v[i] / c2
        value[i] -= <real>(lr * mh / (sqrt(vh) + eps))


def adam_update(value, m, v, g, double scale, double lr, double b1, double b2,
                double eps, long t):
    cdef double c1 = 1.0 - b1 ** t
    cdef double c2 = 1.0 - b2 ** t
    cdef float[::1] vf, mf, vvf, gf
    cdef double[::1] vd, md, vvd, gd
    if value.dtype == np.float32:
        vf, mf, vvf = value.reshape(-1), m.reshape(-1), v.reshape(-1)
        gf = np.ascontiguousarray(g).reshape(-1)
        with nogil:
            _adam[float](&vf[0], &mf[0], &vvf[0], &gf[0], vf.shape[0],
                         scale, lr, b1, b2, eps, c1, c2)
    else:
        vd, md, vvd = value.reshape(-1), m.reshape(-1), v.reshape(-1)
        gd = np.ascontiguousarray(g).reshape(-1)
        with nogil:
            _adam[double](&vd[0], &md[0], &vvd[0], &gd[0], vd.shape[0],
                          scale, lr, b1, b2, eps, c1, c2)
