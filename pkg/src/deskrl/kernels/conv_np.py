"""Pure-NumPy convolution kernels (fallback backend).

Layouts: inputs [B, H, W, Cin], weights [kh, kw, Cin, Cout], outputs
[B, Ho, Wo, Cout]. The forward and weight-gradient paths use a strided
im2col view plus tensordot; the input-gradient path scatters per kernel
tap. Results agree with the Cython backend to accumulation rounding.
"""

import numpy as np
from numpy.lib.stride_tricks import as_strided

from .common import same_pad

NAME = "numpy"


def _padded(x, kh, kw, stride):
    b, h, w, c = x.shape
    ho, pt = same_pad(h, kh, stride)
    wo, pl = same_pad(w, kw, stride)
    pb = max((ho - 1) * stride + kh - h - pt, 0)
    pr = max((wo - 1) * stride + kw - w - pl, 0)
    xp = np.pad(x, ((0, 0), (pt, pb), (pl, pr), (0, 0)))
    return xp, ho, wo, pt, pl


def _col_view(xp, ho, wo, kh, kw, stride):
    b, _, _, c = xp.shape
    sb, sh, sw, sc = xp.strides
    return as_strided(
        xp,
        shape=(b, ho, wo, kh, kw, c),
        strides=(sb, sh * stride, sw * stride, sh, sw, sc),
        writeable=False,
    )


def conv2d_fwd(x, w, b, stride):
    kh, kw, cin, cout = w.shape
    xp, ho, wo, _, _ = _padded(x, kh, kw, stride)
    cols = _col_view(xp, ho, wo, kh, kw, stride)
    y = np.tensordot(cols, w, axes=([3, 4, 5], [0, 1, 2]))
    if b is not None:
        y += b
    return np.ascontiguousarray(y, dtype=x.dtype)


def conv2d_bwd_input(gy, w, stride, h, wd):
    kh, kw, cin, cout = w.shape
    b, ho, wo, _ = gy.shape
    _, pt = same_pad(h, kh, stride)
    _, pl = same_pad(wd, kw, stride)
    hp = max((ho - 1) * stride + kh, h + pt)
    wp = max((wo - 1) * stride + kw, wd + pl)
    gxp = np.zeros((b, hp, wp, cin), dtype=gy.dtype)
    hi = (ho - 1) * stride + 1
    wi = (wo - 1) * stride + 1
    for u in range(kh):
        for v in range(kw):
            # gy [B,Ho,Wo,Co] @ w[u,v].T [Co,Ci] accumulated at this tap
            gxp[:, u:u + hi:stride, v:v + wi:stride, :] += gy @ w[u, v].T
    return np.ascontiguousarray(gxp[:, pt:pt + h, pl:pl + wd, :])


def conv2d_bwd_weights(x, gy, stride, kh, kw):
    xp, ho, wo, _, _ = _padded(x, kh, kw, stride)
    cols = _col_view(xp, ho, wo, kh, kw, stride)
    gw = np.tensordot(cols, gy, axes=([0, 1, 2], [0, 1, 2]))
    return np.ascontiguousarray(gw, dtype=x.dtype)


def sq_sum(g):
    flat = g.reshape(-1)
    return float(np.dot(flat.astype(np.float64, copy=False), flat.astype(np.float64, copy=False)))


def rmsprop_update(value, ms, g, scale, lr, decay, eps):
    g = g * scale if scale != 1.0 else g
    ms *= decay
    ms += (1.0 - decay) * g * g
    value -= lr * g / np.sqrt(ms + eps)


def adam_update(value, m, v, g, scale, lr, b1, b2, eps, t):
    g = g * scale if scale != 1.0 else g
    m *= b1
    m += (1.0 - b1) * g
    v *= b2
    v += (1.0 - b2) * g * g
    mhat = m / (1.0 - b1 ** t)
    vhat = v / (1.0 - b2 ** t)
    value -= lr * mhat / (np.sqrt(vhat) + eps)
