"""Hot numeric kernels, each with a numpy path and a numba path.

The ``*_np`` functions are the reference implementations. The ``*_nb``
versions are numba-compiled (either the same body or an explicit-loop
rewrite). The public names at the bottom dispatch on ``USE_NUMBA``.
"""

from __future__ import annotations

import numpy as np

from ._backend import USE_NUMBA, njit

DEGENERATE_TOL = 1e-12


# --------------------------------------------------------------------------
# NIPALS PLS1 on centred data
# --------------------------------------------------------------------------
def _nipals_body(Xc, yc, n_components, tol):
    n, d = Xc.shape
    X = Xc.copy()
    y = yc.copy()
    W = np.zeros((d, n_components))
    P = np.zeros((d, n_components))
    q = np.zeros(n_components)
    achieved = 0
    for a in range(n_components):
        xty = X.T @ y
        norm = np.sqrt(np.sum(xty * xty))
        if norm < tol:
            break
        w = xty / norm
        t = X @ w
        tt = np.sum(t * t)
        if tt < tol:
            break
        p = (X.T @ t) / tt
        qa = np.sum(y * t) / tt
        X -= np.outer(t, p)
        y -= t * qa
        W[:, a] = w
        P[:, a] = p
        q[a] = qa
        achieved += 1
    return W, P, q, achieved


nipals_pls1_np = _nipals_body
nipals_pls1_nb = njit(_nipals_body)


# --------------------------------------------------------------------------
# Gram-matrix (kernel) PLS1 cross-validation curve for feature subsets.
#
# Per fold f the caller precomputes, over *all* candidate features,
#   G[f] = Xc_train^T Xc_train,  c[f] = Xc_train^T yc_train,
# and the validation rows centred by that fold's training means. A subset's
# PLS1 model is then obtained from G[f][cols][:, cols] without touching the
# raw data. The deflation only updates X^T y, which gives the same weights,
# loadings and coefficients as NIPALS.
# --------------------------------------------------------------------------
def _gram_curve_body(G, c, Xv, yv, offsets, cols, max_a, tol):
    k = G.shape[0]
    m = cols.shape[0]
    sse = np.zeros(max_a)
    for f in range(k):
        Gf = G[f]
        Gs = np.empty((m, m))
        for i in range(m):
            for j in range(m):
                Gs[i, j] = Gf[cols[i], cols[j]]
        cs = np.empty(m)
        for i in range(m):
            cs[i] = c[f, cols[i]]
        lo = offsets[f]
        hi = offsets[f + 1]
        nv = hi - lo
        Xs = np.empty((nv, m))
        for r in range(nv):
            for i in range(m):
                Xs[r, i] = Xv[lo + r, cols[i]]
        yf = yv[lo:hi]
        R = np.zeros((m, max_a))
        P = np.zeros((m, max_a))
        pred = np.zeros(nv)
        resid = np.sum(yf * yf)
        stopped = False
        for a in range(max_a):
            if not stopped:
                norm = np.sqrt(np.sum(cs * cs))
                if norm < tol:
                    stopped = True
            if not stopped:
                w = cs / norm
                r_vec = w.copy()
                for j in range(a):
                    r_vec -= R[:, j] * np.sum(P[:, j] * w)
                Gr = Gs @ r_vec
                tt = np.sum(r_vec * Gr)
                if tt < tol:
                    stopped = True
                else:
                    p = Gr / tt
                    qa = np.sum(r_vec * cs) / tt
                    cs = cs - p * (qa * tt)
                    R[:, a] = r_vec
                    P[:, a] = p
                    pred += (Xs @ r_vec) * qa
                    e = yf - pred
                    resid = np.sum(e * e)
            sse[a] += resid
    return sse


gram_pls_sse_np = _gram_curve_body
gram_pls_sse_nb = njit(_gram_curve_body)


# --------------------------------------------------------------------------
# "Same" 2-D convolution, channels-last (n, H, W, C), odd kernel (kh, kw).
# Kernel tensor layout: (kh, kw, c_in, c_out).
# --------------------------------------------------------------------------
def conv_same_forward_np(x, kernel, bias):
    n, h, w, _ = x.shape
    kh, kw, _, co = kernel.shape
    ph, pw = kh // 2, kw // 2
    xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw), (0, 0)))
    out = np.empty((n, h, w, co))
    out[...] = bias
    for di in range(kh):
        for dj in range(kw):
            out += xp[:, di:di + h, dj:dj + w, :] @ kernel[di, dj]
    return out


def conv_same_backward_np(x, kernel, grad_out):
    n, h, w, ci = x.shape
    kh, kw, _, co = kernel.shape
    ph, pw = kh // 2, kw // 2
    xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw), (0, 0)))
    dxp = np.zeros_like(xp)
    dk = np.empty_like(kernel)
    g2 = grad_out.reshape(-1, co)
    for di in range(kh):
        for dj in range(kw):
            xs = xp[:, di:di + h, dj:dj + w, :].reshape(-1, ci)
            dk[di, dj] = xs.T @ g2
            dxp[:, di:di + h, dj:dj + w, :] += grad_out @ kernel[di, dj].T
    db = g2.sum(axis=0)
    dx = dxp[:, ph:ph + h, pw:pw + w, :]
    return np.ascontiguousarray(dx), dk, db


@njit
def _im2col_nb(x, kh, kw):
    n, h, w, ci = x.shape
    ph, pw = kh // 2, kw // 2
    cols = np.zeros((n * h * w, kh * kw * ci))
    row = 0
    for s in range(n):
        for i in range(h):
            for j in range(w):
                col = 0
                for di in range(kh):
                    ii = i + di - ph
                    for dj in range(kw):
                        jj = j + dj - pw
                        if 0 <= ii < h and 0 <= jj < w:
                            for c in range(ci):
                                cols[row, col + c] = x[s, ii, jj, c]
                        col += ci
                row += 1
    return cols


@njit
def _col2im_nb(dcols, n, h, w, ci, kh, kw):
    ph, pw = kh // 2, kw // 2
    dx = np.zeros((n, h, w, ci))
    row = 0
    for s in range(n):
        for i in range(h):
            for j in range(w):
                col = 0
                for di in range(kh):
                    ii = i + di - ph
                    for dj in range(kw):
                        jj = j + dj - pw
                        if 0 <= ii < h and 0 <= jj < w:
                            for c in range(ci):
                                dx[s, ii, jj, c] += dcols[row, col + c]
                        col += ci
                row += 1
    return dx


@njit
def conv_same_forward_nb(x, kernel, bias):
    n, h, w, ci = x.shape
    kh, kw, _, co = kernel.shape
    cols = _im2col_nb(x, kh, kw)
    k2 = np.ascontiguousarray(kernel).reshape(kh * kw * ci, co)
    out = np.dot(cols, k2)
    for r in range(out.shape[0]):
        for o in range(co):
            out[r, o] += bias[o]
    return out.reshape(n, h, w, co)


@njit
def conv_same_backward_nb(x, kernel, grad_out):
    n, h, w, ci = x.shape
    kh, kw, _, co = kernel.shape
    cols = _im2col_nb(x, kh, kw)
    k2 = np.ascontiguousarray(kernel).reshape(kh * kw * ci, co)
    g2 = np.ascontiguousarray(grad_out).reshape(n * h * w, co)
    dk = np.dot(cols.T, g2).reshape(kh, kw, ci, co)
    db = np.zeros(co)
    for r in range(g2.shape[0]):
        for o in range(co):
            db[o] += g2[r, o]
    dcols = np.dot(g2, k2.T)
    dx = _col2im_nb(dcols, n, h, w, ci, kh, kw)
    return dx, dk, db


if USE_NUMBA:
    nipals_pls1 = nipals_pls1_nb
    gram_pls_sse = gram_pls_sse_nb
    conv_same_forward = conv_same_forward_nb
    conv_same_backward = conv_same_backward_nb
else:
    nipals_pls1 = nipals_pls1_np
    gram_pls_sse = gram_pls_sse_np
    conv_same_forward = conv_same_forward_np
    conv_same_backward = conv_same_backward_np
