"""LSTM time loops over a time-major layout (T, B, ·).

The forward pass stays in numpy, whose vectorised tanh is far faster than a
scalar libm call per element; the backward pass has no transcendentals and
is compiled with numba so each step's gate derivatives are one fused pass.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


def lstm_forward_tm(xpre, WhT, h0, c0):
    """xpre (T, B, 4H) input pre-activations incl. both biases; WhT (H, 4H); h0, c0 (B, H).

    Vectorised numpy per step: every gate goes through a single tanh call,
    using sigmoid(v) = (1 + tanh(v / 2)) / 2 for i, f and o.
    """
    T, B, G = xpre.shape
    H = G // 4
    hs = np.empty((T, B, H))
    cs = np.empty((T, B, H))
    tcs = np.empty((T, B, H))
    gates = np.empty((T, B, G))
    scale = np.full(G, 0.5)
    scale[2 * H : 3 * H] = 1.0
    h, c = h0, c0
    for t in range(T):
        gt = gates[t]
        np.dot(h, WhT, out=gt)
        gt += xpre[t]
        gt *= scale
        np.tanh(gt, out=gt)
        sig = np.concatenate((gt[:, : 2 * H], gt[:, 3 * H :]), axis=1)
        sig += 1.0
        sig *= 0.5
        gt[:, : 2 * H] = sig[:, : 2 * H]
        gt[:, 3 * H :] = sig[:, 2 * H :]
        i, f, g, o = gt[:, :H], gt[:, H : 2 * H], gt[:, 2 * H : 3 * H], gt[:, 3 * H :]
        ct = cs[t]
        np.multiply(f, c, out=ct)
        ct += i * g
        np.tanh(ct, out=tcs[t])
        np.multiply(o, tcs[t], out=hs[t])
        h, c = hs[t], ct
    return hs, cs, gates, tcs


@njit(cache=True)
def lstm_backward_tm(dHs, Wh, cs, gates, tcs, c0):
    """BPTT; returns dpre (T, B, 4H). Wh is (4H, H); c0 (B, H)."""
    T, B, H = dHs.shape
    G = 4 * H
    dpres = np.empty((T, B, G))
    dh = np.zeros((B, H))
    dc = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        for b in range(B):
            for j in range(H):
                i = gates[t, b, j]
                f = gates[t, b, H + j]
                g = gates[t, b, 2 * H + j]
                o = gates[t, b, 3 * H + j]
                tc = tcs[t, b, j]
                c_prev = c0[b, j] if t == 0 else cs[t - 1, b, j]
                dh_t = dHs[t, b, j] + dh[b, j]
                dct = dc[b, j] + dh_t * o * (1.0 - tc * tc)
                dpres[t, b, j] = dct * g * i * (1.0 - i)
                dpres[t, b, H + j] = dct * c_prev * f * (1.0 - f)
                dpres[t, b, 2 * H + j] = dct * i * (1.0 - g * g)
                dpres[t, b, 3 * H + j] = dh_t * tc * o * (1.0 - o)
                dc[b, j] = dct * f
        dh = np.dot(dpres[t], Wh)
    return dpres
