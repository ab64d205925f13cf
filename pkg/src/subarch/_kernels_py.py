"""Pure-Python/numpy versions of the compiled kernels (same signatures)."""

import numpy as np

from .layers import sigmoid


def _views(params, kinds, in_dims, out_dims, w_off, b_off):
    out = []
    for l, kind in enumerate(kinds):
        if kind == 0:
            nin, nout = int(in_dims[l]), int(out_dims[l])
            w = params[w_off[l]:w_off[l] + nin * nout].reshape(nout, nin)
            b = params[b_off[l]:b_off[l] + nout] if b_off[l] >= 0 else None
            out.append((0, w, b))
        else:
            out.append((int(kind), None, None))
    return out


def _act(kind, z):
    if kind == 1:
        return sigmoid(z)
    if kind == 2:
        return np.tanh(z)
    return np.maximum(z, 0.0)


def forward_dense_chain(params, kinds, in_dims, out_dims, w_off, b_off, X):
    h = np.asarray(X, dtype=float)
    for kind, w, b in _views(params, kinds, in_dims, out_dims, w_off, b_off):
        if kind == 0:
            h = h @ w.T
            if b is not None:
                h = h + b
        else:
            h = _act(kind, h)
    return h[:, 0].copy()


def sgd_dense_chain(params, kinds, in_dims, out_dims, w_off, b_off, X, Y, order, eta, step_loss):
    layers = _views(params, kinds, in_dims, out_dims, w_off, b_off)
    done = 0
    for s, k in enumerate(order):
        acts = [X[k]]
        for kind, w, b in layers:
            h = acts[-1]
            if kind == 0:
                h = w @ h
                if b is not None:
                    h = h + b
            else:
                h = _act(kind, h)
            acts.append(h)
        diff = acts[-1][0] - Y[k]
        step_loss[s] = diff * diff
        if not np.isfinite(step_loss[s]):
            break
        delta = np.array([2.0 * diff])
        for l in range(len(layers) - 1, -1, -1):
            kind, w, b = layers[l]
            if kind == 0:
                delta_in = w.T @ delta
                w -= eta * np.outer(delta, acts[l])
                if b is not None:
                    b -= eta * delta
                delta = delta_in
            elif kind == 1:
                y = acts[l + 1]
                delta = delta * y * (1.0 - y)
            elif kind == 2:
                y = acts[l + 1]
                delta = delta * (1.0 - y * y)
            else:
                delta = delta * (acts[l] > 0)
        done = s + 1
    return done
