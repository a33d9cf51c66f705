"""Hot numeric kernels, each in a numba flavour and a numpy flavour.

Parameter layout of the classifier (flat float64 vector):

* linear (``hidden == 0``): ``W[d, C]`` row-major, then ``b[C]``
* one hidden layer of width ``H``: ``W1[d, H]``, ``b1[H]``, ``W2[H, C]``, ``b2[C]``

The public names (``sgd_epoch``, ``predict_labels``, ``confusion_counts``,
``pairwise_distances``) point at the numba versions unless
``BAFFLESIM_DISABLE_JIT`` is set; ``predict_labels`` only uses the loop for
small linear batches. Both flavours are always importable so the
benchmark and the equivalence tests can compare them.
"""
import numpy as np

from ._jit import USE_JIT, njit


# ---------------------------------------------------------------- numpy path


def _unpack(params, d, hidden, classes):
    if hidden == 0:
        w = params[: d * classes].reshape(d, classes)
        b = params[d * classes:]
        return w, b
    o1 = d * hidden
    o2 = o1 + hidden
    o3 = o2 + hidden * classes
    return (
        params[:o1].reshape(d, hidden),
        params[o1:o2],
        params[o2:o3].reshape(hidden, classes),
        params[o3:],
    )


def sgd_epoch_numpy(params, X, y, order, batch_size, lr, hidden, classes):
    """One epoch of minibatch SGD on mean cross-entropy, in place."""
    d = X.shape[1]
    n = order.shape[0]
    views = _unpack(params, d, hidden, classes)
    for start in range(0, n, batch_size):
        idx = order[start:start + batch_size]
        xb = X[idx]
        bs = idx.shape[0]
        if hidden == 0:
            w, b = views
            logits = xb @ w + b
        else:
            w1, b1, w2, b2 = views
            act = np.tanh(xb @ w1 + b1)
            logits = act @ w2 + b2
        logits -= logits.max(axis=1, keepdims=True)
        p = np.exp(logits)
        p /= p.sum(axis=1, keepdims=True)
        p[np.arange(bs), y[idx]] -= 1.0
        p /= bs
        if hidden == 0:
            gw = xb.T @ p
            gb = p.sum(axis=0)
            w -= lr * gw
            b -= lr * gb
        else:
            gw2 = act.T @ p
            gb2 = p.sum(axis=0)
            gh = (p @ w2.T) * (1.0 - act * act)
            gw1 = xb.T @ gh
            gb1 = gh.sum(axis=0)
            w1 -= lr * gw1
            b1 -= lr * gb1
            w2 -= lr * gw2
            b2 -= lr * gb2


def logits_numpy(params, X, hidden, classes):
    d = X.shape[1]
    if hidden == 0:
        w, b = _unpack(params, d, hidden, classes)
        return X @ w + b
    w1, b1, w2, b2 = _unpack(params, d, hidden, classes)
    return np.tanh(X @ w1 + b1) @ w2 + b2


def predict_labels_numpy(params, X, hidden, classes):
    # argmax returns the first maximum: ties go to the lowest class index
    return np.argmax(logits_numpy(params, X, hidden, classes), axis=1).astype(np.int64)


def confusion_counts_numpy(true, pred, classes):
    """``counts[t, p]`` = number of samples with label t predicted as p."""
    flat = np.bincount(true * classes + pred, minlength=classes * classes)
    return flat.reshape(classes, classes).astype(np.int64)


def pairwise_distances_numpy(A, B):
    diff = A[:, None, :] - B[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


# ---------------------------------------------------------------- numba path


@njit
def _sgd_epoch_jit(params, X, y, order, batch_size, lr, hidden, classes):
    d = X.shape[1]
    n = order.shape[0]
    grad = np.zeros(params.shape[0])
    out = np.empty(classes)
    if hidden == 0:
        ob = d * classes
        for start in range(0, n, batch_size):
            stop = min(start + batch_size, n)
            inv = 1.0 / (stop - start)
            grad[:] = 0.0
            for t in range(start, stop):
                i = order[t]
                for j in range(classes):
                    s = params[ob + j]
                    for a in range(d):
                        s += X[i, a] * params[a * classes + j]
                    out[j] = s
                m = out.max()
                z = 0.0
                for j in range(classes):
                    out[j] = np.exp(out[j] - m)
                    z += out[j]
                for j in range(classes):
                    g = out[j] / z
                    if j == y[i]:
                        g -= 1.0
                    g *= inv
                    grad[ob + j] += g
                    for a in range(d):
                        grad[a * classes + j] += X[i, a] * g
            for p in range(params.shape[0]):
                params[p] -= lr * grad[p]
        return
    o1 = d * hidden
    o2 = o1 + hidden
    o3 = o2 + hidden * classes
    act = np.empty(hidden)
    gh = np.empty(hidden)
    for start in range(0, n, batch_size):
        stop = min(start + batch_size, n)
        inv = 1.0 / (stop - start)
        grad[:] = 0.0
        for t in range(start, stop):
            i = order[t]
            for u in range(hidden):
                s = params[o1 + u]
                for a in range(d):
                    s += X[i, a] * params[a * hidden + u]
                act[u] = np.tanh(s)
            for j in range(classes):
                s = params[o3 + j]
                for u in range(hidden):
                    s += act[u] * params[o2 + u * classes + j]
                out[j] = s
            m = out.max()
            z = 0.0
            for j in range(classes):
                out[j] = np.exp(out[j] - m)
                z += out[j]
            gh[:] = 0.0
            for j in range(classes):
                g = out[j] / z
                if j == y[i]:
                    g -= 1.0
                g *= inv
                grad[o3 + j] += g
                for u in range(hidden):
                    grad[o2 + u * classes + j] += act[u] * g
                    gh[u] += g * params[o2 + u * classes + j]
            for u in range(hidden):
                gu = gh[u] * (1.0 - act[u] * act[u])
                grad[o1 + u] += gu
                for a in range(d):
                    grad[a * hidden + u] += X[i, a] * gu
        for p in range(params.shape[0]):
            params[p] -= lr * grad[p]


@njit
def _predict_labels_jit(params, X, hidden, classes):
    n, d = X.shape
    labels = np.empty(n, dtype=np.int64)
    out = np.empty(classes)
    act = np.empty(max(hidden, 1))
    o1 = d * hidden
    o2 = o1 + hidden
    o3 = o2 + hidden * classes
    ob = d * classes
    for i in range(n):
        if hidden == 0:
            for j in range(classes):
                s = params[ob + j]
                for a in range(d):
                    s += X[i, a] * params[a * classes + j]
                out[j] = s
        else:
            for u in range(hidden):
                s = params[o1 + u]
                for a in range(d):
                    s += X[i, a] * params[a * hidden + u]
                act[u] = np.tanh(s)
            for j in range(classes):
                s = params[o3 + j]
                for u in range(hidden):
                    s += act[u] * params[o2 + u * classes + j]
                out[j] = s
        best = 0
        for j in range(1, classes):
            if out[j] > out[best]:
                best = j
        labels[i] = best
    return labels


@njit
def _confusion_counts_jit(true, pred, classes):
    counts = np.zeros((classes, classes), dtype=np.int64)
    for i in range(true.shape[0]):
        counts[true[i], pred[i]] += 1
    return counts


@njit
def _pairwise_distances_jit(A, B):
    out = np.empty((A.shape[0], B.shape[0]))
    for i in range(A.shape[0]):
        for j in range(B.shape[0]):
            s = 0.0
            for k in range(A.shape[1]):
                t = A[i, k] - B[j, k]
                s += t * t
            out[i, j] = np.sqrt(s)
    return out


def sgd_epoch_jit(params, X, y, order, batch_size, lr, hidden, classes):
    _sgd_epoch_jit(params, X, y, order, int(batch_size), float(lr), int(hidden), int(classes))


def predict_labels_jit(params, X, hidden, classes):
    return _predict_labels_jit(params, X, int(hidden), int(classes))


def confusion_counts_jit(true, pred, classes):
    return _confusion_counts_jit(true, pred, int(classes))


def pairwise_distances_jit(A, B):
    return _pairwise_distances_jit(A, B)


# above this many rows (or with a hidden layer) BLAS beats the scalar loop
PREDICT_JIT_MAX_ROWS = 256


def predict_labels_auto(params, X, hidden, classes):
    if hidden == 0 and X.shape[0] <= PREDICT_JIT_MAX_ROWS:
        return predict_labels_jit(params, X, hidden, classes)
    return predict_labels_numpy(params, X, hidden, classes)


if USE_JIT:
    sgd_epoch = sgd_epoch_jit
    predict_labels = predict_labels_auto
    confusion_counts = confusion_counts_jit
    pairwise_distances = pairwise_distances_jit
else:
    sgd_epoch = sgd_epoch_numpy
    predict_labels = predict_labels_numpy
    confusion_counts = confusion_counts_numpy
    pairwise_distances = pairwise_distances_numpy

BACKEND = "numba" if USE_JIT else "numpy"
