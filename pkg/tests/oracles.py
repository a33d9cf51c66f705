"""Independent reference implementations used only by the tests.

Written directly from the textbook definitions with plain Python loops;
nothing here imports the code under test apart from data containers.
"""
import math


def dist(a, b):
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))


def naive_lof(query, neighbors, k, eps=1e-12, tie_rtol=1e-10):
    pts = [list(map(float, p)) for p in neighbors]
    q = list(map(float, query))
    m = len(pts)

    def kdist_ref(i):
        kk = min(k, m - 1)
        ds = sorted(dist(pts[i], pts[j]) for j in range(m) if j != i)
        return ds[kk - 1]

    kd = [kdist_ref(i) for i in range(m)]

    def nbhd_ref(i):
        return [j for j in range(m) if j != i and dist(pts[i], pts[j]) <= kd[i] * (1 + tie_rtol)]

    def lrd_ref(i):
        nb = nbhd_ref(i)
        mean = sum(max(kd[j], dist(pts[i], pts[j])) for j in nb) / len(nb)
        return 1.0 / max(mean, eps)

    dq = [dist(q, p) for p in pts]
    kdq = sorted(dq)[k - 1]
    nq = [j for j in range(m) if dq[j] <= kdq * (1 + tie_rtol)]
    mean_q = sum(max(kd[j], dq[j]) for j in nq) / len(nq)
    lrd_q = 1.0 / max(mean_q, eps)
    return sum(lrd_ref(j) / lrd_q for j in nq) / len(nq)


def forward_labels(W, b, X, W2=None, b2=None):
    """Argmax of a linear (or tanh-hidden) network evaluated element by element."""
    out = []
    for row in X:
        if W2 is None:
            logits = [b[j] + sum(row[a] * W[a][j] for a in range(len(row))) for j in range(len(b))]
        else:
            hid = [math.tanh(b[u] + sum(row[a] * W[a][u] for a in range(len(row))))
                   for u in range(len(b))]
            logits = [b2[j] + sum(hid[u] * W2[u][j] for u in range(len(hid)))
                      for j in range(len(b2))]
        best = 0
        for j in range(1, len(logits)):
            if logits[j] > logits[best]:
                best = j
        out.append(best)
    return out


def tally_errors(true, pred, num_classes):
    """(source, target, overall) error fractions by per-sample counting."""
    n = len(true)
    src = [0] * num_classes
    tgt = [0] * num_classes
    wrong = 0
    for t, p in zip(true, pred):
        if t != p:
            src[t] += 1
            tgt[p] += 1
            wrong += 1
    return [s / n for s in src], [s / n for s in tgt], wrong / n


def validate_from_variations(variations, new, eps=1e-12):
    """Vote, phi_new and tau for trusted variations v_1..v_l and a new one.

    Steps: k = ceil(l/2), h = ceil(3l/4); trusted LOFs for i = h..l against
    v_{i-1}..v_{i-h+1}; new LOF against v_l..v_{l-h+2}; tau = their mean.
    """
    l = len(variations)
    v = [None] + [list(x) for x in variations]
    k = math.ceil(l / 2)
    h = math.ceil(3 * l / 4)
    kk = min(k, h - 1)
    phis = []
    for i in range(h, l + 1):
        nbrs = [v[j] for j in range(i - 1, i - h, -1)]
        phis.append(naive_lof(v[i], nbrs, kk, eps))
    nbrs = [v[j] for j in range(l, l - h + 1, -1)]
    phi_new = naive_lof(new, nbrs, kk, eps)
    tau = sum(phis) / len(phis)
    return int(phi_new > tau), phi_new, tau
