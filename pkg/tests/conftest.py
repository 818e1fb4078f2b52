"""Shared helpers for the gradient checks.

Both hinge losses are piecewise smooth: the analytic gradient only has to
match central differences away from hinge boundaries and away from ties in
the hardest-example selection. The samplers below draw random inputs and
keep only configurations where every data-dependent choice is separated by
a clear gap, with at least one active hinge so the check is not vacuous.
"""

import numpy as np

from sharc.losses import _pairwise_distances

TRIPLET_LABELS = np.array([0, 0, 1, 1, 2, 2, 3, 3])
CTL_LABELS = np.array([0, 0, 0, 1, 1, 1, 2, 2, 2])


def batch_hard_point_is_smooth(e, labels, margin, gap=1e-3):
    n = e.shape[0]
    dist = _pairwise_distances(e)
    eye = np.eye(n, dtype=bool)
    if dist[~eye].min() < gap:
        return False
    same = labels[:, None] == labels[None, :]
    active = 0
    for a in range(n):
        pd = np.sort(dist[a][same[a] & ~eye[a]])[::-1]
        nd = np.sort(dist[a][~same[a]])
        if pd.size == 0 or nd.size == 0:
            return False
        if pd.size >= 2 and pd[0] - pd[1] < gap:
            return False
        if nd.size >= 2 and nd[1] - nd[0] < gap:
            return False
        hinge = pd[0] - nd[0] + margin
        if abs(hinge) < gap:
            return False
        if hinge > 0:
            active += 1
    return active > 0


def ctl_point_is_smooth(e, labels, margin, gap=1e-3):
    classes = np.unique(labels)
    sums = {int(k): e[labels == k].sum(axis=0) for k in classes}
    counts = {int(k): int((labels == k).sum()) for k in classes}
    centroids = {k: sums[k] / counts[k] for k in sums}
    active = 0
    for a in range(e.shape[0]):
        k = int(labels[a])
        if counts[k] < 2:
            continue
        pc = (sums[k] - e[a]) / (counts[k] - 1)
        d_ap = float(np.linalg.norm(e[a] - pc))
        if d_ap < gap:
            return False
        nd = np.sort(
            [np.linalg.norm(e[a] - centroids[int(o)]) for o in classes if int(o) != k]
        )
        if nd[0] < gap or (nd.size >= 2 and nd[1] - nd[0] < gap):
            return False
        hinge = d_ap - nd[0] + margin
        if abs(hinge) < gap:
            return False
        if hinge > 0:
            active += 1
    return active > 0


def sample_smooth_points(rng, shape, predicate, count, max_tries=200000):
    out = []
    tries = 0
    while len(out) < count:
        tries += 1
        if tries > max_tries:
            raise AssertionError("could not sample enough smooth loss inputs")
        e = rng.standard_normal(shape)
        if predicate(e):
            out.append(e)
    return out


def gradient_rel_error(analytic, numeric):
    denom = max(float(np.linalg.norm(numeric)), 1e-12)
    return float(np.linalg.norm(np.asarray(analytic) - np.asarray(numeric))) / denom
