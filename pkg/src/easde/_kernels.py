"""Compiled inner loops.

Every kernel computes each output row independently with a fixed
floating-point accumulation order, so a row's result does not depend on
which batch it was evaluated in or on the thread count.
"""

import os

import numba
import numpy as np
from numba import njit, prange

WORKERS_ENV = "EASDE_WORKERS"

# the bundled TBB is too old for numba; skip it instead of warning
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


def configure_workers():
    value = os.environ.get(WORKERS_ENV)
    if value:
        numba.set_num_threads(max(1, min(int(value), numba.config.NUMBA_NUM_THREADS)))


_CHUNK = 256
# a size-k heap beats full selection when k is small relative to m
_HEAP_RATIO = 32


@njit(cache=True)
def _kth_largest(a, k):
    # in-place Hoare quickselect with median-of-three pivots; destroys ``a``
    target = a.shape[0] - k
    lo = 0
    hi = a.shape[0] - 1
    while hi > lo:
        mid = (lo + hi) >> 1
        x, y, z = a[lo], a[mid], a[hi]
        if x > y:
            x, y = y, x
        if y > z:
            y = z
            if x > y:
                y = x
        pivot = y
        i = lo
        j = hi
        while i <= j:
            while a[i] < pivot:
                i += 1
            while a[j] > pivot:
                j -= 1
            if i <= j:
                t = a[i]
                a[i] = a[j]
                a[j] = t
                i += 1
                j -= 1
        if target <= j:
            hi = j
        elif target >= i:
            lo = i
        else:
            return a[target]
    return a[target]


@njit(cache=True)
def _sift_down(hs, hi, pos, size):
    # min-heap on (score ascending, index descending): the root is the
    # element that loses first under "larger score, then smaller index"
    while True:
        left = 2 * pos + 1
        if left >= size:
            return
        child = left
        right = left + 1
        if right < size and (hs[right] < hs[left] or (hs[right] == hs[left] and hi[right] > hi[left])):
            child = right
        if hs[child] < hs[pos] or (hs[child] == hs[pos] and hi[child] > hi[pos]):
            ts = hs[pos]
            hs[pos] = hs[child]
            hs[child] = ts
            ti = hi[pos]
            hi[pos] = hi[child]
            hi[child] = ti
            pos = child
        else:
            return


@njit(cache=True)
def _heap_row(thetas, x, k, hs, hi, out):
    # one pass with a size-k heap; writes the winners best first into ``out``
    m, d = thetas.shape
    for j in range(k):
        s = 0.0
        for c in range(d):
            s += thetas[j, c] * x[c]
        hs[j] = s
        hi[j] = j
    for p in range(k // 2 - 1, -1, -1):
        _sift_down(hs, hi, p, k)
    for j in range(k, m):
        s = 0.0
        for c in range(d):
            s += thetas[j, c] * x[c]
        # later indices never win a tie, so strict comparison suffices
        if s > hs[0]:
            hs[0] = s
            hi[0] = j
            _sift_down(hs, hi, 0, k)
    size = k
    while size > 0:
        out[size - 1] = hi[0]
        size -= 1
        hs[0] = hs[size]
        hi[0] = hi[size]
        _sift_down(hs, hi, 0, size)


@njit(cache=True)
def _select_row(thetas, x, k, scores, work, out):
    # fills ``out`` with the k winning indices in ascending index order and
    # leaves their scores in ``work[:k]``
    m, d = thetas.shape
    for j in range(m):
        s = 0.0
        for c in range(d):
            s += thetas[j, c] * x[c]
        scores[j] = s
        work[j] = s
    kth = _kth_largest(work, k)
    n_gt = 0
    for j in range(m):
        if scores[j] > kth:
            n_gt += 1
    ties = k - n_gt
    t = 0
    for j in range(m):
        s = scores[j]
        if s > kth or (s == kth and ties > 0):
            if s == kth:
                ties -= 1
            out[t] = j
            work[t] = s
            t += 1


@njit(parallel=True, cache=True)
def topk_sorted(thetas, xs, k):
    """Indices of the ``k`` largest ``theta_j . x`` per row, in ascending index order.

    Ties at the cut go to the smaller index.  Output shape ``(n, k)``.
    """
    n = xs.shape[0]
    m = thetas.shape[0]
    out = np.empty((n, k), dtype=np.int64)
    nchunks = (n + _CHUNK - 1) // _CHUNK
    use_heap = m >= _HEAP_RATIO * k
    for ch in prange(nchunks):
        scores = np.empty(m)
        work = np.empty(m)
        hs = np.empty(k)
        hi = np.empty(k, dtype=np.int64)
        for r in range(ch * _CHUNK, min(n, (ch + 1) * _CHUNK)):
            if use_heap:
                _heap_row(thetas, xs[r], k, hs, hi, out[r])
                out[r].sort()
            else:
                _select_row(thetas, xs[r], k, scores, work, out[r])
    return out


@njit(parallel=True, cache=True)
def topk_ranked(thetas, xs, k):
    """Like ``topk_sorted`` but ordered best first (ties: smaller index first).

    The first ``k' <= k`` columns are then the ``k'``-sparse code.
    """
    n = xs.shape[0]
    m = thetas.shape[0]
    out = np.empty((n, k), dtype=np.int64)
    nchunks = (n + _CHUNK - 1) // _CHUNK
    use_heap = m >= _HEAP_RATIO * k
    for ch in prange(nchunks):
        scores = np.empty(m)
        work = np.empty(m)
        sel = np.empty(k, dtype=np.int64)
        neg = np.empty(k)
        hs = np.empty(k)
        hi = np.empty(k, dtype=np.int64)
        for r in range(ch * _CHUNK, min(n, (ch + 1) * _CHUNK)):
            if use_heap:
                _heap_row(thetas, xs[r], k, hs, hi, out[r])
                continue
            _select_row(thetas, xs[r], k, scores, work, sel)
            for t in range(k):
                neg[t] = -work[t]
            # stable sort keeps ascending index order among equal scores
            order = np.argsort(neg, kind="mergesort")
            for t in range(k):
                out[r, t] = sel[order[t]]
    return out


@njit(parallel=True, cache=True)
def code_sums(codes, counts):
    n, k = codes.shape
    out = np.empty(n, dtype=np.int64)
    for r in prange(n):
        s = 0
        for t in range(k):
            s += counts[codes[r, t]]
        out[r] = s
    return out


@njit(parallel=True, cache=True)
def chordal_block(a, b):
    """Pairwise chordal distances ``sqrt(sum_c (a_c - b_c)^2)``."""
    na, d = a.shape
    nb = b.shape[0]
    out = np.empty((na, nb))
    for i in prange(na):
        for j in range(nb):
            s = 0.0
            for c in range(d):
                t = a[i, c] - b[j, c]
                s += t * t
            out[i, j] = np.sqrt(s)
    return out


@njit(cache=True)
def _dist(points, i, j):
    s = 0.0
    for c in range(points.shape[1]):
        t = points[i, c] - points[j, c]
        s += t * t
    return np.sqrt(s)


@njit(parallel=True, cache=True)
def _edge_counts(points, rk, alpha):
    n = points.shape[0]
    cnt = np.zeros(n, dtype=np.int64)
    for i in prange(n):
        c = 0
        for j in range(i + 1, n):
            lim = alpha * min(rk[i], rk[j])
            if _dist(points, i, j) <= lim:
                c += 1
        cnt[i] = c
    return cnt


@njit(parallel=True, cache=True)
def _edge_fill(points, rk, alpha, offsets, src, dst):
    n = points.shape[0]
    for i in prange(n):
        pos = offsets[i]
        for j in range(i + 1, n):
            lim = alpha * min(rk[i], rk[j])
            if _dist(points, i, j) <= lim:
                src[pos] = i
                dst[pos] = j
                pos += 1


def radius_edges(points, rk, alpha):
    """All pairs ``i < j`` with ``||x_i - x_j|| <= alpha * min(r_i, r_j)``."""
    cnt = _edge_counts(points, rk, alpha)
    offsets = np.zeros(points.shape[0] + 1, dtype=np.int64)
    np.cumsum(cnt, out=offsets[1:])
    total = int(offsets[-1])
    src = np.empty(total, dtype=np.int64)
    dst = np.empty(total, dtype=np.int64)
    _edge_fill(points, rk, alpha, offsets, src, dst)
    return src, dst


@njit(cache=True)
def max_pair_distance(points):
    n = points.shape[0]
    best = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            dd = _dist(points, i, j)
            if dd > best:
                best = dd
    return best
