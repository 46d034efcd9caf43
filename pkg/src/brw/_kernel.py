"""Compiled event loop for the continuous-time BRW.

A particle at site ``x`` dies at rate 1 and breeds at rate ``lam * w[x]``;
the child goes to ``nbr[k]`` with probability ``cum[k] - cum[k-1]`` within
the row of ``x`` (``nbr == -1`` is outside the truncation: the child is
discarded).  Sites are drawn from a Fenwick tree holding ``eta[x] * c[x]``
with ``c[x] = 1 + lam * w[x]``.
"""

import numpy as np
from numba import njit

EXTINCT = 0
CAP_HIT = 1
HORIZON = 2


@njit(cache=True, nogil=True)
def _fen_build(tree, vals):
    n = vals.size
    tree[:] = 0.0
    for i in range(n):
        tree[i + 1] += vals[i]
        j = (i + 1) + ((i + 1) & -(i + 1))
        if j <= n:
            tree[j] += tree[i + 1]


@njit(cache=True, nogil=True)
def _fen_add(tree, i, delta):
    n = tree.size - 1
    i += 1
    while i <= n:
        tree[i] += delta
        i += i & -i


@njit(cache=True, nogil=True)
def _fen_find(tree, u, top):
    # smallest index whose prefix sum exceeds u, and the remainder of u
    # inside that index's mass
    pos = 0
    step = top
    n = tree.size - 1
    while step > 0:
        nxt = pos + step
        if nxt <= n and tree[nxt] <= u:
            pos = nxt
            u -= tree[nxt]
        step >>= 1
    return pos, u


@njit(cache=True, nogil=True)
def simulate(row_ptr, nbr, cum, c, root, init, t_max, pop_cap, sample_times,
             record_sites, classes, n_classes, debug_every, rebuild_every, rng):
    """One trajectory driven by the ``np.random.Generator`` ``rng``.

    Returns a tuple of scalars and sample arrays.
    """
    n = c.size
    eta = init.copy()
    vals = eta * c
    tree = np.zeros(n + 1)
    _fen_build(tree, vals)
    top = 1
    while top * 2 <= n:
        top *= 2
    total = vals.sum()
    pop = eta.sum()

    S = sample_times.size
    pop_s = np.full(S, -1, dtype=np.int64)
    root_s = np.full(S, -1, dtype=np.int64)
    if record_sites:
        site_s = np.full((S, n), -1, dtype=np.int64)
    else:
        site_s = np.zeros((0, 0), dtype=np.int64)
    if n_classes > 0:
        cls_s = np.full((S, n_classes), -1, dtype=np.int64)
    else:
        cls_s = np.zeros((0, 0), dtype=np.int64)

    t = 0.0
    events = 0
    killed = 0
    births = 0
    max_pop = pop
    last_root = -1.0
    max_err = 0.0
    nxt = 0
    status = HORIZON
    until_rebuild = rebuild_every
    until_debug = debug_every

    while True:
        if pop == 0:
            status = EXTINCT
            break
        if pop >= pop_cap:
            status = CAP_HIT
            break
        dt = rng.standard_exponential() / total
        t_new = t + dt
        while nxt < S and sample_times[nxt] < t_new and sample_times[nxt] <= t_max:
            pop_s[nxt] = pop
            root_s[nxt] = eta[root]
            if record_sites:
                site_s[nxt, :] = eta
            if n_classes > 0:
                for k in range(n_classes):
                    cls_s[nxt, k] = 0
                for x in range(n):
                    cls_s[nxt, classes[x]] += eta[x]
            nxt += 1
        if eta[root] > 0:
            last_root = min(t_new, t_max)
        if t_new > t_max:
            t = t_max
            status = HORIZON
            break
        t = t_new

        x, r = _fen_find(tree, rng.random() * total, top)
        if x >= n or eta[x] == 0:
            # rounding pushed the draw past the last occupied site
            _fen_build(tree, eta * c)
            total = (eta * c).sum()
            x, r = _fen_find(tree, rng.random() * total, top)
            while x >= n or eta[x] == 0:
                x, r = _fen_find(tree, rng.random() * total, top)
        # given x, r is uniform on [0, eta[x] c[x]); its position inside one
        # particle's share c[x] decides death vs birth and then the target
        q = min(max(r - np.floor(r / c[x]) * c[x], 0.0), c[x])
        if q < 1.0:
            eta[x] -= 1
            pop -= 1
            _fen_add(tree, x, -c[x])
            total -= c[x]
        else:
            births += 1
            lo = row_ptr[x]
            hi = row_ptr[x + 1] - 1
            u = (q - 1.0) / (c[x] - 1.0) if lo < hi else 0.0
            while lo < hi:
                mid = (lo + hi) // 2
                if cum[mid] > u:
                    hi = mid
                else:
                    lo = mid + 1
            y = nbr[lo]
            if y < 0:
                killed += 1
            else:
                eta[y] += 1
                pop += 1
                _fen_add(tree, y, c[y])
                total += c[y]
                if pop > max_pop:
                    max_pop = pop
        events += 1
        until_debug -= 1
        if until_debug == 0:
            until_debug = debug_every
            exact = (eta * c).sum()
            err = abs(total - exact) / max(exact, 1.0)
            if err > max_err:
                max_err = err
        until_rebuild -= 1
        if until_rebuild == 0:
            until_rebuild = rebuild_every
            _fen_build(tree, eta * c)
            total = (eta * c).sum()

    if status == EXTINCT:
        # the population stays 0 after extinction
        while nxt < S and sample_times[nxt] <= t_max:
            if sample_times[nxt] >= t:
                pop_s[nxt] = 0
                root_s[nxt] = 0
                if record_sites:
                    site_s[nxt, :] = 0
                if n_classes > 0:
                    cls_s[nxt, :] = 0
            nxt += 1
    elif status == HORIZON:
        while nxt < S and sample_times[nxt] <= t_max:
            pop_s[nxt] = pop
            root_s[nxt] = eta[root]
            if record_sites:
                site_s[nxt, :] = eta
            if n_classes > 0:
                for k in range(n_classes):
                    cls_s[nxt, k] = 0
                for x in range(n):
                    cls_s[nxt, classes[x]] += eta[x]
            nxt += 1
    if eta[root] > 0:
        last_root = t
    return (status, t, events, killed, max_pop, pop, eta[root], last_root, max_err,
            pop_s, root_s, site_s, cls_s, births)
