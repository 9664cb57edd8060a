"""Compiled inner loops for tree growth, prediction and TreeSHAP.

Trees are flat arrays indexed by node id: ``feature`` (-1 at leaves),
``threshold`` (go left when ``x <= threshold``), ``left``/``right`` child ids,
``value`` and ``cover`` (weighted training count reaching the node).

Two split criteria share one growth routine:

* ``GINI`` - stat_a is the positive weight, stat_b the total weight; the gain is
  the weighted Gini impurity decrease and the leaf value is the positive fraction.
* ``SECOND_ORDER`` - stat_a/stat_b are gradient/hessian; the gain is
  G_L^2/(H_L+lam) + G_R^2/(H_R+lam) - G^2/(H+lam) and leaf value -G/(H+lam).
"""

import numpy as np
from numba import njit

GINI = 0
SECOND_ORDER = 1


@njit(cache=True)
def _rand_next(state):
    # xorshift64*; state is a length-1 uint64 array owned by one tree
    x = state[0]
    x ^= x >> np.uint64(12)
    x ^= x << np.uint64(25)
    x ^= x >> np.uint64(27)
    state[0] = x
    return x * np.uint64(2685821657736338717)


@njit(cache=True)
def _rand_below(state, n):
    return np.int64(_rand_next(state) % np.uint64(n))


@njit(cache=True)
def _node_score(a, b, criterion, lam):
    # "score" such that gain = score(L) + score(R) - score(parent)
    if criterion == GINI:
        if b <= 0.0:
            return 0.0
        # -W * gini(node) = -(W - (a^2 + (W-a)^2)/W)
        return (a * a + (b - a) * (b - a)) / b - b
    return a * a / (b + lam)


@njit(cache=True)
def _leaf_value(a, b, criterion, lam):
    if criterion == GINI:
        return a / b if b > 0.0 else 0.0
    return -a / (b + lam)


@njit(cache=True, nogil=True)
def grow_presorted(
    X, S, stat_a, stat_b, cnt, cover_w, criterion, max_depth, min_samples_leaf,
    min_child_weight, lam, max_features, seed,
):
    """Depth-first growth over presorted per-feature row lists.

    ``S`` has shape (d, m): row ids with positive count, sorted by each
    feature. It is partitioned in place, so pass a copy.
    Returns (feature, threshold, left, right, value, cover, importance).
    """
    n_features = X.shape[1]
    m = S.shape[1]
    cap = 2 * m + 1
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros(cap)
    cover = np.zeros(cap)
    importance = np.zeros(n_features)

    state = np.empty(1, np.uint64)
    state[0] = np.uint64(seed) * np.uint64(6364136223846793005) + np.uint64(1442695040888963407)
    if state[0] == 0:
        state[0] = np.uint64(88172645463325252)
    perm = np.arange(n_features)
    goes_left = np.zeros(X.shape[0], np.bool_)
    buf = np.empty(m, np.int64)

    # stack of (node, start, end, depth)
    st_node = np.empty(cap, np.int64)
    st_start = np.empty(cap, np.int64)
    st_end = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)
    sp = 0
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = m
    st_depth[0] = 0
    sp = 1
    n_nodes = 1

    while sp > 0:
        sp -= 1
        node = st_node[sp]
        start = st_start[sp]
        end = st_end[sp]
        depth = st_depth[sp]

        A = 0.0
        B = 0.0
        C = 0.0
        W = 0.0
        for p in range(start, end):
            r = S[0, p]
            A += stat_a[r]
            B += stat_b[r]
            C += cnt[r]
            W += cover_w[r]
        value[node] = _leaf_value(A, B, criterion, lam)
        cover[node] = W

        if max_depth >= 0 and depth >= max_depth:
            continue
        if C < 2 * min_samples_leaf:
            continue
        if criterion == GINI and (A <= 0.0 or A >= B):
            continue

        parent_score = _node_score(A, B, criterion, lam)
        best_gain = 0.0
        best_f = -1
        best_thr = 0.0
        tol = 1e-12 * (abs(parent_score) + 1.0)
        # an impure Gini node takes its best split even at zero gain (XOR needs it)
        min_gain = -tol if criterion == GINI else tol

        # visit features in random order until max_features non-constant ones are seen
        for i in range(n_features):
            perm[i] = i
        visited = 0
        for i in range(n_features):
            if visited >= max_features:
                break
            j = i + _rand_below(state, n_features - i)
            f = perm[j]
            perm[j] = perm[i]
            perm[i] = f
            first = X[S[f, start], f]
            last = X[S[f, end - 1], f]
            if not last > first:
                continue
            visited += 1

            aL = 0.0
            bL = 0.0
            cL = 0.0
            prev = first
            for p in range(start, end):
                r = S[f, p]
                x = X[r, f]
                if p > start and x > prev:
                    aR = A - aL
                    bR = B - bL
                    cR = C - cL
                    if cL >= min_samples_leaf and cR >= min_samples_leaf:
                        ok = True
                        if criterion == SECOND_ORDER:
                            ok = bL >= min_child_weight and bR >= min_child_weight
                        if ok:
                            gain = (
                                _node_score(aL, bL, criterion, lam)
                                + _node_score(aR, bR, criterion, lam)
                                - parent_score
                            )
                            thr = 0.5 * (prev + x)
                            if thr >= x:
                                thr = prev
                            better = best_f < 0 or gain > best_gain + tol
                            if not better and abs(gain - best_gain) <= tol:
                                better = f < best_f or (f == best_f and thr < best_thr)
                            if better and gain > min_gain:
                                best_gain = gain
                                best_f = f
                                best_thr = thr
                aL += stat_a[r]
                bL += stat_b[r]
                cL += cnt[r]
                prev = x

        if best_f < 0:
            continue

        # stable partition of every feature list by the chosen split
        for p in range(start, end):
            r = S[0, p]
            goes_left[r] = X[r, best_f] <= best_thr
        mid = start
        for f in range(n_features):
            nl = 0
            nr = 0
            for p in range(start, end):
                r = S[f, p]
                if goes_left[r]:
                    S[f, start + nl] = r
                    nl += 1
                else:
                    buf[nr] = r
                    nr += 1
            for q in range(nr):
                S[f, start + nl + q] = buf[q]
            mid = start + nl

        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = lc
        right[node] = rc
        if criterion == GINI:
            importance[best_f] += best_gain
        else:
            importance[best_f] += 0.5 * best_gain

        st_node[sp] = rc
        st_start[sp] = mid
        st_end[sp] = end
        st_depth[sp] = depth + 1
        sp += 1
        st_node[sp] = lc
        st_start[sp] = start
        st_end[sp] = mid
        st_depth[sp] = depth + 1
        sp += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
        cover[:n_nodes].copy(),
        importance,
    )


@njit(cache=True, nogil=True)
def grow_histogram(
    Xb, edges, n_edges, rows, grad, hess, cnt, cover_w, max_depth, min_samples_leaf,
    min_child_weight, lam, max_features, seed,
):
    """Second-order growth on pre-binned features.

    ``Xb[r, f]`` is the bin of row r: the number of candidate thresholds
    ``edges[f, :n_edges[f]]`` strictly below the value. Splitting after bin b
    means ``x <= edges[f, b]``. ``rows`` is consumed (partitioned in place).
    """
    n_features = Xb.shape[1]
    m = rows.shape[0]
    max_bins = edges.shape[1] + 1
    cap = 2 * m + 1
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros(cap)
    cover = np.zeros(cap)
    importance = np.zeros(n_features)

    state = np.empty(1, np.uint64)
    state[0] = np.uint64(seed) * np.uint64(6364136223846793005) + np.uint64(1442695040888963407)
    if state[0] == 0:
        state[0] = np.uint64(88172645463325252)
    perm = np.arange(n_features)
    hg = np.zeros(max_bins)
    hh = np.zeros(max_bins)
    hc = np.zeros(max_bins)
    buf = np.empty(m, np.int64)

    st_node = np.empty(cap, np.int64)
    st_start = np.empty(cap, np.int64)
    st_end = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = m
    st_depth[0] = 0
    sp = 1
    n_nodes = 1

    while sp > 0:
        sp -= 1
        node = st_node[sp]
        start = st_start[sp]
        end = st_end[sp]
        depth = st_depth[sp]

        G = 0.0
        H = 0.0
        C = 0.0
        W = 0.0
        for p in range(start, end):
            r = rows[p]
            G += grad[r]
            H += hess[r]
            C += cnt[r]
            W += cover_w[r]
        value[node] = -G / (H + lam)
        cover[node] = W
        if max_depth >= 0 and depth >= max_depth:
            continue
        if C < 2 * min_samples_leaf:
            continue

        parent_score = G * G / (H + lam)
        tol = 1e-12 * (abs(parent_score) + 1.0)
        best_gain = 0.0
        best_f = -1
        best_b = -1

        for i in range(n_features):
            perm[i] = i
        visited = 0
        for i in range(n_features):
            if visited >= max_features:
                break
            j = i + _rand_below(state, n_features - i)
            f = perm[j]
            perm[j] = perm[i]
            perm[i] = f
            nb = n_edges[f] + 1
            if nb < 2:
                continue
            for b in range(nb):
                hg[b] = 0.0
                hh[b] = 0.0
                hc[b] = 0.0
            for p in range(start, end):
                r = rows[p]
                b = Xb[r, f]
                hg[b] += grad[r]
                hh[b] += hess[r]
                hc[b] += cnt[r]
            occupied = 0
            for b in range(nb):
                if hc[b] > 0:
                    occupied += 1
            if occupied < 2:
                continue
            visited += 1
            gL = 0.0
            hL = 0.0
            cL = 0.0
            for b in range(nb - 1):
                gL += hg[b]
                hL += hh[b]
                cL += hc[b]
                if hc[b] == 0.0:
                    continue
                cR = C - cL
                hR = H - hL
                if cL < min_samples_leaf or cR < min_samples_leaf:
                    continue
                if hL < min_child_weight or hR < min_child_weight:
                    continue
                gR = G - gL
                gain = gL * gL / (hL + lam) + gR * gR / (hR + lam) - parent_score
                better = gain > best_gain + tol
                if not better and best_f >= 0 and abs(gain - best_gain) <= tol:
                    better = f < best_f or (f == best_f and b < best_b)
                if better and gain > tol:
                    best_gain = gain
                    best_f = f
                    best_b = b

        if best_f < 0:
            continue

        nl = 0
        nr = 0
        for p in range(start, end):
            r = rows[p]
            if Xb[r, best_f] <= best_b:
                rows[start + nl] = r
                nl += 1
            else:
                buf[nr] = r
                nr += 1
        for q in range(nr):
            rows[start + nl + q] = buf[q]
        mid = start + nl

        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = edges[best_f, best_b]
        left[node] = lc
        right[node] = rc
        importance[best_f] += 0.5 * best_gain

        st_node[sp] = rc
        st_start[sp] = mid
        st_end[sp] = end
        st_depth[sp] = depth + 1
        sp += 1
        st_node[sp] = lc
        st_start[sp] = start
        st_end[sp] = mid
        st_depth[sp] = depth + 1
        sp += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
        cover[:n_nodes].copy(),
        importance,
    )


@njit(cache=True, nogil=True)
def predict_tree(feature, threshold, left, right, value, X):
    n = X.shape[0]
    out = np.empty(n)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


@njit(cache=True, nogil=True)
def apply_tree(feature, threshold, left, right, X):
    n = X.shape[0]
    out = np.empty(n, np.int64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


@njit(cache=True)
def tree_depth(feature, left, right):
    n = feature.shape[0]
    depth = np.zeros(n, np.int64)
    best = 0
    for node in range(n):
        # children always have larger ids than their parent
        if feature[node] >= 0:
            depth[left[node]] = depth[node] + 1
            depth[right[node]] = depth[node] + 1
            if depth[node] + 1 > best:
                best = depth[node] + 1
    return best


# --- TreeSHAP (path-dependent, exact) ---------------------------------------


@njit(cache=True)
def _extend(pf, pz, po, pw, off, depth, zero_fraction, one_fraction, feature_index):
    pf[off + depth] = feature_index
    pz[off + depth] = zero_fraction
    po[off + depth] = one_fraction
    pw[off + depth] = 1.0 if depth == 0 else 0.0
    for i in range(depth - 1, -1, -1):
        pw[off + i + 1] += one_fraction * pw[off + i] * (i + 1) / (depth + 1)
        pw[off + i] = zero_fraction * pw[off + i] * (depth - i) / (depth + 1)


@njit(cache=True)
def _unwind(pf, pz, po, pw, off, depth, path_index):
    one_fraction = po[off + path_index]
    zero_fraction = pz[off + path_index]
    next_one = pw[off + depth]
    for i in range(depth - 1, -1, -1):
        if one_fraction != 0.0:
            tmp = pw[off + i]
            pw[off + i] = next_one * (depth + 1) / ((i + 1) * one_fraction)
            next_one = tmp - pw[off + i] * zero_fraction * (depth - i) / (depth + 1)
        else:
            pw[off + i] = pw[off + i] * (depth + 1) / (zero_fraction * (depth - i))
    for i in range(path_index, depth):
        pf[off + i] = pf[off + i + 1]
        pz[off + i] = pz[off + i + 1]
        po[off + i] = po[off + i + 1]


@njit(cache=True)
def _unwound_sum(pz, po, pw, off, depth, path_index):
    one_fraction = po[off + path_index]
    zero_fraction = pz[off + path_index]
    next_one = pw[off + depth]
    total = 0.0
    if one_fraction != 0.0:
        for i in range(depth - 1, -1, -1):
            tmp = next_one / ((i + 1) * one_fraction)
            total += tmp
            next_one = pw[off + i] - tmp * zero_fraction * (depth - i)
    else:
        for i in range(depth - 1, -1, -1):
            total += pw[off + i] / (zero_fraction * (depth - i))
    return total * (depth + 1)


# not cached: numba's on-disk cache mis-links this recursive function
@njit
def _shap_recurse(
    feature, threshold, left, right, value, cover, x, phi,
    node, depth, pf, pz, po, pw, parent_off, zero_fraction, one_fraction, feature_index,
):
    off = parent_off + depth + 1
    if depth > 0:
        for i in range(depth):
            pf[off + i] = pf[parent_off + i]
            pz[off + i] = pz[parent_off + i]
            po[off + i] = po[parent_off + i]
            pw[off + i] = pw[parent_off + i]
    _extend(pf, pz, po, pw, off, depth, zero_fraction, one_fraction, feature_index)

    split = feature[node]
    if split < 0:
        for i in range(1, depth + 1):
            w = _unwound_sum(pz, po, pw, off, depth, i)
            phi[pf[off + i]] += w * (po[off + i] - pz[off + i]) * value[node]
        return

    if x[split] <= threshold[node]:
        hot = left[node]
        cold = right[node]
    else:
        hot = right[node]
        cold = left[node]
    w = cover[node]
    hot_zero = cover[hot] / w
    cold_zero = cover[cold] / w
    incoming_zero = 1.0
    incoming_one = 1.0

    path_index = depth + 1
    for i in range(depth + 1):
        if pf[off + i] == split:
            path_index = i
            break
    if path_index != depth + 1:
        incoming_zero = pz[off + path_index]
        incoming_one = po[off + path_index]
        _unwind(pf, pz, po, pw, off, depth, path_index)
        depth -= 1

    _shap_recurse(
        feature, threshold, left, right, value, cover, x, phi,
        hot, depth + 1, pf, pz, po, pw, off, hot_zero * incoming_zero, incoming_one, split,
    )
    _shap_recurse(
        feature, threshold, left, right, value, cover, x, phi,
        cold, depth + 1, pf, pz, po, pw, off, cold_zero * incoming_zero, 0.0, split,
    )


@njit(nogil=True)
def tree_shap_rows(feature, threshold, left, right, value, cover, max_depth, X, n_features):
    """Exact path-dependent SHAP values for every row of X; one tree.

    Returns an (n, n_features) array. The bias term is not included.
    """
    n = X.shape[0]
    out = np.zeros((n, n_features))
    size = (max_depth + 2) * (max_depth + 3) + 2
    pf = np.empty(size, np.int64)
    pz = np.empty(size)
    po = np.empty(size)
    pw = np.empty(size)
    phi = np.zeros(n_features + 1)
    for i in range(n):
        for j in range(n_features + 1):
            phi[j] = 0.0
        if feature[0] >= 0:
            _shap_recurse(
                feature, threshold, left, right, value, cover, X[i], phi,
                0, 0, pf, pz, po, pw, 0, 1.0, 1.0, n_features,
            )
        for j in range(n_features):
            out[i, j] = phi[j]
    return out


@njit(cache=True)
def expected_value(feature, left, right, value, cover):
    n = feature.shape[0]
    ev = np.zeros(n)
    # children have larger ids than parents: sweep backwards
    for node in range(n - 1, -1, -1):
        if feature[node] < 0:
            ev[node] = value[node]
        else:
            l = left[node]
            r = right[node]
            ev[node] = (cover[l] * ev[l] + cover[r] * ev[r]) / (cover[l] + cover[r])
    return ev[0]
