"""Histogram-based decision trees grown one depth level at a time.

Features are pre-binned into at most 256 ordered bins. All frontier nodes of
a level are scored with a single ``bincount`` so the Python overhead scales
with tree depth, not with node count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_BINS = 256
# cap on histogram cells built per chunk of frontier nodes
_CELL_BUDGET = 1 << 22
# scan only occupied bins once histograms would be this much larger than the row count
SPARSE_RATIO = 2.0


@dataclass
class Binning:
    """Per-feature split thresholds; bin ``b`` holds values in (t[b-1], t[b]]."""

    thresholds: list[np.ndarray]

    @classmethod
    def fit(cls, X: np.ndarray, weights: np.ndarray | None = None, max_bins: int = MAX_BINS) -> "Binning":
        X = np.asarray(X, dtype=float)
        w = np.ones(len(X)) if weights is None else np.asarray(weights, dtype=float)
        out = []
        for j in range(X.shape[1]):
            uniq, inv = np.unique(X[:, j], return_inverse=True)
            if len(uniq) <= max_bins:
                cut = np.arange(len(uniq) - 1)
            else:
                # weighted quantiles over distinct values: invariant to uniform reweighting
                cdf = np.cumsum(np.bincount(inv, weights=w, minlength=len(uniq)))
                cdf /= cdf[-1]
                cut = np.searchsorted(cdf, np.arange(1, max_bins) / max_bins, side="left")
                cut = np.unique(np.clip(cut, 0, len(uniq) - 2))
            lo, hi = uniq[cut], uniq[cut + 1]
            mid = 0.5 * (lo + hi)
            out.append(np.where(mid < hi, mid, lo))
        return cls(out)

    @property
    def n_bins(self) -> np.ndarray:
        return np.array([len(t) + 1 for t in self.thresholds])

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        codes = np.empty(X.shape, dtype=np.uint8)
        for j, t in enumerate(self.thresholds):
            codes[:, j] = np.searchsorted(t, X[:, j], side="left")
        return codes


@dataclass
class Tree:
    feature: np.ndarray  # -1 at leaves
    threshold: np.ndarray  # real-valued: go left when x <= threshold
    bin: np.ndarray  # binned equivalent of threshold
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # (n_nodes, n_out)
    depth: int

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index for each row of raw features."""
        return self._apply(np.asarray(X, dtype=float), self.threshold)

    def apply_binned(self, codes: np.ndarray) -> np.ndarray:
        return self._apply(codes, self.bin)

    def _apply(self, X, cut):
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        for _ in range(self.depth):
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                break
            r, nd = rows[inner], node[inner]
            go_left = X[r, f[inner]] <= cut[nd]
            node[inner] = np.where(go_left, self.left[nd], self.right[nd])
        return node

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "bin": self.bin.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "depth": self.depth,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=float),
            np.asarray(d["bin"], dtype=np.int64),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["value"], dtype=float).reshape(len(d["feature"]), -1),
            int(d["depth"]),
        )


def grow_tree(codes: np.ndarray, binning: Binning, rows: np.ndarray, *, mode: str,
              weight: np.ndarray, size: np.ndarray, target: np.ndarray,
              hessian: np.ndarray | None = None, n_classes: int = 1,
              max_depth: int | None = None, min_leaf: float = 1.0,
              max_features: int | None = None, rng: np.random.Generator | None = None) -> Tree:
    """Grow one tree on ``codes[rows]``.

    ``mode="gini"``: ``target`` holds class indices, leaves store class
    weight fractions. ``mode="newton"``: ``target`` holds residuals, splits
    minimise weighted squared error and leaves store the Newton step
    ``sum(w*r) / sum(hessian)``. ``size`` is what ``min_leaf`` counts.
    Exact gain ties go to the lowest feature index, then the lowest bin.
    """
    n_feat = codes.shape[1]
    nbins = binning.n_bins
    B = int(nbins.max()) if n_feat else 1
    C = n_classes if mode == "gini" else 1
    mtry = n_feat if max_features is None else max(1, min(max_features, n_feat))
    depth_cap = np.inf if max_depth is None else max_depth

    rows = np.asarray(rows, dtype=np.int64)
    w_all = np.asarray(weight, dtype=float)
    size_all = np.asarray(size, dtype=float)
    if mode == "gini":
        y_all = np.asarray(target, dtype=np.int64)
    else:
        r_all = np.asarray(target, dtype=float)
        s_all = w_all * r_all
        h_all = np.asarray(hessian, dtype=float)

    feature, bin_, left, right, value = [-1], [0], [-1], [-1], [None]
    frontier = np.array([0])
    slot = np.zeros(len(rows), dtype=np.int64)
    depth = 0
    while len(frontier):
        nf = len(frontier)
        W = np.bincount(slot, weights=w_all[rows], minlength=nf)
        S = np.bincount(slot, weights=size_all[rows], minlength=nf)
        if mode == "gini":
            Wc = np.bincount(slot * C + y_all[rows], weights=w_all[rows], minlength=nf * C).reshape(nf, C)
            parent = (Wc**2).sum(axis=1) / W
            leafval = Wc / W[:, None]
            pure = Wc.max(axis=1) >= W
        else:
            G = np.bincount(slot, weights=s_all[rows], minlength=nf)
            H = np.bincount(slot, weights=h_all[rows], minlength=nf)
            parent = G**2 / W
            leafval = (G / np.maximum(H, 1e-12 * W))[:, None]
            pure = np.zeros(nf, dtype=bool)
        for k, node in enumerate(frontier):
            value[node] = leafval[k]

        can_split = (depth < depth_cap) & (S >= 2 * min_leaf) & ~pure
        best_f = np.full(nf, -1)
        best_b = np.zeros(nf, dtype=np.int64)
        split_slots = np.flatnonzero(can_split)
        if len(split_slots) and n_feat and B > 1:
            if mtry < n_feat:
                fsel = np.sort(rng.random((len(split_slots), n_feat)).argsort(axis=1)[:, :mtry], axis=1)
            else:
                fsel = np.broadcast_to(np.arange(n_feat), (len(split_slots), n_feat))
            compact = np.full(nf, -1)
            compact[split_slots] = np.arange(len(split_slots))
            chunk = max(1, _CELL_BUDGET // (mtry * B * C))
            for start in range(0, len(split_slots), chunk):
                stop = min(start + chunk, len(split_slots))
                _best_splits(
                    start, stop, compact, slot, rows, codes, fsel, nbins, B, C, mode,
                    w_all, size_all, y_all if mode == "gini" else r_all,
                    W, S, parent, min_leaf, split_slots, best_f, best_b,
                )

        # materialise children
        child_of = np.full((nf, 2), -1)
        for k in np.flatnonzero(best_f >= 0):
            node = frontier[k]
            feature[node] = int(best_f[k])
            bin_[node] = int(best_b[k])
            base = len(feature)
            feature += [-1, -1]
            bin_ += [0, 0]
            left += [-1, -1]
            right += [-1, -1]
            value += [None, None]
            left[node], right[node] = base, base + 1
            child_of[k] = (base, base + 1)
        if not (best_f >= 0).any():
            break
        keep = best_f[slot] >= 0
        rows, slot = rows[keep], slot[keep]
        go_left = codes[rows, best_f[slot]] <= best_b[slot]
        child = np.where(go_left, child_of[slot, 0], child_of[slot, 1])
        frontier, slot = np.unique(child, return_inverse=True)
        depth += 1

    feature = np.asarray(feature, dtype=np.int64)
    bin_ = np.asarray(bin_, dtype=np.int64)
    threshold = np.zeros(len(feature))
    inner = feature >= 0
    threshold[inner] = [binning.thresholds[f][b] for f, b in zip(feature[inner], bin_[inner])]
    return Tree(feature, threshold, bin_, np.asarray(left, dtype=np.int64),
                np.asarray(right, dtype=np.int64), np.vstack(value), depth + 1)


def _best_splits(start, stop, compact, slot, rows, codes, fsel, nbins, B, C, mode,
                 w_all, size_all, stat_all, W, S, parent, min_leaf, split_slots, best_f, best_b):
    n_nodes = stop - start
    mtry = fsel.shape[1]
    cslot = compact[slot]
    sel = (cslot >= start) & (cslot < stop)
    r = rows[sel]
    local = cslot[sel] - start
    if mtry == codes.shape[1]:
        cell = codes[r].astype(np.int64)
    else:
        cell = codes[r[:, None], fsel[start:stop][local]].astype(np.int64)
    # cell index = ((node * mtry) + feature slot) * B + bin
    cell += np.arange(mtry) * B
    cell += (local * (mtry * B))[:, None]
    shape = cell.shape
    w = np.broadcast_to(w_all[r][:, None], shape).ravel()
    z = np.broadcast_to(size_all[r][:, None], shape).ravel()
    y = np.broadcast_to(stat_all[r][:, None], shape).ravel()
    if n_nodes * B > SPARSE_RATIO * len(r):
        top, j, b = _scan_sparse(cell.ravel(), w, z, y, n_nodes, mtry, B, C, mode, min_leaf,
                                 parent[split_slots[start:stop]])
    else:
        top, j, b = _scan_dense(cell.ravel(), w, z, y, n_nodes, mtry, B, C, mode, min_leaf,
                                parent[split_slots[start:stop]], nbins[fsel[start:stop]])
    idx = split_slots[start:stop]
    tol = 1e-12 * np.maximum(np.abs(parent[idx]), 1e-300)
    ok = np.isfinite(top) & (top > tol)
    best_f[idx[ok]] = fsel[start:stop][ok, j[ok]]
    best_b[idx[ok]] = b[ok]


def _gain(mode, left, tot, WL, WR, parent):
    with np.errstate(divide="ignore", invalid="ignore"):
        if mode == "gini":
            return (left**2).sum(axis=-1) / WL + ((tot - left) ** 2).sum(axis=-1) / WR - parent
        return left**2 / WL + (tot - left) ** 2 / WR - parent


def _scan_dense(flat, w, z, y, n_nodes, mtry, B, C, mode, min_leaf, parent, nbins):
    """Best split per node from full (node, feature, bin) histograms."""
    ncell = n_nodes * mtry * B
    hw = np.bincount(flat, weights=w, minlength=ncell).reshape(n_nodes, mtry, B).cumsum(axis=2)
    hz = np.bincount(flat, weights=z, minlength=ncell).reshape(n_nodes, mtry, B).cumsum(axis=2)
    if mode == "gini":
        hs = np.bincount(flat * C + y, weights=w, minlength=ncell * C)
        hs = hs.reshape(n_nodes, mtry, B, C).cumsum(axis=2)
    else:
        hs = np.bincount(flat, weights=w * y, minlength=ncell).reshape(n_nodes, mtry, B).cumsum(axis=2)
    WL, WR = hw[:, :, :-1], hw[:, :, -1:] - hw[:, :, :-1]
    SL, SR = hz[:, :, :-1], hz[:, :, -1:] - hz[:, :, :-1]
    valid = (SL >= min_leaf) & (SR >= min_leaf) & (WL > 0) & (WR > 0)
    valid &= np.arange(B - 1)[None, None, :] < (nbins - 1)[:, :, None]
    gain = _gain(mode, hs[:, :, :-1], hs[:, :, -1:], WL, WR, parent[:, None, None])
    flatgain = np.where(valid, gain, -np.inf).reshape(n_nodes, -1)
    arg = flatgain.argmax(axis=1)
    j, b = np.divmod(arg, B - 1)
    return flatgain[np.arange(n_nodes), arg], j, b


def _scan_sparse(flat, w, z, y, n_nodes, mtry, B, C, mode, min_leaf, parent):
    """Same choice as the dense scan, visiting only occupied bins.

    Splitting after an empty bin equals splitting after the last occupied
    bin below it, and the dense argmax already prefers the lower bin.
    """
    uniq, inv = np.unique(flat, return_inverse=True)
    U = len(uniq)
    Wv = np.bincount(inv, weights=w, minlength=U)
    Zv = np.bincount(inv, weights=z, minlength=U)
    if mode == "gini":
        Sv = np.bincount(inv * C + y, weights=w, minlength=U * C).reshape(U, C)
    else:
        Sv = np.bincount(inv, weights=w * y, minlength=U)
    group = uniq // B
    is_start = np.r_[True, group[1:] != group[:-1]]
    gidx = np.cumsum(is_start) - 1
    starts = np.flatnonzero(is_start)
    ends = np.r_[starts[1:], U] - 1

    lens = ends - starts + 1
    by_len = np.argsort(-lens, kind="stable")
    n_active = np.searchsorted(-lens[by_len], -np.arange(lens.max()), side="left")

    def segmented(v):
        # running sums restarted per segment, added in the same order as the
        # dense cumsum so both scans see bit-identical statistics
        out = np.empty_like(v)
        acc = np.zeros((len(starts),) + v.shape[1:])
        for k, m in enumerate(n_active):
            seg = by_len[:m]
            pos = starts[seg] + k
            acc[seg] += v[pos]
            out[pos] = acc[seg]
        return out

    WL, ZL, SL = segmented(Wv), segmented(Zv), segmented(Sv)
    WT, ZT, ST = WL[ends][gidx], ZL[ends][gidx], SL[ends][gidx]
    WR, ZR = WT - WL, ZT - ZL
    node = group // mtry
    valid = (ZL >= min_leaf) & (ZR >= min_leaf) & (WL > 0) & (WR > 0)
    gain = np.where(valid, _gain(mode, SL, ST, WL, WR, parent[node]), -np.inf)
    node_starts = np.flatnonzero(np.r_[True, node[1:] != node[:-1]])
    top = np.full(n_nodes, -np.inf)
    first = np.zeros(n_nodes, dtype=np.int64)
    present = node[node_starts]
    mx = np.maximum.reduceat(gain, node_starts)
    pos = np.where(gain == mx[np.searchsorted(present, node)], np.arange(U), U)
    first[present] = np.minimum.reduceat(pos, node_starts)
    top[present] = mx
    first = np.minimum(first, U - 1)
    return top, group[first] % mtry, uniq[first] % B
