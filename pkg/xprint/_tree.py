import numpy as np

LEAF = -1


def _gini(counts: np.ndarray, sizes: np.ndarray) -> np.ndarray:
    return 1.0 - np.sum((counts / sizes[:, None]) ** 2, axis=1)


def _best_split(X, y, idx, n_classes, features, min_leaf):
    """Return (impurity, feature, threshold) of the best Gini split of idx.

    The feature is None when no admissible split exists.
    """
    n = idx.size
    onehot = np.eye(n_classes)[y[idx]]
    total = onehot.sum(axis=0)
    n_left = np.arange(1, n, dtype=np.float64)
    n_right = n - n_left
    size_ok = (n_left >= min_leaf) & (n_right >= min_leaf)

    best = (np.inf, None, 0.0)
    for f in features:
        x = X[idx, f]
        order = np.argsort(x, kind="mergesort")
        xs = x[order]
        left = np.cumsum(onehot[order], axis=0)[:-1]
        right = total - left
        impurity = (n_left * _gini(left, n_left)
                    + n_right * _gini(right, n_right)) / n
        valid = size_ok & (xs[1:] > xs[:-1])
        if not valid.any():
            continue
        impurity = np.where(valid, impurity, np.inf)
        k = int(np.argmin(impurity))
        if impurity[k] < best[0]:
            threshold = (xs[k] + xs[k + 1]) / 2.0
            # midpoint of adjacent floats may round up to the right value
            if threshold >= xs[k + 1]:
                threshold = xs[k]
            best = (float(impurity[k]), int(f), float(threshold))
    return best


class DecisionTree:
    """Axis-aligned classification tree stored as flat arrays.

    Node ``i`` is a leaf when ``feature[i] == LEAF``; otherwise samples with
    ``x[feature[i]] <= threshold[i]`` go to ``left[i]`` and the others to
    ``right[i]``. ``value[i]`` is the class distribution of the node's
    training samples and sums to 1.
    """

    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=np.intp)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.intp)
        self.right = np.asarray(right, dtype=np.intp)
        self.value = np.asarray(value, dtype=np.float64)

    @property
    def node_count(self) -> int:
        return self.feature.size

    @classmethod
    def grow(cls, X, y, n_classes, sample_indices, *, max_depth, min_leaf,
             max_features, rng):
        """Grow a tree on ``X[sample_indices]`` (indices may repeat)."""
        n_features = X.shape[1]
        n_try = min(max_features, n_features)
        feature, threshold, left, right, value = [], [], [], [], []

        def new_node(idx):
            counts = np.bincount(y[idx], minlength=n_classes).astype(np.float64)
            feature.append(LEAF)
            threshold.append(0.0)
            left.append(LEAF)
            right.append(LEAF)
            value.append(counts / counts.sum())
            return len(feature) - 1

        stack = [(new_node(sample_indices), sample_indices, 0)]
        while stack:
            node, idx, depth = stack.pop()
            parent = value[node]
            parent_impurity = 1.0 - float(np.sum(parent ** 2))
            if (depth >= max_depth or idx.size < 2 * min_leaf
                    or parent_impurity <= 0.0):
                continue
            features = rng.choice(n_features, size=n_try, replace=False)
            impurity, f, thr = _best_split(X, y, idx, n_classes, features,
                                           min_leaf)
            if f is None or impurity >= parent_impurity - 1e-12:
                continue
            mask = X[idx, f] <= thr
            left_node = new_node(idx[mask])
            right_node = new_node(idx[~mask])
            feature[node] = f
            threshold[node] = thr
            left[node] = left_node
            right[node] = right_node
            stack.append((right_node, idx[~mask], depth + 1))
            stack.append((left_node, idx[mask], depth + 1))
        return cls(feature, threshold, left, right, np.vstack(value))

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by every row of X."""
        node = np.zeros(X.shape[0], dtype=np.intp)
        while True:
            feat = self.feature[node]
            active = np.flatnonzero(feat != LEAF)
            if active.size == 0:
                return node
            current = node[active]
            go_left = X[active, feat[active]] <= self.threshold[current]
            node[active] = np.where(go_left, self.left[current],
                                    self.right[current])

    def predict_proba(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> dict:
        return {"feature": self.feature.tolist(),
                "threshold": self.threshold.tolist(),
                "left": self.left.tolist(),
                "right": self.right.tolist(),
                "value": self.value.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "DecisionTree":
        return cls(data["feature"], data["threshold"], data["left"],
                   data["right"], data["value"])
