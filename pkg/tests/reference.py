"""Independent reference implementations used as test oracles.

Everything here is written from the definitions with plain Python loops and
math.log, deliberately sharing no code with the package, so agreement is
evidence and not tautology.
"""

import itertools
import math


def ref_entropy(row) -> float:
    """Shannon entropy, natural log, 0*ln(0) = 0."""
    total = 0.0
    for p in row:
        if p > 0:
            total -= p * math.log(p)
    return total


def ref_max_prob(row) -> float:
    return max(row)


def ref_bald(passes) -> float:
    """Mutual information: entropy of the mean pass minus mean pass entropy."""
    t = len(passes)
    n = len(passes[0])
    mean_row = [sum(passes[ti][k] for ti in range(t)) / t for k in range(n)]
    mean_pass_entropy = sum(ref_entropy(p) for p in passes) / t
    return max(0.0, ref_entropy(mean_row) - mean_pass_entropy)


def ref_select_ascending(scores_by_id, b):
    """ids of the b smallest scores, ties to the smaller id, in pick order."""
    ranked = sorted(scores_by_id.items(), key=lambda kv: (kv[1], kv[0]))
    return [i for i, _ in ranked[: min(b, len(ranked))]]


def ref_select_descending(scores_by_id, b):
    ranked = sorted(scores_by_id.items(), key=lambda kv: (-kv[1], kv[0]))
    return [i for i, _ in ranked[: min(b, len(ranked))]]


def _dist(a, b) -> float:
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))


def ref_coreset_greedy(unlabeled, labeled, b):
    """Quadratic greedy k-center: recompute every min-distance at each pick.

    `unlabeled` is a dict id -> point (sequence of floats); `labeled` a list
    of points.  Returns (ids in pick order, min-distance score at pick time).
    """
    centers = [list(p) for p in labeled]
    remaining = dict(unlabeled)
    picked_ids, picked_scores = [], []
    for _ in range(min(b, len(remaining))):
        best_id, best_d = None, -1.0
        for i in sorted(remaining):
            d = min(_dist(remaining[i], c) for c in centers)
            if d > best_d:
                best_id, best_d = i, d
        picked_ids.append(best_id)
        picked_scores.append(best_d)
        centers.append(list(remaining.pop(best_id)))
    return picked_ids, picked_scores


def ref_covering_radius(points, centers) -> float:
    """Max over points of the distance to the nearest center."""
    return max(min(_dist(p, c) for c in centers) for p in points)


def ref_optimal_kcenter_radius(unlabeled, labeled, k) -> float:
    """Brute force over all size-k subsets of the unlabeled points."""
    ids = sorted(unlabeled)
    best = math.inf
    for subset in itertools.combinations(ids, k):
        centers = list(labeled) + [unlabeled[i] for i in subset]
        best = min(best, ref_covering_radius(list(unlabeled.values()), centers))
    return best


def ref_nearest_centroid(features, centroids):
    """Predicted class of each feature row under the 1-nearest-centroid rule."""
    out = []
    for row in features:
        best_k, best_d = None, math.inf
        for k, c in enumerate(centroids):
            d = _dist(row, c)
            if d < best_d:
                best_k, best_d = k, d
        out.append(best_k)
    return out


def ref_finite_difference_grads(loss_fn, params, step=1e-5):
    """Central-difference gradients of loss_fn(params) for every entry.

    `params` is a list of (W, b) numpy arrays; returns matching structure.
    """
    grads = []
    for layer, (w, b) in enumerate(params):
        gw = w * 0.0
        gb = b * 0.0
        for arr, grad in ((w, gw), (b, gb)):
            for idx in range(arr.size):
                orig = arr.flat[idx]
                arr.flat[idx] = orig + step
                up = loss_fn(params)
                arr.flat[idx] = orig - step
                down = loss_fn(params)
                arr.flat[idx] = orig
                grad.flat[idx] = (up - down) / (2 * step)
        grads.append((gw, gb))
    return grads
