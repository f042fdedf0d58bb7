"""Reference implementations, written independently of the package code paths."""

from __future__ import annotations

import itertools

import numpy as np

ORIGIN_ORDER = {"llm": 0, "nbest": 1}


def reference_nms(spans, threshold):
    """Vectorized interval NMS in the style of the classic box NMS loop."""
    if not spans:
        return []
    starts = np.array([s.start_token for s in spans])
    ends = np.array([s.end_token for s in spans])
    scores = np.array([s.score for s in spans])
    origins = np.array([ORIGIN_ORDER[s.origin] for s in spans])
    lengths = ends - starts + 1
    # lexsort: last key is primary
    order = np.lexsort((origins, ends, starts, -scores))
    keep = []
    while order.size:
        i = order[0]
        keep.append(int(i))
        rest = order[1:]
        inter = np.maximum(0, np.minimum(ends[i], ends[rest]) - np.maximum(starts[i], starts[rest]) + 1)
        ov = inter / np.minimum(lengths[i], lengths[rest])
        order = rest[~((inter > 0) & (ov >= threshold))]
    return [spans[i] for i in keep]


def brute_force_pap(matrix, n_golds):
    """Max over every one-to-one assignment of predictions to golds (or to none)."""
    if n_golds == 0:
        return 1.0 if not matrix else 0.0
    best = 0.0
    choices = [None] + list(range(n_golds))
    for assignment in itertools.product(choices, repeat=len(matrix)):
        used = [g for g in assignment if g is not None]
        if len(used) != len(set(used)):
            continue
        cum = total = 0.0
        for rank, gold in enumerate(assignment, start=1):
            m = matrix[rank - 1][gold] if gold is not None else 0.0
            cum += m
            if m > 0:
                total += cum / rank
        best = max(best, total / n_golds)
    return best


def textbook_ap(retrieved, relevant, k):
    """Classical AP@k over distinct item ids."""
    relevant = set(relevant)
    if not relevant:
        return 0.0
    hits, score = 0, 0.0
    for i, item in enumerate(retrieved[:k], start=1):
        if item in relevant:
            hits += 1
            score += hits / i
    return score / len(relevant)
