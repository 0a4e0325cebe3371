"""Max-score permutation assignment with a deterministic small-case route.

Both window-label matching and speaker-mapping evaluation reduce to: given
a square score matrix, pick the permutation maximizing the sum of selected
entries. Small instances are enumerated exhaustively in lexicographic
order, so ties resolve to the lexicographically smallest permutation and
results are reproducible; larger instances go through the Hungarian
solver, which is optimal but makes no tie-break promise.
"""

from __future__ import annotations

from itertools import permutations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ValidationError

DEFAULT_EXHAUSTIVE_LIMIT = 6


def best_permutation(score: np.ndarray,
                     exhaustive_limit: int = DEFAULT_EXHAUSTIVE_LIMIT
                     ) -> tuple[int, ...]:
    """Permutation ``perm`` maximizing ``sum(score[i, perm[i]] for i)``.

    ``score`` must be square. Sizes up to ``exhaustive_limit`` use
    exhaustive search with lexicographic tie-breaking; larger sizes use
    scipy's linear_sum_assignment (any optimal permutation).
    """
    score = np.asarray(score, dtype=np.float64)
    if score.ndim != 2 or score.shape[0] != score.shape[1]:
        raise ValidationError(f"score matrix must be square, got {score.shape}")
    p = score.shape[0]
    if p == 0:
        return ()
    if p <= exhaustive_limit:
        best: tuple[int, ...] | None = None
        best_total = -np.inf
        for perm in permutations(range(p)):
            total = float(score[np.arange(p), perm].sum())
            if total > best_total:
                best_total = total
                best = perm
        assert best is not None
        return best
    rows, cols = linear_sum_assignment(score, maximize=True)
    perm = [0] * p
    for r, c in zip(rows, cols):
        perm[int(r)] = int(c)
    return tuple(perm)
