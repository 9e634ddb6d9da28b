"""Self-organizing map with a thresholded Chebyshev neighbourhood."""

from __future__ import annotations

import numpy as np

LEARNING_RATE0 = 0.1
LEARNING_DECAY = 0.999999
UPDATE_THRESHOLD = 0.005


def learning_restraint(it: int) -> float:
    """Learning rate after ``it`` input presentations: ``0.1 * 0.999999**it``."""
    if it < 0:
        raise ValueError("it must be non-negative")
    return LEARNING_RATE0 * LEARNING_DECAY**it


def neighborhood(d) -> float:
    """``exp(-d**2)`` for a Chebyshev grid distance ``d``."""
    return np.exp(-np.square(d))


def chebyshev(a, b) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


class SomGrid:
    """A rows x cols map of weight vectors living in input space.

    Cells are addressed either by ``(row, col)`` or by their flat row-major
    index; ``winner`` returns the flat index because the learner keys its
    cells by it.
    """

    def __init__(self, rows: int = 10, cols: int = 10, dim: int = 2, rng=None, weights=None):
        if rows < 1 or cols < 1:
            raise ValueError("rows and cols must be positive")
        self.rows = rows
        self.cols = cols
        self.dim = dim
        if weights is not None:
            w = np.array(weights, dtype=float)
            if w.shape != (rows * cols, dim):
                raise ValueError(f"weights must have shape {(rows * cols, dim)}, got {w.shape}")
            self.weights = w
        else:
            rng = np.random.default_rng() if rng is None else rng
            self.weights = rng.random((rows * cols, dim))
        self.iteration = 0
        r, c = np.divmod(np.arange(rows * cols), cols)
        self._grid_dist = np.maximum(
            np.abs(r[:, None] - r[None, :]), np.abs(c[:, None] - c[None, :])
        )
        self._neigh = neighborhood(self._grid_dist.astype(float))
        # exp(-d^2) per integer distance, bit-identical to the entries of _neigh
        self._neigh_by_d = neighborhood(np.arange(max(rows, cols), dtype=float))
        self._balls: dict[int, list[np.ndarray]] = {}
        self._radius = -1

    @property
    def size(self) -> int:
        return self.rows * self.cols

    def coord(self, index: int) -> tuple[int, int]:
        return divmod(int(index), self.cols)

    def index(self, coord) -> int:
        return int(coord[0]) * self.cols + int(coord[1])

    def grid_distance(self, a: int, b: int) -> int:
        return int(self._grid_dist[a, b])

    def distances_from(self, index: int) -> np.ndarray:
        return self._grid_dist[index]

    def winner(self, x) -> int:
        # argmin returns the first minimum, i.e. lexicographically smallest (row, col)
        diff = self.weights - x
        return int(np.argmin(np.einsum("ij,ij->i", diff, diff)))

    def gains(self, winner: int) -> np.ndarray:
        """Per-cell update gain at the current iteration, before thresholding."""
        return learning_restraint(self.iteration) * self._neigh[winner]

    def radius(self) -> int:
        """Largest grid distance whose gain passes the threshold now; -1 if none."""
        lr = learning_restraint(self.iteration)
        n = self._neigh_by_d
        r = self._radius
        # the gain only shrinks as iteration grows, so a cached radius stays valid
        # until its outermost ring drops below the threshold
        if (r < 0 or lr * n[r] > UPDATE_THRESHOLD) and (
            r + 1 >= len(n) or not lr * n[r + 1] > UPDATE_THRESHOLD
        ):
            return r
        passing = np.flatnonzero(lr * n > UPDATE_THRESHOLD)
        # exp(-d^2) is decreasing, so the passing distances are a prefix
        self._radius = int(passing[-1]) if passing.size else -1
        return self._radius

    def update(self, x, winner: int) -> np.ndarray:
        """Pull every cell whose gain exceeds the threshold toward ``x``.

        Returns the flat indices of the updated cells.
        """
        r = self.radius()
        lr = learning_restraint(self.iteration)
        if r < 0:
            idx = np.empty(0, dtype=np.intp)
        else:
            idx = self._ball(r, winner)
            w = self.weights[idx]
            g = lr * self._neigh[winner, idx]
            self.weights[idx] = w + g[:, None] * (np.asarray(x, dtype=float) - w)
        self.iteration += 1
        return idx

    def _ball(self, r: int, winner: int) -> np.ndarray:
        balls = self._balls.get(r)
        if balls is None:
            balls = [np.flatnonzero(row <= r) for row in self._grid_dist]
            self._balls[r] = balls
        return balls[winner]

    def snapshot(self) -> tuple[np.ndarray, int]:
        return self.weights.copy(), self.iteration
