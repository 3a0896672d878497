"""Embedding memory: per-identity look-up table plus a background ring buffer.

The memory is a (N+B) x d matrix of stored unit embeddings.  Rows 0..N-1
hold one slot per labeled identity and are refreshed by momentum blending;
rows N..N+B-1 form a circular queue of background embeddings where the
oldest entry is overwritten first.  Identity labels are 1-based throughout
(matching MOT ground-truth ids), so identity k lives in row k-1.

Un-written rows stay at zero and contribute a similarity of 0, which keeps
fresh memories from injecting random noise into early softmaxes.
"""

from __future__ import annotations

import numpy as np

def _check_embedding(x, dim: int) -> np.ndarray:
    # Dimension is enforced; unit norm is the caller's contract (gradient
    # checks legitimately probe slightly off the sphere).
    x = np.asarray(x, dtype=float)
    if x.shape != (dim,):
        raise ValueError(f"embedding must have shape ({dim},), got {x.shape}")
    return x


class ProjectionMemory:
    """Look-up table of N identity embeddings plus a circular queue of B
    background embeddings, stored as one (N+B) x d row matrix.

    Reads (:meth:`project`) may run concurrently; writes
    (:meth:`update_labeled`, :meth:`push_background`) need exclusive access.
    No internal locking is performed.
    """

    def __init__(self, n_identities: int, n_background: int, dim: int = 256,
                 momentum: float = 0.5, temperature: float = 1.0 / 30.0):
        if n_identities <= 0 or n_background <= 0 or dim <= 0:
            raise ValueError(
                f"sizes must be positive, got N={n_identities}, B={n_background}, d={dim}"
            )
        if not (0.0 <= momentum <= 1.0):
            raise ValueError(f"momentum must be in [0, 1], got {momentum}")
        if temperature <= 0:
            raise ValueError(f"temperature must be positive, got {temperature}")
        self.n_identities = int(n_identities)
        self.n_background = int(n_background)
        self.dim = int(dim)
        self.momentum = float(momentum)
        self.temperature = float(temperature)
        self.w = np.zeros((self.n_identities + self.n_background, self.dim), dtype=float)
        self.queue_head = 0

    @property
    def lut(self) -> np.ndarray:
        """Identity rows (view), shape (N, d)."""
        return self.w[: self.n_identities]

    @property
    def queue(self) -> np.ndarray:
        """Background rows (view), shape (B, d)."""
        return self.w[self.n_identities:]

    def project(self, x) -> np.ndarray:
        """Cosine similarity of ``x`` against every stored row: ``w @ x``.

        Entries lie in [-1, 1] because rows are unit or zero norm.
        """
        x = _check_embedding(x, self.dim)
        return self.w @ x

    def update_labeled(self, k: int, x) -> None:
        """Momentum-blend identity ``k``'s row toward ``x`` and re-normalize.

        The blend is ``momentum * w_k + (1 - momentum) * x``; the result is
        re-normalized to unit length so that projections stay cosines.
        """
        if not (1 <= k <= self.n_identities):
            raise ValueError(
                f"identity index must be in 1..{self.n_identities}, got {k}"
            )
        x = _check_embedding(x, self.dim)
        blend = self.momentum * self.w[k - 1] + (1.0 - self.momentum) * x
        norm = float(np.linalg.norm(blend))
        if norm < 1e-12:
            raise ValueError(
                "degenerate momentum blend (stored row and update cancel exactly)"
            )
        self.w[k - 1] = blend / norm

    def push_background(self, x) -> None:
        """Overwrite the oldest background slot with ``x`` and advance the head."""
        x = _check_embedding(x, self.dim)
        self.w[self.n_identities + self.queue_head] = x
        self.queue_head = (self.queue_head + 1) % self.n_background

    def save(self, path) -> None:
        """Write a CSV checkpoint: one header line with
        ``n_identities,n_background,dim,queue_head,momentum,temperature``
        followed by one row of d comma-separated 64-bit floats per memory row
        (row-major, shortest round-trip decimal representation).
        """
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("n_identities,n_background,dim,queue_head,momentum,temperature\n")
            fh.write(
                f"{self.n_identities},{self.n_background},{self.dim},"
                f"{self.queue_head},{self.momentum!r},{self.temperature!r}\n"
            )
            for row in self.w:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")

    @classmethod
    def load(cls, path) -> "ProjectionMemory":
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        if len(lines) < 2:
            raise ValueError(f"{path}: truncated memory checkpoint")
        fields = lines[1].split(",")
        if len(fields) != 6:
            raise ValueError(f"{path}: malformed checkpoint header")
        n, b, dim, head = (int(v) for v in fields[:4])
        momentum, temperature = float(fields[4]), float(fields[5])
        mem = cls(n, b, dim, momentum=momentum, temperature=temperature)
        rows = lines[2:]
        if len(rows) != n + b:
            raise ValueError(f"{path}: expected {n + b} rows, got {len(rows)}")
        for i, row in enumerate(rows):
            values = [float(v) for v in row.split(",")]
            if len(values) != dim:
                raise ValueError(f"{path}: row {i} has {len(values)} values, expected {dim}")
            mem.w[i] = values
        if not (0 <= head < b):
            raise ValueError(f"{path}: queue head {head} out of range")
        mem.queue_head = head
        return mem
