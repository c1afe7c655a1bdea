"""Linear algebra of polarized Hodge structures.

Conventions
-----------
Hodge numbers are listed top-down, ``h^{n,0}, h^{n-1,1}, …, h^{0,n}``, so block
``α`` of an adapted basis spans ``H^{n-α, α}`` and the first ``f^k`` basis
vectors span ``F^k``.

Frames are stored as *rows* in a fixed reference basis: row ``i`` holds the
coordinates of the ``i``-th basis vector.  A frame ``a`` of a filtration lies in
the unipotent orbit iff ``a = u @ l`` with ``u`` block-lower-triangular
(a change of adapted basis) and ``l`` block-upper-unipotent; ``l`` is then
the canonical representative of the flag.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidFrameError, InvalidHodgeTypeError, NotInOrbitError, ShapeError

DEFAULT_TOL = 1e-10


def filtration_dims(hodge_numbers: Sequence[int]) -> tuple[int, ...]:
    """Return ``(f^n, …, f^0)`` as partial sums of ``h^{n,0}, …, h^{0,n}``."""
    h = list(hodge_numbers)
    if not h:
        raise InvalidHodgeTypeError("empty Hodge number sequence")
    if any(int(x) != x or x < 0 for x in h):
        raise InvalidHodgeTypeError(f"Hodge numbers must be non-negative integers: {h}")
    if not any(h):
        raise InvalidHodgeTypeError("at least one Hodge number must be positive")
    return tuple(int(x) for x in np.cumsum(h))


@dataclass(frozen=True)
class HodgeType:
    weight: int
    hodge_numbers: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "hodge_numbers", tuple(int(x) for x in self.hodge_numbers))
        if len(self.hodge_numbers) != self.weight + 1:
            raise InvalidHodgeTypeError(
                f"weight {self.weight} needs {self.weight + 1} Hodge numbers, got {len(self.hodge_numbers)}"
            )
        filtration_dims(self.hodge_numbers)

    @property
    def filtration_dims(self) -> tuple[int, ...]:
        return filtration_dims(self.hodge_numbers)

    def f(self, i: int) -> int:
        """``f^i``; ``f^{n+1} = 0`` and ``f^i = m`` for ``i ≤ 0``."""
        n = self.weight
        if i > n:
            return 0
        if i < 0:
            i = 0
        return self.filtration_dims[n - i]

    @property
    def dim(self) -> int:
        return self.filtration_dims[-1]

    def partition(self) -> "BlockPartition":
        return BlockPartition((0,) + self.filtration_dims)


@dataclass(frozen=True)
class Polarization:
    matrix: np.ndarray
    weight: int
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        q = np.asarray(self.matrix, dtype=complex)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ShapeError(f"polarization must be square, got shape {q.shape}")
        sign = 1 if self.weight % 2 == 0 else -1
        scale = max(np.abs(q).max(), 1.0)
        if np.abs(q - sign * q.T).max() > self.tol * scale:
            kind = "symmetric" if sign == 1 else "skew-symmetric"
            raise ValueError(f"weight {self.weight} polarization must be {kind}")
        s = np.linalg.svd(q, compute_uv=False)
        if s.size and s.min() <= self.tol * scale:
            raise ValueError("polarization is degenerate")
        object.__setattr__(self, "matrix", q)

    @property
    def parity(self) -> str:
        return "symmetric" if self.weight % 2 == 0 else "skew"

    def pair(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Bilinear pairing of row stacks: ``Q(u_i, v_j)``."""
        return np.atleast_2d(u) @ self.matrix @ np.atleast_2d(v).T


@dataclass(frozen=True)
class BlockPartition:
    boundaries: tuple[int, ...]

    def __post_init__(self):
        b = tuple(int(x) for x in self.boundaries)
        if len(b) < 2 or b[0] != 0 or any(y < x for x, y in zip(b, b[1:])):
            raise ValueError(f"bad block boundaries {b}")
        object.__setattr__(self, "boundaries", b)

    @classmethod
    def from_sizes(cls, sizes: Sequence[int]) -> "BlockPartition":
        return cls((0,) + tuple(int(x) for x in np.cumsum(sizes)))

    @property
    def nblocks(self) -> int:
        return len(self.boundaries) - 1

    @property
    def size(self) -> int:
        return self.boundaries[-1]

    @property
    def sizes(self) -> tuple[int, ...]:
        b = self.boundaries
        return tuple(b[i + 1] - b[i] for i in range(self.nblocks))

    def slice(self, alpha: int) -> slice:
        return slice(self.boundaries[alpha], self.boundaries[alpha + 1])


@dataclass(frozen=True)
class BlockMatrix:
    entries: np.ndarray
    partition: BlockPartition

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=complex)
        m = self.partition.size
        if a.shape != (m, m):
            raise ShapeError(f"matrix shape {a.shape} does not match partition size {m}")
        object.__setattr__(self, "entries", a)

    @classmethod
    def from_blocks(cls, blocks, partition: BlockPartition) -> "BlockMatrix":
        m = partition.size
        a = np.zeros((m, m), dtype=complex)
        for al in range(partition.nblocks):
            for be in range(partition.nblocks):
                a[partition.slice(al), partition.slice(be)] = blocks[al][be]
        return cls(a, partition)

    def block(self, alpha: int, beta: int) -> np.ndarray:
        return self.entries[self.partition.slice(alpha), self.partition.slice(beta)]

    def leading(self, k: int) -> np.ndarray:
        """Leading principal block sub-matrix over blocks ``0..k``."""
        end = self.partition.boundaries[k + 1]
        return self.entries[:end, :end]

    def is_block_upper_unipotent(self, tol: float = 0.0) -> bool:
        nb = self.partition.nblocks
        for al in range(nb):
            for be in range(nb):
                blk = self.block(al, be)
                if al == be:
                    ok = np.abs(blk - np.eye(blk.shape[0])).max(initial=0.0) <= tol
                elif al > be:
                    ok = np.abs(blk).max(initial=0.0) <= tol
                else:
                    continue
                if not ok:
                    return False
        return True

    def is_block_lower(self, tol: float = 0.0) -> bool:
        nb = self.partition.nblocks
        return all(
            np.abs(self.block(al, be)).max(initial=0.0) <= tol
            for al in range(nb)
            for be in range(al + 1, nb)
        )


@dataclass(frozen=True)
class HodgeFrame:
    """Rows of a basis adapted to a filtration or decomposition.

    ``conjugation`` is the matrix ``S`` with ``coords(v̄) = conj(coords(v)) @ S``;
    the default (identity) means the reference basis is real.
    """

    rows: np.ndarray
    hodge_type: HodgeType
    conjugation: np.ndarray | None = field(default=None)

    def __post_init__(self):
        r = np.asarray(self.rows, dtype=complex)
        m = self.hodge_type.dim
        if r.shape != (m, m):
            raise ShapeError(f"frame shape {r.shape} does not match Hodge type dimension {m}")
        object.__setattr__(self, "rows", r)
        if self.conjugation is not None:
            object.__setattr__(self, "conjugation", np.asarray(self.conjugation, dtype=complex))

    def block_rows(self, alpha: int) -> np.ndarray:
        return self.rows[self.hodge_type.partition().slice(alpha)]

    def filtration_rows(self, i: int) -> np.ndarray:
        """Rows spanning ``F^i``."""
        return self.rows[: self.hodge_type.f(i)]

    def conjugate(self, rows: np.ndarray) -> np.ndarray:
        out = np.conj(rows)
        return out if self.conjugation is None else out @ self.conjugation

    def as_block_matrix(self) -> BlockMatrix:
        return BlockMatrix(self.rows, self.hodge_type.partition())


def _check_dims(frame: HodgeFrame, q: Polarization) -> None:
    if q.matrix.shape[0] != frame.rows.shape[0]:
        raise ShapeError(f"frame dimension {frame.rows.shape[0]} != polarization dimension {q.matrix.shape[0]}")


def check_first_bilinear_relation(frame: HodgeFrame, q: Polarization, tol: float = DEFAULT_TOL) -> bool:
    """``Q(F^i, F^{n-i+1}) = 0`` for every ``i``."""
    _check_dims(frame, q)
    n = frame.hodge_type.weight
    for i in range(0, n + 2):
        a = frame.filtration_rows(i)
        b = frame.filtration_rows(n - i + 1)
        if a.size == 0 or b.size == 0:
            continue
        if np.abs(q.pair(a, b)).max() > tol:
            return False
    return True


def check_second_bilinear_relation(frame: HodgeFrame, q: Polarization, tol: float = DEFAULT_TOL) -> bool:
    """Positivity of ``(√-1)^{2k-n} Q(v, v̄)`` on every ``H^{k, n-k}`` block.

    Raises :class:`InvalidFrameError` if the blocks are not closed under
    conjugation (``conj(H^{k,n-k}) = H^{n-k,k}``).
    """
    _check_dims(frame, q)
    ht = frame.hodge_type
    n = ht.weight
    for alpha in range(n + 1):
        v = frame.block_rows(alpha)
        if v.size == 0:
            continue
        target = frame.block_rows(n - alpha)
        vbar = frame.conjugate(v)
        if target.size == 0:
            raise InvalidFrameError(f"block {alpha} has no conjugate partner")
        coef, *_ = np.linalg.lstsq(target.T, vbar.T, rcond=None)
        resid = np.abs(target.T @ coef - vbar.T).max()
        if resid > tol * max(1.0, np.abs(vbar).max()):
            raise InvalidFrameError(f"block {alpha} is not conjugate to block {n - alpha} (residual {resid:.2e})")
    for alpha in range(n + 1):
        v = frame.block_rows(alpha)
        if v.size == 0:
            continue
        k = n - alpha
        herm = (1j ** (2 * k - n)) * q.pair(v, frame.conjugate(v))
        herm = 0.5 * (herm + herm.conj().T)
        if np.linalg.eigvalsh(herm).min() <= tol:
            return False
    return True


def _singular(block: np.ndarray, tol: float) -> tuple[bool, float]:
    if block.size == 0:
        return False, 1.0
    scale = max(np.abs(block).max(), np.finfo(float).tiny)
    det = abs(np.linalg.det(block / scale))
    return det <= tol, det


def leading_block_dets(a: BlockMatrix) -> list[float]:
    """Scale-normalized ``|det|`` of the leading principal block sub-matrices."""
    return [_singular(a.leading(k), 0.0)[1] for k in range(a.partition.nblocks)]


def in_unipotent_orbit(a: BlockMatrix, tol: float = DEFAULT_TOL) -> bool:
    return all(not _singular(a.leading(k), tol)[0] for k in range(a.partition.nblocks))


def block_lu(a: BlockMatrix, tol: float = DEFAULT_TOL) -> tuple[BlockMatrix, BlockMatrix]:
    """Factor ``a = u @ l`` with ``l`` block-upper-unipotent and ``u`` block-lower.

    Elimination proceeds by block column with Schur complements, so a failure
    is attributed to the first singular leading block minor ``k``.
    """
    part = a.partition
    for k in range(part.nblocks):
        bad, det = _singular(a.leading(k), tol)
        if bad:
            raise NotInOrbitError(k, det)
    m = part.size
    l = np.zeros((m, m), dtype=complex)
    u = np.zeros((m, m), dtype=complex)
    work = a.entries.copy()
    for k in range(part.nblocks):
        sk = part.slice(k)
        rest = slice(part.boundaries[k + 1], m)
        pivot = work[sk, sk]
        l[sk, sk] = np.eye(pivot.shape[0])
        u[sk, sk] = pivot
        if pivot.size == 0:
            continue
        l[sk, rest] = np.linalg.solve(pivot, work[sk, rest])
        u[rest, sk] = work[rest, sk]
        work[rest, rest] -= work[rest, sk] @ l[sk, rest]
    return BlockMatrix(l, part), BlockMatrix(u, part)


def group_membership(g: np.ndarray, q: Polarization, tol: float = DEFAULT_TOL) -> bool:
    """``Q(gu, gv) = Q(u, v)`` for all ``u, v``, i.e. ``gᵀ Q g = Q``."""
    g = np.asarray(g, dtype=complex)
    if g.shape != q.matrix.shape:
        raise ShapeError(f"g has shape {g.shape}, polarization {q.matrix.shape}")
    return bool(np.abs(g.T @ q.matrix @ g - q.matrix).max() <= tol)


def is_horizontal(v: BlockMatrix, tol: float = 0.0) -> bool:
    """Only the first super-diagonal blocks ``(α, α+1)`` may be nonzero."""
    nb = v.partition.nblocks
    for al in range(nb):
        for be in range(nb):
            if be == al + 1:
                continue
            if np.abs(v.block(al, be)).max(initial=0.0) > tol:
                return False
    return True
