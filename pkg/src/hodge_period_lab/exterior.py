"""Multi-index bookkeeping and constant-coefficient exterior algebra.

Two layers live here:

* index algebra on increasing multi-indices (wedge and interior-product sign
  tables used by the Fourier operators), and
* a tiny dictionary-based exterior algebra on the 2d generators
  ``dz_1..dz_d, dz̄_1..dz̄_d`` used by the wedge-expansion oracles.  Generator
  ``g < d`` is ``dz_{g+1}``; generator ``d + j`` is ``dz̄_{j+1}``.  Sorting a
  monomial therefore puts holomorphic factors first, which is also the storage
  convention ``dz_I ∧ dz̄_J`` of :class:`~hodge_period_lab.torus.FourierForm`.
"""
from __future__ import annotations

from functools import lru_cache
from itertools import combinations

import numpy as np

MultiIndex = tuple[int, ...]
ConstForm = dict[MultiIndex, complex]


@lru_cache(maxsize=None)
def multi_indices(d: int, p: int) -> tuple[MultiIndex, ...]:
    """Increasing multi-indices of length ``p`` in ``range(d)``, lexicographic."""
    if p < 0 or p > d:
        return ()
    return tuple(combinations(range(d), p))


@lru_cache(maxsize=None)
def index_lookup(d: int, p: int) -> dict[MultiIndex, int]:
    return {idx: n for n, idx in enumerate(multi_indices(d, p))}


def sort_sign(seq: tuple[int, ...]) -> tuple[int, MultiIndex]:
    """Sign of the permutation sorting ``seq`` (0 if it has a repeat)."""
    if len(set(seq)) != len(seq):
        return 0, ()
    arr = list(seq)
    sign = 1
    # insertion sort, counting transpositions
    for i in range(1, len(arr)):
        j = i
        while j > 0 and arr[j - 1] > arr[j]:
            arr[j - 1], arr[j] = arr[j], arr[j - 1]
            sign = -sign
            j -= 1
    return sign, tuple(arr)


@lru_cache(maxsize=None)
def wedge_matrices(d: int, p: int) -> np.ndarray:
    """``E[j]`` is the matrix of ``e_j ∧ (·)`` from degree ``p`` to ``p + 1``."""
    src = multi_indices(d, p)
    dst = index_lookup(d, p + 1)
    out = np.zeros((d, len(dst), len(src)))
    for j in range(d):
        for b, idx in enumerate(src):
            sign, merged = sort_sign((j,) + idx)
            if sign:
                out[j, dst[merged], b] = sign
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def interior_matrices(d: int, p: int) -> np.ndarray:
    """``I[j]`` is the matrix of the interior product with the dual vector ``e_j^*``.

    ``ι_j(e_{i_0} ∧ … ∧ e_{i_{p-1}}) = Σ_r (-1)^r δ_{j,i_r} (omit i_r)``.
    """
    src = multi_indices(d, p)
    dst = index_lookup(d, p - 1) if p >= 1 else {}
    out = np.zeros((d, len(dst), len(src)))
    for b, idx in enumerate(src):
        for r, j in enumerate(idx):
            out[j, dst[idx[:r] + idx[r + 1:]], b] = (-1) ** r
    out.setflags(write=False)
    return out


def compound(mat: np.ndarray, p: int) -> np.ndarray:
    """p-th compound matrix (all p×p minors), the Gram matrix on Λ^p."""
    d = mat.shape[0]
    idx = multi_indices(d, p)
    out = np.empty((len(idx), len(idx)), dtype=complex)
    for a, rows in enumerate(idx):
        for b, cols in enumerate(idx):
            out[a, b] = np.linalg.det(mat[np.ix_(rows, cols)]) if p else 1.0
    return out


# --- constant-coefficient forms on 2d generators ---------------------------------


def cwedge(a: ConstForm, b: ConstForm) -> ConstForm:
    out: ConstForm = {}
    for ia, ca in a.items():
        for ib, cb in b.items():
            sign, merged = sort_sign(ia + ib)
            if sign:
                out[merged] = out.get(merged, 0.0) + sign * ca * cb
    return out


def cadd(*forms: ConstForm) -> ConstForm:
    out: ConstForm = {}
    for f in forms:
        for k, v in f.items():
            out[k] = out.get(k, 0.0) + v
    return out


def cscale(c: complex, a: ConstForm) -> ConstForm:
    return {k: c * v for k, v in a.items()}


def cconj(a: ConstForm, d: int) -> ConstForm:
    """Complex conjugate: swaps dz_j and dz̄_j and conjugates coefficients."""
    out: ConstForm = {}
    for idx, c in a.items():
        swapped = tuple(g + d if g < d else g - d for g in idx)
        sign, merged = sort_sign(swapped)
        out[merged] = out.get(merged, 0.0) + sign * np.conj(c)
    return out


def one_form(hol: np.ndarray, antihol: np.ndarray) -> ConstForm:
    """``Σ hol_j dz_j + Σ antihol_j dz̄_j``."""
    d = len(hol)
    out: ConstForm = {(j,): complex(hol[j]) for j in range(d) if hol[j] != 0}
    out.update({(d + j,): complex(antihol[j]) for j in range(d) if antihol[j] != 0})
    return out


def monomial(I: MultiIndex, J: MultiIndex, d: int, coeff: complex = 1.0) -> ConstForm:
    return {tuple(I) + tuple(d + j for j in J): coeff}


def kahler_const(kahler: np.ndarray) -> ConstForm:
    """``ω = i Σ W_ij dz_i ∧ dz̄_j`` as a constant form."""
    d = kahler.shape[0]
    return {(i, d + j): 1j * kahler[i, j] for i in range(d) for j in range(d) if kahler[i, j] != 0}


def cpower(a: ConstForm, r: int) -> ConstForm:
    out: ConstForm = {(): 1.0}
    for _ in range(r):
        out = cwedge(out, a)
    return out


def bidegree_blocks(a: ConstForm, d: int) -> dict[tuple[int, int], np.ndarray]:
    """Split a constant form into ``(p, q) -> coefficient[I, J]`` arrays."""
    out: dict[tuple[int, int], np.ndarray] = {}
    for idx, c in a.items():
        I = tuple(g for g in idx if g < d)
        J = tuple(g - d for g in idx if g >= d)
        key = (len(I), len(J))
        if key not in out:
            out[key] = np.zeros((len(multi_indices(d, key[0])), len(multi_indices(d, key[1]))), dtype=complex)
        out[key][index_lookup(d, key[0])[I], index_lookup(d, key[1])[J]] += c
    return out


def from_blocks(blocks: dict[tuple[int, int], np.ndarray], d: int) -> ConstForm:
    out: ConstForm = {}
    for (p, q), arr in blocks.items():
        for a, I in enumerate(multi_indices(d, p)):
            for b, J in enumerate(multi_indices(d, q)):
                if arr[a, b] != 0:
                    key = tuple(I) + tuple(d + j for j in J)
                    out[key] = out.get(key, 0.0) + arr[a, b]
    return out


def degree_basis(d: int, n: int) -> list[tuple[int, int, int, int]]:
    """Ordered basis of constant n-forms: ``(p, q, a, b)`` for ``dz_{I_a} ∧ dz̄_{J_b}``.

    Bidegrees run ``(n, 0), (n-1, 1), …, (0, n)``; inside a bidegree the order
    is the flattened ``(I, J)`` storage order.
    """
    out = []
    for p in range(n, -1, -1):
        q = n - p
        for a in range(len(multi_indices(d, p))):
            for b in range(len(multi_indices(d, q))):
                out.append((p, q, a, b))
    return out


def to_vector(a: ConstForm, d: int, n: int) -> np.ndarray:
    blocks = bidegree_blocks(a, d)
    vec = np.zeros(len(degree_basis(d, n)), dtype=complex)
    pos = 0
    for p in range(n, -1, -1):
        q = n - p
        size = len(multi_indices(d, p)) * len(multi_indices(d, q))
        if (p, q) in blocks:
            vec[pos:pos + size] = blocks[(p, q)].ravel()
        pos += size
    for key in blocks:
        if sum(key) != n and np.any(blocks[key]):
            raise ValueError(f"form has a component of degree {sum(key)}, expected {n}")
    return vec
