"""Hermitian diagonalization, S_z sector bookkeeping, state selection, evolution.

A real-symmetric input is detected and routed to the real solver so that its
eigenvectors come out exactly real; several correlation identities (complex
symmetry of G, the t=0 degeneracy of the exponents) hold to full precision
only with real eigenvectors of a real Hamiltonian.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

HERMITICITY_RTOL = 1e-10
DEGENERACY_RTOL = 1e-10


@dataclass(frozen=True)
class EigenDecomposition:
    """Ascending eigenvalues and orthonormal eigenvector columns."""

    dim: int
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sector: str = "full"


@dataclass(frozen=True)
class SectorBasis:
    """Ordered computational-basis indices spanning one symmetry sector."""

    parent_dim: int
    kept_indices: np.ndarray

    @property
    def dim(self) -> int:
        return self.kept_indices.size


def diagonalize(h: np.ndarray, sector: str = "full") -> EigenDecomposition:
    """Full eigendecomposition of a Hermitian matrix.

    Raises ValueError if ``h`` deviates from Hermiticity by more than
    1e-10 relative to its largest entry.
    """
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("diagonalize expects a square matrix")
    scale = max(1.0, float(np.abs(h).max()))
    herm_err = float(np.abs(h - h.conj().T).max())
    if herm_err > HERMITICITY_RTOL * scale:
        raise ValueError(f"matrix is not Hermitian: |H - H^dag| = {herm_err:.3e}")
    if np.isrealobj(h) or float(np.abs(h.imag).max()) == 0.0:
        vals, vecs = np.linalg.eigh(h.real if not np.isrealobj(h) else h)
    else:
        vals, vecs = np.linalg.eigh(h)
    return EigenDecomposition(dim=h.shape[0], eigenvalues=vals, eigenvectors=vecs,
                              sector=sector)


def sz_sector(n_site: int, n_up: int) -> SectorBasis:
    """Basis of the sector with exactly ``n_up`` up spins (bit value 0)."""
    if not 0 <= n_up <= n_site:
        raise ValueError(f"n_up {n_up} outside chain of length {n_site}")
    n_down = n_site - n_up
    all_states = np.arange(1 << n_site, dtype=np.int64)
    popcounts = np.zeros(1 << n_site, dtype=np.int64)
    for s in range(n_site):
        popcounts += (all_states >> s) & 1
    kept = all_states[popcounts == n_down]
    return SectorBasis(parent_dim=1 << n_site, kept_indices=kept)


def sz_zero_sector(n_site: int) -> SectorBasis:
    """Basis of the S_z = 0 sector; requires an even chain."""
    if n_site % 2:
        raise ValueError("odd chains have no S_z = 0 sector")
    return sz_sector(n_site, n_site // 2)


def project(op: np.ndarray, basis: SectorBasis) -> np.ndarray:
    """Square submatrix of ``op`` on the sector's kept indices, in order."""
    op = np.asarray(op)
    if op.shape != (basis.parent_dim, basis.parent_dim):
        raise ValueError("operator dimension does not match the sector's parent space")
    return op[np.ix_(basis.kept_indices, basis.kept_indices)]


def project_between(op: np.ndarray, row_basis: SectorBasis, col_basis: SectorBasis) -> np.ndarray:
    """Rectangular block of ``op`` mapping col_basis into row_basis."""
    op = np.asarray(op)
    if op.shape != (row_basis.parent_dim, col_basis.parent_dim):
        raise ValueError("operator dimension does not match the sector parent spaces")
    return op[np.ix_(row_basis.kept_indices, col_basis.kept_indices)]


def select_states(e: EigenDecomposition, policy="all") -> np.ndarray:
    """Indices of the reference eigenstates to use.

    ``policy`` is ``"all"`` (or None) for every state, or a fraction
    f in (0, 1] selecting the central block floor(dim*(1-f)/2) ..
    floor(dim*(1+f)/2) - 1 in energy order.
    """
    if policy is None or policy == "all":
        return np.arange(e.dim)
    f = float(policy)
    if not 0.0 < f <= 1.0:
        raise ValueError(f"central fraction must lie in (0, 1], got {f}")
    lo = int(np.floor(e.dim * (1.0 - f) / 2.0))
    hi = int(np.floor(e.dim * (1.0 + f) / 2.0))
    return np.arange(lo, hi)


def evolve(e: EigenDecomposition, t: float, v: np.ndarray) -> np.ndarray:
    """Apply exp(-iHt) to a state vector through the eigenbasis."""
    v = np.asarray(v)
    if v.shape != (e.dim,):
        raise ValueError("state vector dimension mismatch")
    coeffs = e.eigenvectors.conj().T @ v
    return e.eigenvectors @ (np.exp(-1j * e.eigenvalues * t) * coeffs)


def min_eigengap(e: EigenDecomposition) -> float:
    return float(np.diff(e.eigenvalues).min()) if e.dim > 1 else np.inf


def has_degeneracy(e: EigenDecomposition, rel_tol: float = DEGENERACY_RTOL) -> bool:
    """True when any eigenvalue gap falls below rel_tol * ||H||."""
    scale = max(1.0, float(np.abs(e.eigenvalues).max()))
    return min_eigengap(e) < rel_tol * scale


def parity_labels(e: EigenDecomposition, parity_op: np.ndarray) -> np.ndarray:
    """Expectation value of a parity operator in every eigenstate.

    For a parity commuting with H and a nondegenerate spectrum the values are
    +1 or -1; degenerate eigenspaces may mix and yield intermediate values.
    """
    vals = np.einsum("km,kl,lm->m", e.eigenvectors.conj(), parity_op, e.eigenvectors)
    return vals.real


# ---------------------------------------------------------------------------
# binary eigendecomposition cache
#
# layout (little-endian): magic "C2PT", u32 version, u64 dim,
# f64[dim] ascending eigenvalues, then the eigenvectors column by column as
# complex128 (re, im) pairs.

CACHE_MAGIC = b"C2PT"
CACHE_VERSION = 1


def cache_key(model: str, params: dict, seed: int) -> str:
    """Deterministic filename stem for one (model, params, seed) triple."""
    parts = [str(model)] + [f"{k}={params[k]!r}" for k in sorted(params)] + [f"seed={seed}"]
    return "_".join(parts).replace(" ", "")


def save_eigendecomposition(path, e: EigenDecomposition) -> None:
    vecs = np.asarray(e.eigenvectors, dtype=np.complex128)
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(struct.pack("<I", CACHE_VERSION))
        fh.write(struct.pack("<Q", e.dim))
        fh.write(np.asarray(e.eigenvalues, dtype="<f8").tobytes())
        # .T.ravel() streams column-major: all of column 0 first
        fh.write(vecs.T.ravel().astype("<c16").tobytes())


def load_eigendecomposition(path, sector: str = "full") -> EigenDecomposition:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != CACHE_MAGIC:
        raise ValueError("not an eigendecomposition cache file")
    version = struct.unpack("<I", raw[4:8])[0]
    if version != CACHE_VERSION:
        raise ValueError(f"unsupported cache version {version}")
    dim = struct.unpack("<Q", raw[8:16])[0]
    off = 16
    vals = np.frombuffer(raw, dtype="<f8", count=dim, offset=off).copy()
    off += 8 * dim
    vecs = np.frombuffer(raw, dtype="<c16", count=dim * dim, offset=off)
    vecs = vecs.reshape(dim, dim).T.copy()
    return EigenDecomposition(dim=int(dim), eigenvalues=vals, eigenvectors=vecs,
                              sector=sector)
