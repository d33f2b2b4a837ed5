"""Disorder sampling and Hamiltonian assembly for the SYK and XXZ models.

SYK (N Majoranas, Hilbert dimension 2**(N/2)):

    H = sqrt(6/N^3) * sum_{i<j<k<l} J_ijkl psi_i psi_j psi_k psi_l
        + (i/sqrt(N)) * sum_{i<j}   K_ij   psi_i psi_j

with J_ijkl i.i.d. standard Gaussian and K_ij Gaussian with standard
deviation ``k_strength``.

XXZ chain (n_site spins, periodic):

    H = sum_s [ (1/4) sigma_vec_s . sigma_vec_{s+1} + (w_s/2) sigma_z_s ]

with w_s i.i.d. uniform on [-W, +W].  The wraparound bond pairs the last site
with the first, so the two-site chain counts its single pair twice.

Two equivalent SYK assembly routes are kept deliberately: a readable dense
route that multiplies precomputed pair products psi_i psi_j, and a fast route
that composes Pauli strings in (mask, phase) form and scatters mask-grouped
column sums into the dense matrix without any matrix products.  Tests pin
them against each other.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

from .operators import (
    MajoranaSet,
    compose_mask_phase,
    majorana_labels,
    spin_site_operator,
    string_mask_phase,
)
from .spectral import SectorBasis, sz_sector


@dataclass(frozen=True)
class SykCouplings:
    """One SYK disorder realization.

    ``j`` holds J_ijkl for all i<j<k<l in lexicographic order of the index
    quadruples; ``kmat`` holds K_ij for all i<j likewise.
    """

    n_majorana: int
    k_strength: float
    j: np.ndarray
    kmat: np.ndarray
    seed: int


@dataclass(frozen=True)
class XxzFields:
    """One XXZ disorder realization: the random z-axis fields w_s."""

    n_site: int
    w_disorder: float
    w: np.ndarray
    seed: int


def sample_syk(n_majorana: int, k_strength: float, seed: int) -> SykCouplings:
    """Draw one SYK realization deterministically from ``seed``.

    The Gaussian stream for the quartic couplings is drawn first and the
    quadratic one second, both at unit scale; ``k_strength`` only rescales the
    latter, so a given seed yields the same J regardless of k_strength.
    """
    if n_majorana < 4 or n_majorana % 2:
        raise ValueError("SYK needs even n_majorana >= 4")
    if k_strength < 0:
        raise ValueError("k_strength must be nonnegative")
    rng = np.random.default_rng(seed)
    j = rng.standard_normal(comb(n_majorana, 4))
    kraw = rng.standard_normal(comb(n_majorana, 2))
    return SykCouplings(
        n_majorana=n_majorana,
        k_strength=float(k_strength),
        j=j,
        kmat=k_strength * kraw,
        seed=int(seed),
    )


def sample_xxz(n_site: int, w_disorder: float, seed: int) -> XxzFields:
    """Draw one XXZ realization deterministically from ``seed``."""
    if n_site < 2:
        raise ValueError("XXZ needs n_site >= 2")
    if w_disorder < 0:
        raise ValueError("w_disorder must be nonnegative")
    rng = np.random.default_rng(seed)
    w = rng.uniform(-w_disorder, w_disorder, size=n_site)
    return XxzFields(n_site=n_site, w_disorder=float(w_disorder), w=w, seed=int(seed))


class SykTermTable:
    """Realization-independent tables for fast dense SYK assembly.

    Each quartic monomial psi_i psi_j psi_k psi_l is a Pauli string with an
    XOR mask and a per-column phase vector; the quadratic monomials likewise.
    Terms are grouped by mask so one weighted segment sum per mask fills a
    whole antidiagonal of the Hamiltonian at once.
    """

    def __init__(self, n_majorana: int):
        self.n_majorana = n_majorana
        self.dim = 1 << (n_majorana // 2)
        strings = [string_mask_phase(lab) for lab in majorana_labels(n_majorana)]
        self.probe_strings = strings

        quads = list(itertools.combinations(range(n_majorana), 4))
        self._quartic = self._grouped_table(
            [self._monomial(strings, idx) for idx in quads], scale=0.25
        )
        pairs = list(itertools.combinations(range(n_majorana), 2))
        self._quadratic = self._grouped_table(
            [self._monomial(strings, idx) for idx in pairs], scale=0.5
        )

    @staticmethod
    def _monomial(strings, indices):
        acc = strings[indices[0]]
        for i in indices[1:]:
            acc = compose_mask_phase(acc, strings[i])
        return acc

    def _grouped_table(self, monomials, scale):
        masks = np.array([m for m, _ in monomials], dtype=np.int64)
        phases = np.array([p for _, p in monomials]) * scale
        order = np.argsort(masks, kind="stable")
        masks = masks[order]
        unique_masks, starts = np.unique(masks, return_index=True)
        return {
            "order": order,          # canonical index -> table row
            "phases": phases[order],
            "unique_masks": unique_masks,
            "starts": starts,
        }

    def _accumulate(self, h, table, weights):
        weighted = weights[table["order"], None] * table["phases"]
        segments = np.add.reduceat(weighted, table["starts"], axis=0)
        cols = np.arange(self.dim)
        for row, mask in enumerate(table["unique_masks"]):
            h[cols ^ mask, cols] += segments[row]

    def hamiltonian(self, c: SykCouplings) -> np.ndarray:
        """Dense Hamiltonian of one realization."""
        if c.n_majorana != self.n_majorana:
            raise ValueError("couplings do not match this table's n_majorana")
        n = self.n_majorana
        h = np.zeros((self.dim, self.dim), dtype=complex)
        self._accumulate(h, self._quartic, np.sqrt(6.0 / n**3) * c.j)
        if c.k_strength != 0.0:
            self._accumulate(h, self._quadratic, (1j / np.sqrt(n)) * c.kmat)
        return h


@lru_cache(maxsize=4)
def syk_term_table(n_majorana: int) -> SykTermTable:
    return SykTermTable(n_majorana)


def build_syk_hamiltonian(c: SykCouplings, m: MajoranaSet) -> np.ndarray:
    """Assemble the SYK Hamiltonian for one realization.

    ``m`` fixes the representation and the dimension contract; the heavy
    lifting runs through the cached string table for ``c.n_majorana``.
    """
    if m.n_majorana != c.n_majorana:
        raise ValueError("MajoranaSet and couplings disagree on n_majorana")
    return syk_term_table(c.n_majorana).hamiltonian(c)


def pair_product_hamiltonian(c: SykCouplings, m: MajoranaSet) -> np.ndarray:
    """Reference SYK assembly from precomputed pair products psi_i psi_j.

    Direct transcription of the Hamiltonian: one matrix product per quartic
    term.  Used to validate the fast route; far too slow for production N.
    """
    if m.n_majorana != c.n_majorana:
        raise ValueError("MajoranaSet and couplings disagree on n_majorana")
    n = c.n_majorana
    pair = {}
    for i, jdx in itertools.combinations(range(n), 2):
        pair[i, jdx] = m.ops[i] @ m.ops[jdx]
    h = np.zeros((m.dim, m.dim), dtype=complex)
    for t, (i, jdx, k, l) in enumerate(itertools.combinations(range(n), 4)):
        h += c.j[t] * (pair[i, jdx] @ pair[k, l])
    h *= np.sqrt(6.0 / n**3)
    if c.k_strength != 0.0:
        h2 = np.zeros_like(h)
        for t, (i, jdx) in enumerate(itertools.combinations(range(n), 2)):
            h2 += c.kmat[t] * pair[i, jdx]
        h += (1j / np.sqrt(n)) * h2
    return h


def build_xxz_hamiltonian(f: XxzFields) -> np.ndarray:
    """Dense full-space XXZ Hamiltonian; real symmetric, conserves total S_z."""
    n = f.n_site
    h = np.zeros((1 << n, 1 << n), dtype=complex)
    for s in range(1, n + 1):
        sp = s % n + 1  # periodic: site n pairs with site 1
        for kind in ("x", "y", "z"):
            h += 0.25 * (spin_site_operator(kind, s, n) @ spin_site_operator(kind, sp, n))
        h += 0.5 * f.w[s - 1] * spin_site_operator("z", s, n)
    return np.ascontiguousarray(h.real)


class XxzSectorPlan:
    """Field-independent pieces of the XXZ Hamiltonian inside one S_z sector.

    The hopping structure and the Ising/field bit patterns do not depend on
    the disorder realization, so one plan serves a whole ensemble: per sample
    only the diagonal changes.
    """

    def __init__(self, n_site: int, n_up: int):
        self.n_site = n_site
        self.basis: SectorBasis = sz_sector(n_site, n_up)
        idx = self.basis.kept_indices
        dim = idx.size
        self.dim = dim
        # bit s-1 column: 0 = up at site s; spin value z = 1 - 2*bit
        bits = (idx[:, None] >> (n_site - 1 - np.arange(n_site))[None, :]) & 1
        self.zvals = 1.0 - 2.0 * bits  # (dim, n_site)
        zz = np.zeros(dim)
        for s in range(n_site):
            zz += self.zvals[:, s] * self.zvals[:, (s + 1) % n_site]
        self._zz_diag = zz
        pos = np.full(1 << n_site, -1, dtype=np.int64)
        pos[idx] = np.arange(dim)
        hop = np.zeros((dim, dim))
        for s in range(n_site):
            sp = (s + 1) % n_site
            bs = 1 << (n_site - 1 - s)
            bp = 1 << (n_site - 1 - sp)
            differ = ((idx & bs) != 0) != ((idx & bp) != 0)
            src = np.nonzero(differ)[0]
            dst = pos[idx[src] ^ bs ^ bp]
            # (1/4)(xx + yy) = (1/2)(s+ s- + s- s+): amplitude 1/2 per flip
            np.add.at(hop, (dst, src), 0.5)
        self._hop = hop

    def hamiltonian(self, w: np.ndarray) -> np.ndarray:
        h = self._hop.copy()
        d = np.arange(self.dim)
        h[d, d] += 0.25 * self._zz_diag + 0.5 * (self.zvals @ w)
        return h


def couplings_to_record(real, include_couplings: bool = True) -> dict:
    """JSON-ready provenance record of a disorder realization.

    With ``include_couplings=False`` only (model, params, seed) are stored;
    the couplings regenerate from the seed on load.
    """
    if isinstance(real, SykCouplings):
        rec = {
            "model": "syk",
            "params": {"n_majorana": real.n_majorana, "k_strength": real.k_strength},
            "seed": real.seed,
        }
        if include_couplings:
            rec["couplings"] = {"j": real.j.tolist(), "kmat": real.kmat.tolist()}
        return rec
    if isinstance(real, XxzFields):
        rec = {
            "model": "xxz",
            "params": {"n_site": real.n_site, "w_disorder": real.w_disorder},
            "seed": real.seed,
        }
        if include_couplings:
            rec["couplings"] = {"w": real.w.tolist()}
        return rec
    raise TypeError(f"not a disorder realization: {type(real)!r}")


def couplings_from_record(rec: dict):
    """Rebuild a realization from its JSON record (regenerating if needed)."""
    model = rec["model"]
    params = rec["params"]
    seed = rec["seed"]
    if model == "syk":
        if "couplings" in rec:
            return SykCouplings(
                n_majorana=int(params["n_majorana"]),
                k_strength=float(params["k_strength"]),
                j=np.asarray(rec["couplings"]["j"], dtype=float),
                kmat=np.asarray(rec["couplings"]["kmat"], dtype=float),
                seed=int(seed),
            )
        return sample_syk(int(params["n_majorana"]), float(params["k_strength"]), int(seed))
    if model == "xxz":
        if "couplings" in rec:
            return XxzFields(
                n_site=int(params["n_site"]),
                w_disorder=float(params["w_disorder"]),
                w=np.asarray(rec["couplings"]["w"], dtype=float),
                seed=int(seed),
            )
        return sample_xxz(int(params["n_site"]), float(params["w_disorder"]), int(seed))
    raise ValueError(f"unknown model {model!r}")
