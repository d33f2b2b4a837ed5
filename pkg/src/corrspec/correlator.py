"""Two-point correlation matrices G_ij(t) and their singular-value exponents.

For a reference state phi and probe operators O_i (left) and O_j' (right),

    G_ij(t) = <phi| exp(iHt) O_i exp(-iHt) O_j' |phi>.

The right probes send phi into a (possibly different) symmetry sector; the
evolution in the middle acts within that sector.  Everything is evaluated
through per-probe vector banks in the energy eigenbasis: with
a_i = O_i^dag phi and b_j = O_j' phi rotated to the eigenbasis of the probe
sector,

    G_ij(t) = e^{i E_phi t} * a_i^dag diag(e^{-i eps_k t}) b_j

when phi is an eigenstate of energy E_phi; for a general phi the left bank is
rebuilt from the evolved state at each time.  No Heisenberg operator matrix
O_i(t) is ever formed outside of test oracles.

Exponents are lambda_i = ln sigma_i(G), sorted descending.  Singular values
below 1e-150 are clamped to the floor and flagged; flagged exponents carry no
spacing information and are dropped by the statistics layer.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operators import MajoranaSet, spin_site_operator
from .spectral import EigenDecomposition, SectorBasis, evolve, project_between

SV_FLOOR = 1e-150


@dataclass(frozen=True)
class ProbeSet:
    """Matched lists of left probes O_i and right probes O_j'."""

    kind: str
    left: tuple
    right: tuple

    @property
    def n_probe(self) -> int:
        return len(self.left)


@dataclass(frozen=True)
class ReferenceState:
    """A reference state plus the metadata the correlator needs.

    ``energy`` is set only when the state is an energy eigenstate; that
    enables the pure-phase evaluation path.
    """

    vector: np.ndarray
    label: str
    energy: float | None = None
    index: int | None = None


@dataclass(frozen=True)
class CorrelationMatrix:
    t: float
    state_label: str
    entries: np.ndarray


@dataclass(frozen=True)
class ExponentRecord:
    t: float
    state_label: str
    lambdas: np.ndarray
    floor_flags: np.ndarray


def majorana_probes(m: MajoranaSet) -> ProbeSet:
    """SYK probes: left and right are the Majorana operators themselves."""
    return ProbeSet(kind="syk_majorana", left=m.ops, right=m.ops)


def xxz_probes(n_site: int, kind: str = "plus_minus") -> ProbeSet:
    """Full-space XXZ probes: sigma_+ against sigma_-, or sigma_z pairs."""
    if kind == "plus_minus":
        left = tuple(spin_site_operator("plus", s, n_site) for s in range(1, n_site + 1))
        right = tuple(spin_site_operator("minus", s, n_site) for s in range(1, n_site + 1))
        return ProbeSet(kind="xxz_plus_minus", left=left, right=right)
    if kind == "zz":
        zops = tuple(spin_site_operator("z", s, n_site) for s in range(1, n_site + 1))
        return ProbeSet(kind="xxz_zz", left=zops, right=zops)
    raise ValueError(f"unknown XXZ probe kind {kind!r}")


def xxz_sector_probes(n_site: int, state_basis: SectorBasis,
                      probe_basis: SectorBasis | None = None,
                      kind: str = "plus_minus") -> ProbeSet:
    """Sector-projected XXZ probes.

    For ``plus_minus`` the right probes are the rectangular sigma_- blocks
    from the state sector into ``probe_basis`` (one fewer up spin) and the
    left probes are their adjoints; for ``zz`` both sectors coincide.
    """
    if kind == "plus_minus":
        if probe_basis is None:
            raise ValueError("plus_minus sector probes need the target sector basis")
        right = []
        left = []
        for s in range(1, n_site + 1):
            m = project_between(spin_site_operator("minus", s, n_site), probe_basis, state_basis)
            right.append(m)
            left.append(m.conj().T)
        return ProbeSet(kind="xxz_plus_minus", left=tuple(left), right=tuple(right))
    if kind == "zz":
        zops = tuple(
            project_between(spin_site_operator("z", s, n_site), state_basis, state_basis)
            for s in range(1, n_site + 1)
        )
        return ProbeSet(kind="xxz_zz", left=zops, right=zops)
    raise ValueError(f"unknown XXZ probe kind {kind!r}")


def reference_state(e: EigenDecomposition, choice, basis: SectorBasis | None = None) -> ReferenceState:
    """Build the reference state |phi>.

    ``choice`` is an eigenstate index (int), or a product-state pattern such
    as ``"udud"`` giving one ``u``/``d`` letter per site.  Product states
    live in the computational basis; when the decomposition covers a sector,
    ``basis`` locates the pattern inside it (an error if the pattern's
    magnetization does not match).
    """
    if isinstance(choice, (int, np.integer)):
        k = int(choice)
        if not 0 <= k < e.dim:
            raise ValueError(f"eigenstate index {k} outside dimension {e.dim}")
        return ReferenceState(
            vector=e.eigenvectors[:, k],
            label=f"eig{k}",
            energy=float(e.eigenvalues[k]),
            index=k,
        )
    pattern = str(choice)
    if set(pattern) - {"u", "d"}:
        raise ValueError("product pattern must use letters 'u' and 'd'")
    n = len(pattern)
    state = 0
    for pos, ch in enumerate(pattern):
        if ch == "d":
            state |= 1 << (n - 1 - pos)
    if basis is None:
        if e.dim != 1 << n:
            raise ValueError("pattern length does not match the full-space dimension")
        position = state
    else:
        if basis.dim != e.dim:
            raise ValueError("sector basis does not match the decomposition dimension")
        hits = np.nonzero(basis.kept_indices == state)[0]
        if hits.size == 0:
            raise ValueError(f"product state {pattern!r} lies outside the working sector")
        position = int(hits[0])
    vec = np.zeros(e.dim)
    vec[position] = 1.0
    return ReferenceState(vector=vec, label=f"prod:{pattern}", energy=None)


def _banks(e: EigenDecomposition, probes: ProbeSet, vec: np.ndarray,
           em: EigenDecomposition):
    """Right bank b_j and, for eigenstates, the static left bank a_i."""
    vdag = em.eigenvectors.conj().T
    b = np.stack([vdag @ (op @ vec) for op in probes.right])
    a = np.stack([vdag @ (op.conj().T @ vec) for op in probes.left])
    return a, b


def _g_entries(e: EigenDecomposition, probes: ProbeSet, phi, t: float,
               em: EigenDecomposition, banks=None) -> np.ndarray:
    if isinstance(phi, ReferenceState):
        vec, energy = phi.vector, phi.energy
    else:
        vec, energy = np.asarray(phi), None
    if vec.shape != (e.dim,):
        raise ValueError("reference state dimension mismatch")
    phase = np.exp(-1j * em.eigenvalues * t)
    if energy is not None:
        a, b = banks if banks is not None else _banks(e, probes, vec, em)
        return np.exp(1j * energy * t) * ((a.conj() * phase) @ b.T)
    # general state: the left bank follows the evolved state
    _, b = banks if banks is not None else _banks(e, probes, vec, em)
    vec_t = evolve(e, t, vec)
    vdag = em.eigenvectors.conj().T
    a_t = np.stack([vdag @ (op.conj().T @ vec_t) for op in probes.left])
    return (a_t.conj() * phase) @ b.T


def correlation_matrix(e: EigenDecomposition, probes: ProbeSet, phi, t: float,
                       probe_sector: EigenDecomposition | None = None) -> CorrelationMatrix:
    """Evaluate G_ij(t) for one reference state and one time.

    ``probe_sector`` supplies the eigendecomposition of the sector the right
    probes map into; by default the probes act within the state's own sector.
    """
    em = probe_sector if probe_sector is not None else e
    label = phi.label if isinstance(phi, ReferenceState) else "custom"
    entries = _g_entries(e, probes, phi, float(t), em)
    return CorrelationMatrix(t=float(t), state_label=label, entries=entries)


def correlator_series(e: EigenDecomposition, probes: ProbeSet, phi, times,
                      probe_sector: EigenDecomposition | None = None) -> list[ExponentRecord]:
    """Exponent records over a time grid, reusing the probe banks."""
    em = probe_sector if probe_sector is not None else e
    vec = phi.vector if isinstance(phi, ReferenceState) else np.asarray(phi)
    label = phi.label if isinstance(phi, ReferenceState) else "custom"
    banks = _banks(e, probes, vec, em)
    out = []
    for t in times:
        entries = _g_entries(e, probes, phi, float(t), em, banks=banks)
        lam, flags = floored_log_singulars(np.linalg.svd(entries, compute_uv=False))
        out.append(ExponentRecord(t=float(t), state_label=label, lambdas=lam,
                                  floor_flags=flags))
    return out


def floored_log_singulars(sv: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Log singular values with the underflow floor applied and flagged."""
    flags = sv < SV_FLOOR
    lam = np.log(np.maximum(sv, SV_FLOOR))
    return lam, flags


def exponent_spectrum(g) -> ExponentRecord:
    """Exponents lambda_i = ln sigma_i(G), descending, with floor flags."""
    if isinstance(g, CorrelationMatrix):
        entries, t, label = g.entries, g.t, g.state_label
    else:
        entries, t, label = np.asarray(g), 0.0, "custom"
    if not np.isfinite(entries).all():
        raise ValueError("correlation matrix has non-finite entries")
    sv = np.linalg.svd(entries, compute_uv=False)
    lam, flags = floored_log_singulars(sv)
    return ExponentRecord(t=t, state_label=label, lambdas=lam, floor_flags=flags)


def subset_slice(n: int, policy: str) -> slice:
    key = str(policy).strip().lower()
    if key == "all":
        return slice(None)
    if key in ("upper_half", "lower_half"):
        if n % 2:
            raise ValueError("half policies need an even number of exponents")
        return slice(0, n // 2) if key == "upper_half" else slice(n // 2, n)
    raise ValueError(f"unknown exponent policy {policy!r}")


def exponent_subset(rec: ExponentRecord, policy: str) -> np.ndarray:
    """The chosen contiguous block of the descending exponent list."""
    return rec.lambdas[subset_slice(rec.lambdas.size, policy)]
