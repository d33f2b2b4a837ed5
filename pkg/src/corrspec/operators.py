"""Fixed-basis matrix representations of Majorana fermions and local spin operators.

Every operator acts on a register of qubits in the computational basis.  Basis
states are indexed by integers whose bits encode the spins: site 1 occupies the
most significant bit, and bit value 0 means spin up (the first component of the
single-site basis).  The same convention is shared by every downstream module.

Pauli strings are handled in two interchangeable forms:

* dense ``(dim, dim)`` complex matrices, built with Kronecker products;
* a compact ``(mask, phase)`` pair, where ``mask`` is the XOR bit-flip pattern
  of the string and ``phase[b]`` is the amplitude it attaches to basis column
  ``b``.  Column ``b`` of the dense matrix is ``phase[b]`` at row ``b ^ mask``.

Majorana operators are normalized so that ``{psi_i, psi_j} = delta_ij`` exactly,
which means each underlying Pauli string (squaring to the identity) carries a
factor ``1/sqrt(2)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "Y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    "Z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
}
_SIGMA_PLUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
_SIGMA_MINUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)

_KIND_ALIASES = {
    "i": "I", "identity": "I", "1": "I",
    "x": "X", "y": "Y", "z": "Z",
    "plus": "+", "+": "+", "minus": "-", "-": "-",
}


def _normalize_kind(kind: str) -> str:
    key = str(kind).strip().lower()
    if key not in _KIND_ALIASES:
        raise ValueError(f"unknown Pauli kind {kind!r}")
    return _KIND_ALIASES[key]


def pauli(kind: str) -> np.ndarray:
    """Return the 2x2 matrix for a single-site Pauli operator.

    Parameters
    ----------
    kind : str
        One of ``I``/``identity``, ``X``, ``Y``, ``Z`` (case insensitive).

    Returns
    -------
    ndarray
        Fresh ``(2, 2)`` complex matrix.
    """
    key = _normalize_kind(kind)
    if key == "+":
        return _SIGMA_PLUS.copy()
    if key == "-":
        return _SIGMA_MINUS.copy()
    return _PAULI[key].copy()


def kron_chain(factors) -> np.ndarray:
    """Kronecker product of a nonempty ordered list of square matrices.

    The first factor acts on the most significant part of the basis index.
    """
    factors = list(factors)
    if not factors:
        raise ValueError("kron_chain requires at least one factor")
    out = np.asarray(factors[0])
    for f in factors[1:]:
        out = np.kron(out, np.asarray(f))
    return out


def string_matrix(label: str) -> np.ndarray:
    """Dense matrix of a Pauli string such as ``"XIZY"`` (site 1 first)."""
    return kron_chain([_PAULI[ch] for ch in label])


def string_mask_phase(label: str) -> tuple[int, np.ndarray]:
    """Compact ``(mask, phase)`` form of a Pauli string.

    ``mask`` flips the bits where the string has X or Y; ``phase[b]`` is the
    amplitude attached to input basis state ``b``, so the dense matrix has
    ``M[b ^ mask, b] = phase[b]``.
    """
    n = len(label)
    dim = 1 << n
    b = np.arange(dim)
    mask = 0
    phase = np.ones(dim, dtype=complex)
    for pos, ch in enumerate(label):
        bit = (b >> (n - 1 - pos)) & 1
        sign = 1.0 - 2.0 * bit
        if ch in ("X", "Y"):
            mask |= 1 << (n - 1 - pos)
        if ch == "Z":
            phase = phase * sign
        elif ch == "Y":
            phase = phase * (1j * sign)
        elif ch not in ("I", "X"):
            raise ValueError(f"unknown Pauli letter {ch!r}")
    return mask, phase


def compose_mask_phase(first, second) -> tuple[int, np.ndarray]:
    """(mask, phase) of the operator product ``first @ second``."""
    m1, p1 = first
    m2, p2 = second
    b = np.arange(p1.shape[0])
    return m1 ^ m2, p1[b ^ m2] * p2


def dense_from_mask_phase(mask: int, phase: np.ndarray) -> np.ndarray:
    dim = phase.shape[0]
    out = np.zeros((dim, dim), dtype=complex)
    b = np.arange(dim)
    out[b ^ mask, b] = phase
    return out


# Nine mutually anticommuting Pauli strings on four qubits, each with an even
# number of Y letters and therefore a real symmetric matrix.  This is the
# lexicographically first such set (exhaustive depth-first search over all
# 4-qubit strings); the test suite re-verifies the algebra rather than the
# search.  Eight of them serve as real Majorana generators and the ninth is
# the companion used to extend the construction onto further qubit blocks.
REAL_CLIFFORD_NINE = (
    "IIIX", "IIIZ", "IIYY", "IYXY", "XYZY", "YIZY", "YXXY", "YZXY", "ZYZY",
)


def majorana_labels(n_majorana: int) -> list[str]:
    """Pauli-string labels of ``n_majorana`` mutually anticommuting Majoranas.

    The register has ``n_majorana // 2`` qubits, split into blocks of four.
    Each full block contributes eight real generators from
    ``REAL_CLIFFORD_NINE``; successive blocks are chained through the ninth
    (companion) string so that anticommutation holds across blocks.  A
    remainder of r < 4 qubits carries a Jordan-Wigner ladder
    ``x^(k-1) z`` / ``x^(k-1) y`` attached through the companion of the last
    full block.  Every string is real exactly when ``n_majorana % 8 == 0``
    (no remainder qubits); otherwise the ladder contributes imaginary members.
    """
    if n_majorana < 2 or n_majorana % 2:
        raise ValueError("n_majorana must be an even integer >= 2")
    n_qubits = n_majorana // 2
    full_blocks, remainder = divmod(n_qubits, 4)

    gens: list[str] = []
    companion = ""
    for block in range(full_blocks):
        if block == 0:
            gens = list(REAL_CLIFFORD_NINE[:8])
            companion = REAL_CLIFFORD_NINE[8]
        else:
            gens = [g + "IIII" for g in gens]
            gens += [companion + s for s in REAL_CLIFFORD_NINE[:8]]
            companion = companion + REAL_CLIFFORD_NINE[8]

    if remainder:
        ladder = []
        for k in range(1, remainder + 1):
            prefix = "X" * (k - 1)
            tail = "I" * (remainder - k)
            ladder.append(prefix + "Z" + tail)
            ladder.append(prefix + "Y" + tail)
        if full_blocks == 0:
            gens = ladder
        else:
            gens = [g + "I" * remainder for g in gens]
            gens += [companion + s for s in ladder]
    return gens


@dataclass(frozen=True)
class MajoranaSet:
    """N Majorana operators on dim = 2**(N/2), with {psi_i, psi_j} = delta_ij."""

    n_majorana: int
    ops: tuple
    labels: tuple

    @property
    def dim(self) -> int:
        return 1 << (self.n_majorana // 2)


def majorana_set(n_majorana: int) -> MajoranaSet:
    """Construct the dense Majorana operators psi_1 .. psi_N.

    Parameters
    ----------
    n_majorana : int
        Even N >= 2.  Capped at 26 (dense storage grows as N * 4**(N/2)).

    Returns
    -------
    MajoranaSet
        Each op is the Pauli string divided by sqrt(2), so psi_i**2 = 1/2.
    """
    if n_majorana > 26:
        raise ValueError("n_majorana capped at 26: dense operators grow too large")
    labels = majorana_labels(n_majorana)
    norm = 1.0 / np.sqrt(2.0)
    ops = tuple(string_matrix(lab) * norm for lab in labels)
    return MajoranaSet(n_majorana=n_majorana, ops=ops, labels=tuple(labels))


def spin_site_operator(kind: str, site: int, n_site: int) -> np.ndarray:
    """Single-site spin operator embedded in a chain of ``n_site`` spins.

    Parameters
    ----------
    kind : str
        ``I``, ``X``, ``Y``, ``Z``, ``plus`` or ``minus``.
    site : int
        1-based position; site 1 is the most significant bit of the basis index.
    n_site : int
        Chain length.
    """
    if not 1 <= site <= n_site:
        raise ValueError(f"site {site} outside chain of length {n_site}")
    op = pauli(kind)
    eye = _PAULI["I"]
    return kron_chain([eye] * (site - 1) + [op] + [eye] * (n_site - site))


def sigma_minus_sector_block(site: int, basis_to, basis_from, n_site: int) -> np.ndarray:
    """Rectangular block of sigma_-(site) between two fixed-magnetization bases.

    ``basis_from`` and ``basis_to`` are ascending arrays of computational basis
    integers, or sector objects exposing them as ``kept_indices``; the result
    has entry 1 at ``[p, q]`` when flipping ``site`` from up to down maps
    ``basis_from[q]`` onto ``basis_to[p]``.  Spin down is bit value 1, so the
    flip sets the bit.
    """
    basis_to = getattr(basis_to, "kept_indices", basis_to)
    basis_from = getattr(basis_from, "kept_indices", basis_from)
    basis_to = np.asarray(basis_to, dtype=np.int64)
    basis_from = np.asarray(basis_from, dtype=np.int64)
    bit = 1 << (n_site - site)
    pos = {int(b): p for p, b in enumerate(basis_to)}
    block = np.zeros((basis_to.size, basis_from.size))
    for q, b in enumerate(basis_from):
        b = int(b)
        if not b & bit:  # site is up: sigma_- sends it down
            block[pos[b | bit], q] = 1.0
    return block


def anticommutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b + b @ a


def fermion_parity(m: MajoranaSet) -> np.ndarray:
    """Parity operator: the phased product of all Majoranas.

    Hermitian, squares to the identity, anticommutes with every psi_i and
    therefore commutes with any even monomial such as the Hamiltonians built
    from this set.
    """
    mask, phase = string_mask_phase(m.labels[0])
    acc = (mask, phase)
    for lab in m.labels[1:]:
        acc = compose_mask_phase(acc, string_mask_phase(lab))
    prod = dense_from_mask_phase(*acc)
    # product of N unit-normalized strings; a phase i makes it Hermitian with
    # P**2 = 1 when N/2 is odd
    if (m.n_majorana // 2) % 2:
        prod = 1j * prod
    return prod
