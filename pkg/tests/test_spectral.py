"""Diagonalization, sector projection, state selection, time evolution."""
import numpy as np
import pytest
import scipy.linalg

from corrspec.spectral import (
    EigenDecomposition,
    cache_key,
    diagonalize,
    evolve,
    has_degeneracy,
    load_eigendecomposition,
    min_eigengap,
    parity_labels,
    project,
    project_between,
    save_eigendecomposition,
    select_states,
    sz_sector,
    sz_zero_sector,
)
from corrspec.models import build_xxz_hamiltonian, sample_xxz
from corrspec.operators import fermion_parity, majorana_set
from corrspec.models import build_syk_hamiltonian, sample_syk


def random_hermitian(n, seed, real=False):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    if not real:
        a = a + 1j * rng.standard_normal((n, n))
    return (a + a.conj().T) / 2


# ---------------------------------------------------------------- diagonalize

def test_diagonalize_reconstructs_matrix():
    h = random_hermitian(24, seed=0)
    e = diagonalize(h)
    back = (e.eigenvectors * e.eigenvalues) @ e.eigenvectors.conj().T
    assert np.max(np.abs(back - h)) <= 1e-12
    assert np.all(np.diff(e.eigenvalues) >= 0)
    gram = e.eigenvectors.conj().T @ e.eigenvectors
    assert np.max(np.abs(gram - np.eye(24))) <= 1e-12


def test_diagonalize_rejects_non_hermitian_and_non_square():
    with pytest.raises(ValueError, match="not Hermitian"):
        diagonalize(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValueError, match="square"):
        diagonalize(np.zeros((2, 3)))


def test_diagonalize_real_input_gives_real_vectors():
    e = diagonalize(random_hermitian(16, seed=1, real=True))
    assert np.isrealobj(e.eigenvectors)
    # complex dtype with exactly zero imaginary part routes the same way
    e2 = diagonalize(random_hermitian(16, seed=1, real=True).astype(complex))
    assert np.isrealobj(e2.eigenvectors)


# ---------------------------------------------------------------- sectors

def test_sz_sector_sizes_and_order():
    for n, k in [(4, 2), (6, 3), (8, 4), (8, 1)]:
        b = sz_sector(n, k)
        from math import comb
        assert b.dim == comb(n, k)
        assert np.all(np.diff(b.kept_indices) > 0)
    # up spins are bit value 0: the all-up state is index 0
    assert 0 in sz_sector(4, 4).kept_indices
    assert sz_sector(4, 0).kept_indices.tolist() == [15]
    with pytest.raises(ValueError):
        sz_sector(4, 5)


def test_sz_zero_sector_requires_even_chain():
    assert sz_zero_sector(6).dim == 20
    with pytest.raises(ValueError, match="odd chains"):
        sz_zero_sector(5)


def test_project_and_project_between():
    rng = np.random.default_rng(2)
    op = rng.standard_normal((16, 16))
    b = sz_sector(4, 2)
    sub = project(op, b)
    assert sub.shape == (6, 6)
    assert sub[0, 0] == op[b.kept_indices[0], b.kept_indices[0]]
    rect = project_between(op, sz_sector(4, 1), b)
    assert rect.shape == (4, 6)
    with pytest.raises(ValueError):
        project(op[:8, :8], b)
    with pytest.raises(ValueError):
        project_between(op[:8], sz_sector(4, 1), b)


# ---------------------------------------------------------------- selection

def test_select_states_all_and_central():
    e = diagonalize(random_hermitian(100, seed=3))
    assert np.array_equal(select_states(e, "all"), np.arange(100))
    assert np.array_equal(select_states(e, None), np.arange(100))
    # dim 100, f = 0.1: floor(45) .. floor(55) - 1
    assert select_states(e, 0.1).tolist() == list(range(45, 55))


def test_select_states_odd_product_size():
    # floor-based block on a dimension that does not divide evenly
    e = EigenDecomposition(dim=3432, eigenvalues=np.arange(3432.0),
                           eigenvectors=np.eye(3432))
    sel = select_states(e, 0.1)
    assert sel[0] == 1544 and sel.size == 343


def test_select_states_range_errors():
    e = diagonalize(random_hermitian(10, seed=4))
    for bad in (0.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            select_states(e, bad)


# ---------------------------------------------------------------- evolution

def test_evolve_matches_expm_and_preserves_norm():
    h = random_hermitian(12, seed=5)
    e = diagonalize(h)
    rng = np.random.default_rng(6)
    v = rng.standard_normal(12) + 1j * rng.standard_normal(12)
    v /= np.linalg.norm(v)
    for t in (0.0, 0.7, 13.0):
        got = evolve(e, t, v)
        want = scipy.linalg.expm(-1j * h * t) @ v
        assert np.max(np.abs(got - want)) <= 1e-12
        assert abs(np.linalg.norm(got) - 1.0) <= 1e-12
    # group property
    assert np.max(np.abs(evolve(e, 0.3, evolve(e, 0.4, v)) - evolve(e, 0.7, v))) <= 1e-12
    with pytest.raises(ValueError):
        evolve(e, 1.0, v[:5])


# ---------------------------------------------------------------- degeneracy

def test_degeneracy_detection():
    e = diagonalize(np.diag([0.0, 1.0, 2.0]))
    assert min_eigengap(e) == 1.0
    assert not has_degeneracy(e)
    d = diagonalize(np.diag([0.0, 0.0, 2.0]))
    assert has_degeneracy(d)
    # K = 0 at N = 2 mod 4 Majoranas pairs every level (particle-hole)
    m = majorana_set(10)
    h = build_syk_hamiltonian(sample_syk(10, 0.0, seed=0), m)
    assert has_degeneracy(diagonalize(h))
    hk = build_syk_hamiltonian(sample_syk(10, 1.0, seed=0), m)
    assert not has_degeneracy(diagonalize(hk))


def test_parity_labels_are_signs():
    m = majorana_set(8)
    h = build_syk_hamiltonian(sample_syk(8, 1.0, seed=1), m)
    e = diagonalize(h)
    labels = parity_labels(e, fermion_parity(m))
    assert np.max(np.abs(np.abs(labels) - 1.0)) <= 1e-10


# ---------------------------------------------------------------- cache

def test_eigendecomposition_cache_round_trip(tmp_path):
    f = sample_xxz(6, 0.5, seed=8)
    e = diagonalize(build_xxz_hamiltonian(f), sector="full")
    p = tmp_path / "e.c2pt"
    save_eigendecomposition(p, e)
    back = load_eigendecomposition(p)
    assert back.dim == e.dim
    assert np.array_equal(back.eigenvalues, e.eigenvalues)
    assert np.array_equal(back.eigenvectors, e.eigenvectors.astype(complex))


def test_cache_rejects_foreign_file(tmp_path):
    p = tmp_path / "bad.bin"
    p.write_bytes(b"XXXX" + b"\x00" * 64)
    with pytest.raises(ValueError, match="cache file"):
        load_eigendecomposition(p)


def test_cache_key_is_deterministic_and_sorted():
    a = cache_key("syk", {"n": 8, "k": 1e-4}, 3)
    b = cache_key("syk", {"k": 1e-4, "n": 8}, 3)
    assert a == b
    assert cache_key("syk", {"n": 8, "k": 1e-4}, 4) != a
