"""Experiment driver: disorder ensembles, streaming persistence, statistics.

A run is a pure function of (config, master_seed): per-sample seeds are
spawned from the master seed by index, every worker pins its BLAS to one
thread, and the final reduction is single-threaded in sample order, so the
output bytes do not depend on the worker count.

Layout of a run directory:

    config_echo.cfg            canonical key=value echo (resume guard)
    shards/sample_<k>.csv      per-sample exponent rows (removed after merge)
    exponents.csv              sample_id,state_index,t,i,lambda,floored
    spacing_hist_t<t>.csv      bin_left,bin_right,density
    gap_ratio.csv              t,mean_r,stderr,n
    manifest.json              config echo, seeds, counters, timings

Exponent rows carry the full descending spectrum (i is 1-based); the
exponent-subset policy is applied at the statistics stage so stored data can
be re-analyzed under a different policy.
"""
from __future__ import annotations

import itertools
import json
import math
import multiprocessing
import os
import shutil
import time
import warnings
from dataclasses import dataclass, fields, replace

import numpy as np
from threadpoolctl import threadpool_limits

from .correlator import floored_log_singulars, subset_slice
from .models import XxzSectorPlan, sample_syk, sample_xxz, syk_term_table
from .spectral import diagonalize, has_degeneracy, select_states, sz_sector
from .statistics import (fixed_i_unfold, gap_ratios, spacing_histogram,
                         spacings_with_drops)

SYK_MAX_N = 26
XXZ_MAX_N_SITE = 16
EXPONENTS_HEADER = "sample_id,state_index,t,i,lambda,floored\n"
GAP_HEADER = "t,mean_r,stderr,n\n"
HIST_HEADER = "bin_left,bin_right,density\n"


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


class NumericalFailure(RuntimeError):
    """Too many samples failed, or statistics could not be derived."""


def default_times() -> tuple:
    """25 log-spaced times on [0.1, 100]."""
    return tuple(float(t) for t in np.geomspace(0.1, 100.0, 25))


@dataclass(frozen=True)
class ExperimentConfig:
    model: str
    size: int
    k_strength: float | None = None
    w_disorder: float | None = None
    master_seed: int = 0
    n_samples: int = 1
    times: tuple = ()
    state_policy: str = ""
    exponent_policy: str = "upper_half"
    unfold: str = "fixed_i"
    rescale: bool = False
    drop_largest: bool = False
    probe_kind: str = ""
    output_dir: str = "corrspec_out"
    worker_count: int = 1
    memory_budget_mb: float = 4096.0


@dataclass(frozen=True)
class RunManifest:
    config: dict
    per_sample_seeds: tuple
    software_version: str
    wall_clock_seconds: float
    counters: dict
    failed_samples: tuple
    outputs: tuple
    status: str

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "per_sample_seeds": list(self.per_sample_seeds),
            "software_version": self.software_version,
            "wall_clock_seconds": self.wall_clock_seconds,
            "counters": dict(self.counters),
            "failed_samples": [list(x) for x in self.failed_samples],
            "outputs": list(self.outputs),
            "status": self.status,
        }


# -- configuration ----------------------------------------------------------

_KEY_ALIASES = {
    "n": "size", "N": "size", "n_site": "size", "N_site": "size",
    "k": "k_strength", "K": "k_strength",
    "w": "w_disorder", "W": "w_disorder",
    "seed": "master_seed",
    "samples": "n_samples",
    "states": "state_policy",
    "exponents": "exponent_policy",
    "probes": "probe_kind",
    "out": "output_dir",
    "workers": "worker_count",
    "rescale_shift": "rescale",
}

_FIELD_NAMES = tuple(f.name for f in fields(ExperimentConfig))


def _parse_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    key = str(value).strip().lower()
    if key in ("true", "1", "yes", "on"):
        return True
    if key in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {value!r}")


def _parse_times(value) -> tuple:
    if isinstance(value, (tuple, list, np.ndarray)):
        return tuple(float(t) for t in value)
    text = str(value).strip()
    if text.startswith("log:"):
        try:
            a, b, npts = text[4:].split(":")
            return tuple(float(t) for t in np.geomspace(float(a), float(b), int(npts)))
        except ValueError as exc:
            raise ConfigError(f"bad log time grid {value!r}: {exc}") from None
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise ConfigError(f"bad times {value!r}: {exc}") from None


def policy_parts(policy: str) -> tuple:
    """Split a state policy string into (kind, value)."""
    text = str(policy).strip()
    if text in ("all", ""):
        return ("all", None)
    for sep in (":", "("):
        if text.startswith("central" + sep):
            raw = text[len("central") + 1:].rstrip(")")
            try:
                f = float(raw)
            except ValueError:
                raise ConfigError(f"bad central fraction in {policy!r}") from None
            return ("central", f)
        if text.startswith("product" + sep):
            return ("product", text[len("product") + 1:].rstrip(")"))
    raise ConfigError(f"unknown state policy {policy!r}")


def _coerce(name: str, value):
    if name in ("size", "master_seed", "n_samples", "worker_count"):
        try:
            return int(str(value))
        except ValueError:
            raise ConfigError(f"{name} must be an integer, got {value!r}") from None
    if name in ("k_strength", "w_disorder", "memory_budget_mb"):
        try:
            return float(str(value))
        except ValueError:
            raise ConfigError(f"{name} must be a number, got {value!r}") from None
    if name in ("rescale", "drop_largest"):
        return _parse_bool(value)
    if name == "times":
        return _parse_times(value)
    return str(value)


def _read_config_file(path: str) -> dict:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    raw = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"{path}:{lineno}: expected key = value, got {line.rstrip()!r}")
            key, value = text.split("=", 1)
            raw[key.strip()] = value.strip()
    return raw


def parse_config(path: str | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Config from a key=value file plus overriding flag values.

    Unknown keys are rejected; aliases (N, K, W, seed, ...) map onto the
    canonical field names.  Model-dependent defaults are filled afterwards.
    """
    merged: dict = {}
    if path is not None:
        merged.update(_read_config_file(path))
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    named = {}
    for key, value in merged.items():
        name = _KEY_ALIASES.get(key, key)
        if name not in _FIELD_NAMES:
            raise ConfigError(f"unknown config key {key!r}")
        named[name] = _coerce(name, value)
    if "model" not in named:
        raise ConfigError("config must set 'model' (syk or xxz)")
    if "size" not in named:
        raise ConfigError("config must set the system size (N or N_site)")
    cfg = ExperimentConfig(**named)
    return finalize_config(cfg)


def finalize_config(cfg: ExperimentConfig) -> ExperimentConfig:
    """Fill model-dependent defaults and validate."""
    model = cfg.model.strip().lower()
    filled = {"model": model}
    if not cfg.times:
        filled["times"] = default_times()
    if model == "syk":
        if cfg.k_strength is None:
            filled["k_strength"] = 1e-4
        if not cfg.state_policy:
            filled["state_policy"] = "all"
        if not cfg.probe_kind:
            filled["probe_kind"] = "majorana"
    elif model == "xxz":
        if not cfg.state_policy:
            filled["state_policy"] = "central:0.1"
        if not cfg.probe_kind:
            filled["probe_kind"] = "plus_minus"
    cfg = replace(cfg, **filled)
    validate_config(cfg)
    return cfg


def validate_config(cfg: ExperimentConfig) -> None:
    if cfg.model not in ("syk", "xxz"):
        raise ConfigError(f"unknown model {cfg.model!r}")
    kind, value = policy_parts(cfg.state_policy)
    if cfg.model == "syk":
        if cfg.size % 2:
            raise ConfigError("SYK needs an even number of Majorana fermions")
        if not 4 <= cfg.size <= SYK_MAX_N:
            raise ConfigError(f"SYK size must lie in [4, {SYK_MAX_N}], got {cfg.size}")
        if cfg.k_strength is None or cfg.k_strength < 0:
            raise ConfigError("SYK needs k_strength >= 0")
        if cfg.size % 8 == 4 and cfg.k_strength == 0:
            raise ConfigError(
                "SYK with size = 4 mod 8 at K = 0 is exactly two-fold degenerate; "
                "set k_strength > 0 (default 1e-4)")
        if kind == "product":
            raise ConfigError("product reference states are an XXZ feature")
        if cfg.probe_kind != "majorana":
            raise ConfigError(f"SYK probe kind must be 'majorana', got {cfg.probe_kind!r}")
    else:
        if cfg.size % 2:
            raise ConfigError("odd chains have no S_z = 0 sector; use an even N_site")
        if not 2 <= cfg.size <= XXZ_MAX_N_SITE:
            raise ConfigError(f"XXZ size must lie in [2, {XXZ_MAX_N_SITE}], got {cfg.size}")
        if cfg.w_disorder is None:
            raise ConfigError("XXZ needs the disorder strength W (w_disorder)")
        if cfg.w_disorder < 0:
            raise ConfigError("w_disorder must be nonnegative")
        if cfg.probe_kind not in ("plus_minus", "zz"):
            raise ConfigError(f"XXZ probe kind must be 'plus_minus' or 'zz', got {cfg.probe_kind!r}")
        if kind == "product":
            pattern = value
            if set(pattern) - {"u", "d"}:
                raise ConfigError("product pattern must use letters 'u' and 'd'")
            if len(pattern) != cfg.size:
                raise ConfigError("product pattern length must equal N_site")
            if pattern.count("u") != pattern.count("d"):
                raise ConfigError("product pattern lies outside the S_z = 0 sector")
    if kind == "central" and not 0.0 < value <= 1.0:
        raise ConfigError(f"central fraction must lie in (0, 1], got {value}")
    if cfg.n_samples < 1:
        raise ConfigError("n_samples must be at least 1")
    if not cfg.times:
        raise ConfigError("times must be nonempty")
    for t in cfg.times:
        if not (math.isfinite(t) and t >= 0):
            raise ConfigError(f"times must be finite and nonnegative, got {t}")
    if cfg.exponent_policy not in ("upper_half", "lower_half", "all"):
        raise ConfigError(f"unknown exponent policy {cfg.exponent_policy!r}")
    if cfg.unfold not in ("fixed_i", "raw"):
        raise ConfigError(f"unfold must be 'fixed_i' or 'raw', got {cfg.unfold!r}")
    if cfg.worker_count < 1:
        raise ConfigError("worker_count must be at least 1")
    if cfg.memory_budget_mb <= 0:
        raise ConfigError("memory_budget_mb must be positive")
    est = estimate_peak_bytes(cfg)
    budget = cfg.memory_budget_mb * 2**20
    if est > budget:
        raise ConfigError(
            f"estimated peak memory {est / 2**20:.0f} MiB exceeds the "
            f"{cfg.memory_budget_mb:.0f} MiB budget; raise memory_budget_mb "
            "or shrink the system")


def state_dim(cfg: ExperimentConfig) -> int:
    """Hilbert-space dimension the run diagonalizes."""
    if cfg.model == "syk":
        return 1 << (cfg.size // 2)
    return int(math.comb(cfg.size, cfg.size // 2))


def _n_states(cfg: ExperimentConfig) -> int:
    kind, value = policy_parts(cfg.state_policy)
    dim = state_dim(cfg)
    if kind == "all":
        return dim
    if kind == "central":
        lo = int(np.floor(dim * (1.0 - value) / 2.0))
        hi = int(np.floor(dim * (1.0 + value) / 2.0))
        return hi - lo
    return 1


def estimate_peak_bytes(cfg: ExperimentConfig) -> int:
    """Per-run peak memory estimate, checked before any allocation.

    Dominated by dim^2 complex entries (Hamiltonian, eigenvectors, solver
    workspace) plus the probe banks and the coordinator's exponent block.
    """
    dim = state_dim(cfg)
    per_worker = 4 * dim * dim * 16 + cfg.size * _n_states(cfg) * dim * 16
    exponent_block = cfg.n_samples * _n_states(cfg) * len(cfg.times) * cfg.size * 9
    return per_worker * cfg.worker_count + exponent_block


def config_to_dict(cfg: ExperimentConfig) -> dict:
    out = {}
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if value is None:
            continue
        out[f.name] = list(value) if f.name == "times" else value
    return out


def config_from_dict(data: dict) -> ExperimentConfig:
    named = {}
    for key, value in data.items():
        name = _KEY_ALIASES.get(key, key)
        if name not in _FIELD_NAMES:
            raise ConfigError(f"unknown config key {key!r}")
        named[name] = _coerce(name, value) if isinstance(value, str) else value
    if "times" in named:
        named["times"] = tuple(float(t) for t in named["times"])
    return finalize_config(ExperimentConfig(**named))


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical key=value text; parse_config round-trips it."""
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if value is None:
            continue
        if f.name == "times":
            text = ",".join(repr(float(t)) for t in value)
        elif isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        lines.append(f"{f.name} = {text}\n")
    return "".join(lines)


# -- per-sample work --------------------------------------------------------

_ACTIVE: dict = {}


def sample_seed(master_seed: int, index: int) -> int:
    """Child seed for one disorder realization."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(index,))
    return int(ss.generate_state(1, np.uint64)[0])


def _xxz_gathers(n_site: int, basis_from, basis_to):
    """Per-site row maps realizing sigma_- between S_z sectors.

    For site s the operator sends a basis state with site s up (bit 0) to
    the same state with the bit set; entries are (source rows, target rows).
    """
    idx1 = basis_from.kept_indices
    pos2 = np.full(basis_to.parent_dim, -1, dtype=np.int64)
    pos2[basis_to.kept_indices] = np.arange(basis_to.dim)
    gathers = []
    for s in range(n_site):
        bit = 1 << (n_site - 1 - s)
        src = np.nonzero((idx1 & bit) == 0)[0]
        dst = pos2[idx1[src] | bit]
        gathers.append((src, dst))
    return gathers


def _prepare_plan(cfg: ExperimentConfig) -> dict:
    """Realization-independent setup, done once and shared by workers."""
    plan: dict = {"cfg": cfg,
                  "seeds": tuple(sample_seed(cfg.master_seed, k) for k in range(cfg.n_samples))}
    kind, value = policy_parts(cfg.state_policy)
    plan["policy"] = (kind, value)
    if cfg.model == "syk":
        syk_term_table(cfg.size)  # warm the cache pre-fork
        return plan
    n = cfg.size
    state_plan = XxzSectorPlan(n, n // 2)
    plan["state_plan"] = state_plan
    if cfg.probe_kind == "plus_minus":
        probe_plan = XxzSectorPlan(n, n // 2 - 1)
        plan["probe_plan"] = probe_plan
        plan["gathers"] = _xxz_gathers(n, state_plan.basis, probe_plan.basis)
    if kind == "product":
        state = 0
        for pos, ch in enumerate(value):
            if ch == "d":
                state |= 1 << (n - 1 - pos)
        hits = np.nonzero(state_plan.basis.kept_indices == state)[0]
        if hits.size == 0:
            raise ConfigError(f"product state {value!r} lies outside the S_z = 0 sector")
        plan["product_pos"] = int(hits[0])
    return plan


def _syk_banks(table, eigenvectors, phi):
    """Majorana probe banks: W[s, i, :] = (V^dag psi_i phi_s)."""
    dim, n_states = phi.shape
    rows = np.arange(dim)
    vdag = eigenvectors.conj().T
    w = np.empty((n_states, table.n_majorana, dim), dtype=complex)
    scale = 1.0 / np.sqrt(2.0)
    for i, (mask, phase) in enumerate(table.probe_strings):
        src = rows ^ mask
        w[:, i, :] = (vdag @ ((scale * phase[src])[:, None] * phi[src, :])).T
    return w


def _gathered(block, src, dst, dim_to):
    out = np.zeros((dim_to, block.shape[1]), dtype=block.dtype)
    out[dst] = block[src]
    return out


def _xxz_banks(plan, probe_vectors, phi):
    """Probe banks in the probe sector's eigenbasis; everything real."""
    cfg = plan["cfg"]
    n = cfg.size
    n_states = phi.shape[1]
    vdag = probe_vectors.T  # real orthogonal
    w = np.empty((n_states, n, vdag.shape[0]), dtype=phi.dtype)
    if cfg.probe_kind == "plus_minus":
        dim_to = vdag.shape[1]
        for j, (src, dst) in enumerate(plan["gathers"]):
            w[:, j, :] = (vdag @ _gathered(phi, src, dst, dim_to)).T
    else:
        zvals = plan["state_plan"].zvals
        for j in range(n):
            w[:, j, :] = (vdag @ (zvals[:, j:j + 1] * phi)).T
    return w


def _spectra_from_banks(w, probe_energies, state_energies, times):
    """Batched SVD exponents for eigenstate reference states.

    ``w`` is (n_states, n_probe, probe_dim); the left and right banks
    coincide because every probe kind here has left = right adjoint.
    """
    n_states, n_probe, _ = w.shape
    lam = np.empty((n_states, len(times), n_probe))
    flags = np.empty((n_states, len(times), n_probe), dtype=bool)
    wt = w.transpose(0, 2, 1)
    for ti, t in enumerate(times):
        phase = np.exp(-1j * probe_energies * t)
        g = (w.conj() * phase) @ wt
        if state_energies is not None:
            g = g * np.exp(1j * state_energies * t)[:, None, None]
        sv = np.linalg.svd(g, compute_uv=False)
        lam[:, ti], flags[:, ti] = floored_log_singulars(sv)
    return lam, flags


def _product_spectra(plan, e_state, e_probe, times):
    """Exponent series for a product reference state (XXZ)."""
    cfg = plan["cfg"]
    pos = plan["product_pos"]
    phi = np.zeros((e_state.dim, 1))
    phi[pos, 0] = 1.0
    coeffs = e_state.eigenvectors[pos, :].copy()  # V^dag phi
    right = _xxz_banks(plan, e_probe.eigenvectors, phi)[0]  # (n, probe_dim)
    n = cfg.size
    lam = np.empty((1, len(times), n))
    flags = np.empty((1, len(times), n), dtype=bool)
    for ti, t in enumerate(times):
        phi_t = e_state.eigenvectors @ (np.exp(-1j * e_state.eigenvalues * t) * coeffs)
        left = _xxz_banks(plan, e_probe.eigenvectors, phi_t[:, None].astype(complex))[0]
        phase = np.exp(-1j * e_probe.eigenvalues * t)
        g = (left.conj() * phase) @ right.T
        sv = np.linalg.svd(g, compute_uv=False)
        lam[0, ti], flags[0, ti] = floored_log_singulars(sv)
    return lam, flags


def _run_sample(index: int):
    """One disorder realization end-to-end; returns arrays plus a summary."""
    plan = _ACTIVE
    cfg: ExperimentConfig = plan["cfg"]
    seed = plan["seeds"][index]
    kind, value = plan["policy"]
    try:
        with threadpool_limits(limits=1):
            if cfg.model == "syk":
                couplings = sample_syk(cfg.size, cfg.k_strength, seed)
                table = syk_term_table(cfg.size)
                e = diagonalize(table.hamiltonian(couplings))
                if has_degeneracy(e):
                    return (index, False, "degenerate spectrum", None, None)
                sel = select_states(e, None if kind == "all" else value)
                w = _syk_banks(table, e.eigenvectors, e.eigenvectors[:, sel])
                lam, flags = _spectra_from_banks(
                    w, e.eigenvalues, e.eigenvalues[sel], cfg.times)
                states = sel
            else:
                fields_x = sample_xxz(cfg.size, cfg.w_disorder, seed)
                e = diagonalize(plan["state_plan"].hamiltonian(fields_x.w))
                if kind != "product" and has_degeneracy(e):
                    return (index, False, "degenerate spectrum", None, None)
                if cfg.probe_kind == "plus_minus":
                    e_probe = diagonalize(plan["probe_plan"].hamiltonian(fields_x.w))
                else:
                    e_probe = e
                if kind == "product":
                    lam, flags = _product_spectra(plan, e, e_probe, cfg.times)
                    states = np.array([-1])
                else:
                    sel = select_states(e, None if kind == "all" else value)
                    w = _xxz_banks(plan, e_probe.eigenvectors, e.eigenvectors[:, sel])
                    lam, flags = _spectra_from_banks(
                        w, e_probe.eigenvalues, e.eigenvalues[sel], cfg.times)
                    states = sel
            if flags.all():
                return (index, False, "underflow saturation", None, None)
            _write_shard(plan["shard_dir"], index, states, cfg.times, lam, flags)
            return (index, True, None, lam, flags)
    except Exception as exc:  # noqa: BLE001 - per-sample isolation
        return (index, False, f"{type(exc).__name__}: {exc}", None, None)


def _shard_path(shard_dir: str, index: int) -> str:
    return os.path.join(shard_dir, f"sample_{index:06d}.csv")


def _write_shard(shard_dir, index, states, times, lam, flags) -> None:
    parts = []
    sid = str(index)
    tstrs = [repr(float(t)) for t in times]
    istrs = [str(i + 1) for i in range(lam.shape[2])]
    for si, st in enumerate(states):
        stv = str(int(st))
        for ti, ts in enumerate(tstrs):
            lrow = lam[si, ti]
            frow = flags[si, ti]
            parts.extend(
                f"{sid},{stv},{ts},{istrs[i]},{float(lrow[i])!r},{int(frow[i])}\n"
                for i in range(lrow.shape[0])
            )
    path = _shard_path(shard_dir, index)
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write("".join(parts))
    os.replace(tmp, path)


def _read_shard(path: str, cfg: ExperimentConfig):
    """Recover the arrays of a previously completed sample."""
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    n = cfg.size
    n_times = len(cfg.times)
    if data.shape[0] % (n * n_times) or data.shape[1] != 6:
        raise NumericalFailure(f"shard {path} has an unexpected layout")
    n_states = data.shape[0] // (n * n_times)
    lam = data[:, 4].reshape(n_states, n_times, n)
    flags = data[:, 5].reshape(n_states, n_times, n).astype(bool)
    return lam, flags


# -- statistics derivation --------------------------------------------------

def derive_statistics(cfg: ExperimentConfig, lam, flags, out_dir: str) -> tuple:
    """Spacing histograms and gap-ratio summary from exponent blocks.

    ``lam``/``flags`` are (n_rows, n_times, n) with rows pooling samples and
    states.  Writes spacing_hist_t<t>.csv per time plus gap_ratio.csv and
    returns (gap rows, counters).
    """
    n = lam.shape[2]
    sl = subset_slice(n, cfg.exponent_policy)
    counters = {"floored_exponent_count": int(flags.sum()),
                "dropped_spacing_count": 0,
                "skipped_pair_count": 0,
                "dead_index_count": 0}
    gap_rows = []
    written = []
    for ti, t in enumerate(cfg.times):
        lam_t = lam[:, ti, sl]
        flg_t = flags[:, ti, sl]
        if cfg.drop_largest and lam_t.shape[1] > 1 and sl.start in (0, None):
            lam_t = lam_t[:, 1:]
            flg_t = flg_t[:, 1:]
        if cfg.rescale:
            mean = lam_t.mean(axis=1, keepdims=True)
            std = lam_t.std(axis=1, keepdims=True)
            if np.any(std == 0):
                raise NumericalFailure(f"constant exponent spectrum at t={t!r}")
            lam_t = (lam_t - mean) / std
            flg_t = flg_t.copy()
        try:
            spac, dropped = spacings_with_drops(lam_t, flg_t)
            dead = np.isnan(spac).all(axis=0)
            if dead.any():
                spac = spac[:, ~dead]
                counters["dead_index_count"] += int(dead.sum())
            unfolded = fixed_i_unfold(spac) if cfg.unfold == "fixed_i" else spac
            ensemble = gap_ratios(unfolded, t=float(t))
        except ValueError as exc:
            raise NumericalFailure(f"statistics failed at t={t!r}: {exc}") from exc
        counters["dropped_spacing_count"] += dropped
        counters["skipped_pair_count"] += ensemble.skipped_pairs
        hist = spacing_histogram(unfolded)
        name = f"spacing_hist_t{float(t)!r}.csv"
        with open(os.path.join(out_dir, name), "w") as fh:
            fh.write(HIST_HEADER)
            for lo, hi, d in zip(hist.bin_left, hist.bin_right, hist.density):
                fh.write(f"{float(lo)!r},{float(hi)!r},{float(d)!r}\n")
        written.append(name)
        gap_rows.append((float(t), ensemble.mean_r, ensemble.stderr, ensemble.n_values))
    with open(os.path.join(out_dir, "gap_ratio.csv"), "w") as fh:
        fh.write(GAP_HEADER)
        for t, mean_r, stderr, nval in gap_rows:
            fh.write(f"{t!r},{mean_r!r},{stderr!r},{nval}\n")
    written.append("gap_ratio.csv")
    return gap_rows, counters, written


# -- run orchestration ------------------------------------------------------

def run_experiment(cfg: ExperimentConfig) -> RunManifest:
    """Execute one configured ensemble and write all outputs.

    Resumable: completed per-sample shards found in the output directory
    are reused when the stored config echo matches; anything else is
    recomputed.  Aborts (NumericalFailure) if more than half the samples
    fail.
    """
    from . import __version__

    cfg = finalize_config(cfg)
    started = time.monotonic()
    os.makedirs(cfg.output_dir, exist_ok=True)
    shard_dir = os.path.join(cfg.output_dir, "shards")
    echo_path = os.path.join(cfg.output_dir, "config_echo.cfg")
    echo = serialize_config(cfg)
    if os.path.exists(echo_path):
        with open(echo_path) as fh:
            if fh.read() != echo and os.path.isdir(shard_dir):
                shutil.rmtree(shard_dir)  # stale partial run with other settings
    os.makedirs(shard_dir, exist_ok=True)
    with open(echo_path, "w") as fh:
        fh.write(echo)

    plan = _prepare_plan(cfg)
    plan["shard_dir"] = shard_dir
    global _ACTIVE
    _ACTIVE = plan

    results: dict[int, tuple] = {}
    pending = []
    for k in range(cfg.n_samples):
        if os.path.exists(_shard_path(shard_dir, k)):
            lam, flags = _read_shard(_shard_path(shard_dir, k), cfg)
            results[k] = (k, True, None, lam, flags)
        else:
            pending.append(k)
    if pending and cfg.worker_count > 1:
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(processes=cfg.worker_count) as pool:
            for res in pool.imap_unordered(_run_sample, pending):
                results[res[0]] = res
    else:
        for k in pending:
            results[k] = _run_sample(k)

    failed = tuple((k, results[k][2]) for k in range(cfg.n_samples) if not results[k][1])
    n_failed = len(failed)
    counters = {"n_samples_requested": cfg.n_samples, "n_samples_failed": n_failed}
    if n_failed * 2 > cfg.n_samples:
        manifest = RunManifest(
            config=config_to_dict(cfg), per_sample_seeds=plan["seeds"],
            software_version=__version__,
            wall_clock_seconds=time.monotonic() - started,
            counters=counters, failed_samples=failed, outputs=(),
            status="aborted")
        _write_manifest(cfg.output_dir, manifest)
        raise NumericalFailure(
            f"{n_failed} of {cfg.n_samples} samples failed; aborting")

    ok = [k for k in range(cfg.n_samples) if results[k][1]]
    exp_path = os.path.join(cfg.output_dir, "exponents.csv")
    with open(exp_path, "w") as out:
        out.write(EXPONENTS_HEADER)
        for k in ok:
            with open(_shard_path(shard_dir, k)) as fh:
                shutil.copyfileobj(fh, out)
    lam = np.concatenate([results[k][3] for k in ok], axis=0)
    flags = np.concatenate([results[k][4] for k in ok], axis=0)
    try:
        gap_rows, stat_counters, written = derive_statistics(cfg, lam, flags, cfg.output_dir)
    except NumericalFailure:
        # the exponents themselves are valid and already merged; keep them
        # (plus the shards for resume) and record that statistics degenerated
        manifest = RunManifest(
            config=config_to_dict(cfg), per_sample_seeds=plan["seeds"],
            software_version=__version__,
            wall_clock_seconds=time.monotonic() - started,
            counters=counters, failed_samples=failed,
            outputs=("exponents.csv",), status="stats_failed")
        _write_manifest(cfg.output_dir, manifest)
        raise
    counters.update(stat_counters)
    shutil.rmtree(shard_dir)

    manifest = RunManifest(
        config=config_to_dict(cfg), per_sample_seeds=plan["seeds"],
        software_version=__version__,
        wall_clock_seconds=time.monotonic() - started,
        counters=counters, failed_samples=failed,
        outputs=tuple(["exponents.csv"] + written + ["manifest.json"]),
        status="complete")
    _write_manifest(cfg.output_dir, manifest)
    return manifest


def _write_manifest(out_dir: str, manifest: RunManifest) -> None:
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_manifest(run_dir: str) -> dict:
    path = os.path.join(run_dir, "manifest.json")
    if not os.path.exists(path):
        raise ConfigError(f"no manifest.json under {run_dir}")
    with open(path) as fh:
        return json.load(fh)


# -- offline re-analysis ----------------------------------------------------

def read_exponents_csv(path: str):
    """Load exponents.csv back into (times, lam, flags) blocks.

    Expects the canonical layout written by this module: consecutive runs
    of n rows with i = 1..n, grouped per (sample, state, t).
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # empty file raises below
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        raise NumericalFailure(f"{path} holds no exponent rows")
    n = int(data[:, 3].max())
    if data.shape[0] % n:
        raise NumericalFailure(f"{path} does not hold whole spectra of {n} exponents")
    blocks = data.reshape(-1, n, 6)
    if not np.all(blocks[:, :, 3] == np.arange(1, n + 1)):
        raise NumericalFailure(f"{path} rows are not in the canonical i order")
    t_of_block = blocks[:, 0, 2]
    _, first = np.unique(t_of_block, return_index=True)
    times = tuple(float(t) for t in t_of_block[np.sort(first)])
    lam = np.empty((0,))
    lam_list = []
    flag_list = []
    for t in times:
        sel = blocks[t_of_block == t]
        lam_list.append(sel[:, :, 4])
        flag_list.append(sel[:, :, 5].astype(bool))
    lam = np.stack(lam_list, axis=1)
    flags = np.stack(flag_list, axis=1)
    return times, lam, flags


def restat_run(run_dir: str, out_dir: str | None = None, **options) -> list:
    """Re-derive spacing/gap statistics from a stored run directory.

    ``options`` may override exponent_policy, unfold, rescale, and
    drop_largest; everything else comes from the stored manifest.
    """
    allowed = {"exponent_policy", "unfold", "rescale", "drop_largest"}
    unknown = set(options) - allowed
    if unknown:
        raise ConfigError(f"unknown stats options: {sorted(unknown)}")
    manifest = load_manifest(run_dir)
    cfg = config_from_dict(manifest["config"])
    cfg = finalize_config(replace(cfg, **{k: v for k, v in options.items() if v is not None}))
    times, lam, flags = read_exponents_csv(os.path.join(run_dir, "exponents.csv"))
    cfg = replace(cfg, times=times)
    target = out_dir or run_dir
    os.makedirs(target, exist_ok=True)
    gap_rows, _, _ = derive_statistics(cfg, lam, flags, target)
    return gap_rows


# -- parameter sweeps -------------------------------------------------------

def sweep(base: ExperimentConfig, grid: dict, output_dir: str) -> list:
    """Cartesian sweep; one run per grid point, merged gap-ratio table.

    ``grid`` maps config field names to value lists.  The merged CSV is
    keyed by the sweep parameters; an empty grid writes only the header.
    """
    os.makedirs(output_dir, exist_ok=True)
    keys = list(grid)
    for key in keys:
        if _KEY_ALIASES.get(key, key) not in _FIELD_NAMES:
            raise ConfigError(f"unknown sweep parameter {key!r}")
    names = [_KEY_ALIASES.get(key, key) for key in keys]
    combos = []
    if keys and all(len(v) > 0 for v in grid.values()):
        combos = [dict(zip(names, values))
                  for values in itertools.product(*grid.values())]
    rows = []
    for idx, combo in enumerate(combos):
        typed = {name: _coerce(name, value) if isinstance(value, str) else value
                 for name, value in combo.items()}
        point_dir = os.path.join(output_dir, f"point_{idx:03d}")
        cfg = finalize_config(replace(base, **typed, output_dir=point_dir))
        run_experiment(cfg)
        for t, mean_r, stderr, nval in _read_gap_csv(os.path.join(point_dir, "gap_ratio.csv")):
            rows.append((tuple(typed[name] for name in names), t, mean_r, stderr, nval))
    merged = os.path.join(output_dir, "sweep_gap_ratio.csv")
    with open(merged, "w") as fh:
        fh.write(",".join(names + ["t", "mean_r", "stderr", "n"]) + "\n")
        for params, t, mean_r, stderr, nval in rows:
            cells = [repr(p) if isinstance(p, float) else str(p) for p in params]
            fh.write(",".join(cells + [repr(t), repr(mean_r), repr(stderr), str(nval)]) + "\n")
    return rows


def _read_gap_csv(path: str) -> list:
    rows = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != GAP_HEADER.strip():
            raise NumericalFailure(f"{path} has an unexpected schema: {header!r}")
        for line in fh:
            t, mean_r, stderr, nval = line.strip().split(",")
            rows.append((float(t), float(mean_r), float(stderr), int(nval)))
    return rows
