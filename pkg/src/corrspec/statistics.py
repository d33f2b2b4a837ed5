"""Spacing statistics for exponent spectra.

The pipeline mirrors the standard level-statistics treatment, applied to the
exponents lambda_i at fixed time:

  1. separations s_i = lambda_i - lambda_{i+1} of the descending exponents,
  2. floored exponents poison their adjacent spacings (marked NaN, counted),
  3. fixed-index unfolding s -> s / <s_i>, the mean taken over realizations
     and states at the same spacing index,
  4. gap ratios r = min(s_i, s_{i+1}) / max(s_i, s_{i+1}) and spacing
     histograms, compared against the Wigner surmises and the Poisson law.

Reference curves (unit mean spacing):

    P_GOE(s)     = (pi/2) s exp(-pi s^2/4)
    P_GUE(s)     = (32/pi^2) s^2 exp(-4 s^2/pi)
    P_Poisson(s) = exp(-s)

and the corresponding mean gap ratios 0.5307 (GOE), 0.5996 (GUE) and
2 ln 2 - 1 (Poisson).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

GOE_MEAN_R = 0.5307
GUE_MEAN_R = 0.5996
POISSON_MEAN_R = 2.0 * math.log(2.0) - 1.0

_KINDS = ("goe", "gue", "poisson")


def _kind_key(kind: str) -> str:
    key = str(kind).strip().lower()
    if key not in _KINDS:
        raise ValueError(f"unknown reference kind {kind!r}; expected one of {_KINDS}")
    return key


def reference_r_value(kind: str) -> float:
    """Frozen mean gap ratio of the reference ensemble."""
    return {"goe": GOE_MEAN_R, "gue": GUE_MEAN_R, "poisson": POISSON_MEAN_R}[_kind_key(kind)]


def separations(lams: np.ndarray) -> np.ndarray:
    """Adjacent differences of a descending sequence, along the last axis."""
    arr = np.asarray(lams, dtype=float)
    if arr.shape[-1] < 2:
        raise ValueError("need at least two exponents to form separations")
    diffs = arr[..., :-1] - arr[..., 1:]
    if np.any(diffs < 0):
        raise ValueError("exponents must be sorted in descending order")
    return diffs


def spacings_with_drops(lams: np.ndarray, floor_flags=None) -> tuple[np.ndarray, int]:
    """Separations with spacings adjacent to floored exponents set to NaN.

    A floored exponent sits at the numerical underflow clamp, so both
    spacings touching it carry no information.  Returns the spacing array
    and the number of NaN-dropped spacings.
    """
    diffs = separations(lams)
    if floor_flags is None:
        return diffs, 0
    flags = np.asarray(floor_flags, dtype=bool)
    if flags.shape != np.shape(lams):
        raise ValueError("floor flags must match the exponent array shape")
    bad = flags[..., :-1] | flags[..., 1:]
    diffs = diffs.copy()
    diffs[bad] = np.nan
    return diffs, int(bad.sum())


def _column_means(arr: np.ndarray) -> np.ndarray:
    mask = np.isfinite(arr)
    cnt = mask.sum(axis=0)
    tot = np.where(mask, arr, 0.0).sum(axis=0)
    return np.where(cnt > 0, tot / np.maximum(cnt, 1), np.nan)


def fixed_i_unfold(spacings: np.ndarray) -> np.ndarray:
    """Divide each spacing by the mean of its index across realizations.

    ``spacings`` is (n_realizations, n_index); a 1-D input is a single
    index column.  NaN entries are ignored in the means and propagate to
    the output.  After unfolding every index has mean spacing exactly one.
    """
    arr = np.asarray(spacings, dtype=float)
    squeeze = arr.ndim == 1
    if squeeze:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError("spacings must be a 1-D or 2-D array")
    means = _column_means(arr)
    bad = ~(means > 0)
    if bad.any():
        j = int(np.nonzero(bad)[0][0])
        raise ValueError(f"mean spacing at index {j} is not positive; cannot unfold")
    out = arr / means[None, :]
    return out[:, 0] if squeeze else out


def rescale_shift(values: np.ndarray, n: int | None = None) -> np.ndarray:
    """Affine map with sum zero and sum of squares equal to ``n``.

    ``n`` defaults to the input length, giving zero mean and unit
    population variance.  Idempotent for fixed ``n``.
    """
    arr = np.asarray(values, dtype=float)
    if n is None:
        n = arr.size
    mean = arr.mean()
    std = arr.std()
    if std == 0:
        raise ValueError("constant input cannot be rescaled to unit variance")
    return (arr - mean) * (math.sqrt(n / arr.size) / std)


@dataclass(frozen=True)
class SpacingEnsemble:
    """Per-realization separations at one time, raw and unfolded.

    Rows of ``samples`` are (realization, state) pairs; columns are spacing
    indices.  NaN marks spacings dropped next to floored exponents.
    """

    t: float
    n_exponents_used: int
    samples: np.ndarray
    unfolded: np.ndarray
    n_dropped: int = 0


def spacing_ensemble(t: float, lambdas: np.ndarray,
                     floor_flags=None) -> SpacingEnsemble:
    """Separations plus fixed-index unfolding for a block of spectra."""
    lam = np.atleast_2d(np.asarray(lambdas, dtype=float))
    flags = None if floor_flags is None else np.atleast_2d(np.asarray(floor_flags, dtype=bool))
    spac, dropped = spacings_with_drops(lam, flags)
    unfolded = fixed_i_unfold(spac)
    return SpacingEnsemble(t=float(t), n_exponents_used=lam.shape[1],
                           samples=spac, unfolded=unfolded, n_dropped=dropped)


@dataclass(frozen=True)
class GapRatioEnsemble:
    t: float | None
    values: np.ndarray
    mean_r: float
    stderr: float
    n_values: int
    skipped_pairs: int


def gap_ratios(spacings: np.ndarray, t: float | None = None) -> GapRatioEnsemble:
    """r = min/max of adjacent spacings, pooled over everything but time.

    Pairs touching a NaN spacing are dropped silently (already counted at
    the drop stage); pairs where both spacings vanish are skipped and
    counted separately.
    """
    arr = np.asarray(spacings, dtype=float)
    s1 = arr[..., :-1]
    s2 = arr[..., 1:]
    valid = np.isfinite(s1) & np.isfinite(s2)
    both_zero = valid & (s1 == 0) & (s2 == 0)
    keep = valid & ~both_zero
    if not keep.any():
        raise ValueError("no valid spacing pairs for gap ratios")
    lo = np.minimum(s1[keep], s2[keep])
    hi = np.maximum(s1[keep], s2[keep])
    values = lo / hi
    n = values.size
    stderr = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return GapRatioEnsemble(
        t=t,
        values=values,
        mean_r=float(values.mean()),
        stderr=stderr,
        n_values=n,
        skipped_pairs=int(both_zero.sum()),
    )


@dataclass(frozen=True)
class SpacingHistogram:
    bin_left: np.ndarray
    bin_right: np.ndarray
    density: np.ndarray
    n_in: int
    overflow_count: int

    @property
    def bin_width(self) -> float:
        return float(self.bin_right[0] - self.bin_left[0])


def spacing_histogram(values: np.ndarray, bin_width: float = 0.1,
                      max_s: float = 4.0) -> SpacingHistogram:
    """Normalized spacing density on [0, max_s); the tail is pooled.

    The in-range part integrates to one; values at or beyond ``max_s`` are
    only counted.  NaN entries (dropped spacings) are ignored.
    """
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    if not max_s > bin_width:
        raise ValueError("max_s must exceed bin_width")
    arr = np.asarray(values, dtype=float).ravel()
    arr = arr[np.isfinite(arr)]
    if np.any(arr < 0):
        raise ValueError("spacings must be nonnegative")
    n_bins = int(round(max_s / bin_width))
    edges = np.arange(n_bins + 1) * bin_width
    overflow = int((arr >= max_s).sum())
    kept = arr[arr < max_s]
    counts, _ = np.histogram(kept, bins=edges)
    n_in = int(kept.size)
    if n_in:
        density = counts / (n_in * bin_width)
    else:
        density = np.zeros(n_bins)
    return SpacingHistogram(bin_left=edges[:-1], bin_right=edges[1:],
                            density=density, n_in=n_in, overflow_count=overflow)


def reference_spacing_density(kind: str):
    """P(s) for the requested ensemble, vectorized, unit mean spacing."""
    key = _kind_key(kind)
    if key == "goe":
        return lambda s: (np.pi / 2.0) * np.asarray(s, dtype=float) * np.exp(
            -np.pi * np.square(s) / 4.0)
    if key == "gue":
        return lambda s: (32.0 / np.pi**2) * np.square(s) * np.exp(
            -4.0 * np.square(s) / np.pi)
    return lambda s: np.exp(-np.asarray(s, dtype=float))


def reference_cdf(kind: str):
    """Closed-form CDF matching reference_spacing_density."""
    key = _kind_key(kind)
    if key == "goe":
        return lambda s: 1.0 - np.exp(-np.pi * np.square(s) / 4.0)
    if key == "gue":
        return lambda s: erf(2.0 * np.asarray(s) / np.sqrt(np.pi)) - (
            4.0 * np.asarray(s) / np.pi) * np.exp(-4.0 * np.square(s) / np.pi)
    return lambda s: 1.0 - np.exp(-np.asarray(s, dtype=float))


def bin_averaged_reference(kind: str, bin_left: np.ndarray,
                           bin_right: np.ndarray) -> np.ndarray:
    """Mean of the reference density over each bin, via the CDF."""
    cdf = reference_cdf(kind)
    left = np.asarray(bin_left, dtype=float)
    right = np.asarray(bin_right, dtype=float)
    return (cdf(right) - cdf(left)) / (right - left)


def distribution_distance(hist: SpacingHistogram, reference) -> float:
    """L1 distance between a spacing histogram and a reference density.

    ``reference`` is an ensemble name or a density callable; either way the
    reference is bin-averaged so that an exactly matching histogram gives
    zero.  The result lies in [0, 2].
    """
    if isinstance(reference, str):
        ref = bin_averaged_reference(reference, hist.bin_left, hist.bin_right)
    else:
        from scipy.integrate import fixed_quad

        widths = hist.bin_right - hist.bin_left
        ref = np.array([
            fixed_quad(reference, lo, hi, n=64)[0] / w
            for lo, hi, w in zip(hist.bin_left, hist.bin_right, widths)
        ])
    widths = hist.bin_right - hist.bin_left
    return float(np.sum(np.abs(hist.density - ref) * widths))


@dataclass(frozen=True)
class ReferenceEnsemble:
    """A named reference law: spacing density plus mean gap ratio."""

    kind: str
    density: object
    mean_r: float
    stderr: float


def reference_ensemble(kind: str, monte_carlo: bool = False,
                       matrix_size: int = 1000, n_matrices: int = 25,
                       seed: int = 0) -> ReferenceEnsemble:
    """Bundle P(s) with the mean gap ratio (frozen value or fresh MC)."""
    key = _kind_key(kind)
    density = reference_spacing_density(key)
    if monte_carlo:
        mc = reference_mean_r(key, matrix_size=matrix_size,
                              n_matrices=n_matrices, seed=seed)
        return ReferenceEnsemble(kind=key, density=density,
                                 mean_r=mc.mean_r, stderr=mc.stderr)
    return ReferenceEnsemble(kind=key, density=density,
                             mean_r=reference_r_value(key), stderr=0.0)


@dataclass(frozen=True)
class ReferenceMeanR:
    kind: str
    mean_r: float
    stderr: float
    matrix_size: int
    n_matrices: int


def reference_mean_r(kind: str, matrix_size: int = 1000, n_matrices: int = 25,
                     seed: int = 0) -> ReferenceMeanR:
    """Monte-Carlo mean gap ratio of a reference ensemble.

    GOE/GUE: dense Gaussian matrices, gap ratios from the central half of
    the spectrum (raw spacings; r is unfolding-free there).  Poisson: iid
    exponential spacings.  stderr is over per-matrix means.
    """
    key = _kind_key(kind)
    if matrix_size < 8:
        raise ValueError("matrix_size too small to keep a central half")
    rng = np.random.default_rng(seed)
    per_matrix = np.empty(n_matrices)
    pooled = []
    lo = matrix_size // 4
    hi = lo + matrix_size // 2
    for m in range(n_matrices):
        if key == "poisson":
            spac = rng.exponential(size=matrix_size - 1)
        else:
            a = rng.standard_normal((matrix_size, matrix_size))
            if key == "gue":
                a = a + 1j * rng.standard_normal((matrix_size, matrix_size))
            h = (a + a.conj().T) / 2.0
            levels = np.linalg.eigvalsh(h)
            spac = np.diff(levels[lo:hi])
        r = np.minimum(spac[:-1], spac[1:]) / np.maximum(spac[:-1], spac[1:])
        per_matrix[m] = r.mean()
        pooled.append(r)
    allr = np.concatenate(pooled)
    stderr = float(per_matrix.std(ddof=1) / math.sqrt(n_matrices)) if n_matrices > 1 else 0.0
    return ReferenceMeanR(kind=key, mean_r=float(allr.mean()), stderr=stderr,
                          matrix_size=matrix_size, n_matrices=n_matrices)
