"""Daubechies filter synthesis and DWT / SWT / wavelet-packet transforms.

Conventions
-----------
``lowpass`` is the minimum-phase Daubechies scaling filter ``h`` (for db2,
``[(1+√3), (3+√3), (3-√3), (1-√3)] / (4√2)``) and ``highpass[k] =
(-1)^k h[F-1-k]``. One analysis step computes

    a[o] = Σ_m h[m] x[2o + 2 - F + m],    d[o] = Σ_m g[m] x[2o + 2 - F + m]

with out-of-range samples supplied by the boundary extension, and synthesis is
the exact adjoint of that map. Two boundary modes exist:

``symmetric``
    half-sample symmetric extension; ``floor((n + F - 1) / 2)`` coefficients
    per branch. Redundant near the edges but exactly invertible at any length.
``periodic``
    circular extension; ``ceil(n / 2)`` coefficients per branch (odd lengths
    repeat their last sample first). Orthogonal, so energy is preserved.

Wavelet-packet leaves are numbered in natural order: node ``(l, k)`` has
children ``(l+1, 2k)`` (lowpass) and ``(l+1, 2k+1)`` (highpass).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import mpmath as mp
import numpy as np

BOUNDARY_MODES = ("symmetric", "periodic")
MAX_ORDER = 38


class WaveletError(ValueError):
    pass


@dataclass(frozen=True)
class FilterPair:
    lowpass: np.ndarray
    highpass: np.ndarray
    order: int

    @property
    def name(self) -> str:
        return f"db{self.order}"

    def __len__(self) -> int:
        return len(self.lowpass)


def _halfband_zeros(order: int, dps: int) -> list:
    """Zeros inside the unit circle of the maximally-flat halfband factor."""
    # P(y) = sum_k C(N-1+k, k) y^k with y = sin^2(w/2) = (2 - z - 1/z) / 4
    coeffs = [mp.binomial(order - 1 + k, k) for k in range(order)]
    yroots = mp.polyroots(coeffs[::-1], maxsteps=400, extraprec=4 * dps)
    zeros = []
    for y in yroots:
        b = 2 - 4 * y
        disc = mp.sqrt(b * b - 4)
        z1, z2 = (b + disc) / 2, (b - disc) / 2
        zeros.append(z1 if abs(z1) < 1 else z2)
    return zeros


@lru_cache(maxsize=None)
def _daubechies_lowpass(order: int) -> tuple[float, ...]:
    dps = 30 + 2 * order
    with mp.workdps(dps):
        zeros = [mp.mpc(-1)] * order
        if order > 1:
            zeros += _halfband_zeros(order, dps)
        poly = [mp.mpc(1)]
        for z in zeros:
            nxt = [mp.mpc(0)] * (len(poly) + 1)
            for i, c in enumerate(poly):
                nxt[i] += c
                nxt[i + 1] -= c * z
            poly = nxt
        taps = [mp.re(c) for c in poly]
        total = mp.fsum(taps)
        scale = mp.sqrt(2) / total
        return tuple(float(c * scale) for c in taps)


def _check_filters(h: np.ndarray, tol: float = 1e-10) -> None:
    F = len(h)
    if abs(h.sum() - np.sqrt(2)) > tol or abs((h**2).sum() - 1.0) > tol:
        raise WaveletError("filter synthesis failed normalisation checks")
    for m in range(1, F // 2):
        if abs(np.dot(h[: F - 2 * m], h[2 * m :])) > tol:
            raise WaveletError(f"filter synthesis failed orthogonality at shift {2 * m}")


def daubechies_filters(order: int) -> FilterPair:
    """Minimum-phase Daubechies filters with ``order`` vanishing moments (2·order taps).

    Built by spectral factorisation of the maximally-flat halfband polynomial in
    extended precision, keeping the zeros inside the unit circle.
    """
    if not isinstance(order, (int, np.integer)) or not 1 <= order <= MAX_ORDER:
        raise WaveletError(f"Daubechies order must be an integer in 1..{MAX_ORDER}, got {order!r}")
    h = np.array(_daubechies_lowpass(int(order)))
    _check_filters(h)
    F = len(h)
    g = np.array([(-1) ** k * h[F - 1 - k] for k in range(F)])
    h.setflags(write=False)
    g.setflags(write=False)
    return FilterPair(h, g, int(order))


def _sym_index(idx: np.ndarray, n: int) -> np.ndarray:
    # half-sample symmetric: x[-1] = x[0], x[n] = x[n-1]; folds repeat with period 2n
    r = np.mod(idx, 2 * n)
    return np.where(r >= n, 2 * n - 1 - r, r)


@lru_cache(maxsize=256)
def _step_plan(n: int, F: int, mode: str) -> tuple[np.ndarray, np.ndarray, int]:
    """(gather indices into the extended input, scatter indices, padded length)."""
    if mode == "periodic":
        npad = n + (n % 2)
        m = npad // 2
        raw = 2 * np.arange(m)[:, None] + 2 - F + np.arange(F)[None, :]
        gather = np.mod(raw, npad)
        return gather, gather.ravel(), npad
    m = (n + F - 1) // 2
    raw = 2 * np.arange(m)[:, None] + 2 - F + np.arange(F)[None, :]
    return _sym_index(raw, n), (raw + F).ravel(), n


def _check_mode(mode: str) -> None:
    if mode not in BOUNDARY_MODES:
        raise WaveletError(f"unknown boundary mode {mode!r}; choose from {BOUNDARY_MODES}")


def analysis_step(x: np.ndarray, filters: FilterPair, mode: str) -> tuple[np.ndarray, np.ndarray]:
    """One lowpass/highpass split with downsampling by two."""
    _check_mode(mode)
    x = np.asarray(x, dtype=float)
    n, F = len(x), len(filters)
    gather, _, npad = _step_plan(n, F, mode)
    if mode == "periodic" and npad != n:
        x = np.append(x, x[-1])
    block = x[gather]
    return block @ filters.lowpass, block @ filters.highpass


def synthesis_step(a: np.ndarray, d: np.ndarray, filters: FilterPair, mode: str, n: int) -> np.ndarray:
    """Adjoint of :func:`analysis_step`, truncated to the original length ``n``."""
    _check_mode(mode)
    F = len(filters)
    gather, scatter, npad = _step_plan(n, F, mode)
    if len(a) != gather.shape[0] or len(d) != gather.shape[0]:
        raise WaveletError(f"coefficient length {len(a)} does not match a length-{n} signal")
    weights = (np.outer(a, filters.lowpass) + np.outer(d, filters.highpass)).ravel()
    if mode == "periodic":
        return np.bincount(scatter, weights, minlength=npad)[:n]
    full = np.bincount(scatter, weights, minlength=n + 2 * F)
    return full[F : F + n]


def _prepare(series, level: int) -> np.ndarray:
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise WaveletError("expected a one-dimensional series")
    if level < 1:
        raise WaveletError(f"level must be >= 1, got {level}")
    if len(x) < 2**level:
        raise WaveletError(f"series too short: length {len(x)} < 2^{level}")
    if not np.all(np.isfinite(x)):
        raise WaveletError("series contains missing or non-finite values")
    return x


@dataclass
class SubseriesSet:
    """Full-length band reconstructions; their element-wise sum is the input."""

    subseries: np.ndarray  # shape (bands, original_length)
    labels: tuple[str, ...]
    ordering: str

    def __len__(self) -> int:
        return self.subseries.shape[0]

    def total(self) -> np.ndarray:
        return self.subseries.sum(axis=0)


@dataclass
class WaveletTree:
    level: int
    nodes: dict[tuple[int, int], np.ndarray]
    boundary: str
    original_length: int
    filters: FilterPair

    def leaves(self) -> list[np.ndarray]:
        return [self.nodes[(self.level, k)] for k in range(2**self.level)]

    def metadata(self) -> dict:
        return {
            "wavelet": self.filters.name,
            "level": self.level,
            "boundary": self.boundary,
            "leaf_ordering": "natural",
            "original_length": self.original_length,
        }


def wpd_decompose(series, level: int, filters: FilterPair, boundary: str = "symmetric") -> WaveletTree:
    """Full wavelet-packet tree: both branches of every node are split again."""
    _check_mode(boundary)
    x = _prepare(series, level)
    nodes = {(0, 0): x}
    for lev in range(level):
        for k in range(2**lev):
            a, d = analysis_step(nodes[(lev, k)], filters, boundary)
            nodes[(lev + 1, 2 * k)] = a
            nodes[(lev + 1, 2 * k + 1)] = d
    return WaveletTree(level, nodes, boundary, len(x), filters)


def _check_tree(tree: WaveletTree) -> None:
    for lev in range(tree.level + 1):
        for k in range(2**lev):
            if (lev, k) not in tree.nodes:
                raise WaveletError(f"corrupt tree: node {(lev, k)} missing")
        if lev:
            sizes = {len(tree.nodes[(lev, k)]) for k in range(2**lev)}
            if len(sizes) != 1:
                raise WaveletError(f"corrupt tree: uneven sibling lengths at level {lev}")
    if len(tree.nodes[(0, 0)]) != tree.original_length:
        raise WaveletError("corrupt tree: root length differs from original_length")


def _lift_leaf(tree: WaveletTree, k: int, coeffs: np.ndarray) -> np.ndarray:
    vec = coeffs
    for lev in range(tree.level, 0, -1):
        parent_len = len(tree.nodes[(lev - 1, k // 2)])
        zeros = np.zeros_like(vec)
        if k % 2 == 0:
            vec = synthesis_step(vec, zeros, tree.filters, tree.boundary, parent_len)
        else:
            vec = synthesis_step(zeros, vec, tree.filters, tree.boundary, parent_len)
        k //= 2
    return vec


def reconstruct_nodes(tree: WaveletTree) -> SubseriesSet:
    """One full-length subseries per leaf, every other leaf zeroed."""
    _check_tree(tree)
    n_leaves = 2**tree.level
    out = np.empty((n_leaves, tree.original_length))
    for k in range(n_leaves):
        out[k] = _lift_leaf(tree, k, tree.nodes[(tree.level, k)])
    labels = tuple(f"wpd{tree.level}.{k}" for k in range(n_leaves))
    return SubseriesSet(out, labels, "natural")


def wpd_reconstruct(tree: WaveletTree) -> np.ndarray:
    """Full inverse from the leaves (interior nodes are ignored)."""
    _check_tree(tree)
    level_vecs = tree.leaves()
    for lev in range(tree.level, 0, -1):
        nxt = []
        for k in range(2 ** (lev - 1)):
            n = len(tree.nodes[(lev - 1, k)])
            nxt.append(synthesis_step(level_vecs[2 * k], level_vecs[2 * k + 1], tree.filters, tree.boundary, n))
        level_vecs = nxt
    return level_vecs[0]


def leaf_frequency_band(k: int, level: int) -> int:
    """Frequency-ordered band index of natural-order leaf ``k``.

    Each highpass split mirrors the spectrum, so natural order is the Gray code
    of frequency order.
    """
    b = 0
    while k:
        b ^= k
        k >>= 1
    return b


@dataclass
class BandCoefficients:
    """DWT or SWT output: ``bands = [A_L, D_L, ..., D_1]``."""

    method: str
    level: int
    bands: list[np.ndarray]
    boundary: str
    original_length: int
    filters: FilterPair
    input_lengths: tuple[int, ...] = ()

    @property
    def labels(self) -> tuple[str, ...]:
        p = self.method
        return (f"{p}.A{self.level}", *(f"{p}.D{j}" for j in range(self.level, 0, -1)))


def dwt_decompose(series, level: int, filters: FilterPair, boundary: str = "symmetric") -> BandCoefficients:
    """Decimated transform; only the lowpass branch is split again."""
    _check_mode(boundary)
    x = _prepare(series, level)
    approx, details, lengths = x, [], []
    for _ in range(level):
        lengths.append(len(approx))
        approx, d = analysis_step(approx, filters, boundary)
        details.append(d)
    return BandCoefficients("dwt", level, [approx, *details[::-1]], boundary, len(x), filters, tuple(lengths))


def _dwt_lift(coeffs: BandCoefficients, start_level: int, a: np.ndarray, d: np.ndarray) -> np.ndarray:
    for lev in range(start_level, 0, -1):
        n = coeffs.input_lengths[lev - 1]
        a = synthesis_step(a, d, coeffs.filters, coeffs.boundary, n)
        d = np.zeros_like(a)
    return a


def dwt_reconstruct_bands(coeffs: BandCoefficients) -> SubseriesSet:
    L = coeffs.level
    out = np.empty((L + 1, coeffs.original_length))
    aL = coeffs.bands[0]
    out[0] = _dwt_lift(coeffs, L, aL, np.zeros_like(aL))
    for i, j in enumerate(range(L, 0, -1), start=1):
        dj = coeffs.bands[i]
        out[i] = _dwt_lift(coeffs, j, np.zeros_like(dj), dj)
    return SubseriesSet(out, coeffs.labels, "approximation-first")


def dwt_reconstruct(coeffs: BandCoefficients) -> np.ndarray:
    L = coeffs.level
    a = coeffs.bands[0]
    for lev in range(L, 0, -1):
        a = synthesis_step(a, coeffs.bands[L - lev + 1], coeffs.filters, coeffs.boundary, coeffs.input_lengths[lev - 1])
    return a


@lru_cache(maxsize=64)
def _swt_plan(n: int, F: int, step: int) -> np.ndarray:
    # taps centred on the output sample so bands stay roughly time-aligned
    offsets = step * (np.arange(F) - F // 2 + 1)
    return np.mod(np.arange(n)[:, None] + offsets[None, :], n)


def _swt_periodic(x: np.ndarray, level: int, filters: FilterPair) -> list[np.ndarray]:
    approx, details = x, []
    for j in range(level):
        idx = _swt_plan(len(x), len(filters), 2**j)
        block = approx[idx]
        details.append(block @ filters.highpass)
        approx = block @ filters.lowpass
    return [approx, *details[::-1]]


def _swt_adjoint(a: np.ndarray, d: np.ndarray, filters: FilterPair, j: int) -> np.ndarray:
    n = len(a)
    idx = _swt_plan(n, len(filters), 2**j)
    w = (np.outer(a, filters.lowpass) + np.outer(d, filters.highpass)).ravel()
    return 0.5 * np.bincount(idx.ravel(), w, minlength=n)


def swt_decompose(series, level: int, filters: FilterPair, boundary: str = "periodic") -> BandCoefficients:
    """Undecimated (à trous) transform; every band keeps the input length.

    The symmetric mode runs the circular transform on ``[x, reversed(x)]``,
    which is exactly the half-sample symmetric extension, and keeps the full
    doubled coefficients so that band reconstruction stays exact.
    """
    _check_mode(boundary)
    x = _prepare(series, level)
    work = np.concatenate([x, x[::-1]]) if boundary == "symmetric" else x
    bands = _swt_periodic(work, level, filters)
    return BandCoefficients("swt", level, bands, boundary, len(x), filters, (len(work),) * level)


def swt_bands(coeffs: BandCoefficients) -> list[np.ndarray]:
    """Coefficient bands trimmed to the original length."""
    return [b[: coeffs.original_length] for b in coeffs.bands]


def _swt_lift(coeffs: BandCoefficients, start_level: int, a: np.ndarray, d: np.ndarray) -> np.ndarray:
    for j in range(start_level - 1, -1, -1):
        a = _swt_adjoint(a, d, coeffs.filters, j)
        d = np.zeros_like(a)
    return a


def swt_reconstruct_bands(coeffs: BandCoefficients) -> SubseriesSet:
    L, n = coeffs.level, coeffs.original_length
    out = np.empty((L + 1, n))
    aL = coeffs.bands[0]
    out[0] = _swt_lift(coeffs, L, aL, np.zeros_like(aL))[:n]
    for i, j in enumerate(range(L, 0, -1), start=1):
        dj = coeffs.bands[i]
        out[i] = _swt_lift(coeffs, j, np.zeros_like(dj), dj)[:n]
    return SubseriesSet(out, coeffs.labels, "approximation-first")


def swt_reconstruct(coeffs: BandCoefficients) -> np.ndarray:
    L = coeffs.level
    a = coeffs.bands[0]
    for j in range(L - 1, -1, -1):
        a = _swt_adjoint(a, coeffs.bands[L - j], coeffs.filters, j)
    return a[: coeffs.original_length]


def decompose(series, method: str, level: int, filters: FilterPair, boundary: str = "symmetric") -> SubseriesSet:
    """Per-band full-length reconstructions for ``method`` in {wpd, dwt, swt}."""
    method = method.lower()
    if method == "wpd":
        return reconstruct_nodes(wpd_decompose(series, level, filters, boundary))
    if method == "dwt":
        return dwt_reconstruct_bands(dwt_decompose(series, level, filters, boundary))
    if method == "swt":
        return swt_reconstruct_bands(swt_decompose(series, level, filters, boundary))
    raise WaveletError(f"unknown decomposition method {method!r}")


def band_count(method: str, level: int) -> int:
    return 2**level if method.lower() == "wpd" else level + 1
