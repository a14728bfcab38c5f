"""Low-level numerical kernels shared by the rest of the package.

Everything here is deterministic: no dependence on thread count, no
unordered reductions.
"""

import os

import numpy as np
import scipy.fft

_SPLITTER = 134217729.0  # 2**27 + 1

#: block size for the blocked prefix sums
SUM_BLOCK = 4096

#: N*H above which correlations go through the FFT path
FFT_THRESHOLD = 1 << 15


def n_threads():
    """Worker count from ``ERGOLAB_THREADS`` (default 1). Never affects results."""
    raw = os.environ.get("ERGOLAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


# ----------------------------------------------------------------------------
# double-double torus arithmetic
# ----------------------------------------------------------------------------

def _split(a):
    t = _SPLITTER * a
    hi = t - (t - a)
    return hi, a - hi


def two_prod(a, b):
    """Return ``(p, e)`` with ``p = fl(a*b)`` and ``a*b = p + e`` exactly (Dekker)."""
    p = a * b
    ahi, alo = _split(a)
    bhi, blo = _split(b)
    e = ((ahi * bhi - p) + ahi * blo + alo * bhi) + alo * blo
    return p, e


def wrap01(x):
    """Reduce to [0, 1); guards against ``x - floor(x) == 1.0`` for tiny negatives."""
    x = np.asarray(x, dtype=np.float64)
    r = x - np.floor(x)
    return np.where(r >= 1.0, 0.0, r)


def frac_mul(k, hi, lo=0.0):
    """Fractional part of ``k * (hi + lo)`` for integer ``k``, |k| < 2**53.

    ``hi + lo`` is a double-double number. The product is formed with an
    exact two-product so the result carries no error growth in ``k``.
    """
    kf = np.asarray(k, dtype=np.float64)
    p, e = two_prod(kf, np.float64(hi))
    r = p - np.floor(p)
    return wrap01(r + (e + kf * lo))


def mul_int_mod1(k, x):
    """``frac(k * x)`` for integer ``k`` and float ``x`` (x taken as exact)."""
    return frac_mul(k, x, 0.0)


# ----------------------------------------------------------------------------
# counter-based hashing for lazily materialised symbol sequences
# ----------------------------------------------------------------------------

def splitmix64(z):
    """SplitMix64 finaliser on a uint64 array."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = z + np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
    return z


def hash_uniform(key, index):
    """Uniform [0, 1) variates, a pure function of ``(key, index)``."""
    idx = np.asarray(index, dtype=np.int64).view(np.uint64)
    with np.errstate(over="ignore"):
        mixed = splitmix64(np.uint64(key) ^ splitmix64(idx * np.uint64(0xD1B54A32D192ED03)))
    return (mixed >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


# ----------------------------------------------------------------------------
# summation
# ----------------------------------------------------------------------------

def prefix_sums_at(values, checkpoints, block=SUM_BLOCK):
    """Sums ``values[:N]`` for each ``N`` in ``checkpoints``.

    Full blocks of ``block`` terms are reduced with numpy's pairwise sum,
    the block totals are accumulated in order, and the partial block is
    added last. The reduction tree depends only on ``N``.
    """
    values = np.asarray(values, dtype=np.float64)
    checkpoints = np.asarray(checkpoints, dtype=np.int64)
    nfull = len(values) // block
    block_sums = values[: nfull * block].reshape(nfull, block).sum(axis=1)
    block_prefix = np.concatenate(([0.0], np.cumsum(block_sums)))
    out = np.empty(len(checkpoints))
    for i, N in enumerate(checkpoints):
        q, r = divmod(int(N), block)
        out[i] = block_prefix[q] + values[q * block : q * block + r].sum()
    return out


# ----------------------------------------------------------------------------
# correlation kernels
# ----------------------------------------------------------------------------

def correlate_valid(a, b, fft=None):
    """``out[..., s] = sum_i a[..., i] * b[..., i + s]`` for ``s = 0..len(b)-len(a)``.

    Works on the last axis and broadcasts over leading axes. ``fft=None``
    picks the FFT route when the work ``len(a) * nlags`` is large.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = a.shape[-1], b.shape[-1]
    nlags = nb - na + 1
    if nlags < 1:
        raise ValueError("second operand must be at least as long as the first")
    if fft is None:
        fft = na * nlags > FFT_THRESHOLD
    if not fft:
        out = np.empty(a.shape[:-1] + (nlags,))
        for s in range(nlags):
            out[..., s] = np.einsum("...i,...i->...", a, b[..., s : s + na])
        return out
    # valid lags never wrap once n >= len(b)
    n = scipy.fft.next_fast_len(nb, real=True)
    workers = n_threads()
    fa = scipy.fft.rfft(a, n, axis=-1, workers=workers)
    fb = scipy.fft.rfft(b, n, axis=-1, workers=workers)
    full = scipy.fft.irfft(np.conj(fa) * fb, n, axis=-1, workers=workers)
    return full[..., :nlags]


def block_bounds(N, blocks):
    """Split ``range(N)`` into ``blocks`` contiguous, nearly equal pieces."""
    blocks = max(1, min(int(blocks), int(N)))
    edges = np.linspace(0, N, blocks + 1).round().astype(np.int64)
    return list(zip(edges[:-1], edges[1:]))


def blocked_lag_sums(w, start, N, max_lag, blocks=1, fft=None):
    """Per-block lagged sums over a symmetric lag window.

    Returns ``(sums, lengths)`` where ``sums[b, s + max_lag]`` is
    ``sum_{n in block b} w[start+n] * w[start+n+s]`` for ``|s| <= max_lag``
    and ``n`` runs over ``range(N)`` split into ``blocks`` pieces.
    """
    if start < max_lag or start + N + max_lag > w.shape[-1]:
        raise ValueError("lag window overruns the buffer")
    bounds = block_bounds(N, blocks)
    lengths = np.array([hi - lo for lo, hi in bounds])
    width = int(lengths.max())
    a = np.zeros((len(bounds), width))
    b = np.zeros((len(bounds), width + 2 * max_lag))
    for j, (lo, hi) in enumerate(bounds):
        m = hi - lo
        a[j, :m] = w[start + lo : start + hi]
        b[j, : m + 2 * max_lag] = w[start + lo - max_lag : start + hi + max_lag]
    return correlate_valid(a, b, fft=fft), lengths
