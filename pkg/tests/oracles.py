"""Independent reference computations, kept deliberately naive."""

import math

import numpy as np


def cyclic_power(values, level, c):
    """``||f||_{U^l(T,c)}^{2^l}`` on ``Z_q`` with ``T j = j + 1``, by direct recursion.

    ``I_{T^c}`` is generated by the cosets of ``gcd(c, q) Z_q``; the
    ``h``-averages are over one full period of ``h``.
    """
    f = np.asarray(values, dtype=float)
    q = len(f)
    if level == 1:
        g = math.gcd(abs(c), q)
        cond = np.array([f[r::g].mean() for r in range(g)])
        return float(np.mean(cond ** 2))
    return sum(cyclic_power(f * np.roll(f, -h), level - 1, c) for h in range(q)) / q


def autocorrelation(v, H, N):
    """``gamma(h) = (1/N) sum_{n<N} v_n v_{n+h}`` by explicit loops."""
    return np.array([sum(v[n] * v[n + h] for n in range(N)) / N for h in range(H + 1)])


def double_cesaro_u2(f_orbit, N, H, K, folded):
    """``(1/(2H+1)) sum_{|h|<=H} (1/(2K+1)) sum_{|k|<=K} (1/N) sum_{n<N} g_h(n) g_h(n+k)``.

    ``f_orbit(n)`` returns ``f(T^n x)`` for an integer array ``n``.
    ``g_h(n) = f(n) f(n+h)``; with ``folded`` the ``h < 0`` terms reuse ``|h|``.
    """
    total = 0.0
    n = np.arange(N)
    for h in range(-H, H + 1):
        hh = abs(h) if folded else h
        inner = 0.0
        for k in range(-K, K + 1):
            a = f_orbit(n) * f_orbit(n + hh)
            b = f_orbit(n + k) * f_orbit(n + k + hh)
            inner += float(np.dot(a, b)) / N
        total += inner / (2 * K + 1)
    return total / (2 * H + 1)
