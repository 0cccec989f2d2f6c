"""Synthetic market builders and closed forms shared across the test suite."""

from math import comb

import numpy as np

from kellyfreq import CompoundPanel, ReturnPanel

UP = 0.5
DOWN = -0.5


def binomial_compound(p, n=1, c2=0.0, up=UP, down=DOWN, den=20):
    """Blocks for a (riskless, coin) market with exact outcome frequencies.

    The coin pays ``up`` with probability p and ``down`` otherwise, so the
    n-period block outcomes follow a binomial law. p must be a multiple of
    1/den; enumerating den**n equally-likely paths then hits every block
    probability exactly, making sample moments equal population moments.
    """
    k = round(p * den)
    if abs(k - p * den) > 1e-12:
        raise ValueError("p must be a multiple of 1/den")
    values = []
    counts = []
    for j in range(n + 1):
        values.append((1.0 + up) ** j * (1.0 + down) ** (n - j) - 1.0)
        counts.append(comb(n, j) * k ** j * (den - k) ** (n - j))
    coin = np.repeat(values, counts)
    raw = np.column_stack([np.zeros(coin.shape[0]), coin])
    return CompoundPanel.from_blocks(raw, costs=np.array([0.0, c2]), n=n,
                                     assets=("BANK", "COIN"))


def coin_returns(p, T, seed=0, up=UP, down=DOWN):
    """Length-T return path whose sample up-frequency is exactly round(pT)/T."""
    k = round(p * T)
    r = np.concatenate([np.full(k, up), np.full(T - k, down)])
    return np.random.default_rng(seed).permutation(r)


def returns_to_prices(r, p0=100.0):
    return np.concatenate([[p0], p0 * np.cumprod(1.0 + np.asarray(r))])


def write_prices_csv(path, columns, timestamps=None):
    """Write a long-format price CSV from a {symbol: price_array} mapping."""
    lengths = {len(v) for v in columns.values()}
    if len(lengths) != 1:
        raise ValueError("all price columns must share a length")
    length = lengths.pop()
    if timestamps is None:
        timestamps = range(length)
    with open(path, "w") as fh:
        fh.write("timestamp,symbol,price\n")
        for t, stamp in zip(range(length), timestamps):
            for symbol, prices in columns.items():
                fh.write(f"{stamp},{symbol},{float(prices[t])!r}\n")
    return path


def random_panel(seed, T, m, scale=0.3):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-scale, scale, size=(T, m))
    return ReturnPanel(tuple(f"A{i}" for i in range(m)), X)


def random_blocks(seed, S, m, scale=0.3, costs=0.0, n=1):
    rng = np.random.default_rng(seed)
    raw = rng.uniform(-scale, scale, size=(S, m))
    return CompoundPanel.from_blocks(raw, costs=costs, n=n)


def approx_k2_n1(p, c2):
    """Coin weight maximizing the single-period quadratic surrogate."""
    return -(4.0 * c2 - 4.0 * p + 2.0) / (4.0 * c2 ** 2 + 4.0 * c2 - 8.0 * c2 * p + 1.0)


def approx_k2_n2(p):
    """Coin weight maximizing the two-period quadratic surrogate, zero cost."""
    return (16.0 * p ** 2 + 16.0 * p - 12.0) / (32.0 * p ** 2 - 16.0 * p + 9.0)


def exact_k2_n1(p):
    """Coin weight maximizing the single-period exact objective, zero cost."""
    return min(1.0, 2.0 * (2.0 * p - 1.0))
