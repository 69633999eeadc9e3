import numpy as np

BOOT_SEED = 20240519


def boot_rng(seed=None):
    return np.random.default_rng(BOOT_SEED if seed is None else seed)


def bootstrap_std(data: np.ndarray, stat, n_boot: int = 1000, rng=None):
    """Standard deviation of ``stat`` over row-resamples of ``data``."""
    data = np.asarray(data)
    n = data.shape[0]
    if n < 2:
        return np.full(np.shape(stat(data)), np.nan)
    rng = boot_rng() if rng is None else rng
    reps = [stat(data[rng.integers(0, n, n)]) for _ in range(n_boot)]
    return np.std(np.asarray(reps), axis=0, ddof=1)


def bootstrap_mean_std(values: np.ndarray, n_boot: int = 1000, rng=None):
    """Bootstrap error of the mean, vectorized over resamples."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    if n < 2:
        return np.full(values.shape[1:], np.nan)
    rng = boot_rng() if rng is None else rng
    out = []
    # chunks bound the (n_boot, n) index matrix
    chunk = max(1, int(2e6 // n))
    for start in range(0, n_boot, chunk):
        m = min(chunk, n_boot - start)
        idx = rng.integers(0, n, (m, n))
        out.append(values[idx].mean(axis=1))
    return np.std(np.concatenate(out), axis=0, ddof=1)


def ols_weights(t: np.ndarray) -> np.ndarray:
    """Weights ``w`` with ``slope = w @ y`` for an ordinary least-squares line through ``(t, y)``."""
    t = np.asarray(t, dtype=float)
    d = t - t.mean()
    return d / np.dot(d, d)


def weighted_line(x, y, err=None):
    """Weighted least-squares ``y = a + b x``; returns ``(a, b, cov)``."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    w = np.ones_like(x) if err is None else 1.0 / np.asarray(err, float) ** 2
    A = np.vstack([np.ones_like(x), x]).T
    Aw = A * w[:, None]
    cov = np.linalg.inv(A.T @ Aw)
    a, b = cov @ (Aw.T @ y)
    return a, b, cov
