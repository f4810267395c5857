"""Shared estimators: Hill tail index, moment verdicts, KS / chi-square,
batch means and the two-scale CLT diagnostic."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as sps


@dataclass
class TailIndexEstimate:
    index: float
    ci_low: float
    ci_high: float
    k: int
    n: int

    def to_dict(self) -> dict:
        return {"index": self.index, "ci_low": self.ci_low,
                "ci_high": self.ci_high, "k": self.k, "n": self.n}


class NoTailError(ValueError):
    """Raised when the upper order statistics carry no spread."""


def hill(samples, k: int | None = None) -> TailIndexEstimate:
    """Classical Hill estimator on the k largest order statistics.

    The returned index alpha estimates P[X > x] ~ x^{-alpha}; its CI uses
    the asymptotic normality index * (1 +- 1.96/sqrt(k)).  Default
    k = floor(sqrt(n)).
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or len(x) == 0:
        raise ValueError("samples must be a nonempty 1-d array")
    if np.any(x <= 0) or not np.all(np.isfinite(x)):
        raise ValueError("Hill estimation needs positive finite samples")
    n = len(x)
    if k is None:
        k = int(np.sqrt(n))
    if k < 10 or k > n // 2:
        raise ValueError(f"k={k} outside [10, n/2] for n={n}")
    xs = np.sort(x)
    top = xs[n - k:]
    ref = xs[n - k - 1]
    h = float(np.mean(np.log(top) - np.log(ref)))
    if h <= 0.0:
        raise NoTailError("upper order statistics are constant; no tail to fit")
    idx = 1.0 / h
    half = 1.96 / np.sqrt(k)
    return TailIndexEstimate(idx, idx * (1 - half), idx * (1 + half), k, n)


def moment_verdict(samples, alpha: float,
                   k: int | None = None) -> tuple[str, TailIndexEstimate | None]:
    """Decide whether E[X^alpha] looks finite from a heavy-tail fit.

    appears-finite when the Hill CI lower bound is >= alpha + 0.25;
    appears-infinite when the CI cannot exclude a tail index <= alpha
    (note the moment already diverges AT index alpha, so estimates
    hovering around alpha are divergence evidence); the narrow band in
    between is inconclusive.  Samples whose top order statistics carry no
    spread are bounded, hence finite.
    """
    x = np.asarray(samples, dtype=float)
    if np.any(x < 0):
        raise ValueError("samples must be nonnegative")
    x = x[x > 0]
    if len(x) < 30:
        return "inconclusive", None
    try:
        est = hill(x, k)
    except NoTailError:
        return "moment-appears-finite", None
    except ValueError:
        return "inconclusive", None
    if est.ci_low >= alpha + 0.25:
        return "moment-appears-finite", est
    if est.ci_low <= alpha:
        return "moment-appears-infinite", est
    return "inconclusive", est


def batch_means_ci(series, n_batches: int = 32) -> tuple[float, float]:
    """Mean and 95% half-width from contiguous batch means."""
    x = np.asarray(series, dtype=float)
    if len(x) < n_batches:
        raise ValueError(f"need at least {n_batches} points")
    edges = np.linspace(0, len(x), n_batches + 1).astype(int)
    means = np.array([x[a:b].mean() for a, b in zip(edges[:-1], edges[1:])])
    se = means.std(ddof=1) / np.sqrt(n_batches)
    tq = sps.t.ppf(0.975, n_batches - 1)
    return float(x.mean()), float(tq * se)


def ks_two_sample(a, b, level: float = 0.01) -> tuple[float, float]:
    """Two-sample KS statistic and its critical value at the given level."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        raise ValueError("both samples must be nonempty")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / n
    fb = np.searchsorted(b, grid, side="right") / m
    stat = float(np.max(np.abs(fa - fb)))
    c = np.sqrt(-np.log(level / 2.0) / 2.0)
    return stat, float(c * np.sqrt((n + m) / (n * m)))


def chi_square_geometric(counts, q: float,
                         min_expected: float = 5.0) -> tuple[float, int, float]:
    """Chi-square GOF of positive-integer counts against Geometric(q).

    Bins 1, 2, ... are merged into a final tail bin once the expected count
    drops below ``min_expected``.  Returns (statistic, dof, p-value).
    """
    c = np.asarray(counts)
    if np.any(c < 1):
        raise ValueError("geometric counts start at 1")
    if q >= 1.0:
        # degenerate law: every count must be exactly 1
        return (0.0, 0, 1.0) if np.all(c == 1) else (float("inf"), 0, 0.0)
    if q <= 0.0:
        raise ValueError("q must be positive")
    n = len(c)
    bins = []
    j = 1
    while True:
        pj = q * (1 - q) ** (j - 1)
        tail = (1 - q) ** j
        if n * tail < min_expected or j > 10_000:
            break
        bins.append(pj)
        j += 1
    if not bins:
        return 0.0, 0, 1.0
    probs = np.array(bins + [(1 - q) ** (len(bins))])
    obs = np.concatenate([np.bincount(np.clip(c, 1, len(bins) + 1),
                                      minlength=len(bins) + 2)[1:len(bins) + 1],
                          [np.sum(c > len(bins))]])
    exp = n * probs
    stat = float(np.sum((obs - exp) ** 2 / exp))
    dof = len(probs) - 1
    return stat, dof, float(sps.chi2.sf(stat, dof))


@dataclass
class CLTDiagnostic:
    ok: bool
    reason: str = ""
    covariance: np.ndarray | None = None       # at the base scale
    covariance_4n: np.ndarray | None = None
    scale_ratio: np.ndarray | None = None      # entrywise cov_4n / cov_n
    skew: np.ndarray | None = None
    kurtosis: np.ndarray | None = None
    psd: bool = False
    scale_stable: np.ndarray | None = None     # |ratio - 1| within tolerance
    marginals_normal: np.ndarray | None = None


def _rescaled_cov(finals: np.ndarray, vhat: np.ndarray, n: int) -> tuple:
    Y = (np.asarray(finals, dtype=float) - n * vhat) / np.sqrt(n)
    cov = np.cov(Y.T, ddof=1)
    cov = np.atleast_2d(cov)
    sd = Y.std(axis=0, ddof=1)
    z = (Y - Y.mean(axis=0)) / np.where(sd > 0, sd, 1.0)
    skew = (z ** 3).mean(axis=0)
    kurt = (z ** 4).mean(axis=0)
    return cov, skew, kurt


def clt_diagnostic(finals_n: np.ndarray, finals_4n: np.ndarray, vhat,
                   n: int, ratio_tol: float = 0.35) -> CLTDiagnostic:
    """Covariance of (X_n - n vhat)/sqrt(n) at scales n and 4n.

    Scale stability of the rescaled covariance and near-Gaussian marginal
    shape are the checkable finite-size signatures of the CLT.
    """
    finals_n = np.asarray(finals_n, dtype=float)
    finals_4n = np.asarray(finals_4n, dtype=float)
    if len(finals_n) < 200 or len(finals_4n) < 200:
        return CLTDiagnostic(False, "need at least 200 walks per scale")
    vhat = np.asarray(vhat, dtype=float)
    cov1, skew, kurt = _rescaled_cov(finals_n, vhat, n)
    cov4, _, _ = _rescaled_cov(finals_4n, vhat, 4 * n)
    eigmin = float(np.linalg.eigvalsh((cov1 + cov1.T) / 2).min())
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(np.abs(cov1) > 1e-12, cov4 / cov1, np.nan)
    diag = np.arange(cov1.shape[0])
    stable = np.abs(ratio[diag, diag] - 1.0) < ratio_tol
    se_kurt = np.sqrt(24.0 / len(finals_n))
    normal = (np.abs(skew) < 0.5) & (np.abs(kurt - 3.0) < 3 * se_kurt + 0.5)
    return CLTDiagnostic(True, "", cov1, cov4, ratio, skew, kurt,
                         eigmin >= -1e-10, stable, normal)
