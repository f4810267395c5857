"""Deterministic i.i.d. random environments on Z^d.

An Environment maps a site to its transition vector over the 2d canonical
directions (+e_1..+e_d then -e_1..-e_d) as a pure function of the master
seed, the law and the site coordinates.  Laws consume a fixed number of
per-site uniforms from a counter-based stream, so environments are never
stored: any site can be re-evaluated bit-identically at any time, from any
worker.

Concrete laws:

* UniformDrift -- uniformly elliptic, optionally drifted (deterministic
  vector, the degenerate i.i.d. case).
* Expl -- the heavy-tailed ballistic example: one uniformly chosen
  direction is assigned probability 1/T with T Pareto-like, the rest split
  a fixed drift epsilon toward the positive orthant.
* TrapSym -- symmetric trapping law: a uniformly random signed axis basis
  gets probability T/d per direction, the opposite directions (1-T)/d.
* TrapTransient -- the transient zero-speed variant on Z^{d+1}, with a
  2:1 bias along the extra axis.
* Dirichlet -- Dirichlet(weights) on the simplex (inverse-CDF gamma
  variates, fixed stream consumption).
* TableMixture -- finite mixture of fixed transition vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincinv

from . import rng

PROB_SUM_TOL = 1e-9


def sample_expl_T(u, d: int):
    """T = (2d+1) u^{-6d}: Pareto on [2d+1, inf) with tail exponent 1/(6d).

    Then E[T^s] is finite exactly when s < 1/(6d), so the moment of order
    1/(8d) is finite while the moment of order 1/(4d) is infinite.
    """
    return (2 * d + 1) * np.asarray(u, dtype=float) ** (-6 * d)


def sample_trap_T(u, d: int):
    """T = u^{2^d} / 2: supported on (0, 1/2] with P[1/T >= n] = (2/n)^{1/2^d}."""
    return 0.5 * np.asarray(u, dtype=float) ** (1 << d)


def normalize_rows(p: np.ndarray) -> np.ndarray:
    """Renormalize probability rows, rejecting sums off by more than 1e-9."""
    p = np.asarray(p, dtype=float)
    s = p.sum(axis=-1, keepdims=True)
    if np.any(np.abs(s - 1.0) > PROB_SUM_TOL) or np.any(p < 0):
        raise ValueError("invalid transition vector (bad sum or negative entry)")
    return p / s


@dataclass(frozen=True)
class UniformDrift:
    """p(e) = (1-strength)/(2d) + strength at the drift direction."""

    d: int
    strength: float = 0.0
    axis: int = 1

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if not (0.0 <= self.strength < 1.0):
            raise ValueError("strength must lie in [0, 1)")
        if not (1 <= self.axis <= self.d):
            raise ValueError("axis must lie in [1, d]")

    @property
    def dim(self) -> int:
        return self.d

    @property
    def nvars(self) -> int:
        return 0

    @property
    def kappa(self) -> float:
        return (1.0 - self.strength) / (2 * self.d)

    @property
    def tag(self) -> str:
        return f"uniform_drift:d={self.d}:s={self.strength!r}:a={self.axis}"

    def pvec(self) -> np.ndarray:
        p = np.full(2 * self.d, (1.0 - self.strength) / (2 * self.d))
        p[self.axis - 1] += self.strength
        return p

    def pvecs_from_uniforms(self, U: np.ndarray) -> np.ndarray:
        return np.broadcast_to(self.pvec(), (U.shape[0], 2 * self.d)).copy()


@dataclass(frozen=True)
class Expl:
    """The explicit ballistic example law.

    At each site, an independent direction i0 uniform on the 2d directions
    receives probability 1/T with T = (2d+1) U^{-6d}; the remaining mass
    splits so the positive directions carry 1 - eps total and the negative
    ones eps.  Requires eps in [1/(2d+1), 2d/(2d+1)] so that every entry is
    nonnegative (the endpoints touch zero only on the null event T = 2d+1).
    """

    d: int
    eps: float

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")
        lo = 1.0 / (2 * self.d + 1)
        hi = 2 * self.d / (2 * self.d + 1)
        if not (lo <= self.eps <= hi):
            raise ValueError(f"eps must lie in [{lo}, {hi}] for d={self.d}")

    @property
    def dim(self) -> int:
        return self.d

    @property
    def nvars(self) -> int:
        return 2

    @property
    def tag(self) -> str:
        return f"expl:d={self.d}:eps={self.eps!r}"

    def pvecs_from_uniforms(self, U: np.ndarray) -> np.ndarray:
        d, eps = self.d, self.eps
        n = U.shape[0]
        T = sample_expl_T(U[:, 0], d)
        invT = 1.0 / T
        i0 = np.minimum((U[:, 1] * 2 * d).astype(np.int64), 2 * d - 1)
        pos_has_i0 = i0 < d
        # safe denominators; the d=1 "other" branch is never selected
        pos_den = np.maximum(d - pos_has_i0.astype(np.int64), 1)
        neg_den = np.maximum(d - (~pos_has_i0).astype(np.int64), 1)
        pos_other = (1.0 - eps - np.where(pos_has_i0, invT, 0.0)) / pos_den
        neg_other = (eps - np.where(~pos_has_i0, invT, 0.0)) / neg_den
        p = np.empty((n, 2 * d))
        p[:, :d] = pos_other[:, None]
        p[:, d:] = neg_other[:, None]
        p[np.arange(n), i0] = invT
        return p


@dataclass(frozen=True)
class TrapSym:
    """Symmetric trapping law: a random signed axis basis is hard to cross.

    B_0 = {sigma_i e_i} with signs uniform on {-1,+1}^d; directions in B_0
    get probability T/d, their opposites (1-T)/d, with T in (0, 1/2] of
    tail P[1/T >= n] = (2/n)^tail_exponent (default 2^-d).
    """

    d: int
    tail_exponent: float | None = None

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")
        te = self.tail_exponent
        if te is not None and not (0.0 < te <= 1.0):
            raise ValueError("tail_exponent must lie in (0, 1]")

    @property
    def dim(self) -> int:
        return self.d

    @property
    def nvars(self) -> int:
        return 1 + self.d

    @property
    def _texp(self) -> float:
        return self.tail_exponent if self.tail_exponent is not None else 2.0 ** -self.d

    @property
    def tag(self) -> str:
        return f"trap_sym:d={self.d}:t={self._texp!r}"

    def pvecs_from_uniforms(self, U: np.ndarray) -> np.ndarray:
        d = self.d
        n = U.shape[0]
        T = 0.5 * U[:, 0] ** (1.0 / self._texp)
        plus_in_b0 = U[:, 1:1 + d] <= 0.5
        hard = (T / d)[:, None]
        easy = ((1.0 - T) / d)[:, None]
        p = np.empty((n, 2 * d))
        p[:, :d] = np.where(plus_in_b0, hard, easy)
        p[:, d:] = np.where(plus_in_b0, easy, hard)
        return p


@dataclass(frozen=True)
class TrapTransient:
    """Zero-speed transient law on Z^{d+1}.

    The first d axes behave like TrapSym (normalized by C = d + 3T); the
    extra axis carries 2T/C forward and T/C backward, so the projection on
    e_{d+1} is a time-changed 2-biased walk.  Since T <= 1/2, the
    normalizer satisfies d <= C <= 2(d+1).
    """

    d: int

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")

    @property
    def dim(self) -> int:
        return self.d + 1

    @property
    def nvars(self) -> int:
        return 1 + self.d

    @property
    def tag(self) -> str:
        return f"trap_transient:d={self.d}"

    def pvecs_from_uniforms(self, U: np.ndarray) -> np.ndarray:
        d = self.d
        D = d + 1
        n = U.shape[0]
        T = sample_trap_T(U[:, 0], d)
        C = d + 3.0 * T
        plus_in_b0 = U[:, 1:1 + d] <= 0.5
        hard = (T / C)[:, None]
        easy = ((1.0 - T) / C)[:, None]
        p = np.empty((n, 2 * D))
        p[:, :d] = np.where(plus_in_b0, hard, easy)
        p[:, D:D + d] = np.where(plus_in_b0, easy, hard)
        p[:, d] = 2.0 * T / C
        p[:, D + d] = T / C
        return p


@dataclass(frozen=True)
class Dirichlet:
    """Dirichlet(weights) transition vectors; weights has length 2d."""

    weights: tuple[float, ...]

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        object.__setattr__(self, "weights", w)
        if len(w) % 2 != 0 or len(w) < 2:
            raise ValueError("weights must have length 2d")
        if any(x <= 0 for x in w):
            raise ValueError("Dirichlet weights must be positive")

    @property
    def dim(self) -> int:
        return len(self.weights) // 2

    @property
    def nvars(self) -> int:
        return len(self.weights)

    @property
    def tag(self) -> str:
        return "dirichlet:" + ",".join(repr(w) for w in self.weights)

    def pvecs_from_uniforms(self, U: np.ndarray) -> np.ndarray:
        # inverse-CDF gamma variates: fixed consumption, no rejection
        alpha = np.asarray(self.weights)
        g = gammaincinv(alpha[None, :], U)
        return g / g.sum(axis=1, keepdims=True)


@dataclass(frozen=True)
class TableMixture:
    """Finite mixture over fixed transition vectors."""

    entries: tuple[tuple[float, tuple[float, ...]], ...]

    def __post_init__(self):
        ent = tuple((float(w), tuple(float(x) for x in p)) for w, p in self.entries)
        object.__setattr__(self, "entries", ent)
        if not ent:
            raise ValueError("mixture needs at least one component")
        if any(w <= 0 for w, _ in ent):
            raise ValueError("mixture weights must be positive")
        lens = {len(p) for _, p in ent}
        if len(lens) != 1 or next(iter(lens)) % 2 != 0:
            raise ValueError("all components must share an even length")
        for _, p in ent:
            normalize_rows(np.asarray(p))

    @property
    def dim(self) -> int:
        return len(self.entries[0][1]) // 2

    @property
    def nvars(self) -> int:
        return 1

    @property
    def tag(self) -> str:
        parts = [f"{w!r}:{','.join(repr(x) for x in p)}" for w, p in self.entries]
        return "table_mixture:" + "|".join(parts)

    def pvecs_from_uniforms(self, U: np.ndarray) -> np.ndarray:
        w = np.array([w for w, _ in self.entries])
        cum = np.cumsum(w / w.sum())
        table = normalize_rows(np.array([p for _, p in self.entries]))
        idx = np.minimum(np.searchsorted(cum, U[:, 0]), len(cum) - 1)
        return table[idx]


@dataclass(frozen=True)
class Environment:
    """An i.i.d. environment: (master_seed, law, site) -> transition vector."""

    law: object
    master_seed: int

    def __post_init__(self):
        tag = rng.string_tag(self.law.tag)
        object.__setattr__(self, "_base", rng.base_key(self.master_seed, tag))
        object.__setattr__(self, "_nvars", self.law.nvars)
        object.__setattr__(self, "dim", self.law.dim)

    @property
    def tag_int(self) -> int:
        return rng.string_tag(self.law.tag)

    def transitions_at(self, x) -> np.ndarray:
        return self.transitions_batch(np.asarray(x, dtype=np.int64)[None, :])[0]

    def transitions_batch(self, X: np.ndarray, idx=None) -> np.ndarray:
        """Transition vectors for an (N, dim) array of sites.

        ``idx`` (walker identities) is accepted for interface compatibility
        with per-walker-seed environments and ignored here: one
        environment is one quenched field.
        """
        X = np.asarray(X, dtype=np.int64)
        n = X.shape[0]
        nv = self._nvars
        if nv == 0:
            return self.law.pvecs_from_uniforms(np.empty((n, 0)))
        keys = rng.site_keys_from_base(self._base, X)
        U = np.empty((n, nv))
        for j in range(nv):
            U[:, j] = rng.stream_uniforms(keys, j)
        return normalize_rows(self.law.pvecs_from_uniforms(U))


def transitions_for_seeds(law, seeds, x) -> np.ndarray:
    """One site's transition vector under many master seeds (replicates)."""
    seeds = list(seeds)
    x = np.asarray(x, dtype=np.int64)
    nv = law.nvars
    n = len(seeds)
    if nv == 0:
        return law.pvecs_from_uniforms(np.empty((n, 0)))
    tag = rng.string_tag(law.tag)
    keys = np.array([rng.site_key(s, tag, x) for s in seeds], dtype=np.uint64)
    U = np.empty((n, nv))
    for j in range(nv):
        U[:, j] = rng.stream_uniforms(keys, j)
    return normalize_rows(law.pvecs_from_uniforms(U))


@dataclass
class EllipticityReport:
    n: int
    min_entry: float
    max_entry: float
    kappa_grid: np.ndarray
    prob_elliptic: np.ndarray
    kappa0: float | None


def ellipticity_profile(env: Environment, samples: int,
                        kappas=None) -> EllipticityReport:
    """Monte Carlo ellipticity summary of a law.

    Estimates the probability that a site is kappa-elliptic (all entries
    inside (kappa, 1-kappa)) over a kappa grid and reports the largest grid
    value with estimated probability above 1/2.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    d = env.dim
    key = rng.derive_key(env.master_seed, "ellipticity_profile")
    u = rng.stream_uniform_block(key, samples * d)
    X = (np.floor(u * 2_000_000.0) - 1_000_000.0).astype(np.int64).reshape(samples, d)
    P = env.transitions_batch(X)
    mins = P.min(axis=1)
    maxs = P.max(axis=1)
    if kappas is None:
        kappas = np.geomspace(1e-6, 0.5, 40)
    kappas = np.asarray(kappas, dtype=float)
    prob = np.array([np.mean((mins > k) & (maxs < 1.0 - k)) for k in kappas])
    ok = np.nonzero(prob > 0.5)[0]
    kappa0 = float(kappas[ok[-1]]) if len(ok) else None
    return EllipticityReport(samples, float(mins.min()), float(maxs.max()),
                             kappas, prob, kappa0)
