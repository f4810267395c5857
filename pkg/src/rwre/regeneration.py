"""Regeneration structure of directionally transient walks.

A regeneration time is a step after which the walk never backtracks below
the level it has reached.  The extraction follows the ladder recursion:
starting from threshold M_0 + a, take the first passage S above the
threshold, test whether the walk ever drops strictly below its level
there; on failure raise the threshold to (running max at the drop) + a and
repeat, on success record the time and restart the recursion there.

Finite horizons cannot certify "never backtracks", so a record is
certified only when at least ``certify_margin`` steps remain after it and
none of them goes below its level; trailing records that backtrack in no
observed step but lack the margin are kept, flagged censored.

Level comparisons carry a small tolerance (default 1e-9) because lattice
levels are float dot products; genuine level gaps of the laws studied here
are of order 1/sqrt(d), far above it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .walk import Trajectory

LEVEL_TOL = 1e-9


@dataclass(frozen=True)
class RegenParams:
    """Direction, ladder step a (default 3 sqrt(d)) and censoring margin.

    The interval (2 sqrt(d), 10 sqrt(d)) for a only matters for covariance
    non-degeneracy in the CLT; set ``allow_any_a`` to step outside it.
    """

    ell: tuple[float, ...]
    a: float | None = None
    certify_margin: int | None = None
    level_tol: float = LEVEL_TOL
    allow_any_a: bool = False

    def resolved_a(self, d: int) -> float:
        a = self.a if self.a is not None else 3.0 * np.sqrt(d)
        if self.allow_any_a:
            if a <= 0:
                raise ValueError("a must be positive")
            return a
        lo, hi = 2.0 * np.sqrt(d), 10.0 * np.sqrt(d)
        if not (lo < a < hi):
            raise ValueError(f"a={a} outside the mandated interval ({lo}, {hi}); "
                             "pass allow_any_a=True to override")
        return a

    def resolved_margin(self, horizon: int) -> int:
        return self.certify_margin if self.certify_margin is not None else horizon // 4


@dataclass
class RegenerationRecord:
    """Times, positions and censoring flags of one walk's regenerations."""

    times: np.ndarray           # (k,) int64, strictly increasing
    positions: np.ndarray       # (k, d) int64
    censored: np.ndarray        # (k,) bool; censored records are trailing

    @property
    def certified_times(self) -> np.ndarray:
        return self.times[~self.censored]

    @property
    def certified_positions(self) -> np.ndarray:
        return self.positions[~self.censored]

    @property
    def inter_times(self) -> np.ndarray:
        """Gaps between consecutive certified times (first block excluded)."""
        return np.diff(self.certified_times)

    @property
    def inter_displacements(self) -> np.ndarray:
        return np.diff(self.certified_positions, axis=0)

    def n_certified(self) -> int:
        return int((~self.censored).sum())


def _first_below(l: np.ndarray, start: int, cutoff: float) -> int:
    """Smallest index > start with l strictly below cutoff (must exist)."""
    n = len(l)
    i = start + 1
    block = 256
    while i < n:
        j = min(n, i + block)
        chunk = l[i:j] < cutoff
        if chunk.any():
            return i + int(np.argmax(chunk))
        i = j
        block = min(block * 4, 1 << 20)
    raise AssertionError("no element below cutoff; caller must guarantee one")


def extract_from_levels(l: np.ndarray, a: float, margin: int,
                        tol: float = LEVEL_TOL) -> tuple[list[int], list[bool]]:
    """Ladder recursion on a level series l_0..l_n; returns times and flags."""
    l = np.asarray(l, dtype=float)
    n = len(l) - 1
    rm = np.maximum.accumulate(l)
    sm = np.minimum.accumulate(l[::-1])[::-1]
    times: list[int] = []
    flags: list[bool] = []
    # crossings must clear the threshold by tol: levels that match it to
    # float precision (e.g. a diagonal ell with a a multiple of the level
    # spacing) would otherwise resolve by rounding noise
    thr = l[0] + a
    while True:
        S = int(np.searchsorted(rm, thr + tol, side="right"))
        if S > n:
            break
        level = l[S]
        if sm[S] >= level - tol:
            times.append(S)
            flags.append(not (n - S >= margin))
            thr = level + a
        else:
            R = _first_below(l, S, level - tol)
            thr = rm[R] + a
    return times, flags


def extract_reference(l: np.ndarray, a: float, margin: int,
                      tol: float = LEVEL_TOL) -> tuple[list[int], list[bool]]:
    """Literal step-by-step recursion; quadratic, used as a test oracle."""
    l = np.asarray(l, dtype=float)
    n = len(l) - 1
    times: list[int] = []
    flags: list[bool] = []
    base = 0
    while True:
        M = float(l[base])  # M_0 of the shifted walk
        tau = None
        while True:
            S = None
            for m in range(base, n + 1):
                if l[m] > M + a + tol:
                    S = m
                    break
            if S is None:
                return times, flags
            R = None
            for m in range(S + 1, n + 1):
                if l[m] < l[S] - tol:
                    R = m
                    break
            if R is None:
                tau = S
                break
            M = float(l[base:R + 1].max())
        times.append(tau)
        flags.append(not (n - tau >= margin))
        base = tau
    return times, flags


def extract(traj: Trajectory, params: RegenParams,
            positions: np.ndarray | None = None) -> RegenerationRecord:
    """Extract the regeneration record of one trajectory.

    An empty record is a valid outcome for short or backtracking walks.
    """
    if positions is None:
        positions = traj.positions()
    d = positions.shape[1]
    a = params.resolved_a(d)
    margin = params.resolved_margin(traj.horizon)
    l = positions @ np.asarray(params.ell, dtype=float)
    times, flags = extract_from_levels(l, a, margin, params.level_tol)
    t = np.asarray(times, dtype=np.int64)
    return RegenerationRecord(t, positions[t] if len(t) else
                              np.empty((0, d), dtype=np.int64),
                              np.asarray(flags, dtype=bool))


def extract_from_steps(steps: np.ndarray, start, params: RegenParams,
                       horizon: int) -> RegenerationRecord:
    """Extraction straight from a recorded step-index row (batch runs)."""
    traj = Trajectory(tuple(int(c) for c in np.atleast_1d(start)),
                      np.asarray(steps, dtype=np.uint8), horizon, "budget")
    return extract(traj, params)


def regeneration_radii(record: RegenerationRecord,
                       positions: np.ndarray) -> np.ndarray:
    """L1 radii max_{tau_{k-1} <= m <= tau_k} |X_m - X_{tau_{k-1}}|_1.

    The first radius uses tau_0 = 0.  Requires at least one certified time.
    """
    times = record.certified_times
    if len(times) == 0:
        raise ValueError("need at least one certified regeneration")
    bounds = np.concatenate([[0], times])
    out = np.empty(len(times), dtype=np.int64)
    for k in range(len(times)):
        lo, hi = bounds[k], bounds[k + 1]
        seg = positions[lo:hi + 1] - positions[lo]
        out[k] = int(np.abs(seg).sum(axis=1).max())
    return out


@dataclass
class VelocityEstimate:
    ok: bool
    v: np.ndarray | None = None          # pooled-ratio velocity vector
    ci_low: np.ndarray | None = None     # per-component batch-means CI
    ci_high: np.ndarray | None = None
    n_blocks: int = 0
    reason: str = ""

    def project(self, direction) -> tuple[float, float, float]:
        e = np.asarray(direction, dtype=float)
        return (float(self.v @ e), float(self.ci_low @ e), float(self.ci_high @ e))


def renewal_velocity(records, n_batches: int = 32) -> VelocityEstimate:
    """Pooled renewal estimate (sum of displacements) / (sum of times).

    Uses only inter-regeneration blocks between certified times, so each
    walk's first block is discarded.  The confidence interval comes from
    batch means of the ratio over ``n_batches`` contiguous blocks.
    """
    disp = [r.inter_displacements for r in records if r.n_certified() >= 2]
    tims = [r.inter_times for r in records if r.n_certified() >= 2]
    if not disp:
        return VelocityEstimate(False, reason="no walk with >= 2 certified regenerations")
    D = np.concatenate(disp, axis=0).astype(float)
    T = np.concatenate(tims).astype(float)
    if len(T) < n_batches:
        return VelocityEstimate(False, reason=f"only {len(T)} blocks, need >= {n_batches}")
    v = D.sum(axis=0) / T.sum()
    edges = np.linspace(0, len(T), n_batches + 1).astype(int)
    batch_v = np.array([D[a:b].sum(axis=0) / T[a:b].sum()
                        for a, b in zip(edges[:-1], edges[1:])])
    se = batch_v.std(axis=0, ddof=1) / np.sqrt(n_batches)
    half = 2.04 * se  # t quantile, 31 dof, 95%
    return VelocityEstimate(True, v, v - half, v + half, n_batches)


def direct_velocity(finals: np.ndarray, nsteps: int) -> VelocityEstimate:
    """Mean of X_n / n over walks, with a normal CI per component."""
    V = np.asarray(finals, dtype=float) / float(nsteps)
    v = V.mean(axis=0)
    se = V.std(axis=0, ddof=1) / np.sqrt(V.shape[0])
    return VelocityEstimate(True, v, v - 1.96 * se, v + 1.96 * se, V.shape[0])


def records_to_csv(records, path, float_fmt: str = "%.17g") -> None:
    """One row per regeneration: walk id, k, tau_k, position, censored."""
    with open(path, "w", encoding="utf-8") as f:
        wrote_header = False
        for wid, rec in enumerate(records):
            if not wrote_header:
                d = rec.positions.shape[1] if rec.positions.size else 0
                cols = ",".join(f"x_{i + 1}" for i in range(d))
                f.write(f"walk,k,tau,{cols},censored\n" if d else
                        "walk,k,tau,censored\n")
                wrote_header = True
            for k in range(len(rec.times)):
                coords = ",".join(str(int(c)) for c in rec.positions[k])
                f.write(f"{wid},{k + 1},{int(rec.times[k])},{coords},"
                        f"{int(rec.censored[k])}\n")
