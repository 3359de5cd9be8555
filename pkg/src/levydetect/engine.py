"""Batched Monte Carlo engine.

The detection statistics are grid functionals of the log-likelihood process,
and for every catalogue family the law of its increments over a monitoring
step is known exactly, so runs are simulated directly on the monitoring grid:
each replication owns a counter-based stream (reproducible from its index
alone), increments are drawn chunk by chunk, and a scan kernel advances the
statistic until the barrier is crossed or the horizon censors the run.

Per-replication streams make three properties structural rather than
incidental: results do not depend on the worker count, common random numbers
across barrier candidates hold pathwise (a path consumes the same draws no
matter where the barrier sits), and any single replication can be replayed.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from . import kernels
from .errors import ContractError
from .model import ChangeModel
from .rng import RngStream, stream_id

__all__ = ["RuleSpec", "PathRunResult", "make_u_sampler", "run_paths", "run_dyadic"]

CHUNK = 4096          # scan-chunk width in steps (fixed; not a tuning knob)
BATCH = 1024          # replications per work item

_INT_MAX = np.iinfo(np.int64).max


@dataclass(frozen=True)
class RuleSpec:
    """Stopping rule run by the engine.

    kind 'cusum': reflected log-likelihood statistic crossing ``log_barrier``;
    kind 'sr': Shiryaev-Roberts statistic crossing exp(``log_barrier``);
    kind 'fixed': deterministic stop after ``fixed_steps`` monitoring steps.
    """

    kind: str
    log_barrier: float = math.nan
    fixed_steps: int = 0

    def validate(self) -> None:
        if self.kind not in ("cusum", "sr", "fixed"):
            raise ContractError(f"unknown rule kind {self.kind!r}")
        if self.kind in ("cusum", "sr"):
            if not math.isfinite(self.log_barrier):
                raise ContractError("rule needs a finite log barrier")
            if self.kind == "cusum" and self.log_barrier < 0.0:
                raise ContractError("cusum log barrier must be >= 0")
        if self.kind == "fixed" and self.fixed_steps < 1:
            raise ContractError("fixed rule needs at least one step")


@dataclass
class PathRunResult:
    """Per-replication outcomes of one engine run."""

    dt: float
    n_steps: int
    stop_steps: np.ndarray        # global step of the stop; -1 = censored
    stat: np.ndarray              # log statistic at the stop (NaN if censored/fixed)
    last_reflect: np.ndarray      # last step with log-statistic <= 0 (cusum only)
    lb_num: Optional[np.ndarray] = None
    lb_den: Optional[np.ndarray] = None

    @property
    def censored(self) -> np.ndarray:
        return self.stop_steps < 0

    @property
    def stop_times(self) -> np.ndarray:
        return np.where(self.censored, self.n_steps * self.dt,
                        self.stop_steps * self.dt)

    @property
    def tau_hat(self) -> np.ndarray:
        return np.where(self.censored, np.nan, self.last_reflect * self.dt)


# --------------------------------------------------------------------------- #
# exact per-step increment samplers for the log-likelihood process
# --------------------------------------------------------------------------- #

def make_u_sampler(model: ChangeModel, regime: str, dt: float) -> Callable:
    """Exact sampler for log-likelihood increments over one monitoring step.

    ``regime`` is 'pre' (no change yet) or 'post' (changed from the start).
    Draw order within a step is part of the stream contract: Brownian normals,
    then jump counts, then jump magnitudes.
    """
    model.require_admissible()
    if regime not in ("pre", "post"):
        raise ContractError(f"regime must be 'pre' or 'post', got {regime!r}")
    spec = model.pre if regime == "pre" else model.post
    alpha, sigma = model.alpha, model.sigma

    bm_sd = abs(alpha) * sigma * math.sqrt(dt)
    bm_mean = (0.5 if regime == "post" else -0.5) * (alpha * sigma) ** 2 * dt

    if model.phi is None:
        def draw(gen: np.random.Generator, size) -> np.ndarray:
            return bm_mean + bm_sd * gen.standard_normal(size)
        return draw

    comp_dt = model.comp_rate * dt
    phi = model.phi

    if spec.family == "gamma":
        shape = spec.activity * dt
        theta = spec.scale
        c1 = phi.pos[1]

        def draw(gen: np.random.Generator, size) -> np.ndarray:
            return c1 * gen.gamma(shape, theta, size) - comp_dt
        return draw

    lam_dt = spec.intensity * dt
    law = spec.jumps
    has_bm = bm_sd > 0.0

    if law.kind == "gaussian":
        c0, c1 = phi.pos
        mean, sd = law.mean, law.sd

        def draw(gen: np.random.Generator, size) -> np.ndarray:
            out = bm_mean + bm_sd * gen.standard_normal(size) if has_bm \
                else np.full(size, bm_mean)
            n = gen.poisson(lam_dt, size)
            z = gen.standard_normal(size)
            out += c0 * n + c1 * (mean * n + sd * np.sqrt(n) * z)
            return out - comp_dt
        return draw

    if law.kind == "exponential":
        c0, c1 = phi.pos
        rate = law.rate

        def draw(gen: np.random.Generator, size) -> np.ndarray:
            out = bm_mean + bm_sd * gen.standard_normal(size) if has_bm \
                else np.full(size, bm_mean)
            n = gen.poisson(lam_dt, size)
            out += c0 * n + (c1 / rate) * gen.standard_gamma(n)
            return out - comp_dt
        return draw

    c0p, c1p = phi.pos
    c0n, c1n = phi.neg
    w = law.weight_pos
    rp, rn = law.rate_pos, law.rate_neg

    def draw(gen: np.random.Generator, size) -> np.ndarray:
        out = bm_mean + bm_sd * gen.standard_normal(size) if has_bm \
            else np.full(size, bm_mean)
        npos = gen.poisson(lam_dt * w, size)
        nneg = gen.poisson(lam_dt * (1.0 - w), size)
        out += c0p * npos + (c1p / rp) * gen.standard_gamma(npos)
        out += c0n * nneg - (c1n / rn) * gen.standard_gamma(nneg)
        return out - comp_dt
    return draw


def sample_u_increments(model: ChangeModel, regime: str, dt: float,
                        n: int, rng: RngStream) -> np.ndarray:
    """n independent log-likelihood increments over one step (one stream)."""
    return make_u_sampler(model, regime, dt)(rng.generator(), n)


# --------------------------------------------------------------------------- #
# chunked scan driver
# --------------------------------------------------------------------------- #

def _run_batch(sampler, rule: RuleSpec, dt: float, n_steps: int, seeds, result,
               lo: int, collect_lb: bool, chunk: int) -> None:
    """Run replications [lo, lo + len(seeds)) and write results in place."""
    b = len(seeds)
    gens = [s.generator() for s in seeds]

    u = np.zeros(b)
    mn = np.zeros(b)
    lastref = np.zeros(b, dtype=np.int64)
    logA = np.zeros(b)               # SR carry: log sum exp(-u_m), m <= last step
    u_lb = np.zeros(b)
    mn_lb = np.zeros(b)
    num = np.ones(b) if collect_lb else None   # k = 0 terms: max(S_0,1) = 1
    den = np.ones(b) if collect_lb else None   # and (1 - S_0)^+ = 1

    alive = np.arange(b)
    stop = np.full(b, -1, dtype=np.int64)
    stat = np.full(b, np.nan)
    pos = 0

    fixed_total = rule.fixed_steps if rule.kind == "fixed" else None
    total_steps = n_steps if fixed_total is None else min(n_steps, fixed_total)

    while alive.size and pos < total_steps:
        w = min(chunk, total_steps - pos)
        inc = np.empty((alive.size, w))
        for j, idx in enumerate(alive):
            inc[j] = sampler(gens[idx], w)

        if rule.kind == "cusum":
            cu, cm, cl = u[alive], mn[alive], lastref[alive]
            if collect_lb:
                cn, cd = num[alive], den[alive]
                off, st, ye = kernels.lb_cusum_scan(inc, cu, cm, cn, cd, pos,
                                                    rule.log_barrier)
                num[alive], den[alive] = cn, cd
            else:
                off, st, ye = kernels.cusum_scan(inc, cu, cm, cl, pos,
                                                 rule.log_barrier)
            u[alive], mn[alive], lastref[alive] = cu, cm, cl
        elif rule.kind == "sr":
            cu, ca = u[alive], logA[alive]
            off, st, ye = kernels.sr_scan(inc, cu, ca, pos, rule.log_barrier)
            u[alive], logA[alive] = cu, ca
            if collect_lb:
                stops_here = np.where(off >= 0, pos + 1 + off, _INT_MAX)
                lu, lm = u_lb[alive], mn_lb[alive]
                ln, ld = num[alive], den[alive]
                kernels.lb_until_scan(inc, lu, lm, ln, ld, pos, stops_here)
                u_lb[alive], mn_lb[alive] = lu, lm
                num[alive], den[alive] = ln, ld
        else:  # fixed
            off = np.full(alive.size, -1, dtype=np.int64)
            st = np.full(alive.size, np.nan)
            ye = st
            if collect_lb:
                stops_here = np.full(alive.size, fixed_total, dtype=np.int64)
                lu, lm = u_lb[alive], mn_lb[alive]
                ln, ld = num[alive], den[alive]
                kernels.lb_until_scan(inc, lu, lm, ln, ld, pos, stops_here)
                u_lb[alive], mn_lb[alive] = lu, lm
                num[alive], den[alive] = ln, ld

        done = off >= 0
        stat[alive] = np.where(done, st, ye)   # censored rows keep the last value
        if done.any():
            rows = alive[done]
            stop[rows] = pos + 1 + off[done]
            alive = alive[~done]
        pos += w

    if fixed_total is not None:
        stop[:] = fixed_total

    sl = slice(lo, lo + b)
    result.stop_steps[sl] = stop
    result.stat[sl] = stat
    result.last_reflect[sl] = lastref
    if collect_lb:
        result.lb_num[sl] = num
        result.lb_den[sl] = den


def run_paths(model: ChangeModel, regime: str, rule: RuleSpec, dt: float,
              n_steps: int, n_rep: int, master_seed: int, purpose: str,
              block: int = 0, threads: int = 1, collect_lb: bool = False,
              chunk: int = CHUNK) -> PathRunResult:
    """Monte Carlo run of a stopping rule over ``n_rep`` monitored paths.

    Results are bit-identical for any ``threads`` value: replication i always
    uses the stream (master_seed, purpose/block/i) and aggregation is by
    fixed slices.
    """
    rule.validate()
    if rule.kind == "fixed" and rule.fixed_steps > n_steps:
        raise ContractError(
            f"fixed rule of {rule.fixed_steps} steps exceeds the {n_steps}-step horizon")
    sampler = make_u_sampler(model, regime, dt)
    result = PathRunResult(
        dt=dt, n_steps=n_steps,
        stop_steps=np.empty(n_rep, dtype=np.int64),
        stat=np.empty(n_rep),
        last_reflect=np.empty(n_rep, dtype=np.int64),
        lb_num=np.empty(n_rep) if collect_lb else None,
        lb_den=np.empty(n_rep) if collect_lb else None,
    )
    batches = []
    for lo in range(0, n_rep, BATCH):
        hi = min(lo + BATCH, n_rep)
        seeds = [RngStream(master_seed, stream_id(purpose, i, block))
                 for i in range(lo, hi)]
        batches.append((seeds, lo))

    if threads <= 1 or len(batches) == 1:
        for seeds, lo in batches:
            _run_batch(sampler, rule, dt, n_steps, seeds, result, lo,
                       collect_lb, chunk)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(_run_batch, sampler, rule, dt, n_steps,
                                   seeds, result, lo, collect_lb, chunk)
                       for seeds, lo in batches]
            for f in futures:
                f.result()
    return result


# --------------------------------------------------------------------------- #
# nested-grid runs over a shared fine path
# --------------------------------------------------------------------------- #

def run_dyadic(model: ChangeModel, regime: str, log_barrier: float, dt: float,
               n_steps: int, strides: Sequence[int], n_rep: int,
               master_seed: int, purpose: str = "converge", block: int = 0,
               threads: int = 1) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """Stop times of the grid rule at several monitoring strides over one
    shared fine path per replication.

    Returns two lists of per-stride stop-time arrays: for the usual
    ``statistic >= barrier`` stop and for the strict ``> barrier`` variant
    (they part ways only when the statistic lands exactly on the barrier).
    Censored runs report the horizon. All strides see identical trajectories,
    so nested-grid comparisons hold pathwise, not just in distribution.
    """
    for s in strides:
        if n_steps % s:
            raise ContractError(f"n_steps {n_steps} not divisible by stride {s}")
    sampler = make_u_sampler(model, regime, dt)
    out = [np.empty(n_rep) for _ in strides]
    out_strict = [np.empty(n_rep) for _ in strides]

    def do_batch(lo: int, hi: int) -> None:
        b = hi - lo
        inc = np.empty((b, n_steps))
        for j, i in enumerate(range(lo, hi)):
            gen = RngStream(master_seed, stream_id(purpose, i, block)).generator()
            inc[j] = sampler(gen, n_steps)
        uu = np.cumsum(inc, axis=1)
        for li, s in enumerate(strides):
            us = uu[:, s - 1::s]
            prev = np.empty_like(us)
            prev[:, 0] = 0.0
            prev[:, 1:] = us[:, :-1]
            y = us - np.minimum.accumulate(prev, axis=1)
            for stops, crossed in ((out[li], y >= log_barrier),
                                   (out_strict[li], y > log_barrier)):
                any_cross = crossed.any(axis=1)
                first = crossed.argmax(axis=1)
                stop = np.where(any_cross, (first + 1) * s * dt, n_steps * dt)
                stops[lo:hi] = stop

    spans = [(lo, min(lo + 256, n_rep)) for lo in range(0, n_rep, 256)]
    if threads <= 1 or len(spans) == 1:
        for lo, hi in spans:
            do_batch(lo, hi)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(do_batch, lo, hi) for lo, hi in spans]
            for f in futures:
                f.result()
    return out, out_strict
