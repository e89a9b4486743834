"""Slow, independent verifiers for the optimizer and the geometry.

Nothing here shares code paths with the optimizer: grid search enumerates
lattice measures outright, box counting measures the attractor with dyadic
boxes from sampled orbits, level sets check Birkhoff averages empirically,
and local_dimension evaluates measure decay through approximate squares.
Agreement between these and the fast paths is the package's main evidence
of correctness.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .measures import (
    AvgPotentialModel,
    BlockMeasure,
    Potential,
    block_space,
    dly_batch,
)
from .seeds import stream
from .spectrum import carpet_dimension, spectrum_point
from .symbolic import SymbolicOrbit, cutting_indices
from .system import GuardExceeded, LGSystem

GRID_EVAL_GUARD = 10**9
SHARD = 20000


class ZeroCylinder(ValueError):
    """The orbit entered a cylinder the measure does not charge."""


# ---------------------------------------------------------------------------
# dense simplex grid search


def _composition_chunks(total: int, parts: int, chunk: int = 65536):
    """Yield (rows, parts) integer arrays enumerating weak compositions."""
    if parts == 1:
        yield np.array([[total]], dtype=np.int64)
        return
    slots = total + parts - 1
    it = itertools.combinations(range(slots), parts - 1)
    while True:
        block = list(itertools.islice(it, chunk))
        if not block:
            return
        bars = np.asarray(block, dtype=np.int64)
        ext = np.empty((bars.shape[0], parts + 1), dtype=np.int64)
        ext[:, 0] = -1
        ext[:, 1:-1] = bars
        ext[:, -1] = slots
        yield np.diff(ext, axis=1) - 1


def grid_search_dly(
    sys: LGSystem,
    pot: Optional[Potential] = None,
    alpha: Optional[float] = None,
    m: int = 1,
    step: float = 0.01,
) -> tuple[float, np.ndarray]:
    """Exhaustive dly maximization over lattice measures with spacing step.

    With a potential and alpha, only lattice points within step of the
    constraint are kept.  The lattice is coarse by design; the optimizer is
    expected to dominate this value up to O(step) resolution.
    """
    space = block_space(sys, m)
    n = space.n_words
    if n - 1 > 3:
        raise GuardExceeded(f"grid search limited to simplex dimension 3, got {n - 1}")
    N = int(round(1.0 / step))
    if N < 1:
        raise ValueError("step must be at most 1")
    total = math.comb(N + n - 1, n - 1)
    if total > GRID_EVAL_GUARD:
        raise GuardExceeded(f"{total} lattice points exceed {GRID_EVAL_GUARD}")
    model = None
    if pot is not None and alpha is not None:
        model = AvgPotentialModel(sys, m, pot)
    best = -np.inf
    best_q = None
    for comp in _composition_chunks(N, n):
        Q = comp.astype(float) / N
        if model is not None:
            keep = np.abs(model.value(Q) - alpha) <= step + 1e-12
            Q = Q[keep]
            if Q.shape[0] == 0:
                continue
        vals = dly_batch(space, Q)
        k = int(np.argmax(vals))
        if vals[k] > best:
            best = float(vals[k])
            best_q = Q[k].copy()
    if best_q is None:
        raise ValueError("no lattice point satisfies the constraint slab")
    return best, best_q


# ---------------------------------------------------------------------------
# Monte-Carlo box counting


@dataclass
class BoxCountReport:
    scales: list[float]
    counts: list[int]
    counts_corrected: list[float]
    js: list[int]
    js_used: list[int]
    slope: float
    residual: float
    points_used: int
    boxes: Optional[list[np.ndarray]] = None  # sorted keys per scale on request


def _coverage_invert(occupied: float, samples: int) -> float:
    """Solve occupied = M (1 - exp(-samples/M)) for the box count M."""
    if occupied <= 0:
        return 0.0
    M = occupied
    for _ in range(200):
        nxt = occupied / (1.0 - math.exp(-samples / M))
        if abs(nxt - M) <= 1e-12 * M:
            M = nxt
            break
        M = nxt
    return M


def _sample_points(sys: LGSystem, measure: BlockMeasure, count: int,
                   depth: int, rng) -> tuple[np.ndarray, np.ndarray]:
    m = measure.m
    blocks = -(-depth // m)
    words = measure.sample_words(rng, count * blocks).reshape(count, blocks)
    digs = measure.space.decode(words.reshape(-1)).reshape(count, blocks * m)
    digs = digs[:, :depth]
    a, c = sys.a, sys.c
    b, d = sys.b, sys.d_rows[sys.row_of]
    x = np.full(count, 0.5)
    y = np.full(count, 0.5)
    for t in range(depth - 1, -1, -1):
        dt = digs[:, t]
        x = a[dt] * x + c[dt]
        y = b[dt] * y + d[dt]
    return x, y


def box_count(
    sys: LGSystem,
    points: int,
    depth: int,
    js: Sequence[int],
    seed: int = 0,
    *,
    measure: Optional[BlockMeasure] = None,
    threads: int = 1,
    collect: bool = False,
) -> BoxCountReport:
    """Occupied dyadic boxes per scale from measure-sampled points.

    Sampling follows the dimension-maximizing measure unless one is given.
    Occupancies are undercounts at scales where boxes saturate; the slope is
    taken on coverage-corrected counts (O = M(1-exp(-S/M)) inverted for M),
    with scales above 99% saturation dropped from the regression.  Raw counts
    are reported unchanged.
    """
    if points < 1:
        raise ValueError("points must be positive")
    js = sorted(int(j) for j in js)
    j_max = js[-1]
    if sys.b_max**depth > 2.0**-j_max / 8.0:
        raise ValueError(
            f"depth {depth} resolves only to {sys.b_max**depth:.3g}, "
            f"coarser than an eighth of the finest box 2^-{j_max}"
        )
    if measure is None:
        measure = carpet_dimension(sys, 1, seed=seed).measure
    shards = [(s, min(SHARD, points - s * SHARD)) for s in range(-(-points // SHARD))]

    def run_shard(item):
        s, cnt = item
        rng = stream(seed, "box", s)
        x, y = _sample_points(sys, measure, cnt, depth, rng)
        out = []
        for j in js:
            side = 2**j
            ix = np.clip((x * side).astype(np.int64), 0, side - 1)
            iy = np.clip((y * side).astype(np.int64), 0, side - 1)
            out.append(np.unique(ix * side + iy))
        return out

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            shard_keys = list(ex.map(run_shard, shards))
    else:
        shard_keys = [run_shard(it) for it in shards]

    counts = []
    corrected = []
    js_used = []
    boxes = [] if collect else None
    for col, j in enumerate(js):
        keys = np.unique(np.concatenate([sk[col] for sk in shard_keys]))
        if boxes is not None:
            boxes.append(keys)
        occ = keys.size
        counts.append(int(occ))
        M = _coverage_invert(float(occ), points)
        corrected.append(M)
        if occ <= 0.99 * points:
            js_used.append(j)
    fit_js = np.array(js_used if len(js_used) >= 2 else js, dtype=float)
    fit_log = np.array(
        [math.log2(corrected[js.index(int(j))]) for j in fit_js]
    )
    A = np.vstack([fit_js, np.ones_like(fit_js)]).T
    sol, res, *_ = np.linalg.lstsq(A, fit_log, rcond=None)
    slope = float(sol[0])
    residual = float(np.sqrt(res[0] / fit_js.size)) if res.size else 0.0
    return BoxCountReport(
        scales=[2.0**-j for j in js],
        counts=counts,
        counts_corrected=corrected,
        js=list(js),
        js_used=[int(j) for j in fit_js],
        slope=slope,
        residual=residual,
        points_used=points,
        boxes=boxes,
    )


# ---------------------------------------------------------------------------
# empirical Birkhoff level sets


@dataclass
class LevelSetReport:
    alpha: float
    tolerance: float
    fraction: float
    mean_deviation: float
    orbits: int
    length: int


def empirical_level_set(
    sys: LGSystem,
    pot: Potential,
    alpha: float,
    tolerance: float,
    orbits: int,
    length: int,
    seed: int = 0,
    *,
    m: int = 1,
    restarts: int = 32,
) -> LevelSetReport:
    """Fraction of orbits from the spectrum argmax with A_N(phi) near alpha."""
    pt = spectrum_point(sys, pot, alpha, m, seed=seed, restarts=restarts)
    if not pt.feasible or pt.lower_weights is None:
        raise ValueError(f"alpha={alpha} infeasible at level {m}")
    measure = BlockMeasure.dense(sys, m, pt.lower_weights)
    r = pot.order
    D = sys.n_digits
    need = length + r - 1
    blocks = -(-need // m)
    rng = stream(seed, "levelset")
    devs = np.empty(orbits)
    chunk = max(1, min(orbits, 10**7 // max(length, 1)))
    done = 0
    while done < orbits:
        take = min(chunk, orbits - done)
        words = measure.sample_words(rng, take * blocks).reshape(take, blocks)
        digs = measure.space.decode(words.reshape(-1)).reshape(take, blocks * m)
        digs = digs[:, :need].astype(np.int64)
        key = np.zeros((take, length), dtype=np.int64)
        for t in range(r):
            key = key * D + digs[:, t : t + length]
        A = pot.values[key].sum(axis=1) / length
        devs[done : done + take] = np.abs(A - alpha)
        done += take
    fraction = float(np.mean(devs <= tolerance))
    return LevelSetReport(
        alpha=alpha,
        tolerance=tolerance,
        fraction=fraction,
        mean_deviation=float(devs.mean()),
        orbits=orbits,
        length=length,
    )


# ---------------------------------------------------------------------------
# local dimension through approximate squares


@dataclass
class LocalDimReport:
    orbit: SymbolicOrbit
    ns: np.ndarray
    quotients: np.ndarray
    liminf_estimate: float
    tail_start: int = field(default=0)


def _mixed_block_logprob(measure: BlockMeasure, digs_block, rows_block,
                         s_exact: int, s_row: int) -> float:
    """log of the measure of one block cylinder: the first s_exact symbols
    pinned to digits, symbols up to s_row pinned to rows, the rest free."""
    space = measure.space
    W = measure.weights
    keep = np.ones(space.n_words, dtype=bool)
    words = space.all_words
    for pos in range(s_exact):
        keep &= space.extract(words, pos) == digs_block[pos]
    if s_row > s_exact:
        row_of = measure.sys.row_of
        for pos in range(s_exact, s_row):
            keep &= row_of[space.extract(words, pos)] == rows_block[pos]
    p = float(W[keep].sum())
    if p <= 0.0:
        raise ZeroCylinder("cylinder has measure zero")
    return math.log(p)


def local_dimension(
    measure: BlockMeasure,
    orbit: SymbolicOrbit,
    n_max: int,
) -> LocalDimReport:
    """Exact log mu(B_n(omega)) / log prod b quotients, n = 1..n_max.

    B_n pins the first L_n symbols exactly and only the rows from L_n+1 to n;
    for a level-m Bernoulli measure the probability factors over blocks, with
    at most two blocks straddling L_n or n.  The liminf estimate is the
    minimum over the last quarter of the range.
    """
    if not measure.is_dense:
        raise ValueError("local_dimension needs dense block weights")
    if measure.sys.content_hash != orbit.sys.content_hash:
        raise ValueError("measure and orbit use different systems")
    sys = measure.sys
    m = measure.m
    word = np.asarray(orbit.word, dtype=np.int64)
    if word.size < n_max:
        raise ValueError(f"orbit has {word.size} symbols, need {n_max}")
    ls = cutting_indices(orbit, n_max)
    rows = sys.row_of[word]
    cum_log_b = orbit._cum_log_b

    n_blocks = -(-n_max // m)
    pad = n_blocks * m - word[:n_blocks * m].size
    wpad = word[: n_blocks * m]
    if pad > 0:
        raise ValueError(f"orbit must cover {n_blocks * m} symbols for level {m}")
    blocks = wpad.reshape(n_blocks, m)
    block_words = measure.space.encode(blocks)
    W = measure.weights
    rho = measure.row_marginal
    rww = measure.space.rowword_of(block_words)
    wprob = W[block_words]
    rprob = rho[rww]
    if (wprob <= 0).any():
        first = int(np.argmax(wprob <= 0))
        raise ZeroCylinder(
            f"orbit block {first} has measure zero under the given weights"
        )
    ce = np.concatenate([[0.0], np.cumsum(np.log(wprob))])
    cr = np.concatenate([[0.0], np.cumsum(np.log(rprob))])

    log_mu = np.empty(n_max)
    if m == 1:
        l_arr = ls
        log_mu = ce[l_arr] + (cr[np.arange(1, n_max + 1)] - cr[l_arr])
    else:
        cache: dict[tuple[int, int, int], float] = {}

        def mixed(k: int, s_exact: int, s_row: int) -> float:
            key = (k, s_exact, s_row)
            if key not in cache:
                cache[key] = _mixed_block_logprob(
                    measure, blocks[k], rows[k * m : (k + 1) * m], s_exact, s_row
                )
            return cache[key]

        for n in range(1, n_max + 1):
            L = int(ls[n - 1])
            kL, sL = divmod(L, m)
            kn, sn = divmod(n, m)
            total = ce[kL]
            if kL == kn:
                if sL or sn:
                    total += mixed(kL, sL, sn)
            else:
                row_from = kL
                if sL:
                    total += mixed(kL, sL, m)
                    row_from = kL + 1
                total += cr[kn] - cr[row_from]
                if sn:
                    total += mixed(kn, 0, sn)
            log_mu[n - 1] = total

    denom = cum_log_b[1 : n_max + 1]
    quot = log_mu / denom
    tail_start = max(1, int(math.ceil(0.75 * n_max)))
    lim = float(quot[tail_start - 1 :].min())
    return LocalDimReport(
        orbit=orbit,
        ns=np.arange(1, n_max + 1),
        quotients=quot,
        liminf_estimate=lim,
        tail_start=tail_start,
    )


# ---------------------------------------------------------------------------
# closed forms for grid-aligned carpets


def grid_carpet_dimension(sys: LGSystem) -> float:
    """McMullen's formula for carpets on a uniform q x Q grid.

    Requires every b = 1/q, every a = 1/Q with integers Q >= q and all
    translations on the grid; raises ValueError otherwise.
    """
    bs = {row.b for row in sys.rows}
    as_ = {col.a for row in sys.rows for col in row.cols}
    if len(bs) != 1 or len(as_) != 1:
        raise ValueError("grid formula needs uniform contraction ratios")
    b = bs.pop()
    a = as_.pop()
    q = round(1.0 / b)
    Q = round(1.0 / a)
    if not math.isclose(b * q, 1.0, abs_tol=1e-12) or not math.isclose(
        a * Q, 1.0, abs_tol=1e-12
    ):
        raise ValueError("grid formula needs reciprocal-integer ratios")
    if Q < q:
        raise ValueError("grid formula needs at least as many columns as rows")
    for row in sys.rows:
        if abs(row.d * q - round(row.d * q)) > 1e-9:
            raise ValueError("row offsets must sit on the grid")
        for col in row.cols:
            if abs(col.c * Q - round(col.c * Q)) > 1e-9:
                raise ValueError("column offsets must sit on the grid")
    t = np.array([len(row.cols) for row in sys.rows], dtype=float)
    if q == 1:
        # a single full-height row: the carpet is a self-similar set in x
        return math.log(float(t.sum())) / math.log(Q)
    exponent = math.log(q) / math.log(Q)
    return math.log(float((t**exponent).sum())) / math.log(q)
