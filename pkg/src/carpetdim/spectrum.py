"""Dimension maximization and Birkhoff spectrum bounds at block levels.

carpet_dimension maximizes dly over level-m Bernoulli measures.  For a
potential phi, spectrum_point computes at level m

  lower(alpha) = max { dly(nu) : integrate_avg(nu, phi) = alpha }
  upper(alpha) = max { dly(nu) : |integrate_avg(nu, phi) - alpha| <= var_m }

where var_m = var_avg(sys, phi, m).  The first is a rigorous lower bound for
the Birkhoff spectrum at alpha, the second an upper bound; for order-1
potentials var_m = 0 and the two collapse.  The upper solve is by candidate
probes: the unconstrained maximizer when it lands inside the slab, equality
solves at the (range-clamped) slab edges, and the lower solution, so
lower <= upper holds by construction.

Potentials are affinely renormalized to [0, 1] internally; alpha, targets
and tolerances move to the same scale, which makes results invariant (well
below reporting precision) under phi -> c*phi + d.

When alpha sits at an end of the achievable range the feasible set may be a
face; the solve is restricted to the words whose periodic Birkhoff mean
attains the extreme, mirroring the order-1 endpoint semantics.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .measures import (
    AvgPotentialModel,
    BlockMeasure,
    Potential,
    ThermoReport,
    block_space,
    thermo,
    var_avg,
    window_distribution,
)
from .optimize import (
    LinearConstraint,
    OptResult,
    PolyConstraint,
    WordData,
    maximize_dly,
    optimize_value,
    project_simplex,
)
from .system import GuardExceeded, LGSystem

SNAP = 1e-9  # endpoint snapping, in units of the potential oscillation
KARP_GUARD = 4096


@dataclass
class DimensionResult:
    dimension: float
    m: int
    measure: BlockMeasure
    thermo: ThermoReport
    kkt: float
    iterations: int
    converged: bool
    restarts_used: int


@dataclass
class SpectrumPoint:
    alpha: float
    m: int
    feasible: bool
    lower: Optional[float]
    upper: Optional[float]
    kkt_residual: Optional[float]
    restarts_used: int
    converged: bool
    var_width: float
    lower_weights: Optional[np.ndarray] = None
    upper_weights: Optional[np.ndarray] = None


def carpet_dimension(
    sys: LGSystem,
    m: int = 1,
    *,
    seed: int = 0,
    restarts: int = 32,
    tol: float = 1e-8,
    max_iter: int = 100000,
    warm: Sequence[np.ndarray] = (),
) -> DimensionResult:
    """Maximize dly over level-m Bernoulli measures."""
    space = block_space(sys, m)
    res = maximize_dly(
        space,
        None,
        seed=seed,
        seed_tags=("dim", m),
        restarts=restarts,
        tol=tol,
        max_iter=max_iter,
        warm=warm,
    )
    mu = BlockMeasure.dense(sys, m, res.weights)
    return DimensionResult(
        dimension=res.value,
        m=m,
        measure=mu,
        thermo=thermo(mu),
        kkt=res.kkt,
        iterations=res.iterations,
        converged=res.converged,
        restarts_used=res.restarts_used,
    )


def _normalized(pot: Potential):
    """(values scaled to [0,1], min, osc); osc == 0 flags a constant phi."""
    mn = float(pot.values.min())
    osc = float(pot.values.max() - pot.values.min())
    if osc == 0.0:
        return None, mn, 0.0
    vals = (pot.values - mn) / osc
    return Potential(pot.sys, pot.order, vals), mn, osc


def alpha_bounds(sys: LGSystem, pot: Potential) -> tuple[float, float]:
    """Range of Birkhoff averages over the full shift: min/max mean cycle."""
    vals = pot.values
    r = pot.order
    D = sys.n_digits
    if r == 1:
        return float(vals.min()), float(vals.max())
    V = D ** (r - 1)
    if V > KARP_GUARD:
        raise GuardExceeded(
            f"cycle-bound graph has {V} vertices (limit {KARP_GUARD})"
        )
    # de Bruijn graph on (r-1)-grams; edge (d1 u) -> (u dr) costs phi(d1 u dr)
    v_idx = np.arange(V, dtype=np.int64)
    preds = (v_idx[None, :] // D) + (D ** (r - 2)) * np.arange(D, dtype=np.int64)[:, None]
    wts = vals[preds * D + (v_idx % D)[None, :]]  # (D, V)

    def min_mean(weights):
        table = np.zeros((V + 1, V))
        for k in range(V):
            table[k + 1] = (table[k][preds] + weights).min(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            quot = (table[V][None, :] - table[:V]) / (V - np.arange(V))[:, None]
        return float(quot.max(axis=0).min())

    lo = min_mean(wts)
    hi = -min_mean(-wts)
    return lo, hi


def _level_range_n(sys: LGSystem, model: AvgPotentialModel, seed: int, m: int):
    """Achievable integrate_avg range at level m, normalized units."""
    if model.degree == 1:
        lo = float(model.lin.min())
        hi = float(model.lin.max())
        n = model.space.n_words
        q_lo = np.zeros(n)
        q_lo[int(np.argmin(model.lin))] = 1.0
        q_hi = np.zeros(n)
        q_hi[int(np.argmax(model.lin))] = 1.0
        return lo, hi, q_lo, q_hi
    lo, q_lo = optimize_value(model, -1.0, seed=seed, seed_tags=("range", m, "lo"))
    hi, q_hi = optimize_value(model, 1.0, seed=seed, seed_tags=("range", m, "hi"))
    return lo, hi, q_lo, q_hi


def level_range(sys: LGSystem, pot: Potential, m: int, *, seed: int = 0):
    """Achievable integrate_avg range over level-m Bernoulli measures."""
    pot_n, mn, osc = _normalized(pot)
    if osc == 0.0:
        return mn, mn
    model = AvgPotentialModel(sys, m, pot_n)
    lo, hi, _, _ = _level_range_n(sys, model, seed, m)
    return lo * osc + mn, hi * osc + mn


class _FaceModelView:
    """AvgPotentialModel seen through a word subset (weights embed as zeros)."""

    def __init__(self, model: AvgPotentialModel, face: np.ndarray, n_full: int):
        self.inner = model
        self.face = face
        self.n_full = n_full

    def _embed(self, Q):
        full = np.zeros((Q.shape[0], self.n_full))
        full[:, self.face] = Q
        return full

    def value(self, Q):
        return self.inner.value(self._embed(Q))

    def grad(self, Q):
        return self.inner.grad(self._embed(Q))[:, self.face]

    def hessian(self, n_guard: int = 2048):
        H = self.inner.hessian(n_guard)
        if H is None or H.size == 0:
            return H
        return H[np.ix_(self.face, self.face)]


class _FacePoly(PolyConstraint):
    """Equality constraint restricted to a face of the word simplex."""

    def __init__(self, model_view: _FaceModelView, alpha: float, scale: float):
        self.model = model_view
        self.alpha = alpha
        self.scale = max(scale, 1e-12)

    def hess(self, support: np.ndarray):
        H = self.model.hessian()
        if H is None:
            return None
        if H.size == 0:
            k = int(support.sum())
            return np.zeros((k, k))
        return H[np.ix_(support, support)]


@dataclass
class _SolveOut:
    value: float
    weights: np.ndarray
    kkt: float
    converged: bool
    restarts_used: int


def _solve_at(
    sys: LGSystem,
    model: AvgPotentialModel,
    target: float,
    rng_n,
    *,
    seed: int,
    tags: tuple,
    restarts: int,
    tol: float,
    max_iter: int,
    warm: Sequence[np.ndarray],
) -> _SolveOut:
    """Maximize dly subject to integrate_avg = target (normalized units)."""
    space = model.space
    n = space.n_words
    lo, hi, q_lo, q_hi = rng_n
    target = float(np.clip(target, lo, hi))
    vv = model.vertex_values()

    side = None
    if target <= lo + SNAP:
        side = "min"
    elif target >= hi - SNAP:
        side = "max"

    if side is not None:
        ext = lo if side == "min" else hi
        if side == "min":
            face = np.flatnonzero(vv <= ext + 1e-12)
        else:
            face = np.flatnonzero(vv >= ext - 1e-12)
        if face.size:
            wd_face = WordData.full(space).subset(np.isin(np.arange(n), face))
            warm_face = []
            for w in warm:
                wf = np.asarray(w, dtype=float)[face]
                if wf.sum() > 1e-12:
                    warm_face.append(wf / wf.sum())
            if model.degree == 1:
                cons = None  # integrate_avg is constant on this face
            else:
                view = _FaceModelView(model, face, n)
                cons = _FacePoly(view, ext, 1.0)
            res = maximize_dly(
                wd_face,
                cons,
                seed=seed,
                seed_tags=tags + ("face", side),
                restarts=restarts,
                tol=tol,
                max_iter=max_iter,
                warm=warm_face,
            )
            weights = np.zeros(n)
            weights[face] = res.weights
            return _SolveOut(res.value, weights, res.kkt, res.converged,
                             res.restarts_used)
        # extreme attained only off the vertices: fall through to equality

    if model.degree == 1:
        cons = LinearConstraint(model.lin, target, 1.0)
    else:
        cons = PolyConstraint(model, target, 1.0)
    warm_all = list(warm)
    on_slice = np.flatnonzero(np.abs(vv - target) <= 1e-12)
    for w_idx in on_slice[:8]:
        e = np.zeros(n)
        e[w_idx] = 1.0
        warm_all.append(e)
    # a feasible blend between the range extremes anchors restoration
    for t in (0.25, 0.5, 0.75):
        warm_all.append((1 - t) * q_lo + t * q_hi)
    res = maximize_dly(
        space,
        cons,
        seed=seed,
        seed_tags=tags,
        restarts=restarts,
        tol=tol,
        max_iter=max_iter,
        warm=warm_all,
    )
    return _SolveOut(res.value, res.weights, res.kkt, res.converged,
                     res.restarts_used)


def _infeasible(alpha: float, m: int, var_width: float) -> SpectrumPoint:
    return SpectrumPoint(
        alpha=alpha, m=m, feasible=False, lower=None, upper=None,
        kkt_residual=None, restarts_used=0, converged=True,
        var_width=var_width,
    )


def spectrum_point(
    sys: LGSystem,
    pot: Potential,
    alpha: float,
    m: int = 1,
    *,
    seed: int = 0,
    restarts: int = 32,
    tol: float = 1e-8,
    max_iter: int = 100000,
    warm: Sequence[np.ndarray] = (),
    tags: tuple = (),
    dim_result: Optional[DimensionResult] = None,
    _model=None,
    _range_n=None,
) -> SpectrumPoint:
    """Lower/upper Birkhoff spectrum bounds at one alpha, one block level."""
    pot_n, mn, osc = _normalized(pot)
    if osc == 0.0:
        scale = max(1.0, abs(mn))
        if abs(alpha - mn) <= 1e-12 * scale:
            d = dim_result or carpet_dimension(
                sys, m, seed=seed, restarts=restarts, tol=tol, max_iter=max_iter
            )
            return SpectrumPoint(
                alpha=alpha, m=m, feasible=True, lower=d.dimension,
                upper=d.dimension, kkt_residual=d.kkt,
                restarts_used=d.restarts_used, converged=d.converged,
                var_width=0.0,
                lower_weights=d.measure.weights, upper_weights=d.measure.weights,
            )
        return _infeasible(alpha, m, 0.0)

    model = _model if _model is not None else AvgPotentialModel(sys, m, pot_n)
    rng_n = _range_n if _range_n is not None else _level_range_n(sys, model, seed, m)
    lo, hi, _, _ = rng_n
    alpha_n = (alpha - mn) / osc
    w_n = var_avg(sys, pot_n, m)

    if alpha_n < lo - SNAP or alpha_n > hi + SNAP:
        return _infeasible(alpha, m, w_n * osc)

    base_tags = tags if tags else ("sp", m, repr(float(alpha)))

    lower_out = _solve_at(
        sys, model, alpha_n, rng_n,
        seed=seed, tags=base_tags + ("lo",), restarts=restarts, tol=tol,
        max_iter=max_iter, warm=warm,
    )

    # upper bound: best dly within the slab |F - alpha| <= var
    cands = [lower_out]
    restarts_total = lower_out.restarts_used
    if w_n > 0.0:
        d = dim_result or carpet_dimension(
            sys, m, seed=seed, restarts=restarts, tol=tol, max_iter=max_iter
        )
        Fd = float(model.value(d.measure.weights.reshape(1, -1))[0])
        if abs(Fd - alpha_n) <= w_n:
            cands.append(_SolveOut(d.dimension, d.measure.weights, d.kkt,
                                   d.converged, d.restarts_used))
            restarts_total += d.restarts_used
        else:
            edge_warm = tuple(warm) + (lower_out.weights,)
            edge = alpha_n - w_n if Fd < alpha_n else alpha_n + w_n
            near = _solve_at(
                sys, model, edge, rng_n,
                seed=seed, tags=base_tags + ("edge", "near"), restarts=restarts,
                tol=tol, max_iter=max_iter, warm=edge_warm,
            )
            cands.append(near)
            restarts_total += near.restarts_used
            far_edge = alpha_n + w_n if Fd < alpha_n else alpha_n - w_n
            far = _solve_at(
                sys, model, far_edge, rng_n,
                seed=seed, tags=base_tags + ("edge", "far"), restarts=restarts,
                tol=tol, max_iter=max_iter, warm=edge_warm,
            )
            cands.append(far)
            restarts_total += far.restarts_used
    best = max(cands, key=lambda c: c.value)
    kkt = max(lower_out.kkt, best.kkt)
    return SpectrumPoint(
        alpha=alpha, m=m, feasible=True,
        lower=lower_out.value, upper=best.value,
        kkt_residual=kkt, restarts_used=restarts_total,
        converged=lower_out.converged and best.converged,
        var_width=w_n * osc,
        lower_weights=lower_out.weights, upper_weights=best.weights,
    )


def spectrum_curve(
    sys: LGSystem,
    pot: Potential,
    m: int = 1,
    *,
    points: int = 33,
    seed: int = 0,
    restarts: int = 32,
    tol: float = 1e-8,
    max_iter: int = 100000,
    threads: int = 1,
) -> list[SpectrumPoint]:
    """Spectrum bounds on an inclusive uniform grid over the global range.

    Pass 1 solves every grid point independently (parallelizable; results do
    not depend on thread count).  Pass 2 sweeps the grid both ways re-solving
    from neighbouring warm starts, keeping improvements; it runs
    sequentially, so output bytes stay identical for any --threads value.
    """
    pot_n, mn, osc = _normalized(pot)
    if osc == 0.0:
        return [spectrum_point(sys, pot, mn, m, seed=seed, restarts=restarts,
                               tol=tol, max_iter=max_iter)]
    a_lo, a_hi = alpha_bounds(sys, pot)
    grid = np.linspace(a_lo, a_hi, points)
    model = AvgPotentialModel(sys, m, pot_n)
    rng_n = _level_range_n(sys, model, seed, m)
    dim_res = carpet_dimension(sys, m, seed=seed, restarts=restarts, tol=tol,
                               max_iter=max_iter)

    def solve_one(i: int) -> SpectrumPoint:
        return spectrum_point(
            sys, pot, float(grid[i]), m,
            seed=seed, restarts=restarts, tol=tol, max_iter=max_iter,
            tags=("curve", m, i), dim_result=dim_res,
            _model=model, _range_n=rng_n,
        )

    idx = range(points)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            out = list(ex.map(solve_one, idx))
    else:
        out = [solve_one(i) for i in idx]

    # warm-start sweeps; strictly sequential on purpose
    for step in (1, -1):
        rng_i = range(1, points) if step == 1 else range(points - 2, -1, -1)
        for i in rng_i:
            prev, cur = out[i - step], out[i]
            if not (prev.feasible and cur.feasible):
                continue
            if prev.lower_weights is None:
                continue
            retry = spectrum_point(
                sys, pot, float(grid[i]), m,
                seed=seed, restarts=0, tol=tol, max_iter=max_iter,
                warm=(prev.lower_weights,),
                tags=("curve-sweep", m, i), dim_result=dim_res,
                _model=model, _range_n=rng_n,
            )
            if not retry.feasible or retry.lower is None:
                continue
            if cur.lower is not None and retry.lower <= cur.lower + 1e-12:
                continue
            cur_up = cur.upper if cur.upper is not None else -np.inf
            new_up = retry.upper if retry.upper is not None else -np.inf
            out[i] = SpectrumPoint(
                alpha=cur.alpha, m=m, feasible=True,
                lower=retry.lower, upper=float(max(cur_up, new_up)),
                kkt_residual=retry.kkt_residual,
                restarts_used=cur.restarts_used + retry.restarts_used,
                converged=retry.converged,
                var_width=cur.var_width,
                lower_weights=retry.lower_weights,
                upper_weights=retry.upper_weights if new_up >= cur_up
                else cur.upper_weights,
            )
    return out


def _lift_warm_starts(sys: LGSystem, results: dict, m: int) -> list[np.ndarray]:
    """Warm starts at level m from coarser solved levels.

    Divisor levels lift exactly (k-fold products keep dly and the constraint);
    other levels contribute their stationary m-window distribution, which is
    near-feasible and gets repaired by the solver's restoration step.
    """
    warm = []
    for mp, res in results.items():
        if res.lower_weights is None:
            continue
        mu = BlockMeasure.dense(sys, mp, res.lower_weights)
        if m % mp == 0:
            w = mu.weights
            for _ in range(m // mp - 1):
                w = np.kron(w, mu.weights)
            warm.append(w)
        else:
            acc = np.zeros(sys.n_digits**m)
            for l in range(mp):
                acc += window_distribution(mu, l, m)
            warm.append(acc / mp)
    return warm


def bracket_refine(
    sys: LGSystem,
    pot: Potential,
    alpha: float,
    m_max: int,
    *,
    seed: int = 0,
    restarts: int = 32,
    tol: float = 1e-8,
    max_iter: int = 100000,
) -> list[SpectrumPoint]:
    """Lower/upper bounds at alpha for m = 1..m_max with lifted warm starts."""
    rows: list[SpectrumPoint] = []
    solved: dict[int, SpectrumPoint] = {}
    for m in range(1, m_max + 1):
        warm = _lift_warm_starts(sys, solved, m)
        pt = spectrum_point(
            sys, pot, alpha, m,
            seed=seed, restarts=restarts, tol=tol, max_iter=max_iter,
            warm=tuple(warm), tags=("bracket", m),
        )
        rows.append(pt)
        if pt.feasible:
            solved[m] = pt
    return rows
