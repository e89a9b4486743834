"""Block-Bernoulli measures, potentials, and the dimension functional.

A block measure of order m assigns weights q to the words D^m and extends to
the sequence space as the product law under which consecutive length-m blocks
are i.i.d.; it is a Bernoulli measure for the m-fold shift.  For such a
measure the four thermodynamic quantities are finite sums:

    h      = - sum_w q_w log q_w                (entropy against sigma^m)
    h_v    = - sum_v rho_v log rho_v            (row-word entropy; rho is the
                                                 image of q under row projection)
    lyap   = - sum_w q_w log a_w                (horizontal Lyapunov exponent)
    lyap_v = - sum_w q_w log b_w                (vertical Lyapunov exponent)

with a_w, b_w the contraction products along the word, and the dimension
functional

    dly = h/lyap + (1/lyap_v - 1/lyap) * h_v.

Everything is 0 log 0 = 0; weights are clamped at 1e-300 inside logarithms.
Dense storage covers |D|^m <= DENSE_GUARD words; beyond that only measures
with an explicit support list are representable.

Word encoding is big-endian: the first symbol is the most significant base-|D|
digit.  That makes prefix marginals plain reshapes and keeps cylinder-measure
code free of index juggling.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Optional, Sequence

import numpy as np

from .system import ENUM_GUARD, GuardExceeded, LGSystem

DENSE_GUARD = 10**5
WEIGHT_FLOOR = 1e-300

_DIGIT_KEY = re.compile(r"\((\d+),(\d+)\)")


class PotentialFormatError(ValueError):
    """Malformed or incomplete potential file."""


def _clamped_log(q: np.ndarray) -> np.ndarray:
    return np.log(np.maximum(q, WEIGHT_FLOOR))


@lru_cache(maxsize=64)
def block_space(sys: LGSystem, m: int) -> "BlockSpace":
    return BlockSpace(sys, m)


class BlockSpace:
    """Index arithmetic and cached per-word data for D^m."""

    def __init__(self, sys: LGSystem, m: int):
        if m < 1:
            raise ValueError(f"block length must be >= 1, got {m}")
        self.sys = sys
        self.m = m
        self.D = sys.n_digits
        self.p = sys.n_rows
        if self.D**m >= 2**62:
            raise GuardExceeded(f"word index space {self.D}^{m} overflows int64")
        self.n_words = self.D**m

    # positions are 0-based within the block throughout

    def extract(self, idx: np.ndarray, pos: int) -> np.ndarray:
        """Digit code at a position, for arbitrary word-index arrays."""
        return (idx // self.D ** (self.m - 1 - pos)) % self.D

    def encode(self, digits: np.ndarray) -> np.ndarray:
        """(k, m) digit matrix -> word indices."""
        idx = np.zeros(digits.shape[0], dtype=np.int64)
        for t in range(self.m):
            idx = idx * self.D + digits[:, t]
        return idx

    def decode(self, idx: np.ndarray) -> np.ndarray:
        out = np.empty((idx.size, self.m), dtype=np.int64)
        for t in range(self.m):
            out[:, t] = self.extract(idx, t)
        return out

    def _dense_ok(self):
        if self.n_words > DENSE_GUARD:
            raise GuardExceeded(
                f"{self.D}^{self.m} = {self.n_words} words exceed the dense "
                f"guard {DENSE_GUARD}; use an explicit support list"
            )

    @cached_property
    def all_words(self) -> np.ndarray:
        self._dense_ok()
        return np.arange(self.n_words, dtype=np.int64)

    def log_a_of(self, idx: np.ndarray) -> np.ndarray:
        out = np.zeros(idx.shape, dtype=float)
        for t in range(self.m):
            out += self.sys.log_a[self.extract(idx, t)]
        return out

    def log_b_of(self, idx: np.ndarray) -> np.ndarray:
        out = np.zeros(idx.shape, dtype=float)
        for t in range(self.m):
            out += self.sys.log_b[self.extract(idx, t)]
        return out

    def rowword_of(self, idx: np.ndarray) -> np.ndarray:
        out = np.zeros(idx.shape, dtype=np.int64)
        for t in range(self.m):
            out = out * self.p + self.sys.row_of[self.extract(idx, t)]
        return out

    @cached_property
    def log_a_word(self) -> np.ndarray:
        return self.log_a_of(self.all_words)

    @cached_property
    def log_b_word(self) -> np.ndarray:
        return self.log_b_of(self.all_words)

    @cached_property
    def rowword(self) -> np.ndarray:
        return self.rowword_of(self.all_words)

    @property
    def n_rowwords(self) -> int:
        return self.p**self.m

    @cached_property
    def row_groups(self):
        """(order, starts, group_ids): words sorted by row word, segment
        starts for reduceat, and the row-word id of each segment."""
        order = np.argsort(self.rowword, kind="stable")
        sorted_rw = self.rowword[order]
        starts = np.flatnonzero(
            np.r_[True, sorted_rw[1:] != sorted_rw[:-1]]
        )
        return order, starts, sorted_rw[starts]

    def label(self, idx: int) -> str:
        digs = self.decode(np.array([idx], dtype=np.int64))[0]
        return "".join(self.sys.label(int(k)) for k in digs)


@dataclass(frozen=True)
class BlockMeasure:
    """Probability weights on D^m; support=None means dense over all words."""

    sys: LGSystem
    m: int
    weights: np.ndarray
    support: Optional[np.ndarray] = None

    def __post_init__(self):
        space = block_space(self.sys, self.m)
        w = np.asarray(self.weights, dtype=float).copy()
        if self.support is None:
            space._dense_ok()
            if w.shape != (space.n_words,):
                raise ValueError(
                    f"dense weights must have length {space.n_words}, got {w.shape}"
                )
        else:
            sup = np.asarray(self.support, dtype=np.int64).copy()
            if sup.ndim != 1 or sup.shape != w.shape:
                raise ValueError("support and weights must be 1-d and aligned")
            if sup.size and (sup.min() < 0 or sup.max() >= space.n_words):
                raise ValueError("support word index out of range")
            order = np.argsort(sup, kind="stable")
            sup = sup[order]
            w = w[order]
            if sup.size > 1 and (np.diff(sup) == 0).any():
                raise ValueError("support contains duplicate words")
            sup.flags.writeable = False
            object.__setattr__(self, "support", sup)
        if w.size == 0:
            raise ValueError("empty weight vector")
        if w.min() < -1e-12:
            raise ValueError(f"negative weight {w.min()!r}")
        np.clip(w, 0.0, None, out=w)
        total = w.sum()
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {total!r}, not 1")
        w /= total
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    # -- constructors -------------------------------------------------------

    @staticmethod
    def dense(sys: LGSystem, m: int, weights) -> "BlockMeasure":
        return BlockMeasure(sys, m, np.asarray(weights, dtype=float), None)

    @staticmethod
    def uniform(sys: LGSystem, m: int = 1) -> "BlockMeasure":
        n = block_space(sys, m).n_words
        return BlockMeasure(sys, m, np.full(n, 1.0 / n), None)

    @staticmethod
    def bernoulli(sys: LGSystem, probs) -> "BlockMeasure":
        return BlockMeasure.dense(sys, 1, probs)

    @staticmethod
    def from_support(sys: LGSystem, m: int, words, weights) -> "BlockMeasure":
        space = block_space(sys, m)
        idx = np.asarray(
            [w if isinstance(w, (int, np.integer)) else space.encode(
                np.asarray([sys.word_indices(w)], dtype=np.int64))[0] for w in words],
            dtype=np.int64,
        )
        return BlockMeasure(sys, m, np.asarray(weights, dtype=float), idx)

    @staticmethod
    def degenerate(sys: LGSystem, word) -> "BlockMeasure":
        codes = sys.word_indices(word)
        space = block_space(sys, len(codes))
        idx = space.encode(codes.reshape(1, -1))
        return BlockMeasure(sys, len(codes), np.array([1.0]), idx)

    # -- views ---------------------------------------------------------------

    @property
    def space(self) -> BlockSpace:
        return block_space(self.sys, self.m)

    @property
    def is_dense(self) -> bool:
        return self.support is None

    @cached_property
    def words(self) -> np.ndarray:
        return self.space.all_words if self.is_dense else self.support

    @cached_property
    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(str(self.m).encode())
        h.update(self.words.tobytes())
        h.update(self.weights.tobytes())
        return h.hexdigest()

    def sample_words(self, rng: np.random.Generator, count: int) -> np.ndarray:
        picks = rng.choice(self.weights.size, size=count, p=self.weights)
        return self.words[picks]

    def decode_words(self, idx: np.ndarray) -> np.ndarray:
        return self.space.decode(idx)

    def range_marginal(self, lo: int, hi: int) -> np.ndarray:
        """Distribution of block positions [lo, hi) (0-based, hi <= m)."""
        if not (0 <= lo < hi <= self.m):
            raise ValueError(f"bad position range [{lo}, {hi})")
        D = self.space.D
        size = D ** (hi - lo)
        if size > ENUM_GUARD:
            raise GuardExceeded(f"marginal over {size} words exceeds {ENUM_GUARD}")
        if self.is_dense:
            cube = self.weights.reshape(D**lo, size, D ** (self.m - hi))
            return cube.sum(axis=(0, 2))
        key = (self.support // D ** (self.m - hi)) % size
        return np.bincount(key, weights=self.weights, minlength=size)

    @cached_property
    def row_marginal(self) -> np.ndarray:
        """Distribution rho over row words ({1..p}^m, big-endian index)."""
        space = self.space
        if space.n_rowwords > ENUM_GUARD:
            raise GuardExceeded("row-word space exceeds enumeration guard")
        rw = space.rowword if self.is_dense else space.rowword_of(self.support)
        return np.bincount(rw, weights=self.weights, minlength=space.n_rowwords)


@dataclass(frozen=True)
class ThermoReport:
    """Entropies, Lyapunov exponents, and dly of one block measure.

    Quantities are against sigma^m unless produced by average_lift, which
    rescales to the sigma-invariant average measure.
    """

    m: int
    h: float
    h_v: float
    lyap: float
    lyap_v: float
    dly: float


def _dly_from_parts(h: float, h_v: float, lyap: float, lyap_v: float) -> float:
    return h / lyap + (1.0 / lyap_v - 1.0 / lyap) * h_v


def thermo(measure: BlockMeasure) -> ThermoReport:
    """The four thermodynamic sums and dly for a block measure."""
    space = measure.space
    q = measure.weights
    logq = _clamped_log(q)
    h = float(-(q * logq).sum()) + 0.0
    rho = measure.row_marginal
    h_v = float(-(rho * _clamped_log(rho)).sum()) + 0.0
    if measure.is_dense:
        la, lb = space.log_a_word, space.log_b_word
    else:
        la, lb = space.log_a_of(measure.support), space.log_b_of(measure.support)
    lyap = float(-(q * la).sum())
    lyap_v = float(-(q * lb).sum())
    return ThermoReport(measure.m, h, h_v, lyap, lyap_v,
                        _dly_from_parts(h, h_v, lyap, lyap_v))


def average_lift(measure: BlockMeasure) -> ThermoReport:
    """Report for the sigma-invariant average of the block measure.

    The average of nu over the m shifts of the block grid has entropy and
    Lyapunov exponents exactly 1/m times those of nu against sigma^m, and the
    same dly; no new computation is needed beyond the rescaling.
    """
    t = thermo(measure)
    m = measure.m
    return ThermoReport(m, t.h / m, t.h_v / m, t.lyap / m, t.lyap_v / m, t.dly)


def product_lift(measure: BlockMeasure, k: int) -> BlockMeasure:
    """The k-fold product of a dense block measure: level m -> level k*m."""
    if not measure.is_dense:
        raise ValueError("product_lift needs a dense measure")
    if k < 1:
        raise ValueError("k must be >= 1")
    w = measure.weights
    for _ in range(k - 1):
        w = np.kron(w, measure.weights)
    return BlockMeasure.dense(measure.sys, measure.m * k, w)


# ---------------------------------------------------------------------------
# potentials


@dataclass(frozen=True)
class Potential:
    """Locally constant potential: one value per word in D^order."""

    sys: LGSystem
    order: int
    values: np.ndarray

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("potential order must be >= 1")
        n = self.sys.n_digits**self.order
        if n > 10**6:
            raise GuardExceeded(f"potential table {n} exceeds 1e6 entries")
        v = np.asarray(self.values, dtype=float).copy()
        if v.shape != (n,):
            raise ValueError(f"expected {n} values, got shape {v.shape}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def space(self) -> BlockSpace:
        return block_space(self.sys, self.order)

    def osc(self) -> float:
        return float(self.values.max() - self.values.min())

    @cached_property
    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(str(self.order).encode())
        h.update(self.values.tobytes())
        return h.hexdigest()

    def to_json_dict(self) -> dict:
        space = self.space
        return {
            "order": self.order,
            "values": {space.label(i): float(v) for i, v in enumerate(self.values)},
        }


def parse_potential(text: str, sys: LGSystem) -> Potential:
    """Parse {"order": r, "values": {"(i,j)(i,j)...": v}}; the table must be total."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise PotentialFormatError(f"potential is not valid JSON: {e}") from None
    if not isinstance(data, dict) or "order" not in data or "values" not in data:
        raise PotentialFormatError("potential needs 'order' and 'values'")
    order = data["order"]
    if not isinstance(order, int) or order < 1:
        raise PotentialFormatError(f"bad order {order!r}")
    space = block_space(sys, order)
    vals = np.zeros(space.n_words)
    seen = np.zeros(space.n_words, dtype=bool)
    table = data["values"]
    if not isinstance(table, dict):
        raise PotentialFormatError("'values' must be an object")
    for key, raw in table.items():
        pairs = _DIGIT_KEY.findall(key)
        if len(pairs) != order or "".join(f"({i},{j})" for i, j in pairs) != key:
            raise PotentialFormatError(f"key {key!r} is not {order} digit pairs")
        try:
            codes = np.array(
                [[sys.digit_index(int(i), int(j)) for i, j in pairs]], dtype=np.int64
            )
        except KeyError as e:
            raise PotentialFormatError(f"key {key!r}: {e.args[0]}") from None
        idx = int(space.encode(codes)[0])
        if seen[idx]:
            raise PotentialFormatError(f"duplicate key {key!r}")
        seen[idx] = True
        try:
            vals[idx] = float(raw)
        except (TypeError, ValueError):
            raise PotentialFormatError(f"key {key!r}: bad value {raw!r}") from None
    if not seen.all():
        missing = space.label(int(np.flatnonzero(~seen)[0]))
        raise PotentialFormatError(
            f"potential must be total on D^{order}; missing {missing}"
        )
    return Potential(sys, order, vals)


def load_potential(path, sys: LGSystem) -> Potential:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_potential(fh.read(), sys)


# ---------------------------------------------------------------------------
# integrals of potentials against block measures


def window_distribution(measure: BlockMeasure, offset: int, length: int) -> np.ndarray:
    """Distribution of length consecutive symbols starting after `offset`.

    Under the block product law the window splits at block boundaries into
    independent segments, so the joint law is a Kronecker product of range
    marginals.  Only offset mod m matters (the law is sigma^m invariant).
    """
    m = measure.m
    D = measure.space.D
    if D**length > ENUM_GUARD:
        raise GuardExceeded(f"window of {length} symbols exceeds {ENUM_GUARD} words")
    s = offset % m
    end = s + length
    parts = []
    for t in range(s // m, -(-end // m)):
        lo = max(t * m, s) - t * m
        hi = min((t + 1) * m, end) - t * m
        parts.append(measure.range_marginal(lo, hi))
    joint = parts[0]
    for p in parts[1:]:
        joint = np.kron(joint, p)
    return joint


def integrate(measure: BlockMeasure, pot: Potential, shift: int = 0) -> float:
    """integral of pot o sigma^shift against the block product law."""
    if pot.sys is not measure.sys and pot.sys != measure.sys:
        raise ValueError("potential and measure live on different systems")
    if shift < 0:
        raise ValueError("shift must be >= 0")
    dist = window_distribution(measure, shift, pot.order)
    return float(dist @ pot.values)


def integrate_avg(measure: BlockMeasure, pot: Potential) -> float:
    """integral of A_m(pot) = (1/m) sum_{l<m} pot o sigma^l."""
    m = measure.m
    return math.fsum(integrate(measure, pot, l) for l in range(m)) / m


def var_avg(sys: LGSystem, pot: Potential, m: int) -> float:
    """Exact oscillation of A_m(pot) over m-cylinders.

    A_m(pot) is locally constant of order m + r - 1, so the value is a finite
    max over D^(m-1+r) grouped by the first m symbols, computed in chunks.
    For r = 1 the average is itself of order m and the oscillation is zero.
    """
    r = pot.order
    D = sys.n_digits
    if m < 1:
        raise ValueError("m must be >= 1")
    if r == 1:
        return 0.0
    total = D ** (m - 1 + r)
    if total > ENUM_GUARD:
        raise GuardExceeded(
            f"var_avg enumeration {D}^{m - 1 + r} exceeds {ENUM_GUARD}"
        )
    group = D ** (r - 1)
    chunk_groups = max(1, (1 << 20) // group)
    best = 0.0
    vals = pot.values
    for g0 in range(0, D**m, chunk_groups):
        g1 = min(g0 + chunk_groups, D**m)
        idx = np.arange(g0 * group, g1 * group, dtype=np.int64)
        acc = np.zeros(idx.size)
        for l in range(m):
            sub = (idx // D ** (m - 1 - l)) % (D**r)
            acc += vals[sub]
        acc /= m
        table = acc.reshape(g1 - g0, group)
        spread = float((table.max(axis=1) - table.min(axis=1)).max())
        if spread > best:
            best = spread
    return best


# ---------------------------------------------------------------------------
# dense objective/constraint models for the optimizer

# The optimizer works on batches Q of dense weight rows (R, n_words).  The
# helpers below give values and coordinate gradients of dly and of
# integrate_avg as functions of the raw (unnormalized near the simplex)
# weights; formulas stay evaluable slightly off the simplex, which is what
# central finite differences probe.


def dly_parts_batch(space: BlockSpace, Q: np.ndarray):
    logq = _clamped_log(Q)
    h = -(Q * logq).sum(axis=1) + 0.0  # +0.0 kills -0.0 at point masses
    order, starts, group_ids = space.row_groups
    seg = np.add.reduceat(Q[:, order], starts, axis=1)
    rho = np.zeros((Q.shape[0], space.n_rowwords))
    rho[:, group_ids] = seg
    logrho = _clamped_log(rho)
    h_v = -(rho * logrho).sum(axis=1) + 0.0
    lyap = -(Q @ space.log_a_word)
    lyap_v = -(Q @ space.log_b_word)
    return h, h_v, lyap, lyap_v, rho, logq, logrho


def dly_batch(space: BlockSpace, Q: np.ndarray) -> np.ndarray:
    h, h_v, lyap, lyap_v, *_ = dly_parts_batch(space, Q)
    return h / lyap + (1.0 / lyap_v - 1.0 / lyap) * h_v


def dly_grad_batch(space: BlockSpace, Q: np.ndarray):
    """Values and coordinate gradients of dly on a batch of weight rows."""
    h, h_v, lyap, lyap_v, rho, logq, logrho = dly_parts_batch(space, Q)
    vals = h / lyap + (1.0 / lyap_v - 1.0 / lyap) * h_v
    La = -space.log_a_word  # positive
    Lb = -space.log_b_word
    logrho_w = logrho[:, space.rowword]
    S = (h - h_v)[:, None]
    P = logrho_w - logq
    lam = lyap[:, None]
    lam_v = lyap_v[:, None]
    grad = (
        P / lam
        - S * La[None, :] / lam**2
        - (1.0 + logrho_w) / lam_v
        - h_v[:, None] * Lb[None, :] / lam_v**2
    )
    return vals, grad


def dly_hessian(space: BlockSpace, q: np.ndarray) -> np.ndarray:
    """Dense Hessian of dly at one weight row (support must be positive)."""
    n = q.size
    if n > 2048:
        raise GuardExceeded("dly_hessian is dense; limited to 2048 words")
    Q = q.reshape(1, -1)
    h, h_v, lyap, lyap_v, rho, logq, logrho = dly_parts_batch(space, Q)
    h, h_v, lyap, lyap_v = float(h[0]), float(h_v[0]), float(lyap[0]), float(lyap_v[0])
    rho = rho[0]
    La = -space.log_a_word
    Lb = -space.log_b_word
    rw = space.rowword
    same_row = rw[:, None] == rw[None, :]
    C = np.where(same_row, 1.0 / np.maximum(rho[rw], WEIGHT_FLOOR)[None, :], 0.0)
    P = (logrho[0][rw] - logq[0])
    one_lr = 1.0 + logrho[0][rw]
    S = h - h_v
    H = (
        (C - np.diag(1.0 / np.maximum(q, WEIGHT_FLOOR))) / lyap
        - (np.outer(P, La) + np.outer(La, P)) / lyap**2
        + 2.0 * S * np.outer(La, La) / lyap**3
        - C / lyap_v
        + (np.outer(one_lr, Lb) + np.outer(Lb, one_lr)) / lyap_v**2
        + 2.0 * h_v * np.outer(Lb, Lb) / lyap_v**3
    )
    return H


class AvgPotentialModel:
    """integrate_avg(nu, pot) as a polynomial in dense block weights.

    Each shift l < m reads a window of r symbols; windows inside one block
    contribute linearly, windows straddling K blocks contribute a degree-K
    multilinear term built from independent segment marginals.  value/grad
    work for any degree; the explicit Hessian is assembled only for
    degree <= 2 and modest dimensions (enough for every polish path).
    """

    def __init__(self, sys: LGSystem, m: int, pot: Potential):
        self.sys = sys
        self.m = m
        self.pot = pot
        self.space = block_space(sys, m)
        D = self.space.D
        n = self.space.n_words
        r = pot.order
        self.lin = np.zeros(n)
        self.multi = []  # list of (keys per segment, phi tensor reshaped)
        self.degree = 1
        words = self.space.all_words
        for l in range(m):
            end = l + r
            segs = []
            for t in range(-(-end // m)):
                lo = max(t * m, l) - t * m
                hi = min((t + 1) * m, end) - t * m
                segs.append((lo, hi))
            if len(segs) == 1:
                lo, hi = segs[0]
                sub = (words // D ** (m - hi)) % D ** (hi - lo)
                self.lin += pot.values[sub] / m
            else:
                keys = []
                shapes = []
                for lo, hi in segs:
                    keys.append(((words // D ** (m - hi)) % D ** (hi - lo)))
                    shapes.append(D ** (hi - lo))
                phi = pot.values.reshape(shapes) / m
                self.multi.append((segs, keys, phi))
                self.degree = max(self.degree, len(segs))
        # degree 2 collapses to lin + a constant quadratic form; precompute
        # the symmetric matrix so value/grad are single matmuls
        self._quad = None
        if self.degree == 2 and self.multi and n <= 2048:
            H = np.zeros((n, n))
            for _segs, keys, phi in self.multi:
                B = phi[np.ix_(keys[0], keys[1])]
                H += B + B.T
            self._quad = H

    def _marginals(self, Q: np.ndarray, segs) -> list[np.ndarray]:
        D = self.space.D
        m = self.m
        out = []
        for lo, hi in segs:
            cube = Q.reshape(Q.shape[0], D**lo, D ** (hi - lo), D ** (m - hi))
            out.append(cube.sum(axis=(1, 3)))
        return out

    def value(self, Q: np.ndarray) -> np.ndarray:
        if self._quad is not None:
            return Q @ self.lin + 0.5 * np.einsum("ri,ri->r", Q @ self._quad, Q)
        vals = Q @ self.lin
        for segs, _keys, phi in self.multi:
            margs = self._marginals(Q, segs)
            X = np.einsum("rd,d...->r...", margs[0], phi)
            for M in margs[1:]:
                X = np.einsum("rd,rd...->r...", M, X)
            vals += X.reshape(Q.shape[0])
        return vals

    def grad(self, Q: np.ndarray) -> np.ndarray:
        if self._quad is not None:
            return self.lin[None, :] + Q @ self._quad
        g = np.broadcast_to(self.lin, Q.shape).copy()
        for segs, keys, phi in self.multi:
            margs = self._marginals(Q, segs)
            K = len(segs)
            for t in range(K):
                # contract phi against every segment marginal except t
                X = np.broadcast_to(phi, (Q.shape[0],) + phi.shape)
                for t2 in range(K - 1, -1, -1):
                    if t2 == t:
                        continue
                    X = np.einsum("rd,r...d->r...", margs[t2], np.moveaxis(X, t2 + 1, -1))
                # X now has shape (R, D^{s_t}); scatter to words via key
                g += X[:, keys[t]]
        return g

    def hessian(self, n_guard: int = 2048) -> Optional[np.ndarray]:
        """Constant Hessian matrix, or None when degree != 2 or too large."""
        if self.degree > 2 or not self.multi:
            return None if self.degree > 2 else np.zeros((0, 0))
        if self._quad is not None and self.space.n_words <= n_guard:
            return self._quad
        return None

    def vertex_values(self) -> np.ndarray:
        """A_m(pot) on the periodic extension of each word (F at the vertices)."""
        D = self.space.D
        m, r = self.m, self.pot.order
        words = self.space.all_words
        digs = [self.space.extract(words, t) for t in range(m)]
        vals = np.zeros(words.size)
        for l in range(m):
            key = np.zeros(words.size, dtype=np.int64)
            for t in range(r):
                key = key * D + digs[(l + t) % m]
            vals += self.pot.values[key]
        return vals / m
