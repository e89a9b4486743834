"""Symbolic orbits, cutting indices, approximate squares, and point projection.

An orbit is a finite word over the digit set, read left to right.  The three
quantities computed here track how horizontal and vertical contraction rates
interleave along an orbit:

  * cutting index L_n: the first l with  prod_{v<=l} a  <=  prod_{v<=n} b;
    since a_ij <= b_i this always lands at L_n <= n, and the width/height
    ratio of the resulting box satisfies  a_min < ratio <= 1.
  * approximate square B_n: the horizontal cylinder of length L_n intersected
    with the vertical row cylinder on positions L_n+1 .. n; its geometric
    shadow Delta_n is the product of the two composed intervals.
  * return gap R_n: how far past n one must read before every digit has
    reappeared.

All products are accumulated in log space; linear-space rectangles underflow
gracefully to zero width at extreme depth while the log fields stay exact.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Optional

import numpy as np

from .system import IDENTITY, AffinePair, LGSystem


class PrefixTooShort(ValueError):
    """The orbit does not extend far enough for the requested index."""

    def __init__(self, msg: str, deficit: int):
        super().__init__(msg)
        self.deficit = deficit


class DigitNeverRecurs(ValueError):
    """Some digit does not occur again within the available prefix."""


class OrbitFormatError(ValueError):
    """Malformed orbit file."""


@dataclass(frozen=True)
class SymbolicOrbit:
    sys: LGSystem
    word: np.ndarray  # flat digit codes, read-only
    seed: Optional[int] = None

    def __post_init__(self):
        w = np.asarray(self.word, dtype=np.int64)
        w.flags.writeable = False
        object.__setattr__(self, "word", w)

    def __len__(self) -> int:
        return int(self.word.size)

    def labels(self) -> Iterator[str]:
        for k in self.word:
            yield self.sys.label(int(k))

    @cached_property
    def _cum_log_a(self) -> np.ndarray:
        out = np.zeros(len(self) + 1)
        np.cumsum(self.sys.log_a[self.word], out=out[1:])
        return out

    @cached_property
    def _cum_log_b(self) -> np.ndarray:
        out = np.zeros(len(self) + 1)
        np.cumsum(self.sys.log_b[self.word], out=out[1:])
        return out

    @cached_property
    def rows(self) -> np.ndarray:
        return self.sys.row_of[self.word]


def make_orbit(sys: LGSystem, word, seed: Optional[int] = None) -> SymbolicOrbit:
    return SymbolicOrbit(sys, sys.word_indices(word), seed)


def cutting_indices(orbit: SymbolicOrbit, n_max: int) -> np.ndarray:
    """L_n for n = 1..n_max as an int array (vectorized searchsorted)."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if n_max > len(orbit):
        raise PrefixTooShort(
            f"orbit has {len(orbit)} symbols, need {n_max}", n_max - len(orbit)
        )
    neg_a = -orbit._cum_log_a[1 : n_max + 1]  # ascending
    targets = -orbit._cum_log_b[1 : n_max + 1]
    ls = np.searchsorted(neg_a, targets, side="left") + 1
    # a <= b makes L_n <= n mathematically; clamp the float-rounding edge
    return np.minimum(ls, np.arange(1, n_max + 1))


def cutting_index(orbit: SymbolicOrbit, n: int) -> int:
    """min{l >= 1 : prod_{v<=l} a_w(v) <= prod_{v<=n} b_i(v)}."""
    return int(cutting_indices(orbit, n)[n - 1])


@dataclass(frozen=True)
class ApproxSquare:
    """Symbolic approximate square B_n with its geometric shadow Delta_n."""

    n: int
    cut: int  # L_n
    word_h: np.ndarray  # horizontal word, positions 1..L_n
    rows_v: np.ndarray  # vertical row word, positions L_n+1..n
    rect: tuple[float, float, float, float]  # Delta_n, may underflow at depth
    log_width: float
    log_height: float


def approx_square(orbit: SymbolicOrbit, n: int) -> ApproxSquare:
    """The approximate square at depth n along the orbit.

    The horizontal side is the length-L_n cylinder of the orbit; the vertical
    side is the full row word up to n.  log_width and log_height are exact in
    log space; rect is the linear-space composition.
    """
    cut = cutting_index(orbit, n)
    sys = orbit.sys
    hx, hy = IDENTITY, IDENTITY
    for k in orbit.word[:cut]:
        hx = hx.compose(AffinePair(float(sys.a[k]), float(sys.c[k])))
    for i in orbit.rows[:n]:
        hy = hy.compose(AffinePair(float(sys.b_rows[i]), float(sys.d_rows[i])))
    return ApproxSquare(
        n=n,
        cut=cut,
        word_h=orbit.word[:cut],
        rows_v=orbit.rows[cut:n],
        rect=(hx.c, hy.c, hx.a, hy.a),
        log_width=float(orbit._cum_log_a[cut]),
        log_height=float(orbit._cum_log_b[n]),
    )


def return_gaps(orbit: SymbolicOrbit, n_max: int) -> np.ndarray:
    """R_n for n = 1..n_max; R_n = max over digits of (first occurrence
    past n) - n.

    Raises:
        DigitNeverRecurs: if some digit is missing from positions n+1..N for
            an n in range (named in the message).
    """
    sys = orbit.sys
    N = len(orbit)
    if n_max >= N:
        raise PrefixTooShort(
            f"return gaps need positions past n; have {N}, asked n_max={n_max}",
            n_max - N + 1,
        )
    nxt = np.full(sys.n_digits, -1, dtype=np.int64)
    out = np.empty(n_max, dtype=np.int64)
    # sweep right to left; position n+1 becomes visible when we stand at n
    for n in range(N - 1, 0, -1):
        nxt[orbit.word[n]] = n + 1  # word index n is position n+1
        if n <= n_max:
            m = nxt.min()
            if m < 0:
                missing = sys.label(int(np.argmin(nxt)))
                raise DigitNeverRecurs(
                    f"digit {missing} never occurs after position {n} "
                    f"within the {N}-symbol prefix"
                )
            out[n - 1] = nxt.max() - n
    return out


def return_gap(orbit: SymbolicOrbit, n: int) -> int:
    """max over digits d of  min{l > n : w_l = d} - n  (forward scan)."""
    sys = orbit.sys
    N = len(orbit)
    if n < 1 or n >= N:
        raise PrefixTooShort(f"need 1 <= n < {N}, got {n}", max(1, n - N + 1))
    seen = 0
    last = n
    want = sys.n_digits
    marks = np.zeros(want, dtype=bool)
    for pos in range(n + 1, N + 1):
        d = int(orbit.word[pos - 1])
        if not marks[d]:
            marks[d] = True
            seen += 1
            last = pos
            if seen == want:
                return last - n
    missing = sys.label(int(np.argmin(marks)))
    raise DigitNeverRecurs(
        f"digit {missing} never occurs after position {n} within the prefix"
    )


@dataclass(frozen=True)
class FrequencyVector:
    counts: np.ndarray
    n: int

    @property
    def fractions(self) -> np.ndarray:
        return self.counts / self.n


def frequency(orbit: SymbolicOrbit, n: int) -> FrequencyVector:
    """Digit occurrence counts over the first n symbols."""
    if n < 1 or n > len(orbit):
        raise PrefixTooShort(f"need 1 <= n <= {len(orbit)}", max(1, n - len(orbit)))
    counts = np.bincount(orbit.word[:n], minlength=orbit.sys.n_digits)
    return FrequencyVector(counts, n)


def sample_orbit(measure, length: int, seed: int) -> SymbolicOrbit:
    """Draw `length` symbols as i.i.d. blocks from a block measure.

    ceil(length/m) blocks are drawn and the concatenation truncated.  The
    stream is PCG64 seeded through SeedSequence, so a (measure, length, seed)
    triple always reproduces the same orbit.
    """
    from .seeds import stream

    if length < 1:
        raise ValueError("length must be >= 1")
    rng = stream(seed, "orbit")
    m = measure.m
    blocks = -(-length // m)
    words = measure.sample_words(rng, blocks)
    digits = measure.decode_words(words).reshape(-1)[:length]
    return SymbolicOrbit(measure.sys, digits, seed)


def project_point(orbit: SymbolicOrbit) -> tuple[tuple[float, float], float]:
    """Map the orbit to its point in the square, with an error bound.

    Returns ((x, y), err) where err bounds the max-norm distance to the true
    projection (the height of the final rectangle, computed in log space).
    The linear fold is run to the end: the translation part converges, the
    scale part may underflow to zero harmlessly.
    """
    sys = orbit.sys
    N = len(orbit)
    if N * np.log2(sys.b_max) > -60:
        warnings.warn(
            f"orbit depth {N} resolves the point only to b_max^{N} > 2^-60",
            stacklevel=2,
        )
    hx, hy = IDENTITY, IDENTITY
    for k in orbit.word:
        i = int(sys.row_of[k])
        hx = hx.compose(AffinePair(float(sys.a[k]), float(sys.c[k])))
        hy = hy.compose(AffinePair(float(sys.b_rows[i]), float(sys.d_rows[i])))
    x = hx.c + 0.5 * hx.a
    y = hy.c + 0.5 * hy.a
    err = float(np.exp(orbit._cum_log_b[N]))
    return ((x, y), err)


def write_orbit(path, orbit: SymbolicOrbit, meta: Optional[dict] = None) -> None:
    """One "(i,j)" per line; header comments carry seed and system hash."""
    lines = [f"# system=sha256:{orbit.sys.content_hash}"]
    if orbit.seed is not None:
        lines.append(f"# seed={orbit.seed}")
    for k, v in (meta or {}).items():
        lines.append(f"# {k}={v}")
    lines.extend(orbit.sys.label(int(k)) for k in orbit.word)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_orbit(path, sys: LGSystem) -> SymbolicOrbit:
    codes = []
    seed = None
    with open(path, "r", encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line[1:].strip().startswith("seed="):
                    try:
                        seed = int(line.split("=", 1)[1])
                    except ValueError:
                        pass
                continue
            if not (line.startswith("(") and line.endswith(")")):
                raise OrbitFormatError(f"{path}:{ln}: expected \"(i,j)\", got {line!r}")
            try:
                i_s, j_s = line[1:-1].split(",")
                i, j = int(i_s), int(j_s)
            except ValueError:
                raise OrbitFormatError(f"{path}:{ln}: cannot parse digit {line!r}") from None
            codes.append(sys.digit_index(i, j))
    if not codes:
        raise OrbitFormatError(f"{path}: empty orbit")
    return SymbolicOrbit(sys, np.asarray(codes, dtype=np.int64), seed)
