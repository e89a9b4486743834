"""Lalley-Gatzouras systems: validated planar affine IFS with row structure.

A system is a finite family of maps

    S_ij(x, y) = (a_ij * x + c_ij,  b_i * y + d_i),    1 <= i <= p, 1 <= j <= m_i,

acting on the unit square.  Rows are indexed by i and share the vertical data
(b_i, d_i); within row i the columns j carry the horizontal data (a_ij, c_ij).
Admissibility:

  * 0 < a_ij <= b_i < 1 for every cell (horizontal contraction at least as
    strong as vertical),
  * rows stacked without interior overlap: 0 <= d_1 <= ... <= d_p < 1,
    d_{i+1} - d_i >= b_i, and b_p + d_p <= 1,
  * within each row, columns ordered without interior overlap:
    0 <= c_i1 <= ... <= c_im < 1, c_i(j+1) - c_ij >= a_ij, a_im + c_im <= 1.

Touching boundaries are allowed; `LGSystem.has_disjoint_closure` tells the two
cases apart.  All comparisons in `validate` carry a slack of `SLACK` toward
acceptance, so systems defined with exact decimal data survive a round trip
through floating point.

Digits are labelled (i, j) with 1-based indices and flattened row-major to
0-based integer codes used everywhere downstream.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Iterable, Sequence

import numpy as np

# Slack applied toward acceptance in every validation comparison.
SLACK = 1e-12

# Enumeration paths refuse to expand more than this many words.
ENUM_GUARD = 10**7

# Linear-space rectangle composition is refused below this scale; log-space
# quantities remain available at any depth.
UNDERFLOW_FLOOR = 1e-300


class SystemValidationError(ValueError):
    """Raised by validate(); the message names the first violated inequality."""


class GuardExceeded(RuntimeError):
    """Raised when a computation would exceed a documented enumeration guard."""


@dataclass(frozen=True)
class AffinePair:
    """One-dimensional orientation-preserving contraction x -> a*x + c."""

    a: float
    c: float

    def compose(self, other: "AffinePair") -> "AffinePair":
        # self o other; fold words left to right so the first symbol is the
        # outermost map.  This fixed order makes repeated compositions
        # bit-identical across call sites.
        return AffinePair(self.a * other.a, self.a * other.c + self.c)

    def interval(self) -> tuple[float, float]:
        return (self.c, self.c + self.a)


IDENTITY = AffinePair(1.0, 0.0)


@dataclass(frozen=True)
class Row:
    b: float
    d: float
    cols: tuple[AffinePair, ...]


@dataclass(frozen=True)
class LGSystem:
    """Validated system; construct through validate() or parse_system()."""

    rows: tuple[Row, ...]

    # -- shape ------------------------------------------------------------

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @cached_property
    def row_sizes(self) -> tuple[int, ...]:
        return tuple(len(r.cols) for r in self.rows)

    @cached_property
    def n_digits(self) -> int:
        return sum(self.row_sizes)

    @cached_property
    def digits(self) -> tuple[tuple[int, int], ...]:
        """(i, j) labels, 1-based, in flattened row-major order."""
        out = []
        for i, r in enumerate(self.rows, start=1):
            out.extend((i, j) for j in range(1, len(r.cols) + 1))
        return tuple(out)

    def digit_index(self, i: int, j: int) -> int:
        if not (1 <= i <= self.n_rows and 1 <= j <= self.row_sizes[i - 1]):
            raise KeyError(f"no digit ({i},{j}) in this system")
        return sum(self.row_sizes[: i - 1]) + (j - 1)

    def label(self, k: int) -> str:
        i, j = self.digits[k]
        return f"({i},{j})"

    # -- flattened numeric views (read-only) -------------------------------

    @cached_property
    def a(self) -> np.ndarray:
        v = np.array([col.a for r in self.rows for col in r.cols], dtype=float)
        v.flags.writeable = False
        return v

    @cached_property
    def c(self) -> np.ndarray:
        v = np.array([col.c for r in self.rows for col in r.cols], dtype=float)
        v.flags.writeable = False
        return v

    @cached_property
    def row_of(self) -> np.ndarray:
        v = np.array(
            [i for i, r in enumerate(self.rows) for _ in r.cols], dtype=np.int64
        )
        v.flags.writeable = False
        return v

    @cached_property
    def b_rows(self) -> np.ndarray:
        v = np.array([r.b for r in self.rows], dtype=float)
        v.flags.writeable = False
        return v

    @cached_property
    def d_rows(self) -> np.ndarray:
        v = np.array([r.d for r in self.rows], dtype=float)
        v.flags.writeable = False
        return v

    @cached_property
    def b(self) -> np.ndarray:
        """Vertical contraction per digit (the row's b repeated)."""
        v = self.b_rows[self.row_of]
        v.flags.writeable = False
        return v

    @cached_property
    def log_a(self) -> np.ndarray:
        v = np.log(self.a)
        v.flags.writeable = False
        return v

    @cached_property
    def log_b(self) -> np.ndarray:
        v = np.log(self.b)
        v.flags.writeable = False
        return v

    @property
    def a_min(self) -> float:
        return float(self.a.min())

    @property
    def b_max(self) -> float:
        return float(self.b_rows.max())

    # -- structural queries -------------------------------------------------

    @cached_property
    def two_dimensional(self) -> bool:
        """At least two rows and at least one row with two columns."""
        return self.n_rows >= 2 and max(self.row_sizes) >= 2

    @cached_property
    def has_disjoint_closure(self) -> bool:
        """True when the closed level-1 rectangles are pairwise disjoint."""
        rects = []
        for r in self.rows:
            for col in r.cols:
                rects.append((col.c, col.c + col.a, r.d, r.d + r.b))
        for s in range(len(rects)):
            for t in range(s + 1, len(rects)):
                x0, x1, y0, y1 = rects[s]
                u0, u1, v0, v1 = rects[t]
                if x0 <= u1 and u0 <= x1 and y0 <= v1 and v0 <= y1:
                    return False
        return True

    # -- serialization -------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "rows": [
                {
                    "b": r.b,
                    "d": r.d,
                    "cols": [{"a": col.a, "c": col.c} for col in r.cols],
                }
                for r in self.rows
            ]
        }

    @cached_property
    def content_hash(self) -> str:
        """sha256 of the canonical JSON form, used in output headers."""
        blob = json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def word_indices(self, word: Sequence) -> np.ndarray:
        """Coerce a word of (i, j) labels or integer codes to an int array."""
        if isinstance(word, np.ndarray) and word.dtype.kind in "iu":
            arr = word.astype(np.int64, copy=False)
        else:
            items = list(word)
            if items and isinstance(items[0], tuple):
                arr = np.array([self.digit_index(i, j) for i, j in items], np.int64)
            else:
                arr = np.asarray(items, dtype=np.int64)
        if arr.size and (arr.min() < 0 or arr.max() >= self.n_digits):
            raise KeyError("digit code out of range")
        return arr


def _num(x, where: str) -> float:
    """Accept IEEE doubles or decimal strings."""
    if isinstance(x, bool) or not isinstance(x, (int, float, str)):
        raise SystemValidationError(f"{where}: expected a number, got {x!r}")
    try:
        return float(x)
    except ValueError:
        raise SystemValidationError(f"{where}: cannot parse number {x!r}") from None


def validate(data: dict) -> LGSystem:
    """Build an LGSystem from a parsed JSON dict, checking every inequality.

    Args:
        data: {"rows": [{"b": r, "d": r, "cols": [{"a": r, "c": r}, ...]}, ...]}
            with numbers given as IEEE doubles or decimal strings.

    Returns:
        The validated system.

    Raises:
        SystemValidationError: naming the first violated inequality.  All
            comparisons carry SLACK toward acceptance.
    """
    if not isinstance(data, dict) or "rows" not in data:
        raise SystemValidationError("missing 'rows' key")
    raw_rows = data["rows"]
    if not isinstance(raw_rows, list) or not raw_rows:
        raise SystemValidationError("'rows' must be a non-empty list")

    rows: list[Row] = []
    for i, rr in enumerate(raw_rows, start=1):
        if not isinstance(rr, dict):
            raise SystemValidationError(f"row {i}: expected an object")
        b = _num(rr.get("b"), f"row {i}: b")
        d = _num(rr.get("d"), f"row {i}: d")
        raw_cols = rr.get("cols")
        if not isinstance(raw_cols, list) or not raw_cols:
            raise SystemValidationError(f"row {i}: 'cols' must be a non-empty list")
        if not (b > 0.0):
            raise SystemValidationError(f"row {i}: b > 0 violated (b={b!r})")
        if not (b < 1.0):
            raise SystemValidationError(f"row {i}: b < 1 violated (b={b!r})")
        if not (d >= -SLACK):
            raise SystemValidationError(f"row {i}: d >= 0 violated (d={d!r})")
        if not (d < 1.0):
            raise SystemValidationError(f"row {i}: d < 1 violated (d={d!r})")
        cols: list[AffinePair] = []
        for j, cc in enumerate(raw_cols, start=1):
            if not isinstance(cc, dict):
                raise SystemValidationError(f"digit ({i},{j}): expected an object")
            a = _num(cc.get("a"), f"digit ({i},{j}): a")
            c = _num(cc.get("c"), f"digit ({i},{j}): c")
            if not (a > 0.0):
                raise SystemValidationError(f"digit ({i},{j}): a > 0 violated (a={a!r})")
            if not (a <= b + SLACK):
                raise SystemValidationError(
                    f"digit ({i},{j}): a <= b violated (a={a!r}, b={b!r})"
                )
            if not (c >= -SLACK):
                raise SystemValidationError(f"digit ({i},{j}): c >= 0 violated (c={c!r})")
            if not (c < 1.0):
                raise SystemValidationError(f"digit ({i},{j}): c < 1 violated (c={c!r})")
            cols.append(AffinePair(a, c))
        for j in range(len(cols) - 1):
            gap = cols[j + 1].c - cols[j].c
            if not (gap >= cols[j].a - SLACK):
                raise SystemValidationError(
                    f"row {i}: c_{i}{j + 2} - c_{i}{j + 1} >= a_{i}{j + 1} violated "
                    f"(gap={gap!r}, a={cols[j].a!r})"
                )
        last = cols[-1]
        if not (last.a + last.c <= 1.0 + SLACK):
            raise SystemValidationError(
                f"row {i}: a_im + c_im <= 1 violated (a+c={last.a + last.c!r})"
            )
        rows.append(Row(b, d, tuple(cols)))

    for i in range(len(rows) - 1):
        gap = rows[i + 1].d - rows[i].d
        if not (gap >= rows[i].b - SLACK):
            raise SystemValidationError(
                f"rows: d_{i + 2} - d_{i + 1} >= b_{i + 1} violated "
                f"(gap={gap!r}, b={rows[i].b!r})"
            )
    if not (rows[-1].b + rows[-1].d <= 1.0 + SLACK):
        raise SystemValidationError(
            f"rows: b_p + d_p <= 1 violated (b+d={rows[-1].b + rows[-1].d!r})"
        )
    return LGSystem(tuple(rows))


def parse_system(text: str) -> LGSystem:
    """Parse and validate a system from JSON text."""
    return validate(json.loads(text))


def load_system(path) -> LGSystem:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_system(fh.read())


def rectangle(sys: LGSystem, word: Sequence) -> tuple[float, float, float, float]:
    """Image of the unit square under the composition along `word`.

    Args:
        sys: the system.
        word: digit labels (i, j) or flat codes, first symbol outermost.

    Returns:
        (x0, y0, width, height), composed left to right in linear space.

    Raises:
        GuardExceeded: when b_max**len(word) would underflow; use log-space
            quantities (cutting indices, cylinder measures) at such depths.
    """
    idx = sys.word_indices(word)
    n = len(idx)
    if n and n * np.log(sys.b_max) < np.log(UNDERFLOW_FLOOR):
        raise GuardExceeded(
            f"rectangle underflow: b_max^{n} < {UNDERFLOW_FLOOR}; "
            "use log-space quantities at this depth"
        )
    hx, hy = IDENTITY, IDENTITY
    for k in idx:
        i = int(sys.row_of[k])
        hx = hx.compose(AffinePair(float(sys.a[k]), float(sys.c[k])))
        hy = hy.compose(AffinePair(float(sys.b_rows[i]), float(sys.d_rows[i])))
    return (hx.c, hy.c, hx.a, hy.a)


@lru_cache(maxsize=32)
def iterate(sys: LGSystem, k: int) -> LGSystem:
    """The k-th level system: one digit per length-k word of the original.

    Words sharing a vertical composition (exact (b-product, d-composition)
    pair) form a row of the new system; distinct row words cannot collide
    because row interiors are disjoint, so the row count equals the number of
    distinct length-k row words.  Rows are ordered by (d, b, lexicographic row
    word), columns within a row by composed c.

    Raises:
        ValueError: for k < 1.
        GuardExceeded: when n_digits**k exceeds ENUM_GUARD.
    """
    if k < 1:
        raise ValueError(f"iterate requires k >= 1, got {k}")
    if sys.n_digits**k > ENUM_GUARD:
        raise GuardExceeded(f"iterate: {sys.n_digits}^{k} words exceed {ENUM_GUARD}")

    # groups: (b_prod, d_comp) -> (lex row word, [(c_comp, a_prod), ...])
    groups: dict[tuple[float, float], tuple[tuple[int, ...], list]] = {}
    stack: list[tuple[int, AffinePair, AffinePair, tuple[int, ...]]] = [
        (0, IDENTITY, IDENTITY, ())
    ]
    # depth-first in digit order gives lexicographic word enumeration
    while stack:
        depth, hx, hy, rword = stack.pop()
        if depth == k:
            key = (hy.a, hy.c)
            entry = groups.get(key)
            if entry is None:
                groups[key] = (rword, [(hx.c, hx.a)])
            else:
                entry[1].append((hx.c, hx.a))
            continue
        for m in range(sys.n_digits - 1, -1, -1):
            i = int(sys.row_of[m])
            stack.append(
                (
                    depth + 1,
                    hx.compose(AffinePair(float(sys.a[m]), float(sys.c[m]))),
                    hy.compose(AffinePair(float(sys.b_rows[i]), float(sys.d_rows[i]))),
                    rword + (i,),
                )
            )

    ordered = sorted(groups.items(), key=lambda kv: (kv[0][1], kv[0][0], kv[1][0]))
    rows = []
    for (b_prod, d_comp), (_rword, cells) in ordered:
        cells.sort()
        rows.append(Row(b_prod, d_comp, tuple(AffinePair(a, c) for c, a in cells)))
    return LGSystem(tuple(rows))
