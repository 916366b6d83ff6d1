"""Exact algebra of time-dependent rates and time maps.

Three kinds of objects live here, all over exact ``Fraction`` arithmetic:

* ``StepFunction``: a piecewise-constant density on ``[0, horizon]``.  Cells
  are half-open ``[b_i, b_{i+1})``; the value at the horizon itself is kept
  equal to the last cell so that representation equality coincides with
  almost-everywhere equality.
* ``PiecewiseLinear`` / ``MonotoneMap``: continuous functions given by their
  values at breakpoints.  ``MonotoneMap`` additionally never decreases and is
  what travel-time exit maps and arrival maps are made of.
* ``TimeMeasure``: a step-function density plus finitely many point masses.
  Pushing a density through a time map produces one of these; a point mass
  appears exactly when positive mass departs during a plateau of the map.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Sequence, Union

Number = Union[int, Fraction, str]

__all__ = [
    "as_rational",
    "Interval",
    "StepFunction",
    "PiecewiseLinear",
    "MonotoneMap",
    "TimeMeasure",
    "HasAtoms",
    "integrate",
    "pointwise_combine",
    "restrict",
    "compose",
    "preimage",
    "pushforward",
    "absolutely_continuous_part",
    "refine",
    "image_of_intervals",
    "preimage_of_intervals",
    "merge_intervals",
    "intersect_intervals",
    "subtract_intervals",
    "total_length",
]


def as_rational(x: Number) -> Fraction:
    """Convert ``x`` to a ``Fraction`` without ever going through a float.

    Accepts ints, Fractions and strings such as ``"3"`` or ``"-7/4"``.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        text = x.strip()
        if not text or any(ch in text for ch in ".eE"):
            raise ValueError(f"not an exact rational: {x!r}")
        return Fraction(text)
    raise TypeError(f"cannot interpret {type(x).__name__} as an exact rational")


# ---------------------------------------------------------------------------
# intervals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Interval:
    """An interval ``lo .. hi`` with an open/closed flag per end."""

    lo: Fraction
    hi: Fraction
    lo_closed: bool = True
    hi_closed: bool = True

    def __post_init__(self):
        object.__setattr__(self, "lo", as_rational(self.lo))
        object.__setattr__(self, "hi", as_rational(self.hi))
        if self.lo > self.hi:
            raise ValueError(f"interval with lo > hi: {self.lo} > {self.hi}")

    @classmethod
    def closed(cls, lo: Number, hi: Number) -> "Interval":
        return cls(as_rational(lo), as_rational(hi), True, True)

    @classmethod
    def half_open(cls, lo: Number, hi: Number) -> "Interval":
        return cls(as_rational(lo), as_rational(hi), True, False)

    @classmethod
    def point(cls, t: Number) -> "Interval":
        t = as_rational(t)
        return cls(t, t, True, True)

    @property
    def length(self) -> Fraction:
        return self.hi - self.lo

    def is_empty(self) -> bool:
        return self.lo == self.hi and not (self.lo_closed and self.hi_closed)

    def contains(self, t: Number) -> bool:
        t = as_rational(t)
        if t < self.lo or t > self.hi:
            return False
        if t == self.lo and not self.lo_closed:
            return False
        if t == self.hi and not self.hi_closed:
            return False
        return True

    def __str__(self) -> str:
        left = "[" if self.lo_closed else "("
        right = "]" if self.hi_closed else ")"
        return f"{left}{self.lo}, {self.hi}{right}"


def merge_intervals(intervals: Iterable[Interval]) -> list[Interval]:
    """Merge intervals into a sorted list of disjoint half-open ones.

    Endpoint flags are dropped: the result describes the same set up to a
    null set, which is all that matters for densities.  Degenerate intervals
    disappear.
    """
    spans = sorted((iv.lo, iv.hi) for iv in intervals if iv.hi > iv.lo)
    merged: list[list[Fraction]] = []
    for lo, hi in spans:
        if merged and lo <= merged[-1][1]:
            if hi > merged[-1][1]:
                merged[-1][1] = hi
        else:
            merged.append([lo, hi])
    return [Interval(lo, hi, True, False) for lo, hi in merged]


# ---------------------------------------------------------------------------
# step functions
# ---------------------------------------------------------------------------


def _canonical_cells(bps: list[Fraction], vals: list[Fraction]):
    """Drop empty cells and merge equal neighbours.  ``vals`` has one entry per cell."""
    out_b = [bps[0]]
    out_v: list[Fraction] = []
    for i, v in enumerate(vals):
        hi = bps[i + 1]
        if hi == out_b[-1]:
            continue
        if out_v and out_v[-1] == v:
            out_b[-1] = hi
        else:
            out_v.append(v)
            out_b.append(hi)
    if not out_v:
        # zero-length horizon; keep a single degenerate cell
        out_v.append(vals[-1] if vals else Fraction(0))
        out_b.append(bps[-1])
    return out_b, out_v


class StepFunction:
    """Piecewise-constant function on ``[0, horizon]`` with exact breakpoints.

    ``values`` may list one value per cell or one more for the final point;
    the final-point value is always normalised to the last cell's value.
    """

    __slots__ = ("breakpoints", "values")

    def __init__(self, breakpoints: Sequence[Number], values: Sequence[Number]):
        bps = [as_rational(b) for b in breakpoints]
        vals = [as_rational(v) for v in values]
        if len(bps) < 2:
            raise ValueError("a step function needs at least the breakpoints 0 and horizon")
        if bps[0] != 0:
            raise ValueError("breakpoints must start at 0")
        if any(b1 >= b2 for b1, b2 in zip(bps, bps[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        ncell = len(bps) - 1
        if len(vals) == ncell + 1:
            vals = vals[:ncell]
        elif len(vals) != ncell:
            raise ValueError(
                f"{len(bps)} breakpoints need {ncell} or {ncell + 1} values, got {len(vals)}"
            )
        b, v = _canonical_cells(bps, vals)
        self.breakpoints: tuple[Fraction, ...] = tuple(b)
        self.values: tuple[Fraction, ...] = tuple(v) + (v[-1],)

    @classmethod
    def _raw(cls, bps: list[Fraction], cell_vals: list[Fraction]) -> "StepFunction":
        """Build from already-exact data, canonicalising but skipping validation."""
        self = object.__new__(cls)
        b, v = _canonical_cells(bps, cell_vals)
        self.breakpoints = tuple(b)
        self.values = tuple(v) + (v[-1],)
        return self

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, horizon: Number) -> "StepFunction":
        return cls.constant(0, horizon)

    @classmethod
    def constant(cls, c: Number, horizon: Number) -> "StepFunction":
        return cls([0, as_rational(horizon)], [as_rational(c)])

    @classmethod
    def indicator(cls, lo: Number, hi: Number, horizon: Number, value: Number = 1) -> "StepFunction":
        """``value`` on ``[lo, hi)`` and zero elsewhere (endpoints do not matter a.e.)."""
        lo, hi, horizon = as_rational(lo), as_rational(hi), as_rational(horizon)
        if not 0 <= lo <= hi <= horizon:
            raise ValueError(f"indicator [{lo}, {hi}] outside [0, {horizon}]")
        return cls.from_pieces([(lo, hi, as_rational(value))], horizon)

    @classmethod
    def from_pieces(cls, pieces: Iterable[tuple], horizon: Number) -> "StepFunction":
        """Sum of constant pieces ``(lo, hi, value)``; overlapping pieces add up."""
        horizon = as_rational(horizon)
        events: dict[Fraction, Fraction] = {}
        for lo, hi, val in pieces:
            lo, hi, val = as_rational(lo), as_rational(hi), as_rational(val)
            if hi <= lo or val == 0:
                continue
            if lo < 0 or hi > horizon:
                raise ValueError(f"piece [{lo}, {hi}) outside [0, {horizon}]")
            events[lo] = events.get(lo, Fraction(0)) + val
            events[hi] = events.get(hi, Fraction(0)) - val
        bps = [Fraction(0)]
        vals: list[Fraction] = []
        level = Fraction(0)
        for t in sorted(events):
            if t > bps[-1]:
                vals.append(level)
                bps.append(t)
            level += events[t]
        if horizon > bps[-1]:
            vals.append(level)
            bps.append(horizon)
        if not vals:
            return cls.zero(horizon)
        return cls._raw(bps, vals)

    @classmethod
    def from_intervals(cls, intervals: Iterable[Interval], horizon: Number, value: Number = 1) -> "StepFunction":
        """Indicator (times ``value``) of a finite union of intervals."""
        value = as_rational(value)
        return cls.from_pieces(((iv.lo, iv.hi, value) for iv in merge_intervals(intervals)), horizon)

    # -- basic queries ------------------------------------------------------

    @property
    def horizon(self) -> Fraction:
        return self.breakpoints[-1]

    def cells(self) -> Iterator[tuple[Fraction, Fraction, Fraction]]:
        """Yield ``(lo, hi, value)`` for each cell."""
        b, v = self.breakpoints, self.values
        for i in range(len(b) - 1):
            yield b[i], b[i + 1], v[i]

    def __call__(self, t: Number) -> Fraction:
        t = as_rational(t)
        if t < 0 or t > self.horizon:
            raise ValueError(f"t = {t} outside [0, {self.horizon}]")
        i = bisect_right(self.breakpoints, t) - 1
        return self.values[min(i, len(self.values) - 1)]

    def is_zero(self) -> bool:
        return len(self.values) == 2 and self.values[0] == 0

    def __bool__(self) -> bool:
        return not self.is_zero()

    def is_nonnegative(self) -> bool:
        return all(v >= 0 for v in self.values)

    def integral(self) -> Fraction:
        return sum(((hi - lo) * v for lo, hi, v in self.cells()), Fraction(0))

    def norm(self) -> Fraction:
        """L1 norm."""
        return sum(((hi - lo) * abs(v) for lo, hi, v in self.cells()), Fraction(0))

    def integrate(self, over: Interval) -> Fraction:
        return integrate(self, over)

    def support(self) -> list[Interval]:
        """Half-open intervals where the value is nonzero (merged)."""
        return merge_intervals(Interval(lo, hi, True, False) for lo, hi, v in self.cells() if v != 0)

    def positive_part(self) -> "StepFunction":
        return self._map(lambda v: v if v > 0 else Fraction(0))

    def max_value(self) -> Fraction:
        return max(self.values[:-1])

    def min_value(self) -> Fraction:
        return min(self.values[:-1])

    # -- horizon handling ---------------------------------------------------

    def extend(self, horizon: Number) -> "StepFunction":
        """Pad with zero up to a larger horizon."""
        horizon = as_rational(horizon)
        if horizon < self.horizon:
            raise ValueError(f"cannot extend horizon {self.horizon} down to {horizon}")
        if horizon == self.horizon:
            return self
        return StepFunction._raw(list(self.breakpoints) + [horizon], list(self.values[:-1]) + [Fraction(0)])

    def truncate(self, horizon: Number) -> "StepFunction":
        """Cut down to a smaller horizon; refuses to drop nonzero mass."""
        horizon = as_rational(horizon)
        if horizon >= self.horizon:
            return self.extend(horizon)
        for lo, hi, v in self.cells():
            if hi > horizon and v != 0:
                raise ValueError(f"function is nonzero beyond {horizon}")
        return self.clip(horizon)

    def clip(self, horizon: Number) -> "StepFunction":
        """Restrict the domain to ``[0, horizon]`` and drop whatever lies beyond."""
        horizon = as_rational(horizon)
        if horizon >= self.horizon:
            return self.extend(horizon)
        if horizon <= 0:
            raise ValueError("horizon must be positive")
        i = bisect_left(self.breakpoints, horizon)
        bps = list(self.breakpoints[:i]) + [horizon]
        vals = list(self.values[: len(bps) - 1])
        return StepFunction._raw(bps, vals)

    def vanishes_after(self, t: Number) -> bool:
        t = as_rational(t)
        return all(v == 0 for lo, hi, v in self.cells() if hi > t)

    def fit(self, horizon: Number) -> "StepFunction":
        """Extend or truncate to exactly ``horizon``."""
        horizon = as_rational(horizon)
        return self.extend(horizon) if horizon >= self.horizon else self.truncate(horizon)

    # -- arithmetic ---------------------------------------------------------

    def _map(self, fn) -> "StepFunction":
        return StepFunction._raw(list(self.breakpoints), [fn(v) for v in self.values[:-1]])

    def _zip(self, other: "StepFunction", fn) -> "StepFunction":
        if not isinstance(other, StepFunction):
            raise TypeError(f"expected a StepFunction, got {type(other).__name__}")
        if other.horizon != self.horizon:
            raise ValueError(f"horizon mismatch: {self.horizon} vs {other.horizon}")
        a_b, a_v = self.breakpoints, self.values
        b_b, b_v = other.breakpoints, other.values
        i = j = 0
        bps = [Fraction(0)]
        vals: list[Fraction] = []
        na, nb = len(a_b) - 1, len(b_b) - 1
        while i < na and j < nb:
            vals.append(fn(a_v[i], b_v[j]))
            ha, hb = a_b[i + 1], b_b[j + 1]
            if ha < hb:
                bps.append(ha)
                i += 1
            elif hb < ha:
                bps.append(hb)
                j += 1
            else:
                bps.append(ha)
                i += 1
                j += 1
        return StepFunction._raw(bps, vals)

    def __add__(self, other):
        if isinstance(other, StepFunction):
            return self._zip(other, lambda a, b: a + b)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, StepFunction):
            return self._zip(other, lambda a, b: a - b)
        return NotImplemented

    def __neg__(self):
        return self._map(lambda v: -v)

    def __mul__(self, other):
        if isinstance(other, StepFunction):
            return self._zip(other, lambda a, b: a * b)
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            c = Fraction(other)
            return self._map(lambda v: v * c)
        return NotImplemented

    __rmul__ = __mul__

    def minimum(self, other: "StepFunction") -> "StepFunction":
        return self._zip(other, min)

    def maximum(self, other: "StepFunction") -> "StepFunction":
        return self._zip(other, max)

    def le(self, other: "StepFunction") -> bool:
        """Pointwise ``self <= other`` on every cell."""
        return (other - self).is_nonnegative()

    def first_violation(self, other: "StepFunction") -> tuple[Fraction, Fraction, Fraction] | None:
        """First cell ``(lo, hi, excess)`` where ``self > other``, if any."""
        for lo, hi, v in (self - other).cells():
            if v > 0:
                return lo, hi, v
        return None

    # -- dunder plumbing ----------------------------------------------------

    def __eq__(self, other):
        if not isinstance(other, StepFunction):
            return NotImplemented
        return self.breakpoints == other.breakpoints and self.values == other.values

    def __hash__(self):
        return hash((self.breakpoints, self.values))

    def __repr__(self):
        cells = ", ".join(f"[{lo},{hi}):{v}" for lo, hi, v in self.cells())
        return f"StepFunction({cells})"


# ---------------------------------------------------------------------------
# piecewise linear functions and monotone maps
# ---------------------------------------------------------------------------


def _canonical_points(xs: list[Fraction], ys: list[Fraction]):
    """Remove interior points lying on the line through their neighbours."""
    if len(xs) <= 2:
        return xs, ys
    out_x, out_y = [xs[0]], [ys[0]]
    for i in range(1, len(xs) - 1):
        x0, y0 = out_x[-1], out_y[-1]
        x1, y1 = xs[i], ys[i]
        x2, y2 = xs[i + 1], ys[i + 1]
        if (y1 - y0) * (x2 - x1) == (y2 - y1) * (x1 - x0):
            continue
        out_x.append(x1)
        out_y.append(y1)
    out_x.append(xs[-1])
    out_y.append(ys[-1])
    return out_x, out_y


class PiecewiseLinear:
    """Continuous piecewise-linear function given by values at its breakpoints."""

    __slots__ = ("breakpoints", "values")

    def __init__(self, breakpoints: Sequence[Number], values: Sequence[Number]):
        xs = [as_rational(b) for b in breakpoints]
        ys = [as_rational(v) for v in values]
        if len(xs) != len(ys):
            raise ValueError("breakpoints and values must have equal length")
        if len(xs) < 2:
            raise ValueError("a piecewise-linear function needs a nondegenerate domain")
        if any(a >= b for a, b in zip(xs, xs[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        xs, ys = _canonical_points(xs, ys)
        self.breakpoints: tuple[Fraction, ...] = tuple(xs)
        self.values: tuple[Fraction, ...] = tuple(ys)
        self._check()

    def _check(self):
        pass

    @classmethod
    def _raw(cls, xs: list[Fraction], ys: list[Fraction]):
        self = object.__new__(cls)
        xs, ys = _canonical_points(xs, ys)
        self.breakpoints = tuple(xs)
        self.values = tuple(ys)
        self._check()
        return self

    @classmethod
    def constant(cls, c: Number, hi: Number, lo: Number = 0):
        return cls([lo, hi], [c, c])

    @classmethod
    def identity(cls, hi: Number, lo: Number = 0):
        return cls([lo, hi], [lo, hi])

    @property
    def lo(self) -> Fraction:
        return self.breakpoints[0]

    @property
    def hi(self) -> Fraction:
        return self.breakpoints[-1]

    @property
    def horizon(self) -> Fraction:
        return self.breakpoints[-1]

    def __call__(self, t: Number) -> Fraction:
        t = as_rational(t)
        xs, ys = self.breakpoints, self.values
        if t < xs[0] or t > xs[-1]:
            raise ValueError(f"t = {t} outside [{xs[0]}, {xs[-1]}]")
        i = bisect_right(xs, t) - 1
        if i >= len(xs) - 1:
            return ys[-1]
        x0, x1 = xs[i], xs[i + 1]
        return ys[i] + (ys[i + 1] - ys[i]) * (t - x0) / (x1 - x0)

    def segments(self) -> Iterator[tuple[Fraction, Fraction, Fraction, Fraction]]:
        """Yield ``(x0, x1, y0, y1)`` per linear piece."""
        xs, ys = self.breakpoints, self.values
        for i in range(len(xs) - 1):
            yield xs[i], xs[i + 1], ys[i], ys[i + 1]

    def slope_at(self, t: Number) -> Fraction:
        """Right derivative at ``t`` (left derivative at the domain end)."""
        t = as_rational(t)
        xs, ys = self.breakpoints, self.values
        i = bisect_right(xs, t) - 1
        i = max(0, min(i, len(xs) - 2))
        return (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])

    def slopes(self) -> "StepFunction":
        """Derivative as a step function (requires the domain to start at 0)."""
        xs, ys = self.breakpoints, self.values
        vals = [(ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]) for i in range(len(xs) - 1)]
        return StepFunction._raw(list(xs), vals)

    def integral(self, lo: Number | None = None, hi: Number | None = None) -> Fraction:
        lo = self.lo if lo is None else as_rational(lo)
        hi = self.hi if hi is None else as_rational(hi)
        if lo < self.lo or hi > self.hi or lo > hi:
            raise ValueError(f"[{lo}, {hi}] outside the domain [{self.lo}, {self.hi}]")
        total = Fraction(0)
        for x0, x1, _, _ in self.segments():
            a, b = max(x0, lo), min(x1, hi)
            if b > a:
                total += (self(a) + self(b)) * (b - a) / 2
        return total

    def restrict_domain(self, lo: Number, hi: Number):
        lo, hi = as_rational(lo), as_rational(hi)
        if lo < self.lo or hi > self.hi or lo >= hi:
            raise ValueError(f"[{lo}, {hi}] is not a subdomain of [{self.lo}, {self.hi}]")
        xs = [lo] + [x for x in self.breakpoints if lo < x < hi] + [hi]
        return type(self)._raw(xs, [self(x) for x in xs])

    def _combine(self, other: "PiecewiseLinear", fn, cls=None):
        if (self.lo, self.hi) != (other.lo, other.hi):
            raise ValueError("domain mismatch")
        xs = sorted(set(self.breakpoints) | set(other.breakpoints))
        cls = cls or PiecewiseLinear
        return cls._raw(xs, [fn(self(x), other(x)) for x in xs])

    def __add__(self, other):
        if isinstance(other, PiecewiseLinear):
            return self._combine(other, lambda a, b: a + b)
        if isinstance(other, (int, Fraction)):
            c = Fraction(other)
            return PiecewiseLinear._raw(list(self.breakpoints), [y + c for y in self.values])
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, PiecewiseLinear):
            return self._combine(other, lambda a, b: a - b)
        return NotImplemented

    def __mul__(self, c):
        if isinstance(c, (int, Fraction)) and not isinstance(c, bool):
            c = Fraction(c)
            return PiecewiseLinear._raw(list(self.breakpoints), [y * c for y in self.values])
        return NotImplemented

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, PiecewiseLinear):
            return NotImplemented
        return self.breakpoints == other.breakpoints and self.values == other.values

    def __hash__(self):
        return hash((self.breakpoints, self.values))

    def __repr__(self):
        pts = ", ".join(f"({x},{y})" for x, y in zip(self.breakpoints, self.values))
        return f"{type(self).__name__}({pts})"

    def is_nonnegative(self) -> bool:
        return all(y >= 0 for y in self.values)

    def is_nondecreasing(self) -> bool:
        return all(a <= b for a, b in zip(self.values, self.values[1:]))

    def min_value(self) -> Fraction:
        return min(self.values)

    def max_value(self) -> Fraction:
        return max(self.values)

    def integrate_against(self, f: StepFunction) -> Fraction:
        """Exact ``∫ self · f`` over the common domain ``[0, min(horizons)]``."""
        total = Fraction(0)
        end = min(self.hi, f.horizon)
        for lo, hi, v in f.cells():
            if v == 0 or lo >= end:
                continue
            total += v * self.integral(max(lo, self.lo), min(hi, end))
        return total


class MonotoneMap(PiecewiseLinear):
    """Non-decreasing continuous piecewise-linear map of time into time."""

    __slots__ = ()

    def _check(self):
        if not self.is_nondecreasing():
            raise ValueError("monotone map must be non-decreasing")

    @classmethod
    def from_pl(cls, f: PiecewiseLinear) -> "MonotoneMap":
        return cls._raw(list(f.breakpoints), list(f.values))

    def first_reach(self, y: Fraction) -> Fraction | None:
        """Smallest ``x`` with ``self(x) >= y``, or None if never reached."""
        xs, ys = self.breakpoints, self.values
        if ys[-1] < y:
            return None
        if ys[0] >= y:
            return xs[0]
        i = bisect_left(ys, y)  # ys[i-1] < y <= ys[i]
        x0, x1, y0, y1 = xs[i - 1], xs[i], ys[i - 1], ys[i]
        return x0 + (y - y0) * (x1 - x0) / (y1 - y0)

    def last_at_most(self, y: Fraction) -> Fraction | None:
        """Largest ``x`` with ``self(x) <= y``, or None if ``self(lo) > y``."""
        xs, ys = self.breakpoints, self.values
        if ys[0] > y:
            return None
        if ys[-1] <= y:
            return xs[-1]
        i = bisect_right(ys, y)  # ys[i-1] <= y < ys[i]
        x0, x1, y0, y1 = xs[i - 1], xs[i], ys[i - 1], ys[i]
        return x0 + (y - y0) * (x1 - x0) / (y1 - y0)

    def plateaus(self) -> list[Interval]:
        """Maximal closed intervals of positive length where the map is constant."""
        return [Interval(x0, x1) for x0, x1, y0, y1 in self.segments() if y0 == y1]

    def value_range(self) -> Interval:
        return Interval(self.values[0], self.values[-1])


# ---------------------------------------------------------------------------
# measures
# ---------------------------------------------------------------------------


class HasAtoms(Exception):
    """Raised when a measure expected to have a density carries point masses."""

    def __init__(self, atoms: Sequence[tuple[Fraction, Fraction]]):
        self.atoms = tuple(atoms)
        self.locations = tuple(loc for loc, _ in self.atoms)
        super().__init__(f"measure has atoms at {', '.join(str(x) for x in self.locations)}")


def _normalise_atoms(atoms: Iterable[tuple[Fraction, Fraction]]) -> tuple[tuple[Fraction, Fraction], ...]:
    acc: dict[Fraction, Fraction] = {}
    for loc, mass in atoms:
        loc, mass = as_rational(loc), as_rational(mass)
        acc[loc] = acc.get(loc, Fraction(0)) + mass
    return tuple((loc, m) for loc, m in sorted(acc.items()) if m != 0)


class TimeMeasure:
    """Finite signed measure: step-function density plus point masses."""

    __slots__ = ("density", "atoms")

    def __init__(self, density: StepFunction, atoms: Iterable[tuple[Number, Number]] = ()):
        self.density = density
        self.atoms = _normalise_atoms(atoms)
        for loc, _ in self.atoms:
            if loc < 0 or loc > density.horizon:
                raise ValueError(f"atom at {loc} outside [0, {density.horizon}]")

    @classmethod
    def zero(cls, horizon: Number) -> "TimeMeasure":
        return cls(StepFunction.zero(horizon))

    @property
    def horizon(self) -> Fraction:
        return self.density.horizon

    def is_zero(self) -> bool:
        return self.density.is_zero() and not self.atoms

    def is_absolutely_continuous(self) -> bool:
        return not self.atoms

    def total_mass(self) -> Fraction:
        return self.density.integral() + sum((m for _, m in self.atoms), Fraction(0))

    def mass(self, over: Interval) -> Fraction:
        """Measure of an interval; atoms count only if the interval contains them."""
        total = integrate(self.density, over)
        for loc, m in self.atoms:
            if over.contains(loc):
                total += m
        return total

    def moment(self) -> Fraction:
        """``∫ t dμ(t)``."""
        total = Fraction(0)
        for lo, hi, v in self.density.cells():
            if v:
                total += v * (hi * hi - lo * lo) / 2
        for loc, m in self.atoms:
            total += loc * m
        return total

    def extend(self, horizon: Number) -> "TimeMeasure":
        return TimeMeasure(self.density.extend(horizon), self.atoms)

    def __add__(self, other):
        if not isinstance(other, TimeMeasure):
            return NotImplemented
        return TimeMeasure(self.density + other.density, self.atoms + other.atoms)

    def __neg__(self):
        return TimeMeasure(-self.density, ((loc, -m) for loc, m in self.atoms))

    def __sub__(self, other):
        if not isinstance(other, TimeMeasure):
            return NotImplemented
        return self + (-other)

    def __mul__(self, c):
        if isinstance(c, (int, Fraction)) and not isinstance(c, bool):
            c = Fraction(c)
            return TimeMeasure(self.density * c, ((loc, m * c) for loc, m in self.atoms))
        return NotImplemented

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, TimeMeasure):
            return NotImplemented
        return self.density == other.density and self.atoms == other.atoms

    def __hash__(self):
        return hash((self.density, self.atoms))

    def __repr__(self):
        return f"TimeMeasure({self.density!r}, atoms={list(self.atoms)!r})"


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def integrate(f: StepFunction | PiecewiseLinear, over: Interval) -> Fraction:
    """Exact Lebesgue integral of ``f`` over ``over``; endpoint flags are irrelevant."""
    if isinstance(f, StepFunction):
        if over.lo < 0 or over.hi > f.horizon:
            raise ValueError(f"interval {over} outside [0, {f.horizon}]")
        total = Fraction(0)
        for lo, hi, v in f.cells():
            a, b = max(lo, over.lo), min(hi, over.hi)
            if b > a and v:
                total += v * (b - a)
        return total
    if isinstance(f, PiecewiseLinear):
        return f.integral(over.lo, over.hi)
    raise TypeError(f"cannot integrate {type(f).__name__}")


def pointwise_combine(op, f: StepFunction, g: StepFunction | None = None) -> StepFunction:
    """Apply ``op`` cellwise on the common refinement.

    ``op`` is one of ``"add"``, ``"sub"``, ``"min"``, ``"max"``, ``"mul"`` or
    ``("scale", c)``; scaling ignores ``g``.
    """
    if isinstance(op, tuple) and len(op) == 2 and op[0] == "scale":
        return f * as_rational(op[1])
    if g is None:
        raise ValueError(f"operation {op!r} needs two operands")
    table = {
        "add": lambda a, b: a + b,
        "sub": lambda a, b: a - b,
        "min": min,
        "max": max,
        "mul": lambda a, b: a * b,
    }
    try:
        fn = table[op]
    except (KeyError, TypeError):
        raise ValueError(f"unknown operation {op!r}") from None
    return f._zip(g, fn)


def restrict(f: StepFunction, to: Iterable[Interval]) -> StepFunction:
    """``f`` times the indicator of the union of ``to``."""
    to = list(to)
    for iv in to:
        if iv.lo < 0 or iv.hi > f.horizon:
            raise ValueError(f"interval {iv} outside [0, {f.horizon}]")
    return f * StepFunction.from_intervals(to, f.horizon)


def compose(outer: MonotoneMap | PiecewiseLinear, inner: MonotoneMap) -> PiecewiseLinear:
    """``outer ∘ inner`` on the domain of ``inner``.

    Values of ``inner`` are clamped into the domain of ``outer`` first, so a map
    that overshoots the horizon simply saturates there.
    """
    lo, hi = outer.lo, outer.hi
    xs = set(inner.breakpoints)
    for y in outer.breakpoints:
        # every x where inner crosses or touches level y
        for x0, x1, y0, y1 in inner.segments():
            if y0 == y1:
                continue
            a, b = (y0, y1) if y0 < y1 else (y1, y0)
            if a < y < b:
                xs.add(x0 + (y - y0) * (x1 - x0) / (y1 - y0))
    pts = sorted(xs)
    vals = [outer(min(max(inner(x), lo), hi)) for x in pts]
    cls = MonotoneMap if isinstance(outer, MonotoneMap) else PiecewiseLinear
    return cls._raw(pts, vals)


def preimage(A: MonotoneMap, of: Interval) -> list[Interval]:
    """``A^{-1}(of)`` as a list holding at most one interval."""
    lo_x, hi_x = A.lo, A.hi
    # lower end
    if of.lo_closed:
        a = A.first_reach(of.lo)
        if a is None:
            return []
        a_closed = True
    else:
        a = A.last_at_most(of.lo)
        if a is None:
            a, a_closed = lo_x, True
        elif a == hi_x:
            return []
        else:
            a_closed = False
    # upper end
    if of.hi_closed:
        b = A.last_at_most(of.hi)
        if b is None:
            return []
        b_closed = True
    else:
        b = A.first_reach(of.hi)
        if b is None:
            b, b_closed = hi_x, True
        elif b == lo_x:
            return []
        else:
            b_closed = False
    if a > b or (a == b and not (a_closed and b_closed)):
        return []
    return [Interval(a, b, a_closed, b_closed)]


def _fit_to_map(h: StepFunction, A: PiecewiseLinear) -> StepFunction:
    if A.lo != 0:
        raise ValueError("time maps must be defined from 0")
    if h.horizon < A.hi:
        return h.extend(A.hi)
    if h.horizon > A.hi:
        return h.truncate(A.hi)
    return h


def pushforward(h: StepFunction, A: MonotoneMap) -> TimeMeasure:
    """Image of the measure ``h·dt`` under ``A``.

    Where ``A`` has slope ``a > 0`` and ``h`` equals ``v`` the image carries the
    density ``v / a``; mass departing during a plateau of ``A`` at level ``y``
    becomes a point mass at ``y``.
    """
    h = _fit_to_map(h, A)
    target = A.hi if A.values[-1] <= A.hi else A.values[-1]
    pieces = []
    atoms = []
    xs = sorted(set(h.breakpoints) | set(A.breakpoints))
    for x0, x1 in zip(xs, xs[1:]):
        v = h(x0)
        if v == 0:
            continue
        y0, y1 = A(x0), A(x1)
        if y0 == y1:
            atoms.append((y0, v * (x1 - x0)))
        else:
            pieces.append((y0, y1, v * (x1 - x0) / (y1 - y0)))
    return TimeMeasure(StepFunction.from_pieces(pieces, target), atoms)


def absolutely_continuous_part(m: TimeMeasure) -> StepFunction:
    """The density of ``m``; raises ``HasAtoms`` if ``m`` carries point masses."""
    if m.atoms:
        raise HasAtoms(m.atoms)
    return m.density


def refine(fs: Iterable[StepFunction | PiecewiseLinear], horizon: Number | None = None) -> list[Fraction]:
    """Sorted union of all breakpoints, always including 0 and the horizon."""
    fs = list(fs)
    pts: set[Fraction] = {Fraction(0)}
    if horizon is not None:
        pts.add(as_rational(horizon))
    for f in fs:
        pts.update(f.breakpoints)
    if horizon is None and not fs:
        raise ValueError("refine of an empty list needs an explicit horizon")
    return sorted(pts)


def image_of_intervals(A: MonotoneMap, intervals: Iterable[Interval]) -> list[Interval]:
    """``A`` applied to a union of intervals, up to null sets."""
    out = []
    for iv in merge_intervals(intervals):
        a, b = max(iv.lo, A.lo), min(iv.hi, A.hi)
        if b > a:
            out.append(Interval(A(a), A(b), True, False))
    return merge_intervals(out)


def preimage_of_intervals(A: MonotoneMap, intervals: Iterable[Interval]) -> list[Interval]:
    """``A^{-1}`` of a union of intervals, up to null sets."""
    out = []
    for iv in merge_intervals(intervals):
        out.extend(preimage(A, Interval(iv.lo, iv.hi, True, False)))
    return merge_intervals(out)


def intersect_intervals(a: Iterable[Interval], b: Iterable[Interval]) -> list[Interval]:
    """Intersection of two interval unions, up to null sets."""
    a, b = merge_intervals(a), merge_intervals(b)
    out = []
    i = j = 0
    while i < len(a) and j < len(b):
        lo, hi = max(a[i].lo, b[j].lo), min(a[i].hi, b[j].hi)
        if hi > lo:
            out.append(Interval(lo, hi, True, False))
        if a[i].hi < b[j].hi:
            i += 1
        else:
            j += 1
    return out


def subtract_intervals(a: Iterable[Interval], b: Iterable[Interval]) -> list[Interval]:
    """``a`` minus ``b`` for interval unions, up to null sets."""
    out = []
    b = merge_intervals(b)
    for iv in merge_intervals(a):
        lo = iv.lo
        for cut in b:
            if cut.hi <= lo or cut.lo >= iv.hi:
                continue
            if cut.lo > lo:
                out.append(Interval(lo, cut.lo, True, False))
            lo = max(lo, cut.hi)
        if lo < iv.hi:
            out.append(Interval(lo, iv.hi, True, False))
    return merge_intervals(out)


def total_length(intervals: Iterable[Interval]) -> Fraction:
    """Lebesgue measure of an interval union."""
    return sum((iv.length for iv in merge_intervals(intervals)), Fraction(0))
