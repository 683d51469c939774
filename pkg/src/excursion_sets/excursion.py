"""Inner/outer confidence sets for the excursion {x_i : f(x_i) >= c}.

The bootstrap matrix is standardised into a residual field

    g[b, i] = (samples[b, i] - point[i]) / scale[i]

and each test point gets an estimated signed distance to the level,

    d[i] = (point[i] - c) / scale[i].

For a band half-width e the points split into an upper side
{0 <= d <= e}, a lower side {-e <= d < 0}, and the points above/below the
band. The lower-bound estimate for the containment probability is

    #{b : max_band |g[b]| < a + min_band |d|} / B
      + sum_{d_i > e}  #{b : g[b, i] >= -a - d_i} / B
      + sum_{d_i < -e} #{b : g[b, i] <  a + |d_i|} / B
      - #{d_i > e} - #{d_i < -e}

and the upper-bound estimate is the fraction of rows with

    min_upper g[b] >= -a - max_upper d   and   max_lower g[b] < a + max_lower |d|.

Every estimate is an integer count divided by B, and all counting happens
on integers, so comparisons against the target are exact.

:func:`construct` scans every distinct |d| as the half-width, calibrates
``a`` by bisection so the lower bound reaches the target, and keeps the
half-width with the tightest upper-minus-lower gap.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .data import ConfidenceSetResult, PredictionEnsemble

A_LOW = 0.1
A_HIGH = 10.0
TLB_TOL = 0.001
MAX_BISECTIONS = 60
ETA = 0.001
ASYMPTOTIC_A_MAX = 100.0

UNATTAINABLE = "unattainable_tlb"


@dataclass(frozen=True)
class StandardizedResiduals:
    g: np.ndarray

    def __post_init__(self):
        g = np.array(self.g, dtype=float)
        if g.ndim != 2 or not np.all(np.isfinite(g)):
            raise ValueError("standardized residuals must be a finite 2-d array")
        g.setflags(write=False)
        object.__setattr__(self, "g", g)

    @property
    def B(self) -> int:
        return self.g.shape[0]


@dataclass(frozen=True)
class SignedDistances:
    d: np.ndarray
    level_c: float

    def __post_init__(self):
        d = np.array(self.d, dtype=float)
        if d.ndim != 1 or not np.all(np.isfinite(d)):
            raise ValueError("signed distances must be a finite 1-d array")
        d.setflags(write=False)
        object.__setattr__(self, "d", d)


@dataclass(frozen=True)
class Band:
    e1: float
    e2: float
    upper_side: np.ndarray
    lower_side: np.ndarray
    above: np.ndarray
    below: np.ndarray


class Calibration(NamedTuple):
    a: float
    elb: float
    attainable: bool


class Candidate(NamedTuple):
    e: float
    a: float
    elb: float
    eub: float
    attainable: bool
    boundary_count: int


def standardize(ens: PredictionEnsemble) -> StandardizedResiduals:
    return StandardizedResiduals((ens.samples - ens.point) / ens.scale)


def signed_distances(ens: PredictionEnsemble, c: float) -> SignedDistances:
    return SignedDistances((ens.point - c) / ens.scale, float(c))


def make_band(d: SignedDistances | np.ndarray, e1: float, e2: float | None = None) -> Band:
    """Partition the points by their position relative to [-e2, e1]."""
    d = d.d if isinstance(d, SignedDistances) else np.asarray(d, dtype=float)
    e2 = e1 if e2 is None else e2
    if e1 < 0 or e2 < 0:
        raise ValueError("band half-widths must be nonnegative")
    return Band(
        float(e1),
        float(e2),
        upper_side=np.flatnonzero((d >= 0) & (d <= e1)),
        lower_side=np.flatnonzero((d < 0) & (d >= -e2)),
        above=np.flatnonzero(d > e1),
        below=np.flatnonzero(d < -e2),
    )


def _g(g) -> np.ndarray:
    return g.g if isinstance(g, StandardizedResiduals) else np.asarray(g, dtype=float)


def _d(d) -> np.ndarray:
    return d.d if isinstance(d, SignedDistances) else np.asarray(d, dtype=float)


def lower_bound_count(a: float, g, d, band: Band) -> int:
    """Numerator of :func:`est_lower_bound` (the estimate times B)."""
    g, d = _g(g), _d(d)
    B = g.shape[0]
    inband = np.concatenate([band.upper_side, band.lower_side])
    if inband.size:
        band_max = np.abs(g[:, inband]).max(axis=1)
        hits = int(np.count_nonzero(band_max < a + np.abs(d[inband]).min()))
    else:
        hits = B
    above, below = band.above, band.below
    hits += int(np.count_nonzero(g[:, above] >= -a - d[above]))
    hits += int(np.count_nonzero(g[:, below] < a + np.abs(d[below])))
    return hits - B * (above.size + below.size)


def upper_bound_count(a: float, g, d, band: Band) -> int:
    """Numerator of :func:`est_upper_bound`."""
    g, d = _g(g), _d(d)
    ok = np.ones(g.shape[0], dtype=bool)
    if band.upper_side.size:
        ok &= g[:, band.upper_side].min(axis=1) >= -a - d[band.upper_side].max()
    if band.lower_side.size:
        ok &= g[:, band.lower_side].max(axis=1) < a + np.abs(d[band.lower_side]).max()
    return int(np.count_nonzero(ok))


def est_lower_bound(a: float, g, d, band: Band) -> float:
    """Monte-Carlo lower bound on the containment probability at threshold ``a``.

    Not clamped: with many points outside the band the estimate can be
    negative. Empty band sides are vacuous (the band indicator is true).
    """
    return lower_bound_count(a, g, d, band) / _g(g).shape[0]


def est_upper_bound(a: float, g, d, band: Band) -> float:
    """Monte-Carlo upper bound on the containment probability at threshold ``a``."""
    return upper_bound_count(a, g, d, band) / _g(g).shape[0]


def _bisect_threshold(count: Callable[[float], int], B: int, tlb: float) -> Calibration:
    top = count(A_HIGH)
    if top / B < tlb:
        return Calibration(A_HIGH, top / B, False)
    a_high, a_low = A_HIGH, A_LOW
    high_elb = top / B
    # the loop always runs at least once, even if the target is within
    # tolerance of zero
    for _ in range(MAX_BISECTIONS):
        a_mid = (a_high + a_low) / 2
        elb = count(a_mid) / B
        if elb > tlb:
            a_high, high_elb = a_mid, elb
        else:
            a_low = a_mid
        if abs(elb - tlb) <= TLB_TOL:
            return Calibration(a_mid, elb, True)
    # the cap leaves a_low and a_high an ulp or so apart around a jump of the
    # step function; a_low can sit below the target, so keep the high side
    return Calibration(a_high, high_elb, True)


def calibrate_threshold(g, d, band: Band, tlb: float) -> Calibration:
    """Bisect ``a`` over [0.1, 10] until the lower bound is within 0.001 of ``tlb``.

    The lower bound is a step function of ``a``, so the tolerance may never
    be met; the search then stops after 60 halvings and returns the
    smallest midpoint whose lower bound exceeded ``tlb``. If even a = 10 misses the target, returns (10, ELB(10)) with
    ``attainable=False``.
    """
    if not 0 < tlb < 1:
        raise ValueError(f"tlb must be in (0, 1), got {tlb}")
    g, d = _g(g), _d(d)
    return _bisect_threshold(lambda a: lower_bound_count(a, g, d, band), g.shape[0], tlb)


class _BandSweep:
    """Incremental evaluator for the bound counts as the band grows.

    Points enter the band in order of |d|. Running row-wise max |g| (whole
    band), min g (upper side) and max g (lower side) are updated as they
    enter. Outside the band only the (replicate, point) entries that fail at
    a = 0.1 are ever checked; the thresholds move monotonically in ``a``, so
    an entry with no violation at a = 0.1 has none at any a the bisection
    visits.
    """

    def __init__(self, g: np.ndarray, d: np.ndarray):
        self.g, self.d = g, d
        self.B, m = g.shape
        self.absd = np.abs(d)
        self.order = np.argsort(self.absd, kind="stable")
        self.entered = 0
        self.dmin = self.absd[self.order[0]]
        self.band_max = np.full(self.B, -np.inf)
        self.upper_min = np.full(self.B, np.inf)
        self.lower_max = np.full(self.B, -np.inf)
        self.upper_dmax = None
        self.lower_absdmax = None
        self.sorted_band_max: list[float] = []

        # (replicate, point) pairs outside the band that violate at a = A_LOW,
        # flattened and ordered by the point's |d| so that the pairs still
        # outside a band of half-width e form a suffix
        above = np.flatnonzero(d > 0)
        below = np.flatnonzero(d < 0)
        self.ra_absd, self.ra_g, self.ra_d = self._pairs(g[:, above] < -A_LOW - d[above], above)
        self.rb_absd, self.rb_g, self.rb_d = self._pairs(g[:, below] >= A_LOW + self.absd[below], below)
        self.rb_d = np.abs(self.rb_d)

    def _pairs(self, viol, cols):
        rows, k = np.nonzero(viol)
        pts = cols[k]
        order = np.argsort(self.absd[pts], kind="stable")
        rows, pts = rows[order], pts[order]
        return self.absd[pts], self.g[rows, pts], self.d[pts]

    def grow(self, e: float) -> int:
        """Admit every point with |d| <= e; returns the band size."""
        start = self.entered
        stop = start
        m = self.order.size
        while stop < m and self.absd[self.order[stop]] <= e:
            stop += 1
        if stop > start:
            new = self.order[start:stop]
            cols = self.g[:, new]
            np.maximum(self.band_max, np.abs(cols).max(axis=1), out=self.band_max)
            dn = self.d[new]
            up = dn >= 0
            if up.any():
                np.minimum(self.upper_min, cols[:, up].min(axis=1), out=self.upper_min)
                top = dn[up].max()
                self.upper_dmax = top if self.upper_dmax is None else max(self.upper_dmax, top)
            if (~up).any():
                np.maximum(self.lower_max, cols[:, ~up].max(axis=1), out=self.lower_max)
                top = np.abs(dn[~up]).max()
                self.lower_absdmax = top if self.lower_absdmax is None else max(self.lower_absdmax, top)
            self.sorted_band_max = np.sort(self.band_max).tolist()
            self.entered = stop
        self._set_outside(e)
        return self.entered

    def _set_outside(self, e: float):
        sa = np.searchsorted(self.ra_absd, e, side="right")
        sb = np.searchsorted(self.rb_absd, e, side="right")
        self.out_a_g, self.out_a_d = self.ra_g[sa:], self.ra_d[sa:]
        self.out_b_g, self.out_b_absd = self.rb_g[sb:], self.rb_d[sb:]

    def lower_count(self, a: float) -> int:
        hits = bisect.bisect_left(self.sorted_band_max, a + self.dmin)
        if self.out_a_d.size:
            hits -= int(np.count_nonzero(self.out_a_g < -a - self.out_a_d))
        if self.out_b_absd.size:
            hits -= int(np.count_nonzero(self.out_b_g >= a + self.out_b_absd))
        return hits

    def upper_count(self, a: float) -> int:
        ok = np.ones(self.B, dtype=bool)
        if self.upper_dmax is not None:
            ok &= self.upper_min >= -a - self.upper_dmax
        if self.lower_absdmax is not None:
            ok &= self.lower_max < a + self.lower_absdmax
        return int(np.count_nonzero(ok))


def sweep_bands(ens: PredictionEnsemble, c: float, tlb: float) -> list[Candidate]:
    """Calibrate ``a`` and estimate both bounds for every distinct |d| half-width."""
    if not 0 < tlb < 1:
        raise ValueError(f"tlb must be in (0, 1), got {tlb}")
    g = standardize(ens).g
    d = signed_distances(ens, c).d
    sweep = _BandSweep(g, d)
    B = g.shape[0]
    out = []
    for e in np.unique(sweep.absd):
        size = sweep.grow(e)
        cal = _bisect_threshold(sweep.lower_count, B, tlb)
        eub = sweep.upper_count(cal.a) / B
        out.append(Candidate(float(e), cal.a, cal.elb, eub, cal.attainable, size))
    return out


def select_candidate(candidates: list[Candidate], B: int) -> Candidate:
    """Smallest EUB - ELB among attainable candidates; ties go to the smaller e."""
    pool = [c for c in candidates if c.attainable] or candidates
    best, best_gap = None, None
    for cand in pool:
        # both bounds are k/B, so compare the integer gap
        gap = round(cand.eub * B) - round(cand.elb * B)
        if best is None or gap < best_gap:
            best, best_gap = cand, gap
    return best


def sets_at(ens: PredictionEnsemble, c: float, a: float) -> tuple[np.ndarray, np.ndarray]:
    """Inner {point - a*scale >= c} and outer {point + a*scale >= c} index sets."""
    inner = np.flatnonzero(ens.point - a * ens.scale >= c)
    outer = np.flatnonzero(ens.point + a * ens.scale >= c)
    return inner, outer


def _prob(x: float) -> float:
    return min(max(float(x), 0.0), 1.0)


def construct(ens: PredictionEnsemble, c: float, tlb: float) -> ConfidenceSetResult:
    """Inner and outer confidence sets for {f >= c} at target lower bound ``tlb``.

    The reported ELB is clipped to [0, 1]; it can only fall below zero when
    no half-width reaches the target, in which case the result is flagged
    ``"unattainable_tlb"``.
    """
    best = select_candidate(sweep_bands(ens, c, tlb), ens.bootstrap_count)
    inner, outer = sets_at(ens, c, best.a)
    return ConfidenceSetResult(
        inner,
        outer,
        threshold_a=best.a,
        band_halfwidth_e=best.e,
        elb=_prob(best.elb),
        eub=_prob(best.eub),
        boundary_count=best.boundary_count,
        flags=() if best.attainable else (UNATTAINABLE,),
    )


def asymptotic_elb(g, boundary_indices, a: float) -> float:
    """Fraction of rows whose minimum over the boundary columns exceeds -a."""
    g = _g(g)
    row_min = g[:, np.asarray(boundary_indices)].min(axis=1)
    return np.count_nonzero(row_min > -a) / g.shape[0]


def construct_asymptotic(ens: PredictionEnsemble, c: float, tlb: float, boundary_indices,
                         eta: float = ETA, a_max: float = ASYMPTOTIC_A_MAX) -> ConfidenceSetResult:
    """Confidence sets when the exact boundary points {f(x_i) = c} are known.

    Walks a = eta, 2*eta, ... and stops at the first grid value whose
    boundary-only lower bound reaches ``tlb``. That estimate is reported as
    both ELB and EUB.
    """
    boundary = np.asarray(boundary_indices, dtype=np.int64)
    if boundary.size == 0:
        raise ValueError("boundary_indices must be nonempty")
    g = standardize(ens).g
    row_min = g[:, boundary].min(axis=1)
    B = g.shape[0]
    k, flags = 1, ()
    while True:
        a = k * eta
        elb = np.count_nonzero(row_min > -a) / B
        if elb >= tlb:
            break
        if a > a_max:
            flags = (UNATTAINABLE,)
            break
        k += 1
    inner, outer = sets_at(ens, c, a)
    return ConfidenceSetResult(inner, outer, a, 0.0, elb, elb, int(boundary.size), flags)


def construct_corollary(ens: PredictionEnsemble, c: float, plus_index: int, minus_index: int,
                        d_true, a: float = 1.0) -> tuple[ConfidenceSetResult, float]:
    """Confidence sets at a fixed ``a`` using the two points closest to the boundary.

    ``d_true`` holds oracle signed distances. Only an upper bound is
    available here, so the returned result carries ``elb = 0``.
    """
    d_true = _d(d_true)
    if not d_true[plus_index] >= 0:
        raise ValueError("plus_index must have a nonnegative signed distance")
    if not d_true[minus_index] < 0:
        raise ValueError("minus_index must have a negative signed distance")
    g = standardize(ens).g
    ok = (g[:, plus_index] >= -a - d_true[plus_index]) & (g[:, minus_index] < a + abs(d_true[minus_index]))
    eub = np.count_nonzero(ok) / g.shape[0]
    inner, outer = sets_at(ens, c, a)
    return ConfidenceSetResult(inner, outer, a, 0.0, 0.0, eub, 2), eub
