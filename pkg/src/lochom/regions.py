"""Parameter regions for (alpha, beta) and the scaling exponents of each region."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

EQ_TOL = 1e-12

Number = Union[float, Fraction]


class Region(str, enum.Enum):
    R1 = "R1"
    R2 = "R2"
    R3 = "R3"
    R4 = "R4"
    R5 = "R5"
    CRITICAL = "Critical"
    HATCHED = "Hatched"
    CLASSICAL = "Classical"
    UNSUPPORTED = "Unsupported"

    @property
    def supported(self) -> bool:
        return self in (Region.R1, Region.R2, Region.R3, Region.R4, Region.R5)


class EffectiveForm(str, enum.Enum):
    FOURTH = "FourthOrder"
    FOURTH_PLUS_SECOND = "FourthPlusSecond"
    SECOND = "SecondOrder"
    NONE = "None"


_MESSAGES = {
    Region.CLASSICAL: "Classical regime (alpha = beta): standard two-scale homogenization, no localization",
    Region.CRITICAL: "Critical case beta = 4 is not covered",
    Region.HATCHED: "Hatched region 3 <= beta < 4, alpha < beta - 2 is not covered",
    Region.UNSUPPORTED: "parameters lie outside the supported regions R1-R5",
}


class UnsupportedRegion(ValueError):
    def __init__(self, region: Region, point=None):
        self.region = region
        msg = _MESSAGES.get(region, f"region {region.value} is not supported")
        if point is not None:
            msg = f"{msg} (alpha={float(point.alpha):g}, beta={float(point.beta):g})"
        super().__init__(msg)


def parse_number(value) -> Number:
    """Accept floats, ints or exact rationals written as ``"p/q"``."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    return float(value)


def parse_decimal(text: str, snap_digits: int = 8) -> Number:
    """Exact value of a command-line number.

    Rationals ``"p/q"`` and short decimals are taken literally.  A decimal
    with at least ``snap_digits`` fractional digits is read as a truncated
    expansion and replaced by the simplest fraction within half a unit of its
    last digit, so ``0.3333333333`` becomes ``1/3``.
    """
    text = text.strip()
    value = Fraction(text)
    mantissa = text.lower().split("e")[0]
    if "." in mantissa and "e" not in text.lower():
        digits = len(mantissa.split(".")[1])
        if digits >= snap_digits:
            half = Fraction(1, 2 * 10**digits)
            return _simplest_between(value - half, value + half)
    return value


def _simplest_between(lo: Fraction, hi: Fraction) -> Fraction:
    """Fraction with the smallest denominator in ``[lo, hi]`` (Stern-Brocot descent)."""
    if lo <= 0 <= hi:
        return Fraction(0)
    if hi < 0:
        return -_simplest_between(-hi, -lo)
    fl = lo.numerator // lo.denominator
    if Fraction(fl) == lo:
        return lo
    if fl + 1 <= hi:
        return Fraction(fl + 1)
    # lo and hi share the integer part fl: recurse on the reciprocals of the remainders
    return fl + 1 / _simplest_between(1 / (hi - fl), 1 / (lo - fl))


@dataclass(frozen=True)
class ParameterPoint:
    alpha: Number
    beta: Number

    def __post_init__(self):
        if not all(math.isfinite(float(v)) for v in (self.alpha, self.beta)):
            raise ValueError("alpha and beta must be finite")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.beta <= 0:
            raise ValueError("beta must be > 0")

    @classmethod
    def of(cls, alpha, beta) -> "ParameterPoint":
        return cls(parse_number(alpha), parse_number(beta))

    @property
    def exact(self) -> bool:
        return isinstance(self.alpha, Fraction) and isinstance(self.beta, Fraction)


def classify(p: ParameterPoint) -> Region:
    """Assign exactly one region label; equalities use absolute tolerance 1e-12
    unless both parameters are exact rationals."""
    a, b = p.alpha, p.beta
    tol = 0 if p.exact else EQ_TOL

    def eq(u, v):
        return abs(u - v) <= tol

    def lt(u, v):
        return u < v - tol

    def le(u, v):
        return u <= v + tol

    if le(0, a) and lt(a, 1) and lt(3 * a, b) and lt(b, 3):
        return Region.R1
    if lt(0, a) and lt(a, 1) and eq(b, 3 * a):
        return Region.R2
    if lt(0, a) and lt(a, 2) and lt(a, b) and lt(b, 3 * a) and lt(b, a + 2):
        return Region.R3
    if eq(a, 2) and lt(2, b) and lt(b, 4):
        return Region.R4
    if lt(2, a) and lt(a, 4) and lt(a, b) and lt(b, 4):
        return Region.R5
    if eq(a, b):
        return Region.CLASSICAL
    if eq(b, 4) and lt(a, 4):
        return Region.CRITICAL
    if le(3, b) and lt(b, 4) and lt(a, b - 2):
        return Region.HATCHED
    return Region.UNSUPPORTED


@dataclass(frozen=True)
class RegionScaling:
    """Exponents of the two-term expansion

    ``lambda = c0 / eps**shift + eta / eps**eta_exponent``,
    ``u(x) = v((x - x*) / eps**gamma)``, ``||u||^2 = eps**norm_exponent``.
    """

    region: Region
    shift_exponent: float
    eta_exponent: float
    gamma: float
    norm_exponent: float
    form: EffectiveForm
    dim: int

    def to_dict(self) -> dict:
        return {
            "region": self.region.value,
            "shift_exponent": self.shift_exponent,
            "eta_exponent": self.eta_exponent,
            "gamma": self.gamma,
            "norm_exponent": self.norm_exponent,
            "effective_form": self.form.value,
            "dim": self.dim,
        }


def scaling(p: ParameterPoint, d: int) -> RegionScaling:
    region = classify(p)
    a, b = p.alpha, p.beta
    if region is Region.R1:
        shift, eta, gamma, form = b, 2 * b / 3, b / 6, EffectiveForm.FOURTH
    elif region is Region.R2:
        shift, eta, gamma, form = 3 * a, 2 * a, a / 2, EffectiveForm.FOURTH_PLUS_SECOND
    elif region.supported:
        shift, eta, gamma, form = b, (a + b) / 2, (b - a) / 4, EffectiveForm.SECOND
    else:
        raise UnsupportedRegion(region, p)
    return RegionScaling(region, float(shift), float(eta), float(gamma), float(d * gamma), form, d)
