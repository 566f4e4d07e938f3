"""Scalar force-extension law of a single bond.

The law is trilinear in tension: linear elastic up to the yield extension,
linearly hardening up to the fracture extension, and zero beyond it. In
compression it either mirrors the tension curve (``"symmetric"``) or stays
linear elastic without yield or fracture (``"linear_only"``). A positive
smoothing radius replaces each yield kink by a quadratic blend so the law is
C1 below the fracture drop.

Forces are signed: positive in tension, negative in compression.

Derivatives on an unsmoothed kink use the left-limit slope. The vectorized
:func:`law_response` applies that convention silently; the scalar
:func:`tangent_modulus` raises :class:`KinkAmbiguity` instead so callers
notice.
"""
from dataclasses import asdict, dataclass
import math

import numpy as np

from .errors import (
    DegenerateBond,
    InvalidLawParameters,
    KinkAmbiguity,
    NonFiniteExtension,
    SmoothingDisabled,
)

COMPRESSION_MODES = ("symmetric", "linear_only")

# column layout of packed parameter rows shared with the kernels
K, EY, H, EF, SYM, R = range(6)
N_PARAMS = 6

# degenerate-bond threshold relative to the mean rest length
EPS_LEN_REL = 1e-12


@dataclass(frozen=True)
class MaterialLaw:
    stiffness: float
    yield_extension: float
    hardening_ratio: float
    fracture_extension: float
    compression_mode: str = "symmetric"
    smoothing_radius: float = 0.0

    def __post_init__(self):
        k, ey, h = self.stiffness, self.yield_extension, self.hardening_ratio
        ef, r = self.fracture_extension, self.smoothing_radius
        for name in ("stiffness", "yield_extension", "hardening_ratio",
                     "fracture_extension", "smoothing_radius"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise InvalidLawParameters(f"{name} must be a finite number, got {v!r}")
        if k <= 0:
            raise InvalidLawParameters(f"stiffness must be > 0, got {k}")
        if not 0 < ey < ef:
            raise InvalidLawParameters(
                f"need 0 < yield_extension < fracture_extension, got {ey}, {ef}")
        if not 0 <= h < 1:
            raise InvalidLawParameters(f"hardening_ratio must be in [0, 1), got {h}")
        if self.compression_mode not in COMPRESSION_MODES:
            raise InvalidLawParameters(
                f"compression_mode must be one of {COMPRESSION_MODES}, "
                f"got {self.compression_mode!r}")
        if r < 0:
            raise InvalidLawParameters(f"smoothing_radius must be >= 0, got {r}")
        if r > 0 and not (r < (ef - ey) / 2 and r < ey / 2):
            raise InvalidLawParameters(
                "smoothing_radius must be below (fracture_extension - yield_extension)/2 "
                f"and yield_extension/2, got {r}")

    @classmethod
    def linear(cls, stiffness, *, compression_mode="symmetric"):
        """A law that stays linear for all practical extensions."""
        return cls(stiffness, 1e200, 0.0, 2e200, compression_mode)

    @property
    def symmetric(self):
        return self.compression_mode == "symmetric"

    def packed(self):
        """Parameters as a row in the kernel layout ``[k, e_y, h, e_f, sym, r]``."""
        return np.array([self.stiffness, self.yield_extension, self.hardening_ratio,
                         self.fracture_extension, float(self.symmetric),
                         self.smoothing_radius])

    def kinks(self):
        """Regime boundaries in extension, ascending."""
        pts = [self.yield_extension, self.fracture_extension]
        if self.symmetric:
            pts = [-self.fracture_extension, -self.yield_extension] + pts
        return tuple(pts)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def pack_laws(laws):
    """Stack a sequence of laws into an ``(L, 6)`` parameter table."""
    return np.vstack([law.packed() for law in laws])


def law_response(e, params):
    """Vectorized signed force and slope.

    ``params`` broadcasts against ``e`` along a trailing axis of length 6.
    Returns ``(f, fprime)``; kinks take the left-limit slope.
    """
    e = np.asarray(e, dtype=float)
    params = np.asarray(params, dtype=float)
    k, ey, h, ef, sym, r = np.moveaxis(params, -1, 0)
    sym = sym != 0.0

    neg = e < 0
    mirror = neg & sym
    t = np.where(mirror, -e, e)
    hk = h * k

    # which side of an exact kink the left limit in e corresponds to
    from_above = mirror
    elastic = (t < ey) | ((t == ey) & ~from_above)
    fractured = (t > ef) | ((t == ef) & from_above)
    hardening = ~elastic & ~fractured

    f_t = np.where(t <= ey, k * t, np.where(t <= ef, k * ey + hk * (t - ey), 0.0))
    fp_t = np.where(elastic, k, np.where(hardening, hk, 0.0))

    with np.errstate(all="ignore"):
        blend = (r > 0) & (np.abs(t - ey) < r)
        s = t - ey + r
        f_t = np.where(blend, k * t + (hk - k) * s * s / (4 * r), f_t)
        fp_t = np.where(blend, k + (hk - k) * s / (2 * r), fp_t)

    f = np.where(mirror, -f_t, f_t)
    fp = fp_t
    lin = neg & ~sym
    f = np.where(lin, k * e, f)
    fp = np.where(lin, k, fp)
    return f, fp


def fractured_mask(e, params):
    """True where the extension lies strictly past a fracture threshold."""
    e = np.asarray(e, dtype=float)
    params = np.asarray(params, dtype=float)
    ef = params[..., EF]
    sym = params[..., SYM] != 0.0
    return (e > ef) | (sym & (e < -ef))


def _check_extension(e):
    if not math.isfinite(e):
        raise NonFiniteExtension(f"extension must be finite, got {e!r}")


def force_magnitude(law, e, broken=False):
    """Signed bond force ``f(e)``; zero for a broken bond."""
    _check_extension(e)
    if broken:
        return 0.0
    f, _ = law_response(e, law.packed())
    return float(f)


def tangent_modulus(law, e, broken=False):
    """Exact slope ``f'(e)``.

    Raises :class:`KinkAmbiguity` when the law is unsmoothed and ``e`` sits
    exactly on a regime boundary; the exception carries the left-limit slope.
    """
    _check_extension(e)
    if broken:
        return 0.0
    _, fp = law_response(e, law.packed())
    fp = float(fp)
    if law.smoothing_radius == 0 and e in law.kinks():
        raise KinkAmbiguity(e, fp)
    return fp


def smooth_evaluate(law, e):
    """Force of the smoothed law; requires a positive smoothing radius."""
    if law.smoothing_radius <= 0:
        raise SmoothingDisabled("smoothing_radius is 0; use force_magnitude")
    return force_magnitude(law, e)


def secant_coefficient(law, y_norm, rest_length, broken=False, eps_len=None):
    """Diagonal entry ``f(|y| - |b|) / |y|`` of the secant matrix.

    Below ``eps_len`` the quotient is replaced by its limit, which is finite
    (zero) only when the law carries no force around ``e = -rest_length``.
    """
    if rest_length <= 0:
        raise ValueError(f"rest_length must be > 0, got {rest_length}")
    if broken:
        return 0.0
    if eps_len is None:
        eps_len = EPS_LEN_REL * rest_length
    e = y_norm - rest_length
    _check_extension(e)
    if y_norm < eps_len:
        f, fp = law_response(-rest_length, law.packed())
        if f == 0.0 and fp == 0.0:
            return 0.0
        raise DegenerateBond(
            f"bond collapsed (|y| = {y_norm:g}) while the law still carries "
            f"force {float(f):g} at e = {-rest_length:g}")
    return force_magnitude(law, e) / y_norm
