"""Equal-area isolatitude pixelization of the sphere (HEALPix).

Ring and nested index schemes are both supported. Every transform accepts a
scalar or an array; scalar input gives Python scalars back.

Coordinates are ``theta`` (colatitude, radians, ``[0, pi]``) and ``phi``
(east longitude, radians, ``[0, 2 pi)``). Points lying exactly on a pixel
edge are assigned by the floor conventions of the construction; edges have
measure zero so this is deterministic but otherwise arbitrary.
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "Scheme",
    "UnitSphereCoord",
    "PixelId",
    "check_nside",
    "npix",
    "ang2pix",
    "pix2ang",
    "ring2nest",
    "nest2ring",
    "latlon_to_pixel",
    "pixel_to_latlon",
]

TWO_PI = 2.0 * math.pi
HALF_PI = 0.5 * math.pi
TWO_THIRDS = 2.0 / 3.0
THETA_TOLERANCE = 1e-12

# face layout: ring-number offset and phi offset of each base pixel
_JRLL = np.array([2, 2, 2, 2, 3, 3, 3, 3, 4, 4, 4, 4], dtype=np.int64)
_JPLL = np.array([1, 3, 5, 7, 0, 2, 4, 6, 1, 3, 5, 7], dtype=np.int64)


class Scheme(str, Enum):
    RING = "ring"
    NESTED = "nested"


@dataclass(frozen=True)
class UnitSphereCoord:
    """A point on the unit sphere; ``theta`` is colatitude, ``phi`` east longitude."""

    theta: float
    phi: float

    def __post_init__(self):
        theta = _checked_theta(float(self.theta))
        object.__setattr__(self, "theta", float(theta))
        object.__setattr__(self, "phi", float(_normalize_phi(float(self.phi))))

    @classmethod
    def from_latlon(cls, lat_deg: float, lon_east_deg: float) -> "UnitSphereCoord":
        return cls(math.radians(90.0 - lat_deg), math.radians(lon_east_deg))

    @property
    def lat_deg(self) -> float:
        return 90.0 - math.degrees(self.theta)

    @property
    def lon_deg(self) -> float:
        return math.degrees(self.phi)


@dataclass(frozen=True, order=True)
class PixelId:
    index: int
    nside: int
    scheme: Scheme = Scheme.RING

    def __post_init__(self):
        check_nside(self.nside)
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not 0 <= self.index < npix(self.nside):
            raise ValueError(f"pixel {self.index} out of range for nside={self.nside}")

    def to(self, scheme) -> "PixelId":
        scheme = Scheme(scheme)
        if scheme == self.scheme:
            return self
        convert = ring2nest if self.scheme == Scheme.RING else nest2ring
        return PixelId(convert(self.nside, self.index), self.nside, scheme)


def check_nside(nside) -> int:
    """Validate that ``nside`` is a positive power of two and return it as int."""
    if isinstance(nside, bool) or int(nside) != nside:
        raise ValueError(f"nside must be an integer, got {nside!r}")
    nside = int(nside)
    if nside < 1 or nside & (nside - 1):
        raise ValueError(f"nside must be a positive power of two, got {nside}")
    return nside


def npix(nside: int) -> int:
    """Total number of pixels, ``12 * nside**2``."""
    nside = check_nside(nside)
    return 12 * nside * nside


def _order(nside: int) -> int:
    return nside.bit_length() - 1


def _checked_theta(theta):
    theta = np.asarray(theta, dtype=np.float64)
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta must be finite")
    if np.any(theta < -THETA_TOLERANCE) or np.any(theta > math.pi + THETA_TOLERANCE):
        raise ValueError("theta outside [0, pi]")
    return np.clip(theta, 0.0, math.pi)


def _normalize_phi(phi):
    phi = np.asarray(phi, dtype=np.float64)
    if not np.all(np.isfinite(phi)):
        raise ValueError("phi must be finite")
    phi = np.mod(phi, TWO_PI)
    # mod of a tiny negative value can round up to exactly 2 pi
    return np.where(phi >= TWO_PI, 0.0, phi)


def _checked_pixels(nside, pix):
    pix = np.asarray(pix)
    if pix.dtype.kind not in "iu":
        if not np.all(np.equal(np.mod(pix, 1), 0)):
            raise ValueError("pixel indices must be integers")
    pix = pix.astype(np.int64)
    if np.any(pix < 0) or np.any(pix >= npix(nside)):
        raise ValueError(f"pixel index out of range [0, {npix(nside)})")
    return pix


def _spread_bits(v):
    # interleave zeros between the low 32 bits of v
    v = v & 0x00000000FFFFFFFF
    v = (v | (v << 16)) & 0x0000FFFF0000FFFF
    v = (v | (v << 8)) & 0x00FF00FF00FF00FF
    v = (v | (v << 4)) & 0x0F0F0F0F0F0F0F0F
    v = (v | (v << 2)) & 0x3333333333333333
    v = (v | (v << 1)) & 0x5555555555555555
    return v


def _compress_bits(v):
    v = v & 0x5555555555555555
    v = (v | (v >> 1)) & 0x3333333333333333
    v = (v | (v >> 2)) & 0x0F0F0F0F0F0F0F0F
    v = (v | (v >> 4)) & 0x00FF00FF00FF00FF
    v = (v | (v >> 8)) & 0x0000FFFF0000FFFF
    v = (v | (v >> 16)) & 0x00000000FFFFFFFF
    return v


def _xyf2nest(nside, ix, iy, face):
    return face * nside * nside + _spread_bits(ix) + (_spread_bits(iy) << 1)


def _nest2xyf(nside, pix):
    npface = nside * nside
    face = pix // npface
    ipf = pix % npface
    return _compress_bits(ipf), _compress_bits(ipf >> 1), face


def _isqrt(v):
    # exact integer square root for int64 arrays
    r = np.floor(np.sqrt(v.astype(np.float64))).astype(np.int64)
    r = np.where(r * r > v, r - 1, r)
    r = np.where((r + 1) * (r + 1) <= v, r + 1, r)
    return r


def _polar_terms(theta, z):
    # 1 - |z| computed without cancellation near the poles
    return np.where(z > 0, 2.0 * np.sin(0.5 * theta) ** 2, 2.0 * np.cos(0.5 * theta) ** 2)


def _ang2pix_ring(nside, theta, phi):
    z = np.cos(theta)
    za = np.abs(z)
    tt = np.mod(phi / HALF_PI, 4.0)
    n4 = 4 * nside
    ncap = 2 * nside * (nside - 1)
    total = 12 * nside * nside

    # equatorial belt
    temp1 = nside * (0.5 + tt)
    temp2 = nside * z * 0.75
    jp = np.floor(temp1 - temp2).astype(np.int64)
    jm = np.floor(temp1 + temp2).astype(np.int64)
    ir = nside + 1 + jp - jm
    kshift = 1 - (ir & 1)
    ip = (jp + jm - nside + kshift + 1) // 2
    ip = np.mod(ip, n4)
    pix_eq = ncap + (ir - 1) * n4 + ip

    # polar caps
    tp = tt - np.floor(tt)
    tmp = nside * np.sqrt(3.0 * _polar_terms(theta, z))
    jp = np.floor(tp * tmp).astype(np.int64)
    jm = np.floor((1.0 - tp) * tmp).astype(np.int64)
    ir = jp + jm + 1
    ip = np.floor(tt * ir).astype(np.int64)
    ip = np.mod(ip, 4 * ir)
    pix_cap = np.where(z > 0, 2 * ir * (ir - 1) + ip, total - 2 * ir * (ir + 1) + ip)

    return np.where(za <= TWO_THIRDS, pix_eq, pix_cap)


def _ang2pix_nest(nside, theta, phi):
    z = np.cos(theta)
    za = np.abs(z)
    tt = np.mod(phi / HALF_PI, 4.0)
    order = _order(nside)

    temp1 = nside * (0.5 + tt)
    temp2 = nside * z * 0.75
    jp = np.floor(temp1 - temp2).astype(np.int64)
    jm = np.floor(temp1 + temp2).astype(np.int64)
    ifp = jp >> order
    ifm = jm >> order
    face_eq = np.where(ifp == ifm, ifp | 4, np.where(ifp < ifm, ifp, ifm + 8))
    ix_eq = jm & (nside - 1)
    iy_eq = nside - (jp & (nside - 1)) - 1

    ntt = np.minimum(np.floor(tt).astype(np.int64), 3)
    tp = tt - ntt
    tmp = nside * np.sqrt(3.0 * _polar_terms(theta, z))
    jp = np.minimum(np.floor(tp * tmp).astype(np.int64), nside - 1)
    jm = np.minimum(np.floor((1.0 - tp) * tmp).astype(np.int64), nside - 1)
    north = z >= 0
    face_cap = np.where(north, ntt, ntt + 8)
    ix_cap = np.where(north, nside - jm - 1, jp)
    iy_cap = np.where(north, nside - jp - 1, jm)

    eq = za <= TWO_THIRDS
    face = np.where(eq, face_eq, face_cap)
    ix = np.where(eq, ix_eq, ix_cap)
    iy = np.where(eq, iy_eq, iy_cap)
    return _xyf2nest(nside, ix, iy, face)


def _ring_phi(numerator, ring_size):
    # identical arithmetic for both schemes keeps centers bit-for-bit equal
    return numerator * math.pi / (4 * ring_size)


def _pix2ang_ring(nside, pix):
    total = 12 * nside * nside
    ncap = 2 * nside * (nside - 1)
    fact2 = 4.0 / total
    fact1 = 2 * nside * fact2

    # north cap
    iring_n = (1 + _isqrt(1 + 2 * pix)) >> 1
    iphi_n = pix + 1 - 2 * iring_n * (iring_n - 1)
    z_n = 1.0 - iring_n.astype(np.float64) ** 2 * fact2
    phi_n = _ring_phi(2 * iphi_n - 1, iring_n)

    # equatorial belt
    ip = pix - ncap
    tmp = ip // (4 * nside)
    iring_e = tmp + nside
    iphi_e = ip - 4 * nside * tmp + 1
    fodd = np.where((iring_e + nside) & 1, 2, 1)
    z_e = (2 * nside - iring_e) * fact1
    phi_e = _ring_phi(2 * iphi_e - fodd, nside)

    # south cap
    ip = np.maximum(total - pix, 1)
    iring_s = (1 + _isqrt(2 * ip - 1)) >> 1
    iphi_s = 4 * iring_s + 1 - (ip - 2 * iring_s * (iring_s - 1))
    z_s = -1.0 + iring_s.astype(np.float64) ** 2 * fact2
    phi_s = _ring_phi(2 * iphi_s - 1, iring_s)

    north = pix < ncap
    south = pix >= total - ncap
    z = np.where(north, z_n, np.where(south, z_s, z_e))
    phi = np.where(north, phi_n, np.where(south, phi_s, phi_e))
    return np.arccos(np.clip(z, -1.0, 1.0)), phi


def _pix2ang_nest(nside, pix):
    total = 12 * nside * nside
    fact2 = 4.0 / total
    fact1 = 2 * nside * fact2
    ix, iy, face = _nest2xyf(nside, pix)

    jr = _JRLL[face] * nside - ix - iy - 1
    north = jr < nside
    south = jr > 3 * nside
    nr = np.where(north, jr, np.where(south, 4 * nside - jr, nside))
    z = np.where(
        north,
        1.0 - nr.astype(np.float64) ** 2 * fact2,
        np.where(south, nr.astype(np.float64) ** 2 * fact2 - 1.0, (2 * nside - jr) * fact1),
    )
    kshift = np.where(north | south, 0, (jr - nside) & 1)
    jp = (_JPLL[face] * nr + ix - iy + 1 + kshift) // 2
    jp = np.where(jp > 4 * nside, jp - 4 * nside, jp)
    jp = np.where(jp < 1, jp + 4 * nside, jp)
    phi = _ring_phi(2 * jp - kshift - 1, nr)
    return np.arccos(np.clip(z, -1.0, 1.0)), phi


def _nest2ring(nside, pix):
    total = 12 * nside * nside
    ncap = 2 * nside * (nside - 1)
    ix, iy, face = _nest2xyf(nside, pix)
    jr = _JRLL[face] * nside - ix - iy - 1

    north = jr < nside
    south = jr > 3 * nside
    nr = np.where(north, jr, np.where(south, 4 * nside - jr, nside))
    n_before = np.where(
        north,
        2 * nr * (nr - 1),
        np.where(south, total - 2 * (nr + 1) * nr, ncap + (jr - nside) * 4 * nside),
    )
    kshift = np.where(north | south, 0, (jr - nside) & 1)
    jp = (_JPLL[face] * nr + ix - iy + 1 + kshift) // 2
    jp = np.where(jp > 4 * nside, jp - 4 * nside, jp)
    jp = np.where(jp < 1, jp + 4 * nside, jp)
    return n_before + jp - 1


def _ring2nest(nside, pix):
    total = 12 * nside * nside
    ncap = 2 * nside * (nside - 1)
    nl2 = 2 * nside
    order = _order(nside)

    # north cap
    iring_n = (1 + _isqrt(1 + 2 * pix)) >> 1
    iphi_n = pix + 1 - 2 * iring_n * (iring_n - 1)
    face_n = (iphi_n - 1) // np.maximum(iring_n, 1)

    # equatorial belt
    ip = pix - ncap
    tmp = ip >> (order + 2)
    iring_e = tmp + nside
    iphi_e = ip - tmp * 4 * nside + 1
    ire = tmp + 1
    irm = nl2 + 2 - ire
    ifm = (iphi_e - (ire >> 1) + nside - 1) >> order
    ifp = (iphi_e - (irm >> 1) + nside - 1) >> order
    face_e = np.where(ifp == ifm, ifp | 4, np.where(ifp < ifm, ifp, ifm + 8))

    # south cap
    ip = np.maximum(total - pix, 1)
    iring_s = (1 + _isqrt(2 * ip - 1)) >> 1
    iphi_s = 4 * iring_s + 1 - (ip - 2 * iring_s * (iring_s - 1))
    face_s = 8 + (iphi_s - 1) // iring_s

    north = pix < ncap
    south = pix >= total - ncap
    iring = np.where(north, iring_n, np.where(south, 4 * nside - iring_s, iring_e))
    iphi = np.where(north, iphi_n, np.where(south, iphi_s, iphi_e))
    nr = np.where(north, iring_n, np.where(south, iring_s, nside))
    kshift = np.where(north | south, 0, (iring_e + nside) & 1)
    face = np.where(north, face_n, np.where(south, face_s, face_e))

    irt = iring - (2 + (face >> 2)) * nside + 1
    ipt = 2 * iphi - _JPLL[face] * nr - kshift - 1
    ipt = np.where(ipt >= nl2, ipt - 8 * nside, ipt)
    ix = (ipt - irt) >> 1
    iy = (-ipt - irt) >> 1
    return _xyf2nest(nside, ix, iy, face)


def _scalar_or_array(template, value):
    if np.ndim(template) == 0:
        return value.item()
    return value


def ang2pix(nside: int, theta, phi, scheme=Scheme.RING):
    """Index of the pixel containing each ``(theta, phi)`` point.

    Raises ValueError for non-finite angles or ``theta`` outside ``[0, pi]``
    by more than 1e-12 rad (small excursions are clamped).
    """
    nside = check_nside(nside)
    shape_src = np.broadcast(np.asarray(theta), np.asarray(phi))
    theta = _checked_theta(theta)
    phi = _normalize_phi(phi)
    theta, phi = np.broadcast_arrays(theta, phi)
    if Scheme(scheme) == Scheme.RING:
        pix = _ang2pix_ring(nside, theta, phi)
    else:
        pix = _ang2pix_nest(nside, theta, phi)
    if shape_src.ndim == 0:
        return int(pix)
    return pix


def pix2ang(nside: int, pix, scheme=Scheme.RING):
    """Center ``(theta, phi)`` of each pixel."""
    nside = check_nside(nside)
    arr = _checked_pixels(nside, pix)
    if Scheme(scheme) == Scheme.RING:
        theta, phi = _pix2ang_ring(nside, arr)
    else:
        theta, phi = _pix2ang_nest(nside, arr)
    return _scalar_or_array(pix, theta), _scalar_or_array(pix, phi)


def ring2nest(nside: int, pix):
    nside = check_nside(nside)
    arr = _checked_pixels(nside, pix)
    return _scalar_or_array(pix, _ring2nest(nside, arr))


def nest2ring(nside: int, pix):
    nside = check_nside(nside)
    arr = _checked_pixels(nside, pix)
    return _scalar_or_array(pix, _nest2ring(nside, arr))


def latlon_to_pixel(nside: int, lat_deg, lon_east_deg, scheme=Scheme.RING):
    """Pixel of a point given in degrees north / degrees east.

    Latitudes are treated as planetocentric; longitudes are reduced mod 360.
    """
    lat = np.asarray(lat_deg, dtype=np.float64)
    lon = np.asarray(lon_east_deg, dtype=np.float64)
    if not (np.all(np.isfinite(lat)) and np.all(np.isfinite(lon))):
        raise ValueError("latitude and longitude must be finite")
    if np.any(np.abs(lat) > 90.0):
        raise ValueError("latitude outside [-90, 90]")
    theta = np.radians(90.0 - lat)
    phi = np.radians(np.mod(lon, 360.0))
    if lat.ndim == 0 and lon.ndim == 0:
        return ang2pix(nside, float(theta), float(phi), scheme)
    return ang2pix(nside, theta, phi, scheme)


def pixel_to_latlon(nside: int, pix, scheme=Scheme.RING):
    """Pixel center as ``(lat_deg, lon_east_deg)``."""
    theta, phi = pix2ang(nside, pix, scheme)
    return 90.0 - np.degrees(theta), np.degrees(phi)
