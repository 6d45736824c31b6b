"""Bivariate exponential additive models and their cumulant machinery.

The pair of prices is (X, S) = (exp(Z1), exp(Z2)) where Z is an additive
process built from a correlated Brownian part plus an optional compound
Poisson stream with jointly Gaussian jump sizes.  Everything the hedging
engine needs reduces to the cumulant rate

    psi(z) = b.z + z'Sigma z/2 + lam*(exp(m.z + z'Delta z/2) - 1)

evaluated at complex exponent pairs: covariation rates, the hedge ratio
weight gamma, and the time-propagation coefficient lambda of the power
claims.  All quantities are entire in z for this family, so contours can
sit anywhere in C^2.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, StructureConditionError

__all__ = [
    "AdditiveModel",
    "PiecewiseAdditiveModel",
    "GaussianJumps",
    "FixedJumps",
    "GeneratorCheck",
    "generator_gap",
]


def _as_matrix(a, name: str) -> np.ndarray:
    m = np.asarray(a, dtype=float)
    if m.shape != (2, 2):
        raise DomainError(f"{name} must be a 2x2 matrix, got shape {m.shape}")
    if not np.allclose(m, m.T, atol=1e-12):
        raise DomainError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(m).min() < -1e-10 * (1.0 + np.abs(m).max()):
        raise DomainError(f"{name} must be positive semidefinite")
    return 0.5 * (m + m.T)


def _psd_factor(m: np.ndarray) -> np.ndarray:
    """A 2x2 factor L with L L' = m, stable for singular matrices."""
    vals, vecs = np.linalg.eigh(m)
    return vecs @ np.diag(np.sqrt(np.clip(vals, 0.0, None)))


@dataclass(eq=False)
class AdditiveModel:
    """Time-homogeneous exponential additive pair.

    drift: log-price drift vector b per unit time.
    covariance: diffusion covariance Sigma per unit time.
    horizon: claim maturity T.
    spot: initial prices (X0, S0).
    jump_intensity, jump_mean, jump_cov: compound Poisson stream with
        N(jump_mean, jump_cov) jumps in the log pair; intensity zero
        gives the plain correlated lognormal model.
    """

    drift: np.ndarray
    covariance: np.ndarray
    horizon: float
    spot: np.ndarray
    jump_intensity: float = 0.0
    jump_mean: np.ndarray | None = None
    jump_cov: np.ndarray | None = None

    def __post_init__(self):
        self.drift = np.asarray(self.drift, dtype=float).reshape(2)
        self.covariance = _as_matrix(self.covariance, "covariance")
        self.spot = np.asarray(self.spot, dtype=float).reshape(2)
        self.jump_mean = (
            np.zeros(2) if self.jump_mean is None
            else np.asarray(self.jump_mean, dtype=float).reshape(2)
        )
        self.jump_cov = (
            np.zeros((2, 2)) if self.jump_cov is None
            else _as_matrix(self.jump_cov, "jump_cov")
        )
        if not np.isfinite(self.horizon) or self.horizon <= 0:
            raise DomainError("horizon must be a positive float")
        if np.any(self.spot <= 0) or not np.all(np.isfinite(self.spot)):
            raise DomainError("spot prices must be strictly positive")
        if self.jump_intensity < 0 or not np.isfinite(self.jump_intensity):
            raise DomainError("jump intensity must be nonnegative")
        self.horizon = float(self.horizon)
        self.jump_intensity = float(self.jump_intensity)
        for a in (self.drift, self.covariance, self.spot, self.jump_mean, self.jump_cov):
            a.flags.writeable = False
        rb = float(np.real(self.psi(0.0, 2.0) - 2.0 * self.psi(0.0, 1.0)))
        if rb <= 0.0:
            raise StructureConditionError(
                "martingale part of the traded asset is degenerate: the "
                f"bracket rate psi(0,2) - 2*psi(0,1) = {rb:.3e} must be "
                "positive for the hedge ratio to be defined"
            )
        self._rho_bar = rb

    # -- construction helpers -------------------------------------------------

    @classmethod
    def black_scholes(
        cls,
        *,
        log_drift: Sequence[float],
        vol_x: float,
        vol_s: float,
        corr: float,
        horizon: float,
        spot: Sequence[float],
    ) -> "AdditiveModel":
        cov = vols_to_covariance(vol_x, vol_s, corr)
        return cls(drift=np.asarray(log_drift), covariance=cov, horizon=horizon, spot=np.asarray(spot))

    @classmethod
    def merton(
        cls,
        *,
        log_drift: Sequence[float],
        vol_x: float,
        vol_s: float,
        corr: float,
        jump_intensity: float,
        jump_mean: Sequence[float],
        jump_vol_x: float,
        jump_vol_s: float,
        jump_corr: float,
        horizon: float,
        spot: Sequence[float],
    ) -> "AdditiveModel":
        return cls(
            drift=np.asarray(log_drift),
            covariance=vols_to_covariance(vol_x, vol_s, corr),
            horizon=horizon,
            spot=np.asarray(spot),
            jump_intensity=jump_intensity,
            jump_mean=np.asarray(jump_mean),
            jump_cov=vols_to_covariance(jump_vol_x, jump_vol_s, jump_corr),
        )

    @property
    def kind(self) -> str:
        return "black-scholes" if self.jump_intensity == 0.0 else "merton"

    # -- cumulant machinery ---------------------------------------------------

    def psi(self, z1, z2):
        """Cumulant rate: E[(X_t/X_0)^z1 (S_t/S_0)^z2] = exp(t*psi(z))."""
        z1 = np.asarray(z1, dtype=complex)
        z2 = np.asarray(z2, dtype=complex)
        b, c = self.drift, self.covariance
        quad = 0.5 * (c[0, 0] * z1 * z1 + 2.0 * c[0, 1] * z1 * z2 + c[1, 1] * z2 * z2)
        out = b[0] * z1 + b[1] * z2 + quad
        if self.jump_intensity > 0.0:
            m, d = self.jump_mean, self.jump_cov
            ex = (
                m[0] * z1 + m[1] * z2
                + 0.5 * (d[0, 0] * z1 * z1 + 2.0 * d[0, 1] * z1 * z2 + d[1, 1] * z2 * z2)
            )
            out = out + self.jump_intensity * (np.exp(ex) - 1.0)
        return out

    def psi_at(self, t, z1, z2):
        # time-independent cumulant rate; signature shared with the piecewise model
        return self.psi(z1, z2)

    def kappa(self, t, z1, z2):
        """Cumulant of the log pair over [0, t]."""
        self._check_time(t, allow_zero=True)
        return np.asarray(t, dtype=float) * self.psi(z1, z2)

    def rho(self, t, za, zb):
        """Covariation cumulant kappa_t(za+zb) - kappa_t(za) - kappa_t(zb)."""
        (a1, a2), (b1, b2) = za, zb
        rate = self.psi(np.add(a1, b1), np.add(a2, b2)) - self.psi(a1, a2) - self.psi(b1, b2)
        return np.asarray(t, dtype=float) * rate

    @property
    def rho_bar(self) -> float:
        """Bracket rate of the martingale part of S; strictly positive."""
        return self._rho_bar

    def rho_s(self, t):
        self._check_time(t, allow_zero=True)
        return np.asarray(t, dtype=float) * self._rho_bar

    @property
    def traded_growth_rate(self) -> float:
        """psi(0,1): exponential growth rate of E[S_t]."""
        return float(np.real(self.psi(0.0, 1.0)))

    def gamma(self, z1, z2):
        """Hedge-ratio weight of the power claim x**z1 s**z2.

        Ratio of the (claim, S) covariation rate to the bracket rate of
        S; constant in time for this family.  gamma(0,1) = 1 and
        gamma(0,0) = 0 identically.
        """
        num = self.psi(z1, np.asarray(z2, dtype=complex) + 1.0) - self.psi(z1, z2) - self.psi(0.0, 1.0)
        return num / self._rho_bar

    def gamma_at(self, t, z1, z2):
        return self.gamma(z1, z2)

    def eta_rate(self, z1, z2):
        return self.psi(z1, z2) - self.gamma(z1, z2) * self.psi(0.0, 1.0)

    def eta_rate_at(self, t, z1, z2):
        return self.eta_rate(z1, z2)

    def eta(self, t, z1, z2):
        """Drift-corrected cumulant integral entering the propagation factor."""
        self._check_time(t, allow_zero=True)
        return np.asarray(t, dtype=float) * self.eta_rate(z1, z2)

    def lambda_coeff(self, t, z1, z2):
        """Propagation factor exp((T - t) * eta_rate(z)); equals 1 at T."""
        self._check_time(t, allow_zero=True)
        tau = self.horizon - np.asarray(t, dtype=float)
        return np.exp(tau * self.eta_rate(z1, z2))

    def gamma_affine_at(self, t, axis: int, fixed_exponent: complex):
        """Affine asymptote (g0, g1) of gamma along a contour, or None.

        Along a line in coordinate `axis` with the other exponent held
        at f, gamma(z) = g0 + g1*z_axis + r(z) with r(z) -> 0 as
        |Im z_axis| grows.  The Gaussian part is exactly affine; the
        jump part converges to a constant when it either loses mass at
        large imaginary argument (jump spread in the varying coordinate)
        or does not involve the varying coordinate at all.  Returns None
        when the jump part oscillates without a limit.
        """
        c = self.covariance
        f = complex(fixed_exponent)
        if axis == 1:
            g1 = c[0, 1]
            g0 = c[1, 1] * f
        else:
            g1 = c[1, 1]
            g0 = c[0, 1] * f
        if self.jump_intensity > 0.0:
            m, d = self.jump_mean, self.jump_cov
            ks = m[1] + 0.5 * d[1, 1]  # jump cumulant at the unit S exponent
            a = axis - 1
            o = 1 - a
            if d[a, a] > 0.0:
                # running-coordinate spread kills the kernel term
                g0 = g0 - self.jump_intensity * (np.exp(ks) - 1.0)
            elif m[a] != 0.0:
                return None
            else:
                # kernel constant along the line (d[a,a]=0 forces d[a,o]=0)
                cf = m[o] * f + 0.5 * d[o, o] * f * f
                shift = d[1, 0] * (f if a == 1 else 0.0) + d[1, 1] * (f if a == 0 else 0.0)
                g0 = g0 + self.jump_intensity * (
                    np.exp(cf) * (np.exp(ks + shift) - 1.0) - (np.exp(ks) - 1.0)
                )
        return (g0 / self._rho_bar, g1 / self._rho_bar)

    def tradeoff(self, t):
        """Mean-variance trade-off K_t = t * psi(0,1)^2 / rho_bar."""
        self._check_time(t, allow_zero=True)
        mu = self.traded_growth_rate
        return np.asarray(t, dtype=float) * mu * mu / self._rho_bar

    def rho_bar_at(self, t) -> float:
        return self._rho_bar

    def traded_growth_rate_at(self, t) -> float:
        return self.traded_growth_rate

    # -- misc -----------------------------------------------------------------

    def diffusion_factor(self) -> np.ndarray:
        return _psd_factor(self.covariance)

    def jump_factor(self) -> np.ndarray:
        return _psd_factor(self.jump_cov)

    def digest(self) -> str:
        blob = json.dumps(
            {
                "drift": np.round(self.drift, 14).tolist(),
                "cov": np.round(self.covariance, 14).tolist(),
                "horizon": round(self.horizon, 14),
                "spot": np.round(self.spot, 14).tolist(),
                "ji": round(self.jump_intensity, 14),
                "jm": np.round(self.jump_mean, 14).tolist(),
                "jc": np.round(self.jump_cov, 14).tolist(),
            },
            sort_keys=True,
        ).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def _check_time(self, t, allow_zero: bool = False):
        t = np.asarray(t, dtype=float)
        lo = -1e-12 if allow_zero else 0.0
        if np.any(t < lo) or np.any(t > self.horizon * (1.0 + 1e-12)):
            raise DomainError(f"time must lie in [0, {self.horizon}]")


def vols_to_covariance(vol_x: float, vol_s: float, corr: float) -> np.ndarray:
    if vol_x < 0 or vol_s < 0:
        raise DomainError("volatilities must be nonnegative")
    if not -1.0 <= corr <= 1.0:
        raise DomainError("correlation must lie in [-1, 1]")
    return np.array(
        [
            [vol_x ** 2, corr * vol_x * vol_s],
            [corr * vol_x * vol_s, vol_s ** 2],
        ]
    )


class PiecewiseAdditiveModel:
    """Piecewise-constant-in-time extension of AdditiveModel.

    Built from (duration, AdditiveModel) pieces sharing the same spot;
    the same closed forms apply segment-wise, with integrals replaced by
    sums over segment overlaps.  Every segment must satisfy the bracket
    condition on its own (degenerate segments are rejected, since the
    hedge ratio is undefined on them).
    """

    def __init__(self, pieces: Sequence[tuple[float, AdditiveModel]]):
        if not pieces:
            raise DomainError("need at least one segment")
        spans = []
        t0 = 0.0
        spot = pieces[0][1].spot
        for dur, seg in pieces:
            if dur <= 0:
                raise DomainError("segment durations must be positive")
            if not np.allclose(seg.spot, spot):
                raise DomainError("all segments must share the initial prices")
            # AdditiveModel construction already rejects rho_bar <= 0
            spans.append((t0, t0 + dur, seg))
            t0 += dur
        self.segments = tuple(spans)
        self.horizon = t0
        self.spot = spot

    kind = "piecewise"

    def _overlaps(self, lo: float, hi: float):
        for a, b, seg in self.segments:
            w = min(hi, b) - max(lo, a)
            if w > 1e-15:
                yield w, seg

    def _segment_at(self, t: float) -> AdditiveModel:
        t = min(max(float(t), 0.0), self.horizon)
        for a, b, seg in self.segments:
            if t < b or b == self.horizon:
                return seg
        return self.segments[-1][2]

    def psi_at(self, t, z1, z2):
        return self._segment_at(float(t)).psi(z1, z2)

    def kappa(self, t, z1, z2):
        t = float(t)
        out = 0.0 + 0.0j
        for w, seg in self._overlaps(0.0, t):
            out = out + w * seg.psi(z1, z2)
        return out

    def rho_s(self, t):
        return sum(w * seg.rho_bar for w, seg in self._overlaps(0.0, float(t)))

    def rho_bar_at(self, t) -> float:
        return self._segment_at(float(t)).rho_bar

    def traded_growth_rate_at(self, t) -> float:
        return self._segment_at(float(t)).traded_growth_rate

    def gamma_at(self, t, z1, z2):
        return self._segment_at(float(t)).gamma(z1, z2)

    def eta_rate_at(self, t, z1, z2):
        return self._segment_at(float(t)).eta_rate(z1, z2)

    def eta(self, t, z1, z2):
        out = 0.0 + 0.0j
        for w, seg in self._overlaps(0.0, float(t)):
            out = out + w * seg.eta_rate(z1, z2)
        return out

    def lambda_coeff(self, t, z1, z2):
        # the engine feeds vector times through the point-mass path
        t = np.asarray(t, dtype=float)
        if t.ndim > 0:
            flat = [self.lambda_coeff(ti, z1, z2) for ti in t.ravel()]
            return np.asarray(flat).reshape(t.shape)
        acc = 0.0 + 0.0j
        for w, seg in self._overlaps(float(t), self.horizon):
            acc = acc + w * seg.eta_rate(z1, z2)
        return np.exp(acc)

    def gamma_affine_at(self, t, axis: int, fixed_exponent: complex):
        return self._segment_at(float(t)).gamma_affine_at(t, axis, fixed_exponent)

    def tradeoff(self, t):
        return sum(
            w * seg.traded_growth_rate ** 2 / seg.rho_bar
            for w, seg in self._overlaps(0.0, float(t))
        )

    def digest(self) -> str:
        blob = "|".join(
            f"{b - a:.14g}:{seg.digest()}" for a, b, seg in self.segments
        ).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


# -- small-time generator check ----------------------------------------------
#
# One-dimensional sanity check tying the model's jump part to its
# infinitesimal generator, with the zero-truncation-drift convention:
# the process is the compound Poisson sum compensated by the small-jump
# mean, so L f(s) = integral (f(s+y) - f(s) - y f'(s) 1_{|y|<1}) nu(dy).

_GH_X, _GH_W = np.polynomial.hermite.hermgauss(80)


@dataclass(frozen=True)
class GaussianJumps:
    """Compound Poisson marginal with N(mean, std^2) jumps."""

    intensity: float
    mean: float
    std: float

    def __post_init__(self):
        if self.intensity < 0 or self.std < 0:
            raise DomainError("intensity and std must be nonnegative")


@dataclass(frozen=True)
class FixedJumps:
    """Compound Poisson marginal with deterministic jump size."""

    intensity: float
    size: float

    def __post_init__(self):
        if self.intensity < 0:
            raise DomainError("intensity must be nonnegative")


@dataclass(frozen=True)
class GeneratorCheck:
    finite_difference: float
    generator: float
    gap: float


def _small_jump_mean(marginal) -> float:
    """integral_{|y|<1} y nu(dy), by quadrature for the Gaussian law."""
    if isinstance(marginal, FixedJumps):
        return marginal.intensity * marginal.size * (1.0 if abs(marginal.size) < 1.0 else 0.0)
    lam, m, sd = marginal.intensity, marginal.mean, marginal.std
    if sd == 0.0:
        return lam * m * (1.0 if abs(m) < 1.0 else 0.0)
    from .payoffs import panel_nodes

    y, w = panel_nodes(-1.0, 1.0, 16)
    dens = np.exp(-0.5 * ((y - m) / sd) ** 2) / (sd * np.sqrt(2.0 * np.pi))
    return lam * float(np.sum(w * y * dens))


def _gaussian_expect(f: Callable, mean: float, std: float) -> float:
    if std == 0.0:
        return float(f(np.asarray(mean)))
    pts = mean + std * np.sqrt(2.0) * _GH_X
    return float(np.sum(_GH_W * f(pts)) / np.sqrt(np.pi))


def generator_gap(marginal, f: Callable, fprime: Callable, s: float, dt: float) -> GeneratorCheck:
    """Compare (P_dt f - f)/dt against the generator at a point.

    f must be C^2 with bounded second derivative near the mass of
    s + jumps; the gap decays linearly in dt for such f.  The transition
    expectation is computed by conditioning on the jump count, the
    generator by quadrature against the jump law.
    """
    if dt <= 0:
        raise DomainError("dt must be positive")
    lam = marginal.intensity
    comp = _small_jump_mean(marginal)
    base = s - dt * comp

    # transition expectation E[f(s + L_dt)] via the Poisson mixture
    mu = lam * dt
    pk = np.exp(-mu)
    fd = pk * float(f(np.asarray(base)))
    k = 0
    while True:
        k += 1
        pk = pk * mu / k
        if isinstance(marginal, FixedJumps):
            term = float(f(np.asarray(base + k * marginal.size)))
        else:
            term = _gaussian_expect(f, base + k * marginal.mean, marginal.std * np.sqrt(k))
        fd += pk * term
        if pk < 1e-18 and k > 2:
            break
        if k > 400:
            break
    fd_rate = (fd - float(f(np.asarray(s)))) / dt

    # generator L f(s) = lam*E[f(s+J) - f(s)] - f'(s)*integral_{|y|<1} y nu
    if isinstance(marginal, FixedJumps):
        jump_part = lam * (float(f(np.asarray(s + marginal.size))) - float(f(np.asarray(s))))
    else:
        jump_part = lam * (
            _gaussian_expect(f, s + marginal.mean, marginal.std) - float(f(np.asarray(s)))
        )
    gen = jump_part - float(fprime(np.asarray(s))) * comp
    return GeneratorCheck(finite_difference=fd_rate, generator=gen, gap=fd_rate - gen)
