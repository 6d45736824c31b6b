"""Quadratic-hedging decomposition of power-mixture claims.

For an exponential additive pair (X, S) and a claim encoded as a
PayoffMeasure, the locally risk-minimising (Foellmer-Schweizer) value
and hedge admit closed contour representations: each power payoff
x**z1 s**z2 propagates multiplicatively through the factor
lambda(t, z) = exp((T-t) * (psi(z) - gamma(z) psi(0,1))) and hedges with
gamma(z) units of the power divided by the traded price,

    y(t, x, s) = integral dPi(z) x**z1 s**z2 lambda(t, z)
    z(t, x, s) = integral dPi(z) x**z1 s**(z2-1) lambda(t, z) gamma(z).

The claim then splits as g = y(0,X0,S0) + integral z dS + orthogonal
residual.  This module evaluates both surfaces by shared quadrature over
the measure's contours, with the truncation tail either integrated in
closed form (at maturity, where lambda is 1) or bounded through the
decay of lambda at the cutoff.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import AssumptionError, ConvergenceError, DomainError
from .models import AdditiveModel
from .payoffs import (
    DEFAULT_SETTINGS,
    PayoffMeasure,
    QuadratureSettings,
    panel_nodes,
    rational_tail_integral,
)

__all__ = ["HedgeDecomposition", "decompose", "HedgeRecipe"]

_CHUNK = 4096
_TERMINAL_FRACTION = 1e-9
_IM_ABORT = 1e-5


@dataclass(frozen=True)
class HedgeRecipe:
    """Discretisation recipe for replaying the decomposition on paths."""

    initial_capital: float
    hedge_rule: str
    residual_rule: str
    value: Callable
    hedge: Callable


class _LineNodes:
    __slots__ = ("u", "w", "z1", "z2", "dens", "gamma", "eta_rate", "psi")

    def __init__(self, u, w, z1, z2, dens, gamma=None, eta_rate=None, psi=None):
        self.u, self.w, self.z1, self.z2, self.dens = u, w, z1, z2, dens
        self.gamma, self.eta_rate, self.psi = gamma, eta_rate, psi


class HedgeDecomposition:
    """Value and hedge surfaces of a claim under quadratic hedging.

    Construction runs the standing-assumption checks and computes the
    initial capital h0.  value/hedge accept broadcastable (t, x, s).
    """

    def __init__(
        self,
        model,
        measure: PayoffMeasure,
        settings: QuadratureSettings = DEFAULT_SETTINGS,
    ):
        self.model = model
        self.measure = measure
        self.settings = settings
        self._homogeneous = isinstance(model, AdditiveModel)
        self._cache: dict[tuple, _LineNodes] = {}
        self._line_stats = [
            {"levels": 0, "umult": 1, "tail_bound": 0.0, "tail_mode": "none"}
            for _ in measure.lines
        ]
        self._real = measure.is_real_claim()
        self._im_residual = 0.0
        self.assumptions = self._check_assumptions()
        x0, s0 = float(model.spot[0]), float(model.spot[1])
        h0 = complex(np.asarray(self._flat(np.array([0.0]), np.array([x0]), np.array([s0]), "y")[0]).ravel()[0])
        if self._real:
            scale = max(1.0, abs(h0.real))
            if abs(h0.imag) > _IM_ABORT * scale:
                raise ConvergenceError(
                    "conjugate-symmetry residual of the initial capital "
                    f"exceeds {_IM_ABORT:g} relative: {h0!r}",
                    residual=abs(h0.imag) / scale,
                )
            self._im_residual = abs(h0.imag) / scale
            self.h0 = float(h0.real)
        else:
            self.h0 = h0

    # -- public surface -------------------------------------------------------

    def value(self, t, x, s):
        """Hedging value y(t, x, s); y(T, .) reproduces the payoff."""
        return self._broadcast(t, x, s, "y")[0]

    def hedge(self, t, x, s):
        """Hedge ratio z(t, x, s) in units of the traded asset."""
        return self._broadcast(t, x, s, "z")[1]

    def value_and_hedge(self, t, x, s):
        """Both surfaces from one pass over shared quadrature nodes."""
        return self._broadcast(t, x, s, "both")

    def apply_generator(self, t, x, s):
        """Cumulant-weighted surface: the model generator applied nodewise.

        Power payoffs are eigenfunctions of the additive generator with
        eigenvalue psi(z); this returns the corresponding reweighting of
        the value surface, used to validate the defining equations.
        """
        return self._broadcast(t, x, s, "gen")[0]

    def hedge_surface(self, times, xs, ss):
        """Dense (t, x, s) grids -> value/hedge arrays (nt, nx, ns)."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        ss = np.atleast_1d(np.asarray(ss, dtype=float))
        tt, xx, yy = np.meshgrid(times, xs, ss, indexing="ij")
        y, z = self._broadcast(tt, xx, yy, "both")
        return y, z

    def recipe(self) -> HedgeRecipe:
        """How Monte Carlo replays this decomposition."""
        return HedgeRecipe(
            initial_capital=float(np.real(self.h0)),
            hedge_rule="evaluate hedge at the left endpoint of each step",
            residual_rule=(
                "residual_T = payoff - initial_capital "
                "- sum_i hedge(t_i) * (S_{i+1} - S_i)"
            ),
            value=self.value,
            hedge=self.hedge,
        )

    def quadrature_report(self) -> dict:
        rep = {
            "h0_im_residual": self._im_residual,
            "lines": [dict(d) for d in self._line_stats],
            "settings": {
                "rel_tol": self.settings.rel_tol,
                "panel_budget": self.settings.panel_budget,
            },
        }
        return rep

    def lambda_growth_bound(self) -> float:
        """c1 with |lambda(t,z)| <= exp(c1 * rho_s(T)) on the support."""
        c1 = 0.0
        for idx, ln in enumerate(self.measure.lines):
            nd = self._nodes(idx, 0, 1)
            rates = np.real(nd.eta_rate if nd.eta_rate is not None
                            else self.model.eta_rate_at(0.0, nd.z1, nd.z2))
            c1 = max(c1, float(rates.max()) / self.model.rho_bar_at(0.0))
        for a in self.measure.atoms:
            r = float(np.real(self.model.eta_rate_at(0.0, a.z1, a.z2)))
            c1 = max(c1, r / self.model.rho_bar_at(0.0))
        return max(c1, 0.0)

    # -- assumption checks ----------------------------------------------------

    def _check_assumptions(self) -> dict:
        checks: dict[str, float] = {}
        failures = []
        probe_ts = np.linspace(0.0, self.model.horizon, 7)
        rb = min(self.model.rho_bar_at(t) for t in probe_ts)
        checks["strictly-increasing-bracket"] = rb
        if not rb > 0.0:
            failures.append("strictly-increasing-bracket")

        tv = sum(abs(complex(a.weight)) for a in self.measure.atoms)
        for ln in self.measure.lines:
            u, w = ln.nodes(0)
            tv += float(np.sum(np.abs(w * np.asarray(ln.density(u), dtype=complex))))
        checks["integrable-claim-transform"] = tv
        if not np.isfinite(tv):
            failures.append("integrable-claim-transform")

        (lo1, hi1), (lo2, hi2) = self.measure.real_support()
        corners = [(lo1, lo2), (lo1, hi2), (hi1, lo2), (hi1, hi2), (0.0, 1.0), (0.0, 2.0)]
        vals = [self.model.psi_at(0.0, c1, c2) for c1, c2 in corners]
        ok = all(np.isfinite(np.real(v)) and np.isfinite(np.imag(v)) for v in vals)
        checks["cumulant-domain-contains-support"] = float(ok)
        if not ok:
            failures.append("cumulant-domain-contains-support")

        sup = 0.0
        for idx, ln in enumerate(self.measure.lines):
            nd = self._nodes(idx, 0, 1)
            psis = nd.psi if nd.psi is not None else self.model.psi_at(0.0, nd.z1, nd.z2)
            sup = max(sup, float(np.max(np.abs(psis))) / rb)
        for a in self.measure.atoms:
            sup = max(sup, abs(complex(self.model.psi_at(0.0, a.z1, a.z2))) / rb)
        checks["bounded-cumulant-derivative"] = sup
        if not np.isfinite(sup):
            failures.append("bounded-cumulant-derivative")

        if failures:
            raise AssumptionError(
                "standing assumptions violated: " + ", ".join(failures)
            )
        return checks

    # -- internals ------------------------------------------------------------

    def _broadcast(self, t, x, s, which):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        s = np.asarray(s, dtype=float)
        if np.any(x <= 0) or np.any(s <= 0):
            raise DomainError("prices must be strictly positive")
        if np.any(t < -1e-12) or np.any(t > self.model.horizon * (1 + 1e-12)):
            raise DomainError(f"time must lie in [0, {self.model.horizon}]")
        tb, xb, sb = np.broadcast_arrays(t, x, s)
        scalar = tb.ndim == 0
        shape = tb.shape
        y, z = self._flat(
            np.atleast_1d(tb).ravel(), np.atleast_1d(xb).ravel(), np.atleast_1d(sb).ravel(), which
        )
        out = []
        for arr in (y, z):
            if arr is None:
                out.append(None)
                continue
            if self._real:
                im = float(np.max(np.abs(arr.imag))) if arr.size else 0.0
                sc = max(1.0, float(np.max(np.abs(arr.real))) if arr.size else 0.0)
                if im > _IM_ABORT * sc:
                    raise ConvergenceError(
                        f"conjugate-symmetry residual {im / sc:.2e} exceeds {_IM_ABORT:g}",
                        residual=im / sc,
                    )
                self._im_residual = max(self._im_residual, im / sc)
                arr = arr.real
            arr = arr.reshape(shape)
            out.append(arr[()].item() if scalar else arr)
        return tuple(out)

    def _flat(self, t, x, s, which):
        n = t.size
        need_y = which in ("y", "both", "gen")
        need_z = which in ("z", "both")
        y = np.zeros(n, dtype=complex) if need_y else None
        z = np.zeros(n, dtype=complex) if need_z else None
        logx, logs = np.log(x), np.log(s)

        for a in self.measure.atoms:
            lam = self.model.lambda_coeff(t, a.z1, a.z2)
            base = a.weight * np.exp(a.z1 * logx + a.z2 * logs) * lam
            if which == "gen":
                y += base * self.model.psi_at(0.0, a.z1, a.z2) if self._homogeneous else \
                    base * np.array([self.model.psi_at(ti, a.z1, a.z2) for ti in t])
            elif need_y:
                y += base
            if need_z:
                g = (
                    self.model.gamma(a.z1, a.z2)
                    if self._homogeneous
                    else np.array([self.model.gamma_at(ti, a.z1, a.z2) for ti in t])
                )
                z += base * g / s

        if self.measure.lines:
            order = np.argsort(t, kind="stable")
            ts = t[order]
            boundaries = np.flatnonzero(np.diff(ts)) + 1
            groups = np.split(order, boundaries)
            for rows in groups:
                ti = float(t[rows[0]])
                for start in range(0, rows.size, _CHUNK):
                    rr = rows[start : start + _CHUNK]
                    for idx in range(len(self.measure.lines)):
                        ly, lz = self._line_group(idx, ti, logx[rr], logs[rr], x[rr], s[rr], which)
                        if need_y:
                            y[rr] += ly
                        if need_z:
                            z[rr] += lz
        return y, z

    def _nodes(self, idx: int, level: int, umult: int) -> _LineNodes:
        key = (idx, level, umult)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        ln = self.measure.lines[idx]
        n_panels = ln.panels * umult * (1 << level)
        hi = ln.truncation * umult
        lo = 0.0 if ln.symmetric else -hi
        u, w = panel_nodes(lo, hi, n_panels)
        dens = np.asarray(ln.density(u), dtype=complex)
        zrun = ln.abscissa + 1j * u
        f = complex(ln.fixed_exponent)
        if ln.axis == 1:
            z1, z2 = zrun, np.full(u.shape, f, dtype=complex)
        else:
            z1, z2 = np.full(u.shape, f, dtype=complex), zrun
        nd = _LineNodes(u, w, z1, z2, dens)
        if self._homogeneous:
            nd.gamma = self.model.gamma(z1, z2)
            nd.eta_rate = self.model.eta_rate(z1, z2)
            nd.psi = self.model.psi(z1, z2)
        self._cache[key] = nd
        return nd

    def _line_group(self, idx, ti, logx, logs, x, s, which, node_drop=0.0):
        ln = self.measure.lines[idx]
        if ln.axis == 1:
            logv, v = logx, x
            fixed = np.exp(complex(ln.fixed_exponent) * logs)
        else:
            logv, v = logs, s
            fixed = np.exp(complex(ln.fixed_exponent) * logx)
        need_y = which in ("y", "both", "gen")
        need_z = which in ("z", "both")

        umult, tail_mode, bound = self._tail_plan(idx, ti, v, fixed, which)
        stats = self._line_stats[idx]
        stats["umult"] = max(stats["umult"], umult)
        stats["tail_bound"] = max(stats["tail_bound"], bound)
        stats["tail_mode"] = tail_mode

        tail_y = np.zeros(v.shape, dtype=complex)
        tail_z = np.zeros(v.shape, dtype=complex)
        if tail_mode == "terminal" and ln.tail is not None:
            tail_y, tail_z = self._terminal_tails(idx, ln, v, which)

        budget = self.settings.panel_budget * umult
        prev_y = prev_z = None
        have_prev = False
        diff = float("nan")
        level = 0
        while ln.panels * umult * (1 << level) <= budget:
            nd = self._nodes(idx, level, umult)
            if self._homogeneous:
                lam = np.exp((self.model.horizon - ti) * nd.eta_rate)
                gam = nd.gamma
                psi = nd.psi
            else:
                lam = self.model.lambda_coeff(ti, nd.z1, nd.z2)
                gam = self.model.gamma_at(ti, nd.z1, nd.z2)
                psi = self.model.psi_at(ti, nd.z1, nd.z2)
            coef = nd.w * nd.dens * lam
            if which == "gen":
                coef = coef * psi
            u_nodes = nd.u
            if node_drop > 0.0:
                keep = np.abs(coef) >= node_drop * float(np.max(np.abs(coef)))
                coef, gam, u_nodes = coef[keep], np.asarray(gam)[keep], nd.u[keep]
            powers = np.exp(np.multiply.outer(logv, ln.abscissa + 1j * u_nodes))
            quad_tail_y = tail_y if which != "gen" else 0.0
            cur_y = powers @ coef + quad_tail_y if need_y else None
            cur_z = (powers @ (coef * gam) + tail_z) if need_z else None
            if ln.symmetric:
                cur_y = 2.0 * cur_y.real if cur_y is not None else None
                cur_z = 2.0 * cur_z.real if cur_z is not None else None
            if have_prev:
                diff = 0.0
                for cur, prev in ((cur_y, prev_y), (cur_z, prev_z)):
                    if cur is None:
                        continue
                    d = float(np.max(np.abs(cur - prev)))
                    sc = max(float(np.max(np.abs(cur))), 1.0)
                    diff = max(diff, d / sc)
                if diff <= self.settings.rel_tol:
                    stats["levels"] = max(stats["levels"], level)
                    ly = fixed * cur_y if cur_y is not None else None
                    lz = fixed * cur_z / s if cur_z is not None else None
                    return ly, lz
            prev_y, prev_z = cur_y, cur_z
            have_prev = True
            level += 1
        raise ConvergenceError(
            f"contour quadrature for line {idx} did not stabilise within "
            f"{budget} panels",
            residual=diff,
        )

    def _level_values(self, idx, level, umult, ti, logv, which, node_drop, uniform=False):
        """One quadrature level of a line on raw log coordinates.

        Returns (y, z) without the fixed-coordinate factor and without
        the 1/s hedging division; tails are not added (interior times).
        """
        ln = self.measure.lines[idx]
        nd = self._nodes(idx, level, umult)
        if self._homogeneous:
            lam = np.exp((self.model.horizon - ti) * nd.eta_rate)
            gam = nd.gamma
        else:
            lam = self.model.lambda_coeff(ti, nd.z1, nd.z2)
            gam = self.model.gamma_at(ti, nd.z1, nd.z2)
        coef = nd.w * nd.dens * lam
        u_nodes = nd.u
        if node_drop > 0.0:
            mag = np.abs(coef) * (1.0 + np.abs(gam))
            keep = mag >= node_drop * float(mag.max())
            coef, gam, u_nodes = coef[keep], np.asarray(gam)[keep], u_nodes[keep]
        zrun = ln.abscissa + 1j * u_nodes
        if uniform and logv.size > 2:
            step = np.exp((logv[1] - logv[0]) * zrun)
            table = np.broadcast_to(step, (logv.size, step.size)).copy()
            table[0] = np.exp(logv[0] * zrun)
            powers = np.cumprod(table, axis=0)
        else:
            powers = np.exp(np.multiply.outer(logv, zrun))
        need_y = which in ("y", "both")
        need_z = which in ("z", "both")
        cur_y = powers @ coef if need_y else None
        cur_z = powers @ (coef * gam) if need_z else None
        if ln.symmetric:
            cur_y = 2.0 * cur_y.real if cur_y is not None else None
            cur_z = 2.0 * cur_z.real if cur_z is not None else None
        return cur_y, cur_z

    def _line_grid(self, idx, ti, glx, which="both", node_drop=1e-16):
        """Line values on a uniform log grid at interior times.

        The refinement level is chosen on a small probe subset, then the
        full grid is filled in a single pass.  Used by the Monte Carlo
        replay; exact pointwise evaluation remains the reference.
        """
        ln = self.measure.lines[idx]
        v = np.exp(glx)
        umult, tail_mode, bound = self._tail_plan(idx, ti, v, np.ones(1), which)
        if tail_mode == "terminal":
            raise DomainError("the grid shortcut does not cover the terminal time")
        stats = self._line_stats[idx]
        stats["umult"] = max(stats["umult"], umult)
        stats["tail_bound"] = max(stats["tail_bound"], bound)
        budget = self.settings.panel_budget * umult
        probes = glx[np.unique(np.linspace(0, glx.size - 1, 9).astype(int))]
        prev = None
        level = 0
        chosen = -1
        diff = float("nan")
        while ln.panels * umult * (1 << level) <= budget:
            cur = self._level_values(idx, level, umult, ti, probes, which, 0.0)
            if prev is not None:
                diff = 0.0
                for c, p in zip(cur, prev):
                    if c is None:
                        continue
                    d = float(np.max(np.abs(c - p)))
                    sc = max(float(np.max(np.abs(c))), 1.0)
                    diff = max(diff, d / sc)
                if diff <= self.settings.rel_tol:
                    chosen = level
                    break
            prev = cur
            level += 1
        if chosen < 0:
            raise ConvergenceError(
                f"contour quadrature for line {idx} did not stabilise within "
                f"{budget} panels",
                residual=diff,
            )
        stats["levels"] = max(stats["levels"], chosen)
        return self._level_values(idx, chosen, umult, ti, glx, which, node_drop, uniform=True)

    def _terminal_tails(self, idx, ln, v, which):
        k = ln.tail.strike
        r = ln.abscissa
        c0 = ln.tail.scale * np.exp((1.0 - r) * np.log(k)) / (2.0 * np.pi)
        u_hi = ln.truncation
        w_log = np.log(v / k)
        vr = np.exp(r * np.log(v))
        ty = np.zeros(v.shape, dtype=complex)
        tz = np.zeros(v.shape, dtype=complex)
        if which in ("y", "both", "gen"):
            for i, wi in enumerate(w_log.ravel()):
                ty.ravel()[i] = rational_tail_integral(1.0, 0.0, r, wi, u_hi)
            ty = c0 * vr * ty
        if which in ("z", "both"):
            aff = self.model.gamma_affine_at(self.model.horizon, ln.axis, ln.fixed_exponent)
            if aff is not None:
                g0, g1 = aff
                for i, wi in enumerate(w_log.ravel()):
                    tz.ravel()[i] = rational_tail_integral(
                        g0, g1, r, wi, u_hi, symmetric_real=ln.symmetric
                    )
                tz = c0 * vr * tz
        return ty, tz

    def _tail_plan(self, idx, ti, v, fixed, which) -> tuple[int, str, float]:
        ln = self.measure.lines[idx]
        horizon = self.model.horizon
        if (horizon - ti) <= _TERMINAL_FRACTION * horizon:
            return 1, "terminal", 0.0
        # max of v**R sits at the small end of the grid for negative abscissas
        vpow = float(np.max(np.asarray(v) ** ln.abscissa))
        fmax = float(np.max(np.abs(fixed))) if np.size(fixed) else 1.0
        if ln.tail is not None:
            k = ln.tail.strike
            c0 = abs(ln.tail.scale) * k ** (1.0 - ln.abscissa) / (2.0 * np.pi)
            amp = c0 * vpow * fmax
            floor = 0.1 * self.settings.rel_tol * (1.0 + k)
        else:
            # generic line: use the sampled density magnitude at the cutoff
            dtail = abs(complex(np.asarray(ln.density(np.array([ln.truncation])))[0]))
            amp = dtail * ln.truncation ** 2 * vpow * fmax
            floor = 0.1 * self.settings.rel_tol * max(1.0, amp / max(ln.truncation, 1.0))
        f = complex(ln.fixed_exponent)
        for k_ext in range(self.settings.max_extension + 1):
            umult = 1 << k_ext
            u_hi = ln.truncation * umult
            if ln.axis == 1:
                z1, z2 = ln.abscissa + 1j * u_hi, f
            else:
                z1, z2 = f, ln.abscissa + 1j * u_hi
            lam_edge = complex(np.asarray(self.model.lambda_coeff(ti, z1, z2)).ravel()[0])
            decay = abs(lam_edge)
            growth = 1.0
            if which in ("z", "both"):
                g_edge = complex(np.asarray(self.model.gamma_at(ti, z1, z2)).ravel()[0])
                growth = max(1.0, abs(g_edge))
            bound = 2.0 * amp * decay * growth / u_hi
            if bound <= floor:
                mode = "skipped-negligible" if k_ext == 0 else "extended"
                return umult, mode, bound
        if ln.tail is None:
            return 1 << self.settings.max_extension, "bound-only", bound
        raise ConvergenceError(
            f"truncation tail of line {idx} is not controlled at t={ti:g}: "
            f"the propagation factor does not decay along this contour "
            f"(bound {bound:.2e}); the model has no diffusion or jump "
            "spread in the claim coordinate",
            residual=bound,
        )


def decompose(model, measure: PayoffMeasure, settings: QuadratureSettings = DEFAULT_SETTINGS) -> HedgeDecomposition:
    """Build the quadratic-hedging decomposition of a claim.

    Returns an object with initial capital h0, value/hedge surfaces, the
    standing-assumption report, and a Monte Carlo replay recipe.
    """
    return HedgeDecomposition(model, measure, settings)
