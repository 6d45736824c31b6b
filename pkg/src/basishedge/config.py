"""Experiment configuration: JSON schema, validation, and builders.

A config file is one JSON object with blocks

    model       required; kind "black-scholes", "merton" or "piecewise"
    payoff      required; kind "call", "put", "power" or "sum"
    route       "fourier" (default), "pde" or "both"
    quadrature  optional contour-quadrature overrides
    pde_grid    optional finite-difference grid overrides
    surface     optional hedge-surface grid (times / x / s)
    validation  Monte Carlo sizes, seed and the list of checks to run
    compare     optional route-agreement tolerances {h0_limit, surface_limit}
    output      optional {"directory": ...}

Everything is validated up front; builders then hand out model, payoff
measure and grids.  Validation failures raise ConfigError naming the
offending key, before any output is written.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

from . import payoffs
from .errors import ConfigError, DomainError
from .models import AdditiveModel, PiecewiseAdditiveModel, vols_to_covariance
from .payoffs import DEFAULT_SETTINGS, PayoffMeasure, QuadratureSettings
from .pde import GridConfig

__all__ = ["ExperimentConfig", "load_config"]

_ROUTES = ("fourier", "pde", "both")
_CHECKS = ("martingale", "moments", "orthogonality", "tradeoff", "baselines")
_AXIS_BY_ASSET = {"x": 1, "s": 2}


def _need(block: dict, key: str, where: str):
    if key not in block:
        raise ConfigError(f"missing key {key!r} in {where}")
    return block[key]


def _number(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where} must be a number, got {v!r}")
    return float(v)


def _exponent(v, where: str) -> complex:
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(_number(v[0], where), _number(v[1], where))
    raise ConfigError(f"{where} must be a number or [re, im] pair, got {v!r}")


def _check_unknown(block: dict, allowed: set, where: str):
    extra = set(block) - allowed
    if extra:
        raise ConfigError(f"unknown keys in {where}: {sorted(extra)}")


def _build_single_model(block: dict, where: str):
    kind = _need(block, "kind", where)
    common = {"drift", "kind", "horizon", "spot", "vol_x", "vol_s", "corr", "covariance"}
    spot = block.get("spot", [1.0, 1.0])
    if not (isinstance(spot, (list, tuple)) and len(spot) == 2):
        raise ConfigError(f"{where}.spot must be a pair [x0, s0]")
    drift = _need(block, "drift", where)
    if not (isinstance(drift, (list, tuple)) and len(drift) == 2):
        raise ConfigError(f"{where}.drift must be a pair of log-drift rates")
    if "covariance" in block:
        cov = np.asarray(block["covariance"], dtype=float)
        if cov.shape != (2, 2):
            raise ConfigError(f"{where}.covariance must be a 2x2 matrix")
    else:
        cov = vols_to_covariance(
            _number(_need(block, "vol_x", where), f"{where}.vol_x"),
            _number(_need(block, "vol_s", where), f"{where}.vol_s"),
            _number(_need(block, "corr", where), f"{where}.corr"),
        )
    horizon = _number(_need(block, "horizon", where), f"{where}.horizon")
    if kind == "black-scholes":
        _check_unknown(block, common, where)
        return AdditiveModel(
            drift=drift, covariance=cov, horizon=horizon, spot=spot
        )
    if kind == "merton":
        _check_unknown(
            block,
            common | {"jump_intensity", "jump_mean", "jump_vol_x", "jump_vol_s",
                      "jump_corr", "jump_cov"},
            where,
        )
        lam = _number(_need(block, "jump_intensity", where), f"{where}.jump_intensity")
        jm = _need(block, "jump_mean", where)
        if "jump_cov" in block:
            jcov = np.asarray(block["jump_cov"], dtype=float)
        else:
            jcov = vols_to_covariance(
                _number(_need(block, "jump_vol_x", where), f"{where}.jump_vol_x"),
                _number(_need(block, "jump_vol_s", where), f"{where}.jump_vol_s"),
                _number(block.get("jump_corr", 0.0), f"{where}.jump_corr"),
            )
        return AdditiveModel(
            drift=drift, covariance=cov, horizon=horizon, spot=spot,
            jump_intensity=lam, jump_mean=jm, jump_cov=jcov,
        )
    raise ConfigError(f"{where}.kind must be black-scholes, merton or piecewise, got {kind!r}")


def _build_model(block: Any):
    if not isinstance(block, dict):
        raise ConfigError("model block must be an object")
    if block.get("kind") == "piecewise":
        pieces = _need(block, "pieces", "model")
        if not isinstance(pieces, list) or not pieces:
            raise ConfigError("model.pieces must be a non-empty list")
        spot = block.get("spot", [1.0, 1.0])
        built = []
        for i, piece in enumerate(pieces):
            where = f"model.pieces[{i}]"
            if not isinstance(piece, dict):
                raise ConfigError(f"{where} must be an object")
            dur = _number(_need(piece, "duration", where), f"{where}.duration")
            sub = {k: v for k, v in piece.items() if k != "duration"}
            sub.setdefault("spot", spot)
            sub.setdefault("horizon", dur)
            built.append((dur, _build_single_model(sub, where)))
        return PiecewiseAdditiveModel(built)
    return _build_single_model(block, "model")


def _build_payoff(block: Any, where: str = "payoff") -> PayoffMeasure:
    if not isinstance(block, dict):
        raise ConfigError(f"{where} must be an object")
    kind = _need(block, "kind", where)
    if kind in ("call", "put"):
        _check_unknown(block, {"kind", "strike", "asset", "abscissa", "weight"}, where)
        strike = _number(_need(block, "strike", where), f"{where}.strike")
        asset = block.get("asset", "x")
        if asset not in _AXIS_BY_ASSET:
            raise ConfigError(f"{where}.asset must be 'x' or 's', got {asset!r}")
        axis = _AXIS_BY_ASSET[asset]
        builder = payoffs.call_claim if kind == "call" else payoffs.put_claim
        kw = {}
        if "abscissa" in block:
            kw["abscissa"] = _number(block["abscissa"], f"{where}.abscissa")
        measure = builder(strike, axis=axis, **kw)
    elif kind == "power":
        _check_unknown(block, {"kind", "exponents", "weight"}, where)
        exps = _need(block, "exponents", where)
        if not (isinstance(exps, (list, tuple)) and len(exps) == 2):
            raise ConfigError(f"{where}.exponents must be [z1, z2]")
        z1 = _exponent(exps[0], f"{where}.exponents[0]")
        z2 = _exponent(exps[1], f"{where}.exponents[1]")
        measure = payoffs.power_claim(z1, z2)
    elif kind == "sum":
        _check_unknown(block, {"kind", "terms"}, where)
        terms = _need(block, "terms", where)
        if not isinstance(terms, list) or not terms:
            raise ConfigError(f"{where}.terms must be a non-empty list")
        parts = [
            _build_payoff(term, f"{where}.terms[{i}]") for i, term in enumerate(terms)
        ]
        measure = parts[0]
        for p in parts[1:]:
            measure = measure + p
        return measure
    else:
        raise ConfigError(
            f"{where}.kind must be call, put, power or sum, got {kind!r}"
        )
    weight = block.get("weight", 1.0)
    w = _exponent(weight, f"{where}.weight")
    if w != 1.0:
        measure = measure * w
    return measure


@dataclass
class ExperimentConfig:
    """Validated experiment description; builders return fresh objects."""

    raw: dict
    path: Optional[str] = None

    def __post_init__(self):
        if not isinstance(self.raw, dict):
            raise ConfigError("config root must be a JSON object")
        _check_unknown(
            self.raw,
            {"model", "payoff", "route", "quadrature", "pde_grid", "surface",
             "validation", "compare", "output"},
            "config",
        )
        # build everything once to surface errors before any output;
        # parameter-domain failures count as config errors, while model
        # structure violations keep their own type (and exit code)
        try:
            self._model = _build_model(_need(self.raw, "model", "config"))
            self._measure = _build_payoff(_need(self.raw, "payoff", "config"))
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc
        self.route = self.raw.get("route", "fourier")
        if self.route not in _ROUTES:
            raise ConfigError(f"route must be one of {_ROUTES}, got {self.route!r}")
        self._settings = self._build_settings()
        self._grid = self._build_grid()
        self._surface = self._build_surface()
        self._validation = self._build_validation()
        self._compare = self._build_compare()
        out = self.raw.get("output", {})
        if not isinstance(out, dict):
            raise ConfigError("output block must be an object")
        _check_unknown(out, {"directory"}, "output")
        self.output_directory = out.get("directory")

    def _build_settings(self) -> QuadratureSettings:
        q = self.raw.get("quadrature", {})
        if not isinstance(q, dict):
            raise ConfigError("quadrature block must be an object")
        _check_unknown(q, {"rel_tol", "panel_budget", "max_extension"}, "quadrature")
        kw = {}
        if "rel_tol" in q:
            kw["rel_tol"] = _number(q["rel_tol"], "quadrature.rel_tol")
        if "panel_budget" in q:
            kw["panel_budget"] = int(q["panel_budget"])
        if "max_extension" in q:
            kw["max_extension"] = int(q["max_extension"])
        try:
            return QuadratureSettings(**kw) if kw else DEFAULT_SETTINGS
        except Exception as exc:
            raise ConfigError(f"bad quadrature settings: {exc}") from exc

    def _build_grid(self) -> GridConfig:
        g = self.raw.get("pde_grid", {})
        if not isinstance(g, dict):
            raise ConfigError("pde_grid block must be an object")
        _check_unknown(
            g, {"nx", "ns", "nt", "radius_stddevs", "cfl_fraction"}, "pde_grid"
        )
        try:
            return GridConfig(
                nx=int(g.get("nx", 161)),
                ns=int(g.get("ns", 161)),
                nt=int(g.get("nt", 41)),
                radius_stddevs=float(g.get("radius_stddevs", 6.0)),
                cfl_fraction=float(g.get("cfl_fraction", 0.4)),
            )
        except ConfigError:
            raise
        except Exception as exc:
            raise ConfigError(f"bad pde_grid: {exc}") from exc

    def _build_surface(self) -> dict:
        s = self.raw.get("surface", {})
        if not isinstance(s, dict):
            raise ConfigError("surface block must be an object")
        _check_unknown(s, {"times", "x", "s"}, "surface")
        out = {}
        T = self._model.horizon
        times = s.get("times", [0.0, 0.5 * T, T])
        if not isinstance(times, list) or not times:
            raise ConfigError("surface.times must be a non-empty list")
        out["times"] = [_number(t, "surface.times") for t in times]
        if any(t < 0 or t > T for t in out["times"]):
            raise ConfigError(f"surface.times must lie in [0, {T}]")
        for key, spot in (("x", self._model.spot[0]), ("s", self._model.spot[1])):
            block = s.get(key, {})
            if not isinstance(block, dict):
                raise ConfigError(f"surface.{key} must be an object")
            _check_unknown(block, {"lo", "hi", "n"}, f"surface.{key}")
            lo = _number(block.get("lo", 0.5 * spot), f"surface.{key}.lo")
            hi = _number(block.get("hi", 1.5 * spot), f"surface.{key}.hi")
            n = int(block.get("n", 21))
            if not (0 < lo < hi) or n < 1:
                raise ConfigError(f"surface.{key} needs 0 < lo < hi and n >= 1")
            out[key] = np.linspace(lo, hi, n)
        return out

    def _build_validation(self) -> dict:
        v = self.raw.get("validation", {})
        if not isinstance(v, dict):
            raise ConfigError("validation block must be an object")
        _check_unknown(
            v,
            {"n_paths", "n_steps", "seed", "tests", "tstat_limit",
             "orthogonality_limit", "tradeoff_limit"},
            "validation",
        )
        tests = v.get("tests", list(_CHECKS))
        if not isinstance(tests, list):
            raise ConfigError("validation.tests must be a list")
        for t in tests:
            if t not in _CHECKS:
                raise ConfigError(
                    f"unknown validation test {t!r}; available: {_CHECKS}"
                )
        return {
            "n_paths": int(v.get("n_paths", 20000)),
            "n_steps": int(v.get("n_steps", 125)),
            "seed": int(v.get("seed", 0)),
            "tests": tests,
            "tstat_limit": float(v.get("tstat_limit", 3.0)),
            "orthogonality_limit": float(v.get("orthogonality_limit", 0.02)),
            "tradeoff_limit": float(v.get("tradeoff_limit", 0.1)),
        }

    def _build_compare(self) -> dict:
        c = self.raw.get("compare", {})
        if not isinstance(c, dict):
            raise ConfigError("compare block must be an object")
        _check_unknown(c, {"h0_limit", "surface_limit"}, "compare")
        out = {
            "h0_limit": _number(c.get("h0_limit", 1e-2), "compare.h0_limit"),
            "surface_limit": _number(c.get("surface_limit", 2e-2), "compare.surface_limit"),
        }
        if out["h0_limit"] <= 0 or out["surface_limit"] <= 0:
            raise ConfigError("compare limits must be positive")
        return out

    # builders -----------------------------------------------------------------

    def model(self):
        return self._model

    def measure(self) -> PayoffMeasure:
        return self._measure

    def settings(self) -> QuadratureSettings:
        return self._settings

    def pde_grid(self) -> GridConfig:
        return self._grid

    def surface_grid(self) -> dict:
        return self._surface

    def validation(self) -> dict:
        return dict(self._validation)

    def compare_limits(self) -> dict:
        return dict(self._compare)


def load_config(path: str) -> ExperimentConfig:
    """Read and validate a JSON experiment config."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return ExperimentConfig(raw=raw, path=path)
