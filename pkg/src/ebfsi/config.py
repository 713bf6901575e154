"""Scenario configuration: typed flat key-value text format.

A configuration file holds `key = value` lines (dotted keys, '#' comments).
Every key must belong to the schema below; unknown keys are errors so typos
cannot silently fall back to defaults. parse(emit(cfg)) is the identity.

Units are SI throughout. Material defaults follow published fabric/cord data
for a supersonic decelerator; gas defaults describe a cold low-density
CO2-like atmosphere.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

import numpy as np

from .gas import GasModel

__all__ = ["ScenarioConfig", "ConfigError", "parse_config", "emit_config", "load_config"]


class ConfigError(ValueError):
    """Malformed configuration text, unknown key, or invalid value."""


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> (python field name, type, default)
SCHEMA = {
    "case": ("case", str, "sod"),
    "seed": ("seed", int, 0),
    # gas model
    "gas.R": ("gas_R", float, 188.4),
    "gas.gamma": ("gas_gamma", float, 1.33),
    "gas.mu0": ("gas_mu0", float, 1.57e-6),
    "gas.T0": ("gas_T0", float, 240.0),
    "gas.mu_v_ratio": ("gas_mu_v_ratio", float, 1000.0),
    "gas.Pr": ("gas_Pr", float, 0.72),
    "gas.Pr_t": ("gas_Pr_t", float, 0.9),
    "gas.Cs": ("gas_Cs", float, 0.07),
    # freestream
    "freestream.rho": ("fs_rho", float, 0.0067),
    "freestream.p": ("fs_p", float, 260.0),
    "freestream.mach": ("fs_mach", float, 1.8),
    # fluid solver
    "fluid.cfl": ("cfl", float, 0.8),
    "fluid.integrator": ("integrator", str, "ssp2"),
    "fluid.limiter": ("limiter", str, "vanalbada"),
    "fluid.muscl": ("muscl", _bool, True),
    "fluid.viscous": ("viscous", _bool, False),
    "fluid.turbulence": ("turbulence", _bool, True),
    "fluid.extrapolation": ("extrapolation", str, "constant"),
    "fluid.entropy_fix": ("entropy_fix", float, 0.05),
    # mesh / adaptation
    "domain.x0": ("x0", float, -4.0),
    "domain.x1": ("x1", float, 8.0),
    "domain.y0": ("y0", float, -4.0),
    "domain.y1": ("y1", float, 4.0),
    "mesh.resolution": ("resolution", int, 48),
    "mesh.adapt_rounds": ("adapt_rounds", int, 3),
    "mesh.adapt_every": ("adapt_every", int, 0),
    "mesh.vertex_budget": ("vertex_budget", int, 200000),
    "mesh.hessian_quantile": ("hessian_quantile", float, 0.9),
    "mesh.wall_refine_levels": ("wall_refine_levels", int, 2),
    # phases (durations in seconds)
    "phases.rigid": ("phase_rigid", float, 0.0),
    "phases.fixed": ("phase_fixed", float, 0.0),
    "phases.coupled": ("phase_coupled", float, 0.0),
    # coupling
    "coupling.dt": ("coupling_dt", float, 1.0e-5),
    "coupling.max_subcycles": ("max_subcycles", int, 64),
    "coupling.struct_safety": ("struct_safety", float, 0.8),
    # output
    "output.cadence": ("cadence", int, 10),
    "output.snapshots": ("snapshots", _bool, True),
    "history.topk": ("vm_topk", int, 80),
    "history.vm_clip_quantile": ("vm_clip_quantile", float, 1.0),
    # geometry: bluff body
    "body.diameter": ("body_diameter", float, 1.0),
    # geometry: porous membrane channel
    "membrane.alpha": ("membrane_alpha", float, 0.08),
    "membrane.driver_pressure_ratio": ("driver_ratio", float, 4.0),
    # geometry: canopy arc + cables
    "canopy.radius": ("canopy_radius", float, 2.0),
    "canopy.span_deg": ("canopy_span", float, 110.0),
    "canopy.elements": ("canopy_elems", int, 48),
    "canopy.fold_inner": ("fold_inner", float, 23.5),
    "canopy.fold_outer": ("fold_outer", float, 27.5),
    "canopy.alpha": ("canopy_alpha", float, 0.08),
    "canopy.standoff": ("canopy_standoff", float, 4.0),
    "cables.enabled": ("cables_enabled", _bool, True),
    "cables.radius": ("cable_radius", float, 0.02),
    "cables.stations": ("cable_stations", int, 6),
    "cables.elements": ("cable_elems", int, 24),
    "suspension.shape": ("suspension_shape", str, "straight"),
    "suspension.sag": ("suspension_sag", float, 0.05),
    # materials
    "fabric.E": ("fabric_E", float, 9.448e8),
    "fabric.nu": ("fabric_nu", float, 0.4),
    "fabric.rho": ("fabric_rho", float, 1154.25),
    "fabric.thickness": ("fabric_th", float, 7.6073e-5),
    "cord.E": ("cord_E", float, 2.951e10),
    "cord.nu": ("cord_nu", float, 0.4),
    "cord.rho": ("cord_rho", float, 1154.25),
    "cord.diameter": ("cord_diameter", float, 3.175e-3),
    # contact
    "contact.enabled": ("contact_enabled", _bool, True),
    "contact.stiffness": ("contact_stiffness", float, 1.0e3),
    # coupon test (paper dimensions arrive in inches; stored converted)
    "coupon.width": ("coupon_width", float, 0.0762),
    "coupon.height": ("coupon_height", float, 0.1524),
    "coupon.rate": ("coupon_rate", float, 5.08e-3),
    "coupon.resolution": ("coupon_resolution", int, 8),
    "coupon.clamp": ("coupon_clamp", str, "frictionless"),
    "coupon.duration": ("coupon_duration", float, 0.5),
    # sod tube
    "sod.cells": ("sod_cells", int, 400),
    "sod.t_end": ("sod_t_end", float, 0.2),
    # piston problem
    "piston.mass": ("piston_mass", float, 0.5),
    "piston.duration": ("piston_duration", float, 0.1),
    "piston.driver_ratio": ("piston_driver_ratio", float, 1.2),
}

_FIELD_TO_KEY = {f: k for k, (f, _, _) in SCHEMA.items()}

CASES = ("sod", "bluffbody", "porous_membrane", "coupon", "parachute2d", "piston")


def _make_config_class():
    import dataclasses

    fields_spec = []
    for key, (fname, typ, default) in SCHEMA.items():
        pytype = bool if typ is _bool else typ
        fields_spec.append((fname, pytype, dataclasses.field(default=default)))
    return dataclasses.make_dataclass("ScenarioConfig", fields_spec, frozen=True,
                                      namespace={
                                          "gas_model": _gas_model,
                                          "freestream_primitive": _freestream_primitive,
                                          "validate": _validate,
                                      })


def _gas_model(self) -> GasModel:
    return GasModel(R=self.gas_R, gamma=self.gas_gamma, mu0=self.gas_mu0,
                    T0=self.gas_T0, mu_v_ratio=self.gas_mu_v_ratio,
                    Pr=self.gas_Pr, Pr_t=self.gas_Pr_t, Cs=self.gas_Cs)


def _freestream_primitive(self):
    """(rho, vx, vy, p) with speed from the configured Mach number."""
    gas = self.gas_model()
    a = np.sqrt(gas.gamma * self.fs_p / self.fs_rho)
    return (self.fs_rho, self.fs_mach * a, 0.0, self.fs_p)


def _validate(self):
    if self.case not in CASES:
        raise ConfigError(f"unknown case {self.case!r}; choose from {CASES}")
    for name, value in (
        ("freestream.rho", self.fs_rho), ("freestream.p", self.fs_p),
        ("coupling.dt", self.coupling_dt),
    ):
        if not (value > 0.0):
            raise ConfigError(f"{name} must be positive (got {value})")
    for name, value in (
        ("phases.rigid", self.phase_rigid), ("phases.fixed", self.phase_fixed),
        ("phases.coupled", self.phase_coupled),
    ):
        if value < 0.0:
            raise ConfigError(f"{name} must be non-negative (got {value})")
    try:
        self.gas_model()
    except ValueError as err:
        raise ConfigError(str(err))
    return self


ScenarioConfig = _make_config_class()


def parse_config(text: str) -> "ScenarioConfig":
    """Parse configuration text; unknown keys and bad values raise
    ConfigError."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        fname, typ, _ = SCHEMA[key]
        if fname in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[fname] = typ(val)
        except ValueError as err:
            raise ConfigError(f"line {lineno}: bad value for {key}: {err}")
    cfg = ScenarioConfig(**values)
    cfg.validate()
    return cfg


def emit_config(cfg) -> str:
    """Canonical text rendering (schema order, all keys explicit)."""
    lines = ["# scenario configuration (all keys explicit; SI units)"]
    for key, (fname, typ, _) in SCHEMA.items():
        value = getattr(cfg, fname)
        if typ is _bool:
            text = "true" if value else "false"
        elif typ is float:
            text = repr(float(value))
        else:
            text = str(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


def load_config(path) -> "ScenarioConfig":
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
