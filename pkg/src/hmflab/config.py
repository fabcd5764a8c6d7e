"""Flat sectioned-key run configuration.

Scenario files are plain text, one ``section.key = value`` per line with
``#`` comments.  Every key must belong to the schema and be applicable to
the configured scenario; there are no silent defaults for misspelled
keys.  Cross-field rules (window ordering, grid support of the horizon)
are checked up front so a run fails before any work happens.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path


class ConfigError(ValueError):
    pass


SCENARIOS = (
    "stability",
    "forward",
    "backward",
    "nonperturbative",
    "bgk",
    "weights",
    "compare",
    "sweep",
)

_RUNNY = ("forward", "backward", "nonperturbative", "compare")
_WITH_GRID = _RUNNY + ("stability",)
_WITH_DATUM = ("forward", "backward", "nonperturbative", "compare")
_WITH_PICARD = ("backward", "nonperturbative", "compare")
_ALL = SCENARIOS


def _float_list(raw: str) -> list[float]:
    items = [s.strip() for s in raw.split(",") if s.strip()]
    if not items:
        raise ValueError("empty list")
    return [float(s) for s in items]


def _mode_weights(raw: str) -> dict[int, float]:
    out: dict[int, float] = {}
    for part in raw.split(","):
        part = part.strip()
        if not part:
            continue
        mode, _, weight = part.partition(":")
        out[int(mode.strip())] = float(weight.strip())
    if not out:
        raise ValueError("empty mode weights")
    return out


def _bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


_REQUIRED = object()

# key -> (parser, default-or-required, applicable scenarios)
SCHEMA: dict[str, tuple] = {
    "run.scenario": (str, _REQUIRED, _ALL),
    "run.id": (str, _REQUIRED, _ALL),
    "grid.n_max": (int, 4, _WITH_GRID + ("sweep",)),
    "grid.xi_max": (float, 24.0, _WITH_GRID + ("sweep",)),
    "grid.d_xi": (float, 0.05, _WITH_GRID + ("sweep",)),
    "grid.t_final": (float, 20.0, _WITH_GRID + ("sweep",)),
    "profile.kind": (str, "maxwellian", _WITH_GRID + ("sweep",)),
    "profile.beta": (float, 1.0, _WITH_GRID + ("sweep",)),
    "profile.scale": (float, 1.0, _WITH_GRID + ("sweep",)),
    "datum.amplitude": (float, 0.5, _WITH_DATUM + ("sweep",)),
    "datum.width": (float, 1.0, _WITH_DATUM + ("sweep",)),
    "datum.shape": (str, "gaussian", _WITH_DATUM + ("sweep",)),
    "datum.modes": (_mode_weights, {1: 1.0, -1: 1.0}, _WITH_DATUM + ("sweep",)),
    "evolve.epsilon": (float, 0.01, _WITH_DATUM + ("sweep",)),
    "evolve.sign": (float, 1.0, _WITH_DATUM + ("sweep",)),
    "evolve.d_t": (float, 0.01, _WITH_DATUM + ("sweep",)),
    "evolve.T": (float, 20.0, _WITH_DATUM + ("sweep",)),
    "evolve.tau": (float, 0.0, ("backward", "nonperturbative", "sweep")),
    "evolve.snap_stride": (int, 10, _WITH_DATUM + ("sweep",)),
    "backward.T_list": (_float_list, None, ("backward", "sweep")),
    "picard.max_iters": (int, 12, _WITH_PICARD + ("sweep",)),
    "picard.tol": (float, 1e-6, _WITH_PICARD + ("sweep",)),
    "picard.zeta_refine": (int, 2, _WITH_PICARD + ("sweep",)),
    "picard.inner_max": (int, 40, _WITH_PICARD + ("sweep",)),
    "norms.lambda": (float, 0.3, _RUNNY + ("sweep",)),
    "norms.lambda_prime": (float, 0.15, ("nonperturbative", "sweep")),
    "norms.delta": (float, 1e-3, _RUNNY + ("sweep",)),
    "norms.mu_points": (int, 64, _RUNNY + ("sweep",)),
    "stability.omega_max": (float, 20.0, ("stability",)),
    "stability.n_scan": (int, 1201, ("stability",)),
    "stability.threshold": (float, 0.05, ("stability",)),
    "stability.t_max": (float, 25.0, ("stability",)),
    "stability.d_t": (float, 1e-3, ("stability",)),
    "stability.m_bound": (float, None, ("stability",)),
    "stability.lambda": (float, None, ("stability",)),
    "bgk.beta": (float, 3.0, ("bgk", "nonperturbative", "sweep")),
    "weights.T": (float, 200.0, ("weights",)),
    "weights.d_t": (float, 0.01, ("weights",)),
    "weights.delta_list": (_float_list, [1e-4, 1e-3, 1e-2], ("weights",)),
    "weights.delta": (float, 1e-3, ("weights",)),
    "weights.t_max": (float, 100.0, ("weights",)),
    "fit.window_lo": (float, None, ("forward", "backward", "nonperturbative", "sweep")),
    "fit.window_hi": (float, None, ("forward", "backward", "nonperturbative", "sweep")),
    "echo.threshold": (float, 2.5, ("forward", "backward", "sweep")),
    "compare.rough_width": (float, None, ("compare",)),
    "sweep.scenario": (str, _REQUIRED, ("sweep",)),
    "sweep.axis": (str, _REQUIRED, ("sweep",)),
    "sweep.values": (_float_list, _REQUIRED, ("sweep",)),
}


@dataclass
class RunConfig:
    scenario: str
    run_id: str
    values: dict = field(default_factory=dict)

    def get(self, key: str):
        return self.values[key]

    def as_dict(self) -> dict:
        plain = {}
        for k, v in sorted(self.values.items()):
            plain[k] = {str(m): w for m, w in v.items()} if isinstance(v, dict) else v
        return plain


def _parse_lines(text: str, origin: str) -> dict[str, str]:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if not key or "." not in key:
            raise ConfigError(f"{origin}:{lineno}: keys are 'section.name', got {key!r}")
        if key in raw:
            raise ConfigError(f"{origin}:{lineno}: duplicate key {key!r}")
        raw[key] = value
    return raw


def _build(raw: dict[str, str], origin: str) -> RunConfig:
    unknown = [k for k in raw if k not in SCHEMA]
    if unknown:
        raise ConfigError(f"{origin}: unknown keys: {', '.join(sorted(unknown))}")
    if "run.scenario" not in raw:
        raise ConfigError(f"{origin}: missing required key run.scenario")
    scenario = raw["run.scenario"]
    if scenario not in SCENARIOS:
        raise ConfigError(
            f"{origin}: unknown scenario {scenario!r}; valid: {', '.join(SCENARIOS)}"
        )
    inapplicable = [
        k for k in raw if scenario not in SCHEMA[k][2] and k not in ("run.scenario", "run.id")
    ]
    if inapplicable:
        raise ConfigError(
            f"{origin}: keys not valid for scenario {scenario!r}: "
            f"{', '.join(sorted(inapplicable))}"
        )
    values: dict = {}
    for key, (parser, default, scopes) in SCHEMA.items():
        if key in raw:
            try:
                values[key] = parser(raw[key])
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"{origin}: key {key}: {exc}") from exc
        elif scenario in scopes or key in ("run.scenario", "run.id"):
            if default is _REQUIRED:
                raise ConfigError(f"{origin}: missing required key {key}")
            values[key] = default
    values["run.scenario"] = scenario
    cfg = RunConfig(scenario=scenario, run_id=values["run.id"], values=values)
    _validate(cfg, origin)
    return cfg


def _validate(cfg: RunConfig, origin: str) -> None:
    v = cfg.values
    scenario = cfg.scenario

    def rule(ok: bool, name: str):
        if not ok:
            raise ConfigError(f"{origin}: violated precondition: {name}")

    if scenario in _WITH_GRID or scenario == "sweep":
        if "grid.n_max" in v:
            rule(v["grid.n_max"] >= 2, "grid.n_max >= 2")
            rule(v["grid.d_xi"] > 0, "grid.d_xi > 0")
            rule(
                v["grid.xi_max"] >= v["grid.t_final"] + 4.0,
                "grid.xi_max >= grid.t_final + 4 (horizon exceeds grid)",
            )
    if "profile.kind" in v:
        rule(v["profile.kind"] in ("maxwellian", "lorentzian"), "profile.kind known")
    if "datum.width" in v:
        rule(v["datum.width"] > 0, "datum.width > 0")
        rule(v["datum.shape"] in ("gaussian", "exponential"), "datum.shape known")
        rule(0 not in v["datum.modes"], "datum.modes carries no weight on mode 0")
    if scenario in _WITH_DATUM:
        rule(v["evolve.epsilon"] >= 0, "evolve.epsilon >= 0")
        rule(v["evolve.d_t"] > 0, "evolve.d_t > 0")
        rule(
            v["evolve.T"] <= v["grid.t_final"] + 1e-12,
            "evolve.T <= grid.t_final",
        )
    if scenario in ("backward", "nonperturbative"):
        rule(v["evolve.tau"] < v["evolve.T"], "evolve.tau < evolve.T")
        rule(v["picard.tol"] > 0, "picard.tol > 0")
    if scenario == "nonperturbative":
        rule(v["evolve.epsilon"] == 1.0, "evolve.epsilon == 1 in non-perturbative mode")
    if scenario == "backward" and v.get("backward.T_list"):
        ts = v["backward.T_list"]
        rule(all(b > a for a, b in zip(ts, ts[1:])), "backward.T_list strictly increasing")
        rule(
            max(ts) <= v["grid.t_final"] + 1e-12,
            "backward.T_list within grid.t_final",
        )
    if scenario == "sweep":
        rule(v["sweep.scenario"] in SCENARIOS and v["sweep.scenario"] != "sweep",
             "sweep.scenario is a non-sweep scenario")
        rule(v["sweep.axis"] in SCHEMA, "sweep.axis names a known key")
        axis_parser = SCHEMA.get(v["sweep.axis"], (None,))[0]
        rule(axis_parser in (int, float), "sweep.axis names a numeric key")
        rule(len(v["sweep.values"]) > 0, "sweep.values nonempty")


def load_config(path) -> RunConfig:
    """Parse and validate a scenario file; errors carry file:line context."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    return _build(_parse_lines(p.read_text(encoding="utf-8"), str(p)), str(p))


def config_from_text(text: str, origin: str = "<inline>") -> RunConfig:
    return _build(_parse_lines(text, origin), origin)
