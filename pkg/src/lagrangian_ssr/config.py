"""Scenario configuration files (TOML).

A config describes the network, the machine, the shaft, how the operating
point is fixed (terminal ``dispatch`` targets or explicit ``torques``) and
the default simulation settings.  ``load`` validates against a fixed schema
(unknown keys are errors), ``build`` assembles the model and solves the
operating point, and ``canonical`` dumps an SI-only config that rebuilds
bit-identical matrices.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np
import tomli
import tomli_w

from .errors import ConfigError, ModelError
from .machine import MachineParams
from .model import SystemModel
from .network import Branch, InfiniteBus, NetworkSpec
from .shaft import ShaftParams
from .sim import FRAMES, METHODS
from .steady import Dispatch, Equilibrium, dispatch_torques, solve_equilibrium

SCENARIOS = ("fbm", "stable_smib")
PERTURBATIONS = ("none", "mode", "speed")

_INDUCTANCES = ("ld", "lq", "lf", "lD", "lg", "lQ", "ldf", "ldD", "lfD", "lqg", "lqQ", "lgQ")
_RESISTANCES = ("rf", "rD", "rg", "rQ")
_STANDARD = ("s_base_mva", "v_base_kv", "f_base_hz", "xl", "xd", "xd1", "xd2", "xq", "xq1", "xq2",
             "td01", "td02", "tq01", "tq02", "rotor_ratio")

# allowed keys per table; nested tables are listed as dicts
_SCHEMA = {
    "title": None,
    "network": {
        "nodes": None, "frequency_hz": None, "eps_c": None, "branches": None,
        "source": {"node": None, "r": None, "u_s": None},
    },
    "machine": {
        "node": None, "u_f": None,
        "standard": {k: None for k in _STANDARD},
        "inductances": {k: None for k in _INDUCTANCES},
        "resistances": {k: None for k in _RESISTANCES},
    },
    "shaft": {
        "generator": None, "torque_split": None,
        "h_s": None, "k_pu": None, "s_base_mva": None, "damping_ratio": None,
        "inertia": None, "stiffness": None, "self_damping": None, "mutual_damping": None,
    },
    "dispatch": {"v_phase_kv": None, "i_phase_ka": None, "pf": None},
    "torques": {"values": None},
    "simulation": {
        "frame": None, "method": None, "h": None, "t_end": None, "decimation": None,
        "perturbation": None, "amplitude": None, "mode_hz": None,
    },
}


@dataclass(frozen=True)
class DispatchTargets:
    """Terminal targets as per-phase rms values; pf lagging."""

    v_phase_kv: float
    i_phase_ka: float
    pf: float

    @property
    def v_ab(self) -> float:
        return np.sqrt(3.0) * self.v_phase_kv * 1e3

    @property
    def i_ab(self) -> float:
        return np.sqrt(3.0) * self.i_phase_ka * 1e3


@dataclass(frozen=True)
class SimulationSettings:
    frame: str = "alphabeta"
    method: str = "trap"
    h: float = 1e-5
    t_end: float = 0.1
    decimation: int = 1
    perturbation: str = "none"
    amplitude: float = 0.0
    mode_hz: float = 0.0


@dataclass(frozen=True)
class SystemConfig:
    network: NetworkSpec
    machine: MachineParams | None
    shaft: ShaftParams | None
    dispatch: DispatchTargets | None = None
    torques: tuple | None = None
    simulation: SimulationSettings = field(default_factory=SimulationSettings)
    title: str = ""


@dataclass(frozen=True)
class Scenario:
    """A config with its model at the operating point."""

    config: SystemConfig
    model: SystemModel
    equilibrium: Equilibrium
    dispatch: Dispatch | None = None


# -- parsing ------------------------------------------------------------------


def _locate(text: str, key: str) -> tuple[int | None, int | None]:
    """Line and column (1-based) of the first definition of ``key``."""
    pat = re.compile(rf"(^\s*|[{{,]\s*|\[\s*(?:[\w.]+\.)?)({re.escape(key)})\s*(=|\])", re.M)
    mt = pat.search(text)
    if mt is None:
        return None, None
    line = text.count("\n", 0, mt.start(2)) + 1
    col = mt.start(2) - (text.rfind("\n", 0, mt.start(2)) + 1) + 1
    return line, col


def _check_keys(data: dict, schema: dict, text: str, prefix: str = "") -> None:
    for key, value in data.items():
        path = f"{prefix}{key}"
        if key not in schema:
            line, col = _locate(text, key)
            raise ConfigError(f"unknown config key '{path}'", line, col)
        sub = schema[key]
        if isinstance(sub, dict):
            if not isinstance(value, dict):
                line, col = _locate(text, key)
                raise ConfigError(f"'{path}' must be a table", line, col)
            _check_keys(value, sub, text, path + ".")


class _Reader:
    """Typed access to one table with error locations."""

    def __init__(self, table: dict, path: str, text: str):
        self.table, self.path, self.text = table, path, text

    def error(self, key: str, msg: str) -> ConfigError:
        line, col = _locate(self.text, key)
        return ConfigError(f"{self.path}.{key}: {msg}", line, col)

    def has(self, key: str) -> bool:
        return key in self.table

    def number(self, key: str, default=None, positive: bool = False, nonneg: bool = False) -> float:
        if key not in self.table:
            if default is None:
                raise self.error(key, "missing required value")
            return default
        v = self.table[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise self.error(key, f"expected a number, got {type(v).__name__}")
        v = float(v)
        if not np.isfinite(v):
            raise self.error(key, "must be finite")
        if positive and v <= 0.0:
            raise self.error(key, f"must be positive, got {v}")
        if nonneg and v < 0.0:
            raise self.error(key, f"must be non-negative, got {v}")
        return v

    def integer(self, key: str, default=None, minimum: int | None = None) -> int:
        if key not in self.table:
            if default is None:
                raise self.error(key, "missing required value")
            return default
        v = self.table[key]
        if isinstance(v, bool) or not isinstance(v, int):
            raise self.error(key, f"expected an integer, got {type(v).__name__}")
        if minimum is not None and v < minimum:
            raise self.error(key, f"must be at least {minimum}, got {v}")
        return v

    def string(self, key: str, choices: tuple, default: str) -> str:
        v = self.table.get(key, default)
        if v not in choices:
            raise self.error(key, f"expected one of {choices}, got {v!r}")
        return v

    def numbers(self, key: str, default=None) -> tuple:
        if key not in self.table:
            if default is None:
                raise self.error(key, "missing required value")
            return default
        v = self.table[key]
        if not isinstance(v, list) or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in v):
            raise self.error(key, "expected an array of numbers")
        return tuple(float(x) for x in v)

    def sub(self, key: str) -> "_Reader":
        return _Reader(self.table.get(key, {}), f"{self.path}.{key}", self.text)


def _network(r: _Reader, text: str, u_s_default: float) -> NetworkSpec:
    n = r.integer("nodes", minimum=1)
    f = r.number("frequency_hz", default=60.0, positive=True)
    eps = r.number("eps_c", default=1e-9, positive=True)
    raw = r.table.get("branches", [])
    if not isinstance(raw, list):
        raise r.error("branches", "expected an array of inline tables")
    branches = []
    for k, item in enumerate(raw):
        if not isinstance(item, dict):
            raise r.error("branches", f"entry {k + 1} must be an inline table")
        extra = set(item) - {"kind", "a", "b", "value"}
        if extra:
            key = sorted(extra)[0]
            line, col = _locate(text, key)
            raise ConfigError(f"unknown config key 'network.branches.{key}'", line, col)
        br = _Reader(item, f"network.branches[{k + 1}]", text)
        kind = br.string("kind", ("R", "L", "C"), "")
        branches.append(Branch(kind, br.integer("a", minimum=1), br.integer("b", default=0, minimum=0),
                               br.number("value", positive=True)))
    src = None
    if r.has("source"):
        s = r.sub("source")
        src = InfiniteBus(s.number("u_s", default=u_s_default, nonneg=True), s.number("r", positive=True),
                          s.integer("node", minimum=1), 2.0 * np.pi * f)
    return NetworkSpec(n, tuple(branches), src, 0.0, eps)


def _machine(r: _Reader) -> MachineParams:
    node = r.integer("node", minimum=1)
    has_std = r.has("standard")
    has_si = r.has("inductances") or r.has("resistances")
    if has_std == has_si:
        raise r.error("standard", "give either [machine.standard] or [machine.inductances] with [machine.resistances]")
    if has_std:
        s = r.sub("standard")
        v = {k: s.number(k, positive=True) for k in _STANDARD if k != "rotor_ratio"}
        return MachineParams.from_standard_data(
            s_base=v["s_base_mva"] * 1e6, v_base=v["v_base_kv"] * 1e3, f_base=v["f_base_hz"],
            xl=v["xl"], xd=v["xd"], xd1=v["xd1"], xd2=v["xd2"], xq=v["xq"], xq1=v["xq1"], xq2=v["xq2"],
            td01=v["td01"], td02=v["td02"], tq01=v["tq01"], tq02=v["tq02"],
            rotor_ratio=s.number("rotor_ratio", default=1.0, positive=True), node=node,
        )
    li, ri = r.sub("inductances"), r.sub("resistances")
    vals = {k: li.number(k) for k in _INDUCTANCES}
    vals.update({k: ri.number(k, positive=True) for k in _RESISTANCES})
    return MachineParams(**vals, node=node)


def _shaft(r: _Reader, omega: float) -> ShaftParams:
    gen = r.integer("generator", minimum=1) - 1
    split = r.numbers("torque_split", default=())
    per_unit = r.has("h_s")
    if per_unit and r.has("inertia"):
        raise r.error("inertia", "give either per-unit (h_s, k_pu) or SI (inertia, stiffness) data, not both")
    if per_unit:
        return ShaftParams.from_per_unit(
            h=list(r.numbers("h_s")), k_pu=list(r.numbers("k_pu", default=())),
            s_base=r.number("s_base_mva", positive=True) * 1e6, omega=omega,
            damping_ratio=r.number("damping_ratio", default=0.0, nonneg=True),
            generator=gen, torque_split=split,
        )
    return ShaftParams(
        inertia=r.numbers("inertia"), stiffness=r.numbers("stiffness", default=()),
        self_damping=r.numbers("self_damping", default=()), mutual_damping=r.numbers("mutual_damping", default=()),
        generator=gen, torque_split=split,
    )


def _simulation(r: _Reader) -> SimulationSettings:
    return SimulationSettings(
        frame=r.string("frame", FRAMES, "alphabeta"),
        method=r.string("method", METHODS, "trap"),
        h=r.number("h", default=1e-5, positive=True),
        t_end=r.number("t_end", default=0.1, positive=True),
        decimation=r.integer("decimation", default=1, minimum=1),
        perturbation=r.string("perturbation", PERTURBATIONS, "none"),
        amplitude=r.number("amplitude", default=0.0, nonneg=True),
        mode_hz=r.number("mode_hz", default=0.0, nonneg=True),
    )


def loads(text: str) -> SystemConfig:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"parse error: {exc.msg}", exc.lineno, exc.colno) from exc
    _check_keys(data, _SCHEMA, text)
    root = _Reader(data, "config", text)
    if "network" not in data:
        raise ConfigError("missing [network] table")
    has_dispatch, has_torques = "dispatch" in data, "torques" in data
    if has_dispatch and has_torques:
        line, _ = _locate(text, "torques")
        raise ConfigError("give exactly one of [dispatch] and [torques]", line)
    if "machine" in data and not (has_dispatch or has_torques):
        raise ConfigError("give exactly one of [dispatch] and [torques]")
    try:
        # with a dispatch the source voltage and excitation are solved for
        net = _network(root.sub("network"), text, 1.0 if has_dispatch else None)
        mach = shaft = None
        u_f = 0.0
        if "machine" in data:
            if "shaft" not in data:
                raise ConfigError("a [machine] needs a [shaft]")
            mr = root.sub("machine")
            mach = _machine(mr)
            u_f = mr.number("u_f", default=1.0 if has_dispatch else None, nonneg=True)
            shaft = _shaft(root.sub("shaft"), net.omega)
        elif "shaft" in data:
            raise ConfigError("a [shaft] needs a [machine]")
        dispatch = torques = None
        if has_dispatch:
            if mach is None:
                raise ConfigError("[dispatch] needs a machine")
            d = root.sub("dispatch")
            pf = d.number("pf", positive=True)
            if pf > 1.0:
                raise d.error("pf", f"must lie in (0, 1], got {pf}")
            dispatch = DispatchTargets(d.number("v_phase_kv", positive=True), d.number("i_phase_ka", positive=True), pf)
        elif has_torques:
            torques = root.sub("torques").numbers("values")
        sim = _simulation(root.sub("simulation"))
        title = data.get("title", "")
    except ModelError as exc:
        raise ConfigError(str(exc)) from exc
    return SystemConfig(replace(net, u_f=u_f), mach, shaft, dispatch, torques, sim, str(title))


def load(path) -> SystemConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {p}: {exc.strerror}") from exc
    return loads(text)


def scenario_path(name: str) -> Path:
    if name not in SCENARIOS:
        raise ConfigError(f"unknown bundled scenario {name!r}; expected one of {SCENARIOS}")
    return Path(str(resources.files("lagrangian_ssr") / "scenarios" / f"{name}.cfg"))


def resolve(path_or_name: str) -> Path:
    """A file path, or the name of a bundled scenario."""
    p = Path(path_or_name)
    if p.exists():
        return p
    stem = p.stem if p.suffix == ".cfg" else path_or_name
    if stem in SCENARIOS and p.parent == Path("."):
        return scenario_path(stem)
    return p


# -- model assembly -----------------------------------------------------------


def to_model(cfg: SystemConfig) -> SystemModel:
    """The model as configured; with a dispatch, torques and sources are placeholders."""
    torque = None
    if cfg.torques is not None:
        if cfg.shaft is None or len(cfg.torques) != cfg.shaft.n_mass:
            raise ConfigError("torques.values needs one entry per shaft mass")
        torque = np.array(cfg.torques)
    try:
        return SystemModel(cfg.network, cfg.machine, cfg.shaft, torque)
    except ModelError as exc:
        raise ConfigError(str(exc)) from exc


def build(cfg: SystemConfig) -> Scenario:
    """Assemble and solve the operating point (SolverError propagates)."""
    m = to_model(cfg)
    if cfg.dispatch is not None:
        d = cfg.dispatch
        disp = dispatch_torques(m, d.v_ab, d.i_ab, d.pf)
        return Scenario(cfg, disp.model, disp.equilibrium, disp)
    return Scenario(cfg, m, solve_equilibrium(m))


def load_scenario(name: str) -> Scenario:
    return build(load(scenario_path(name)))


# -- canonical dump -----------------------------------------------------------


def canonical(cfg: SystemConfig) -> dict:
    """SI-only config dict; ``loads(dumps(canonical(cfg)))`` rebuilds identical matrices."""
    net = cfg.network
    out: dict = {}
    if cfg.title:
        out["title"] = cfg.title
    nt: dict = {
        "nodes": net.n_nodes,
        "eps_c": net.eps_c,
        "branches": [{"kind": b.kind, "a": b.a, "b": b.b, "value": b.value} for b in net.branches],
    }
    if net.source is not None:
        nt["frequency_hz"] = net.source.omega / (2.0 * np.pi)
        nt["source"] = {"node": net.source.node, "r": net.source.r, "u_s": net.source.u_s}
    out["network"] = nt
    if cfg.machine is not None:
        mp = cfg.machine
        out["machine"] = {
            "node": mp.node,
            "u_f": net.u_f,
            "inductances": {k: getattr(mp, k) for k in _INDUCTANCES},
            "resistances": {k: getattr(mp, k) for k in _RESISTANCES},
        }
        sp = cfg.shaft
        st = {
            "generator": sp.generator + 1,
            "inertia": list(sp.inertia),
            "stiffness": list(sp.stiffness),
            "self_damping": list(sp.self_damping),
            "mutual_damping": list(sp.mutual_damping),
        }
        if sp.torque_split:
            st["torque_split"] = list(sp.torque_split)
        out["shaft"] = st
    if cfg.dispatch is not None:
        out["dispatch"] = {f.name: getattr(cfg.dispatch, f.name) for f in fields(cfg.dispatch)}
    if cfg.torques is not None:
        out["torques"] = {"values": list(cfg.torques)}
    out["simulation"] = {f.name: getattr(cfg.simulation, f.name) for f in fields(cfg.simulation)}
    return _plain(out)


def _plain(obj):
    """numpy scalars to Python floats so the TOML writer accepts them."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def dumps(cfg: SystemConfig) -> str:
    return tomli_w.dumps(canonical(cfg))
