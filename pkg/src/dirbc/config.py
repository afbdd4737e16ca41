"""TOML scenario files.

Example::

    [scenario]
    base = "honest-chsh1"      # optional builtin to start from
    name = "my-run"
    repeat = 20
    seed = 7

    [protocol]
    variant = "CHSH1"
    n = 1000
    xi = 0.05

    [layout]
    P = [0, 0, 0, 0]
    Q0 = [-1, 0, 0, 0.5]
    Q1 = [1, 0, 0, 0.5]

    [alice]
    b = "random"               # 0, 1, "random" or "decline"
    unveil = [true, true]

    [devices.a]
    kind = "malicious"
    rules = [{location = "at:P", output = "0"}]

Every section is optional when ``base`` names a builtin.  Errors name the
offending field; syntax errors carry the line number from the TOML parser.
"""

from __future__ import annotations

import sys
from dataclasses import replace

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import adversary
from .bitmath import BitString
from .devices import DeviceBank, DeviceSpec, ProgramError
from .geometry import LayoutError, ProtocolLayout
from .harness import RANDOM_BIT, AliceBehavior, Scenario, _shifted, builtin_scenario
from .protocols import ConfigError, ProtocolConfig, Variant

SECTIONS = {"scenario", "protocol", "layout", "alice", "devices", "pretest"}
PROTOCOL_KEYS = {
    "variant": "variant",
    "n": "n",
    "xi": "xi",
    "c": "c_param",
    "delta": "delta",
    "loss_fraction": "loss_fraction",
    "l0": "l0",
    "dual": "dual",
    "travel_speed": "travel_speed",
    "verifier": "verifier",
}


class ConfigFileError(ValueError):
    pass


def load_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigFileError(f"{path}: {exc}") from None
    except OSError as exc:
        raise ConfigFileError(f"{path}: {exc.strerror}") from None


def parse_config(text: str) -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigFileError(str(exc)) from None


def _section(data: dict, name: str) -> dict:
    sec = data.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigFileError(f"{name}: expected a table")
    return sec


def _unknown(section: str, sec: dict, allowed) -> None:
    extra = sorted(set(sec) - set(allowed))
    if extra:
        raise ConfigFileError(f"{section}.{extra[0]}: unknown field")


def _parse_b(value):
    if value in (0, 1):
        return int(value)
    if value == RANDOM_BIT:
        return RANDOM_BIT
    if value == "decline":
        return None
    raise ConfigFileError(f"alice.b: expected 0, 1, 'random' or 'decline', got {value!r}")


def build_scenario(data: dict, overrides: dict | None = None) -> Scenario:
    """Scenario from parsed TOML; ``overrides`` hold protocol/scenario keys from the command line."""
    unknown = set(data) - SECTIONS
    if unknown:
        raise ConfigFileError(f"{sorted(unknown)[0]}: unknown section")
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    scen = dict(_section(data, "scenario"))
    _unknown("scenario", scen, {"base", "name", "repeat", "seed", "reuse_run"})
    proto = dict(_section(data, "protocol"))
    _unknown("protocol", proto, PROTOCOL_KEYS)
    for key in ("repeat", "seed"):
        if key in overrides:
            scen[key] = overrides.pop(key)
    proto.update(overrides)

    base_name = scen.get("base")
    if base_name is not None:
        try:
            base = builtin_scenario(str(base_name))
        except KeyError as exc:
            raise ConfigFileError(f"scenario.base: {exc.args[0]}") from None
    else:
        base = None

    # protocol config
    if base is not None:
        config = base.config
        fields = {PROTOCOL_KEYS[k]: v for k, v in proto.items()}
    else:
        if "variant" not in proto or "n" not in proto:
            raise ConfigFileError("protocol.variant: required (with protocol.n) when no base scenario is given")
        config = None
        fields = {PROTOCOL_KEYS[k]: v for k, v in proto.items()}
    if "layout" in data:
        try:
            fields["layout"] = ProtocolLayout.from_dict(_section(data, "layout"))
        except LayoutError as exc:
            raise ConfigFileError(str(exc)) from None
    if "l0" in fields and fields["l0"] is not None:
        try:
            fields["l0"] = BitString.from_str(str(fields["l0"]))
        except ValueError as exc:
            raise ConfigFileError(f"protocol.l0: {exc}") from None
    try:
        config = replace(config, **fields) if config is not None else ProtocolConfig(**fields)
    except ConfigError as exc:
        raise ConfigFileError(f"protocol.{exc}") from None
    except TypeError as exc:
        raise ConfigFileError(f"protocol: {exc}") from None

    # alice
    alice_sec = _section(data, "alice")
    _unknown("alice", alice_sec, {"b", "unveil", "careless", "strategy"})
    alice = base.alice if base is not None else AliceBehavior(b=RANDOM_BIT)
    if "b" in alice_sec:
        alice = replace(alice, b=_parse_b(alice_sec["b"]))
    if "unveil" in alice_sec:
        unv = alice_sec["unveil"]
        if not (isinstance(unv, list) and len(unv) == 2 and all(isinstance(u, bool) for u in unv)):
            raise ConfigFileError("alice.unveil: expected two booleans")
        alice = replace(alice, unveil=tuple(unv))
    if "careless" in alice_sec:
        alice = replace(alice, careless=bool(alice_sec["careless"]))
    if "strategy" in alice_sec:
        alice = replace(alice, strategy=_strategy(alice_sec["strategy"], config))

    devices = base.devices if base is not None else None
    if "devices" in data:
        devices = _devices(_section(data, "devices"), devices)

    pretest = base.pretest_layout if base is not None else None
    if "pretest" in data:
        pre = _section(data, "pretest")
        _unknown("pretest", pre, {"shift_x"})
        try:
            pretest = _shifted(config.layout, float(pre.get("shift_x", 10.0)))
        except (TypeError, ValueError):
            raise ConfigFileError("pretest.shift_x: expected a number") from None

    name = str(scen.get("name", base.name if base is not None else "custom"))
    try:
        return Scenario(
            name=name,
            config=config,
            alice=alice,
            devices=devices,
            repeat=int(scen.get("repeat", base.repeat if base is not None else 1)),
            seed=int(scen.get("seed", 0)),
            pretest_layout=pretest,
            reuse_run=bool(scen.get("reuse_run", base.reuse_run if base is not None else False)),
        )
    except ConfigError as exc:
        raise ConfigFileError(f"scenario.{exc}") from None


def _strategy(name, config: ProtocolConfig):
    if name != "optimal":
        raise ConfigFileError(f"alice.strategy: only 'optimal' is supported, got {name!r}")
    try:
        if config.variant is Variant.RCCBC:
            return adversary.brute_force_epsilon_rccbc(config.n, config.c_param)[1]
        if config.variant is Variant.CHSH3:
            raise ConfigFileError("alice.strategy: no reduced strategy for CHSH3")
        return adversary.brute_force_epsilon_chsh(config.n, config.xi, config.l0)[1]
    except adversary.OracleRangeError as exc:
        raise ConfigFileError(f"alice.strategy: {exc}") from None


def _devices(sec: dict, base: DeviceBank | None) -> DeviceBank:
    _unknown("devices", sec, {"a", "b0", "b1"})
    bank = base.clone() if base is not None else DeviceBank()
    specs = {"a": bank.a, "b0": bank.b[0], "b1": bank.b[1]}
    for key, raw in sec.items():
        if not isinstance(raw, dict):
            raise ConfigFileError(f"devices.{key}: expected a table")
        try:
            specs[key] = DeviceSpec.from_dict(raw, name=key)
        except (ProgramError, ValueError) as exc:
            raise ConfigFileError(f"devices.{key}: {exc}") from None
    return DeviceBank(specs["a"], (specs["b0"], specs["b1"]))
