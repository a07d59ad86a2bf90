"""Experiment configuration: YAML file -> nested dataclasses with defaults.

Every field has a default, so a minimal file needs only what differs.
Unknown keys are rejected (:class:`ParseError`); out-of-range values raise
:class:`ValidationError` naming the field. :func:`dump_config` writes the
fully resolved configuration so every run records what it actually used.
"""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from ..adversary import AttackConfig
from ..channel import ChannelParams, EnergyParams, dbm_to_watts
from ..errors import ParseError, ValidationError
from ..geometry import SlotConfig
from ..marl.agent import AgentHyper
from ..trust import WeightScheme
from ..world import WorldConfig

ALGORITHMS = ("MADDQN", "MADQN", "MADDQN-noBTMM")


@dataclass
class ArenaSection:
    x: tuple[float, float] = (0.0, 1500.0)
    y: tuple[float, float] = (0.0, 1500.0)
    z: tuple[float, float] = (120.0, 140.0)

    def __post_init__(self):
        for name in ("x", "y", "z"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name}: lower bound must be below upper bound")


@dataclass
class TrustSection:
    scheme: str = "adaptive"
    thr: float = 0.8
    psi0_cap: float = 0.9
    printed_denominator: bool = False

    def __post_init__(self):
        if self.scheme not in {s.value for s in WeightScheme}:
            raise ValueError(f"scheme: must be one of adaptive, average, random (got {self.scheme!r})")
        if not 0.0 < self.thr <= 1.0:
            raise ValueError("thr: must lie in (0, 1]")
        if not 0.0 < self.psi0_cap < 1.0:
            raise ValueError("psi0_cap: must lie in (0, 1)")


@dataclass
class ConsensusSection:
    n: int = 2
    M: int = 5
    drop_prob: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n: must be at least 1")
        if self.M < 1:
            raise ValueError("M: must be at least 1")
        if not 0.0 <= self.drop_prob < 1.0:
            raise ValueError("drop_prob: must lie in [0, 1)")


@dataclass
class ChannelSection:
    theta: float = 2.0
    f: float = 2.4e9
    c: float = 3e8
    noise_dbm: float = -110.0
    bandwidth: float = 2e6
    tx_power: float = 0.1


@dataclass
class QueueSection:
    c_max: int = 50
    t_one_max: float = 0.5


@dataclass
class ExperimentConfig:
    n_nodes: int = 20
    n_demands: int = 10
    arrival_window: int = 1
    demand_size: tuple[float, float] = (4e5, 6e5)
    horizon: int = 20
    tau: float = 1.0
    d_max: float = 600.0
    d_min: float = 10.0
    q: int = 6
    speed: float = 3.0
    static: bool = False
    reinject: bool = True
    arena: ArenaSection = field(default_factory=ArenaSection)
    attack: AttackConfig = field(default_factory=AttackConfig)
    trust: TrustSection = field(default_factory=TrustSection)
    consensus: ConsensusSection = field(default_factory=ConsensusSection)
    channel: ChannelSection = field(default_factory=ChannelSection)
    energy: EnergyParams = field(default_factory=EnergyParams)
    queue: QueueSection = field(default_factory=QueueSection)
    rl: AgentHyper = field(default_factory=AgentHyper)
    algorithm: str = "MADDQN"
    seeds: list[int] = field(default_factory=lambda: [0])
    episodes: int = 10
    eval_episodes: int = 0
    output: str = "out"
    positions: list[list[float]] | None = None
    demands: list[list[float]] | None = None

    def __post_init__(self):
        if self.n_nodes < 2:
            raise ValueError("n_nodes: must be at least 2")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm: must be one of {', '.join(ALGORITHMS)}")
        if self.episodes < 0 or self.eval_episodes < 0:
            raise ValueError("episodes: must be non-negative")
        if not self.seeds:
            raise ValueError("seeds: at least one seed required")
        if self.horizon < 1:
            raise ValueError("horizon: must be at least 1")

    @property
    def btmm(self) -> bool:
        return self.algorithm != "MADDQN-noBTMM"

    @property
    def double(self) -> bool:
        return self.algorithm != "MADQN"

    def world(self) -> WorldConfig:
        slot = SlotConfig(tau=self.tau, horizon=self.horizon, d_max=self.d_max, d_min=self.d_min, q=self.q,
                          speed=self.speed, arena_x=tuple(self.arena.x), arena_y=tuple(self.arena.y),
                          arena_z=tuple(self.arena.z))
        ch = self.channel
        channel = ChannelParams(theta=ch.theta, f=ch.f, c=ch.c, noise_power=dbm_to_watts(ch.noise_dbm),
                                bandwidth=ch.bandwidth, tx_power=ch.tx_power)
        demands = None
        if self.demands is not None:
            demands = [(int(s), int(d), float(size), int(birth)) for s, d, size, birth in self.demands]
        return WorldConfig(
            n_nodes=self.n_nodes, n_demands=self.n_demands, arrival_window=self.arrival_window,
            size_range=tuple(self.demand_size), slot=slot, channel=channel, energy=self.energy,
            c_max=self.queue.c_max, t_one_max=self.queue.t_one_max, attack=self.attack, btmm=self.btmm,
            thr=self.trust.thr, scheme=WeightScheme(self.trust.scheme), psi0_cap=self.trust.psi0_cap,
            printed_denominator=self.trust.printed_denominator, consensus_n=self.consensus.n,
            rotation_period=self.consensus.M, consensus_drop_prob=self.consensus.drop_prob, static=self.static,
            positions=self.positions, demands=demands, reinject=self.reinject,
        )


def _coerce(value: Any, tp: Any, path: str) -> Any:
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ParseError(f"{path}: expected a mapping")
        return _build(tp, value, path)
    if origin is typing.Union or (origin is not None and str(origin) == "<class 'types.UnionType'>"):
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(value, inner[0], path)
    if origin in (tuple, list):
        if not isinstance(value, (list, tuple)):
            raise ParseError(f"{path}: expected a list")
        if origin is tuple and args and args[-1] is not Ellipsis:
            if len(value) != len(args):
                raise ParseError(f"{path}: expected {len(args)} items")
            return tuple(_coerce(v, a, f"{path}[{k}]") for k, (v, a) in enumerate(zip(value, args)))
        elem = args[0] if args else Any
        out = [_coerce(v, elem, f"{path}[{k}]") for k, v in enumerate(value)]
        return tuple(out) if origin is tuple else out
    if tp is bool:
        if not isinstance(value, bool):
            raise ParseError(f"{path}: expected true/false")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ParseError(f"{path}: expected an integer")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ParseError(f"{path}: expected a number")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ParseError(f"{path}: expected a string")
        return value
    return value


def _build(cls, data: dict, path: str = ""):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        where = f"{path}." if path else ""
        raise ParseError(f"unknown key {where}{unknown[0]}")
    kwargs = {k: _coerce(v, hints[k], f"{path}.{k}" if path else k) for k, v in data.items()}
    try:
        return cls(**kwargs)
    except ValueError as exc:
        where = f"{path}: " if path else ""
        raise ValidationError(f"{where}{exc}") from exc


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f" line {mark.line + 1}" if mark is not None else ""
        raise ParseError(f"{source}:{line} {getattr(exc, 'problem', exc)}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ParseError(f"{source}: top level must be a mapping")
    return _build(ExperimentConfig, data)


def load_config(path: str | Path) -> ExperimentConfig:
    return parse_config(Path(path).read_text(), str(path))


def config_to_dict(cfg: ExperimentConfig) -> dict:
    def conv(v):
        if dataclasses.is_dataclass(v):
            return {f.name: conv(getattr(v, f.name)) for f in dataclasses.fields(v)}
        if isinstance(v, (list, tuple)):
            return [conv(x) for x in v]
        return v

    return conv(cfg)


def dump_config(cfg: ExperimentConfig, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(config_to_dict(cfg), sort_keys=False))
