"""Per-agent value learners: replay buffer, action choice, TD targets, updates.

Transitions are demand-centric: the agent that forwarded a demand stores
``(o, a, r, o')`` where ``o'`` is the observation of the node that holds the
demand next, and the bootstrap value is read from that node's networks.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from ..errors import BufferTooSmall
from .nn import Adam, Mlp, Sgd, td_loss_and_grad

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


@dataclass
class AgentHyper:
    lr: float = 1e-4
    gamma: float = 0.95
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_frac: float = 0.5
    target_sync: int = 200
    batch: int = 64
    capacity: int = 100_000
    hidden: int = 64
    optimizer: str = "adam"
    share_params: bool = False

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        for name in ("eps_start", "eps_end", "eps_decay_frac"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.target_sync < 1 or self.batch < 1 or self.capacity < 1:
            raise ValueError("target_sync, batch and capacity must be positive")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError("optimizer must be 'adam' or 'sgd'")


def epsilon(episode: int, episodes: int, hyper: AgentHyper) -> float:
    """Exponential-shaped decay from start to end over the first fraction of episodes."""
    horizon = max(1.0, hyper.eps_decay_frac * episodes)
    frac = min(episode / horizon, 1.0)
    k = 5.0
    shape = (math.exp(-k * frac) - math.exp(-k)) / (1.0 - math.exp(-k))
    return hyper.eps_end + (hyper.eps_start - hyper.eps_end) * shape


class ReplayBuffer:
    """Ring buffer with FIFO eviction and uniform sampling.

    Storage grows by doubling up to ``capacity`` so small runs stay small.
    """

    def __init__(self, capacity: int, obs_dim: int, n_actions: int):
        self.capacity = capacity
        self.obs_dim = obs_dim
        self.n_actions = n_actions
        self.size = 0
        self.pos = 0
        self._alloc(min(capacity, 256))

    def _alloc(self, cap: int) -> None:
        old = getattr(self, "obs", None)
        new = {
            "obs": np.zeros((cap, self.obs_dim)),
            "action": np.zeros(cap, dtype=np.int64),
            "reward": np.zeros(cap),
            "next_obs": np.zeros((cap, self.obs_dim)),
            "next_mask": np.zeros((cap, self.n_actions), dtype=bool),
            "terminal": np.zeros(cap, dtype=bool),
            "next_agent": np.zeros(cap, dtype=np.int64),
        }
        if old is not None:
            for k, arr in new.items():
                arr[: self.size] = getattr(self, k)[: self.size]
        for k, arr in new.items():
            setattr(self, k, arr)
        self._cap = cap

    def __len__(self) -> int:
        return self.size

    def add(self, obs, action: int, reward: float, next_obs, next_mask, terminal: bool, next_agent: int) -> None:
        if self.size < self.capacity:
            if self.size == self._cap:
                self._alloc(min(self._cap * 2, self.capacity))
            i = self.size
            self.size += 1
        else:
            i = self.pos  # oldest entry
        self.pos = (i + 1) % self.capacity
        self.obs[i] = obs
        self.action[i] = action
        self.reward[i] = reward
        self.next_obs[i] = next_obs
        self.next_mask[i] = next_mask
        self.terminal[i] = terminal
        self.next_agent[i] = next_agent

    def sample_indices(self, batch: int, rng: np.random.Generator) -> np.ndarray:
        if self.size <= batch:
            raise BufferTooSmall(f"buffer holds {self.size}, need more than {batch}")
        return rng.integers(0, self.size, size=batch)


def masked_argmax(q: np.ndarray, mask: np.ndarray) -> int:
    """Index of the largest valid entry; ties go to the lowest index."""
    vals = np.where(mask, q, -np.inf)
    return int(np.argmax(vals))


def select_action(net: Mlp, obs: np.ndarray, mask: np.ndarray, eps: float, rng: np.random.Generator) -> int:
    mask = np.asarray(mask, dtype=bool)
    valid = np.flatnonzero(mask)
    if valid.size == 0:
        raise ValueError("no valid action")
    if eps > 0 and rng.random() < eps:
        return int(valid[rng.integers(0, valid.size)])
    return masked_argmax(net(obs), mask)


def dqn_target(r: float, gamma: float, target_net: Mlp, next_obs, next_mask, terminal: bool) -> float:
    if terminal:
        return float(r)
    q = target_net(next_obs)
    return float(r + gamma * np.max(np.where(next_mask, q, -np.inf)))


def ddqn_target(r: float, gamma: float, online_net: Mlp, target_net: Mlp, next_obs, next_mask, terminal: bool) -> float:
    if terminal:
        return float(r)
    a_star = masked_argmax(online_net(next_obs), np.asarray(next_mask, dtype=bool))
    return float(r + gamma * target_net(next_obs)[a_star])


class Agent:
    def __init__(self, agent_id: int, obs_dim: int, n_actions: int, hyper: AgentHyper, rng: np.random.Generator,
                 online: Mlp | None = None):
        self.id = agent_id
        self.hyper = hyper
        self.online = online or Mlp.init((obs_dim, hyper.hidden, hyper.hidden, n_actions), rng)
        self.target = self.online.copy()
        self.opt = Adam(hyper.lr) if hyper.optimizer == "adam" else Sgd(hyper.lr)
        self.buffer = ReplayBuffer(hyper.capacity, obs_dim, n_actions)
        self.train_calls = 0

    def sync_target(self) -> None:
        self.target.load_from(self.online)


def batch_targets(idx: np.ndarray, buf: ReplayBuffer, agents: Mapping[int, Agent], gamma: float, double: bool) -> np.ndarray:
    """Vectorized TD targets; bootstrap values come from each sample's next agent."""
    r = buf.reward[idx]
    term = buf.terminal[idx]
    nxt = buf.next_obs[idx]
    mask = buf.next_mask[idx]
    boot = np.zeros(len(idx))
    for aid in np.unique(buf.next_agent[idx]):
        sel = (buf.next_agent[idx] == aid) & ~term
        if not sel.any():
            continue
        ag = agents[int(aid)]
        tq = ag.target.forward(nxt[sel])
        m = mask[sel]
        if double:
            oq = np.where(m, ag.online.forward(nxt[sel]), -np.inf)
            a_star = np.argmax(oq, axis=1)
            boot[sel] = tq[np.arange(len(a_star)), a_star]
        else:
            boot[sel] = np.max(np.where(m, tq, -np.inf), axis=1)
    return r + gamma * boot * (~term)


def train_step(agent: Agent, agents: Mapping[int, Agent], rng: np.random.Generator, double: bool = True) -> float:
    """One minibatch gradient step; syncs the target every ``target_sync`` calls."""
    h = agent.hyper
    idx = agent.buffer.sample_indices(h.batch, rng)
    y = batch_targets(idx, agent.buffer, agents, h.gamma, double)
    loss, grads = td_loss_and_grad(agent.online, agent.buffer.obs[idx], agent.buffer.action[idx], y)
    agent.opt.step(agent.online.params(), grads)
    agent.train_calls += 1
    if agent.train_calls % h.target_sync == 0:
        agent.sync_target()
    return loss


def save_checkpoint(path: str | Path, agents: Mapping[int, Agent], hyper: AgentHyper, meta: dict | None = None) -> None:
    """Text checkpoint: one JSON header line, then one line of parameters per agent."""
    ids = sorted(agents)
    header = {
        "format": "uavtrust-checkpoint",
        "version": CHECKPOINT_VERSION,
        "agents": ids,
        "sizes": list(agents[ids[0]].online.sizes) if ids else [],
        "layout": "per layer: weight (row-major, fan_in x fan_out) then bias",
        "hyper": asdict(hyper),
        "meta": meta or {},
    }
    lines = [json.dumps(header, sort_keys=True)]
    for i in ids:
        lines.append(" ".join(repr(float(x)) for x in agents[i].online.flat()))
    Path(path).write_text("\n".join(lines) + "\n")


def load_checkpoint(path: str | Path) -> tuple[dict, dict[int, Mlp]]:
    text = Path(path).read_text().splitlines()
    header = json.loads(text[0])
    if header.get("format") != "uavtrust-checkpoint" or header.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint header in {path}")
    sizes = tuple(header["sizes"])
    nets = {}
    for aid, line in zip(header["agents"], text[1:]):
        net = Mlp.init(sizes, np.random.default_rng(0))
        net.set_flat(np.array([float(x) for x in line.split()]))
        nets[int(aid)] = net
    return header, nets
