"""Small fully connected value network with hand-written backprop."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Mlp:
    """ReLU hidden layers, linear output. ``sizes`` lists every layer width."""

    sizes: tuple[int, ...]
    weights: list[np.ndarray] = field(default_factory=list)
    biases: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def init(cls, sizes, rng: np.random.Generator) -> "Mlp":
        sizes = tuple(int(s) for s in sizes)
        ws, bs = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            scale = np.sqrt(2.0 / fan_in)
            ws.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
            bs.append(np.zeros(fan_out))
        return cls(sizes, ws, bs)

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params()])

    def set_flat(self, vec: np.ndarray) -> None:
        k = 0
        for p in self.params():
            p[...] = vec[k:k + p.size].reshape(p.shape)
            k += p.size

    def copy(self) -> "Mlp":
        return Mlp(self.sizes, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def load_from(self, other: "Mlp") -> None:
        for p, q in zip(self.params(), other.params()):
            p[...] = q

    def forward(self, x: np.ndarray, keep: bool = False):
        h = np.atleast_2d(np.asarray(x, dtype=float))
        acts = [h]
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            h = z if k == last else np.maximum(z, 0.0)
            acts.append(h)
        return (h, acts) if keep else h

    def __call__(self, x):
        out = self.forward(x)
        return out[0] if np.ndim(x) == 1 else out

    def backward(self, acts: list[np.ndarray], grad_out: np.ndarray) -> list[np.ndarray]:
        """Gradients of a scalar loss given dL/d(output); same order as :meth:`params`."""
        grads_w, grads_b = [None] * len(self.weights), [None] * len(self.weights)
        g = grad_out
        for k in range(len(self.weights) - 1, -1, -1):
            grads_w[k] = acts[k].T @ g
            grads_b[k] = g.sum(axis=0)
            if k > 0:
                g = (g @ self.weights[k].T) * (acts[k] > 0.0)
        out = []
        for gw, gb in zip(grads_w, grads_b):
            out += [gw, gb]
        return out


def td_loss_and_grad(net: Mlp, obs: np.ndarray, actions: np.ndarray, targets: np.ndarray):
    """Mean squared error between ``targets`` and Q(obs, action)."""
    q, acts = net.forward(obs, keep=True)
    idx = np.arange(len(actions))
    resid = q[idx, actions] - targets
    loss = float(np.mean(resid ** 2))
    g = np.zeros_like(q)
    g[idx, actions] = 2.0 * resid / len(actions)
    return loss, net.backward(acts, g)


class Sgd:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params, grads) -> None:
        for p, g in zip(params, grads):
            p -= self.lr * g


class Adam:
    def __init__(self, lr: float, b1: float = 0.9, b2: float = 0.999, eps: float = 1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.t = 0
        self.m: list[np.ndarray] | None = None
        self.v: list[np.ndarray] | None = None

    def step(self, params, grads) -> None:
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def gradient_check(net: Mlp, obs: np.ndarray, actions: np.ndarray, targets: np.ndarray, h: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients."""
    _, grads = td_loss_and_grad(net, obs, actions, targets)
    analytic = np.concatenate([g.ravel() for g in grads])
    theta = net.flat()
    numeric = np.empty_like(theta)
    for k in range(theta.size):
        orig = theta[k]
        theta[k] = orig + h
        net.set_flat(theta)
        lp, _ = td_loss_and_grad(net, obs, actions, targets)
        theta[k] = orig - h
        net.set_flat(theta)
        lm, _ = td_loss_and_grad(net, obs, actions, targets)
        theta[k] = orig
        numeric[k] = (lp - lm) / (2 * h)
    net.set_flat(theta)
    # entries where both gradients vanish are judged on an absolute scale
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-6)
    return float(np.max(np.abs(analytic - numeric) / denom))
