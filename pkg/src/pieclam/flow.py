"""Coupling-layer normalizing flow used as a learned affiliation prior.

The flow T maps code space to a standard Gaussian latent through a stack of
affine coupling blocks. Each block permutes coordinates (a fixed
permutation drawn at build time; consecutive blocks complement each other's
transformed half so every coordinate gets updated), splits into a
conditioning half u_A and a transformed half u_B, and applies

    out_A = u_A
    out_B = u_B * exp(raw(u_A)) + shift(u_A)

where raw and shift are small MLPs (two tanh hidden layers; the scale net's
output is soft-clamped so exp never overflows). The scale exp(raw) is
strictly positive, and the block's log-Jacobian-determinant is sum(raw).
Densities follow from the change of variables

    log p(f) = log N(T(f); 0, I) + log_det T(f),

and sampling inverts the blocks in reverse order. Everything is float64
numpy with hand-written reverse-mode gradients, so training is exactly
reproducible under a seeded generator.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericalError
from .graphs import as_rng

LOG_TWO_PI = np.log(2.0 * np.pi)


class Mlp:
    """Two-hidden-layer tanh MLP; the output layer starts at zero.

    With out_squash=c the raw output passes through c * tanh(x / c), keeping
    it in (-c, c) with slope 1 at the origin.
    """

    def __init__(self, weights, biases, out_squash=None):
        self.weights = weights
        self.biases = biases
        self.out_squash = out_squash

    @classmethod
    def build(cls, in_dim, hidden, out_dim, rng, out_squash=None):
        w1 = rng.standard_normal((hidden, in_dim)) / np.sqrt(max(in_dim, 1))
        w2 = rng.standard_normal((hidden, hidden)) / np.sqrt(hidden)
        w3 = np.zeros((out_dim, hidden))
        return cls([w1, w2, w3],
                   [np.zeros(hidden), np.zeros(hidden), np.zeros(out_dim)],
                   out_squash=out_squash)

    def forward(self, x):
        w1, w2, w3 = self.weights
        b1, b2, b3 = self.biases
        a1 = np.tanh(x @ w1.T + b1)
        a2 = np.tanh(a1 @ w2.T + b2)
        out = a2 @ w3.T + b3
        if self.out_squash is not None:
            out = self.out_squash * np.tanh(out / self.out_squash)
        return out, (x, a1, a2, out)

    def backward(self, g_out, cache):
        """Gradients w.r.t. input and parameters ([w1, b1, w2, b2, w3, b3])."""
        x, a1, a2, out = cache
        w1, w2, w3 = self.weights
        if self.out_squash is not None:
            g_out = g_out * (1.0 - (out / self.out_squash) ** 2)
        gw3 = g_out.T @ a2
        gb3 = g_out.sum(axis=0)
        g_z2 = (g_out @ w3) * (1.0 - a2 * a2)
        gw2 = g_z2.T @ a1
        gb2 = g_z2.sum(axis=0)
        g_z1 = (g_z2 @ w2) * (1.0 - a1 * a1)
        gw1 = g_z1.T @ x
        gb1 = g_z1.sum(axis=0)
        return g_z1 @ w1, [gw1, gb1, gw2, gb2, gw3, gb3]

    def parameters(self):
        w1, w2, w3 = self.weights
        b1, b2, b3 = self.biases
        return [w1, b1, w2, b2, w3, b3]


class CouplingBlock:
    def __init__(self, perm, scale_net, shift_net):
        self.perm = np.asarray(perm, dtype=np.int64)
        self.inv_perm = np.argsort(self.perm)
        self.split = self.perm.size // 2
        self.scale_net = scale_net
        self.shift_net = shift_net

    def forward(self, x):
        k = self.split
        u = x[:, self.perm]
        a, b = u[:, :k], u[:, k:]
        raw, scale_cache = self.scale_net.forward(a)
        shift, shift_cache = self.shift_net.forward(a)
        out = np.concatenate([a, b * np.exp(raw) + shift], axis=1)
        return out, raw.sum(axis=1), (a, b, raw, scale_cache, shift_cache)

    def inverse(self, z):
        k = self.split
        a = z[:, :k]
        raw, _ = self.scale_net.forward(a)
        shift, _ = self.shift_net.forward(a)
        b = (z[:, k:] - shift) * np.exp(-raw)
        u = np.concatenate([a, b], axis=1)
        return u[:, self.inv_perm], -raw.sum(axis=1)

    def backward(self, g_out, g_log_det, cache):
        """Pull gradients (w.r.t. output and log-det) back to the input."""
        k = self.split
        a, b, raw, scale_cache, shift_cache = cache
        e = np.exp(raw)
        g_b_out = g_out[:, k:]
        g_raw = g_b_out * b * e + g_log_det[:, None]
        g_a = g_out[:, :k].copy()
        g_a_scale, scale_grads = self.scale_net.backward(g_raw, scale_cache)
        g_a_shift, shift_grads = self.shift_net.backward(g_b_out, shift_cache)
        g_a += g_a_scale + g_a_shift
        g_u = np.concatenate([g_a, g_b_out * e], axis=1)
        return g_u[:, self.inv_perm], scale_grads + shift_grads

    def parameters(self):
        return self.scale_net.parameters() + self.shift_net.parameters()


class RealNvpFlow:
    """Stack of coupling blocks with a standard Gaussian base distribution."""

    def __init__(self, dim, blocks, hidden, scale_squash):
        self.dim = dim
        self.blocks = blocks
        self.hidden = hidden
        self.scale_squash = scale_squash

    @classmethod
    def build(cls, dim, n_blocks=6, hidden=64, rng=None, scale_squash=5.0):
        """Fresh flow; zero-initialized output layers make it start as the identity
        (up to the block permutations, which leave the base Gaussian invariant)."""
        if dim < 2 and n_blocks > 0:
            raise ValueError("coupling blocks need dim >= 2")
        rng = as_rng(rng)
        k = dim // 2
        blocks = []
        base = None
        for i in range(n_blocks):
            if i % 2 == 0:
                base = rng.permutation(dim)
                perm = base
            else:
                # Complement the previous block's transformed half.
                perm = np.roll(base, dim - k)
            blocks.append(CouplingBlock(
                perm,
                Mlp.build(k, hidden, dim - k, rng, out_squash=scale_squash),
                Mlp.build(k, hidden, dim - k, rng),
            ))
        return cls(dim, blocks, hidden, scale_squash)

    def _check(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.dim:
            raise ValueError(f"expected dim {self.dim}, got {x.shape[1]}")
        return x

    def forward(self, x):
        """Map data to latent; returns (z, log_det) with log_det per sample."""
        z, log_det, _ = self._forward_cached(self._check(x))
        return z, log_det

    def _forward_cached(self, x):
        log_det = np.zeros(x.shape[0])
        caches = []
        for block in self.blocks:
            x, ld, cache = block.forward(x)
            log_det += ld
            caches.append(cache)
        return x, log_det, caches

    def inverse(self, z):
        """Map latent to data; log_det is the inverse map's (negated) one."""
        z = self._check(z)
        log_det = np.zeros(z.shape[0])
        for block in reversed(self.blocks):
            z, ld = block.inverse(z)
            log_det += ld
        return z, log_det

    def log_density(self, x):
        z, log_det = self.forward(x)
        return -0.5 * (z * z).sum(axis=1) - 0.5 * self.dim * LOG_TWO_PI + log_det

    def _backward(self, z, caches, g_z, g_log_det):
        """Shared reverse pass; returns (input gradient, parameter gradients)."""
        param_grads = []
        g = g_z
        for block, cache in zip(reversed(self.blocks), reversed(caches)):
            g, grads = block.backward(g, g_log_det, cache)
            param_grads.append(grads)
        param_grads.reverse()
        flat = [g_arr for block_grads in param_grads for g_arr in block_grads]
        return g, flat

    def grad_log_density(self, x):
        """d log p / d x, row per sample."""
        x = self._check(x)
        z, _, caches = self._forward_cached(x)
        g_x, _ = self._backward(z, caches, -z, np.ones(x.shape[0]))
        return g_x

    def mean_log_density_and_grads(self, x):
        """Mean log-density over rows plus its parameter gradients."""
        x = self._check(x)
        n = x.shape[0]
        z, log_det, caches = self._forward_cached(x)
        obj = float(np.mean(-0.5 * (z * z).sum(axis=1) + log_det)) \
            - 0.5 * self.dim * LOG_TWO_PI
        _, grads = self._backward(z, caches, -z / n, np.full(n, 1.0 / n))
        return obj, grads

    def sample(self, n, rng, projector=None):
        """Draw n rows by inverting the flow on Gaussian latents.

        projector, when given, maps the sampled rows onto a feasible set
        (e.g. the affiliation cone).
        """
        rng = as_rng(rng)
        z = rng.standard_normal((int(n), self.dim))
        f, _ = self.inverse(z)
        if projector is not None:
            f = projector(f)
        return f

    def parameters(self):
        return [p for block in self.blocks for p in block.parameters()]

    def permutations(self):
        return [block.perm.copy() for block in self.blocks]


def identity_flow(dim):
    """Zero-block flow: T(f) = f with log_det 0, i.e. a standard Gaussian prior."""
    return RealNvpFlow(dim, [], hidden=0, scale_squash=5.0)


class _AdamState:
    def __init__(self, params, learning_rate, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = learning_rate
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            m_hat = m / (1 - b1 ** self.t)
            v_hat = v / (1 - b2 ** self.t)
            p += self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def train_prior(flow, samples, steps, learning_rate, noise_amplitude=0.0,
                rng=None, optimizer="sgd", callback=None, batch_size=None):
    """Gradient ascent on the mean log-density of noise-perturbed samples.

    Fresh Gaussian noise of the given amplitude is drawn every step
    (amplitude 0 reduces to plain maximum likelihood). optimizer is "sgd"
    (plain full-batch ascent) or "adam". batch_size, when given, draws that
    many rows (with replacement) per step instead of the full set. Updates
    the flow in place and returns the per-step objective trace (evaluated
    on that step's perturbed batch, before the update). callback(step),
    when given, runs after each update.
    """
    if optimizer not in ("sgd", "adam"):
        raise ValueError(f"unknown optimizer {optimizer!r}")
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    rng = as_rng(rng)
    params = flow.parameters()
    adam = _AdamState(params, learning_rate) if optimizer == "adam" else None
    trace = np.empty(int(steps))
    for step in range(int(steps)):
        x = samples
        if batch_size is not None and batch_size < samples.shape[0]:
            x = samples[rng.integers(0, samples.shape[0], size=int(batch_size))]
        if noise_amplitude:
            x = x + noise_amplitude * rng.standard_normal(x.shape)
        obj, grads = flow.mean_log_density_and_grads(x)
        if not np.isfinite(obj):
            raise NumericalError(f"non-finite prior objective {obj!r} at step {step}")
        if adam is not None:
            adam.step(params, grads)
        else:
            for p, g in zip(params, grads):
                p += learning_rate * g
        trace[step] = obj
        if callback is not None:
            callback(step)
    return trace
