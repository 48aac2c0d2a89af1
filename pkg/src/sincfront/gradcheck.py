"""Central finite-difference check of the full model's analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (LEARNED, SINC, ModelConfig, ModelState, backward, forward_batch, init_state,
                    loss_from_cache)

REL_TOL = 1e-4
ABS_FLOOR = 1e-8


def tiny_config(variant: str) -> ModelConfig:
    return ModelConfig(variant=variant, n_filters=4, filter_length=17, chunk_len=64, pool_width=4,
                       hidden_size=16, n_classes=2)


@dataclass
class GroupReport:
    name: str
    max_rel_error: float
    max_abs_error: float
    n_checked: int

    @property
    def ok(self) -> bool:
        return self.max_rel_error < REL_TOL


@dataclass
class CheckReport:
    variant: str
    groups: list[GroupReport]

    @property
    def ok(self) -> bool:
        return all(g.ok for g in self.groups)

    @property
    def max_rel_error(self) -> float:
        return max(g.max_rel_error for g in self.groups)

    def failing(self) -> list[str]:
        return [g.name for g in self.groups if not g.ok]


def mean_loss(state: ModelState, X, y) -> float:
    _, cache = forward_batch(state, X)
    return float(loss_from_cache(cache, y).mean())


def relative_errors(analytic, numeric):
    """|a - n| / max(|a|, |n|, floor); the floor keeps near-zero gradients finite."""
    a, n = np.asarray(analytic), np.asarray(numeric)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), ABS_FLOOR)


def check_state(state: ModelState, X, y, h: float = 1e-6, grad_hook=None) -> CheckReport:
    """Compare ``backward`` against central differences for every scalar parameter.

    ``grad_hook(grads)`` may mutate the analytic gradients before comparison;
    it exists so the harness itself can be tested against a known-bad gradient.
    """
    _, cache = forward_batch(state, X)
    grads = backward(state, cache, y)
    if grad_hook is not None:
        grad_hook(grads)
    groups = []
    for name in sorted(state.params):
        base = state.params[name]
        numeric = np.zeros(base.shape)
        for idx in np.ndindex(base.shape):
            plus, minus = state.copy(), state.copy()
            plus.params[name][idx] += h
            minus.params[name][idx] -= h
            numeric[idx] = (mean_loss(plus, X, y) - mean_loss(minus, X, y)) / (2 * h)
        rel = relative_errors(grads[name], numeric)
        groups.append(GroupReport(name, float(rel.max(initial=0.0)),
                                  float(np.abs(grads[name] - numeric).max(initial=0.0)), int(base.size)))
    return CheckReport(state.config.variant, groups)


def tiny_problem(variant: str, seed: int = 0, batch: int = 3):
    config = tiny_config(variant)
    state = init_state(config, seed)
    rng = np.random.default_rng(seed + 1000)
    # perturb norm params away from their trivial init so their gradients are exercised
    for k in ("ln_in_g", "ln_conv_g", "ln_hidden_g"):
        state.params[k] = np.array(rng.uniform(0.5, 1.5))
    for k in ("ln_in_b", "ln_conv_b", "ln_hidden_b"):
        state.params[k] = np.array(rng.uniform(-0.3, 0.3))
    state.params["b_hidden"] = rng.normal(scale=0.1, size=config.hidden_size)
    state.params["b_out"] = rng.normal(scale=0.1, size=config.n_classes)
    X = rng.normal(size=(batch, config.chunk_len))
    y = rng.integers(0, config.n_classes, size=batch)
    return state, X, y


def run_gradcheck(seed: int = 0, grad_hook=None) -> list[CheckReport]:
    return [check_state(*tiny_problem(v, seed), grad_hook=grad_hook) for v in (SINC, LEARNED)]
