"""Gradient-correctness battery.

Runs central-difference checks against the analytic gradients for every
differentiable op and for both full training losses, on multiple random
instances each.  Used by the `gradcheck` CLI subcommand and the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import nn
from .models import (ModelConfig, SentenceVAE, TwoLevelVAE,
                     sentence_batch_loss, two_level_loss)
from .nn import Tensor

OP_THRESHOLD = 1e-4
LOSS_THRESHOLD = 1e-3

# Tiny-but-representative model for the full-loss checks.
TINY_CONFIG = ModelConfig(channels=3, kernel=(3, 3), input_hw=(6, 4),
                          task_channels=4)


@dataclass
class GradCheckResult:
    name: str
    max_rel_error: float
    instances: int
    threshold: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.threshold


def _param(rng: np.random.Generator, *shape: int) -> Tensor:
    return nn.parameter(rng.standard_normal(shape))


def _scalarize(x: Tensor) -> Tensor:
    """Reduce any tensor to a scalar with element-dependent weights so that
    permutation/transposition bugs change the checked gradient."""
    return nn.tsum(nn.tanh(nn.reshape(x, (x.size,))))


def _check_add(rng):
    a, b = _param(rng, 3, 4), _param(rng, 3, 4)
    return lambda: _scalarize(nn.add(a, b)), [a, b]


def _check_scale(rng):
    a = _param(rng, 4, 3)
    return lambda: _scalarize(nn.scale(a, 1.7)), [a]


def _check_tsum(rng):
    a = _param(rng, 3, 5)
    return lambda: nn.tsum(a), [a]


def _check_mean(rng):
    a = _param(rng, 2, 6)
    return lambda: nn.mean(a), [a]


def _check_reshape(rng):
    a = _param(rng, 3, 4)
    return lambda: _scalarize(nn.reshape(a, (2, 6))), [a]


def _check_narrow(rng):
    a = _param(rng, 3, 6)
    return lambda: _scalarize(nn.narrow(a, 1, 4, axis=1)), [a]


def _check_stack(rng):
    parts = [_param(rng, 2, 3) for _ in range(3)]
    return lambda: _scalarize(nn.stack(parts, axis=1)), parts


def _check_tanh(rng):
    a = _param(rng, 3, 4)
    return lambda: nn.tsum(nn.tanh(a)), [a]


def _check_clamp(rng):
    data = rng.standard_normal((3, 4)) * 2.0
    lo, hi = -1.5, 1.2
    # Keep entries clear of the bounds so finite differences stay one-sided.
    for bound in (lo, hi):
        near = np.abs(data - bound) < 1e-3
        data[near] = bound + np.where(data[near] >= bound, 1e-2, -1e-2)
    a = nn.parameter(data)
    return lambda: _scalarize(nn.clamp(a, lo, hi)), [a]


def _check_linear(rng):
    x = _param(rng, 4, 6)
    p = nn.init_linear(rng, 6, 3, name="lin")
    return lambda: _scalarize(nn.linear(x, p)), [x, p.weights, p.bias]


def _check_conv2d(rng):
    x = _param(rng, 2, 2, 5, 6)
    p = nn.init_conv(rng, 2, 3, (3, 3), name="conv")
    return lambda: _scalarize(nn.conv2d(x, p)), [x, p.weights, p.bias]


def _check_transposed_conv2d(rng):
    x = _param(rng, 2, 3, 3, 4)
    p = nn.init_conv(rng, 3, 2, (3, 3), transposed=True, name="tconv")
    fn = lambda: _scalarize(nn.transposed_conv2d(x, p, output_hw=(5, 6)))
    return fn, [x, p.weights, p.bias]


def _check_cosine_similarity(rng):
    a, b = _param(rng, 3, 7), _param(rng, 3, 7)
    return lambda: nn.tsum(nn.cosine_similarity(a, b)), [a, b]


def _check_kl_standard_normal(rng):
    mu, lv = _param(rng, 2, 5), _param(rng, 2, 5)
    return lambda: nn.kl_standard_normal(mu, lv), [mu, lv]


def _check_max_margin(rng):
    # Resample until no margin sits close to the hinge point.
    for _ in range(100):
        pos_d = rng.standard_normal(4)
        neg_d = rng.standard_normal((4, 3))
        margins = 1.0 - pos_d + neg_d.mean(axis=1)
        if np.all(np.abs(margins) > 2e-2):
            break
    pos, negs = nn.parameter(pos_d), nn.parameter(neg_d)
    return lambda: nn.tsum(nn.max_margin(pos, negs)), [pos, negs]


def _check_reparameterize(rng):
    mu, lv = _param(rng, 2, 5), _param(rng, 2, 5)
    eps_seed = int(rng.integers(2**32))
    fn = lambda: _scalarize(
        nn.reparameterize(mu, lv, np.random.default_rng(eps_seed)))
    return fn, [mu, lv]


OP_CASES: Dict[str, Callable] = {
    "add": _check_add,
    "scale": _check_scale,
    "tsum": _check_tsum,
    "mean": _check_mean,
    "reshape": _check_reshape,
    "narrow": _check_narrow,
    "stack": _check_stack,
    "tanh": _check_tanh,
    "clamp": _check_clamp,
    "linear": _check_linear,
    "conv2d": _check_conv2d,
    "transposed_conv2d": _check_transposed_conv2d,
    "cosine_similarity": _check_cosine_similarity,
    "kl_standard_normal": _check_kl_standard_normal,
    "max_margin": _check_max_margin,
    "reparameterize": _check_reparameterize,
}


def _loss_case_sentence(rng):
    model = SentenceVAE(TINY_CONFIG, rng)
    h, w = TINY_CONFIG.input_hw
    dim = h * w
    inputs = rng.standard_normal((2, 1, h, w))
    positives = rng.standard_normal((2, dim))
    negatives = rng.standard_normal((2, 3, dim))
    eps_seed = int(rng.integers(2**32))
    fn = lambda: sentence_batch_loss(model, inputs, positives, negatives,
                                     np.random.default_rng(eps_seed))
    return fn, model.params()


def _loss_case_two_level(rng):
    model = TwoLevelVAE(TINY_CONFIG, rng)
    h, w = TINY_CONFIG.input_hw
    dim = h * w
    contexts = rng.standard_normal((2, TINY_CONFIG.context_len, 1, h, w))
    correct = rng.standard_normal((2, dim))
    wrong = rng.standard_normal((2, 4, dim))
    eps_seed = int(rng.integers(2**32))
    fn = lambda: two_level_loss(model, contexts, correct, wrong,
                                np.random.default_rng(eps_seed))
    return fn, model.params()


LOSS_CASES: Dict[str, Callable] = {
    "sentence_loss": _loss_case_sentence,
    "two_level_loss": _loss_case_two_level,
}


def check_case(builder: Callable, rng: np.random.Generator, instances: int,
               threshold: float, name: str,
               max_entries: Optional[int] = None) -> GradCheckResult:
    worst = 0.0
    for _ in range(instances):
        fn, wrt = builder(rng)
        worst = max(worst, nn.grad_check(fn, wrt, max_entries=max_entries,
                                         rng=rng))
    return GradCheckResult(name, worst, instances, threshold)


def run_battery(seed: int = 0, instances: int = 10,
                loss_max_entries: int = 25) -> List[GradCheckResult]:
    """All op checks at OP_THRESHOLD plus both losses at LOSS_THRESHOLD.

    Loss checks subsample parameter coordinates (loss_max_entries per
    tensor) to keep the battery well under its runtime budget.
    """
    rng = np.random.default_rng(seed)
    results = [check_case(builder, rng, instances, OP_THRESHOLD, name)
               for name, builder in OP_CASES.items()]
    results += [check_case(builder, rng, instances, LOSS_THRESHOLD, name,
                           max_entries=loss_max_entries)
                for name, builder in LOSS_CASES.items()]
    return results


def battery_passed(results: Sequence[GradCheckResult]) -> bool:
    return all(r.passed for r in results)


def format_results(results: Sequence[GradCheckResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{r.name:<{width}}  max_rel_err={r.max_rel_error:.3e}  "
             f"threshold={r.threshold:.0e}  instances={r.instances}  "
             f"{'ok' if r.passed else 'FAIL'}"
             for r in results]
    return "\n".join(lines)
