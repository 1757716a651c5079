"""Optimizer construction and parameter-group hashing.

The optimizer is pinned for reproducibility: momentum-free RMSprop plus a
linear warmup, optionally followed by cosine decay to 5% of the base rate.
Freezing is enforced twice: requires_grad is cleared on frozen groups, and
only trainable groups' parameters are handed to the optimizer.
"""

from __future__ import annotations

import hashlib
import math

import torch

from ..model.stack import MultimodalModel
from .plans import ParameterGroupPlan

RMSPROP_ALPHA = 0.9


def apply_plan(model: MultimodalModel, plan: ParameterGroupPlan) -> list[torch.nn.Parameter]:
    """Set requires_grad per the plan; returns the trainable parameters."""
    trainable: list[torch.nn.Parameter] = []
    groups = model.parameter_groups()
    for name, module in groups.items():
        flag = getattr(plan, name)
        for p in module.parameters():
            p.requires_grad_(flag)
        if flag:
            trainable.extend(module.parameters())
    return trainable


def build_optimizer(
    params: list[torch.nn.Parameter],
    learning_rate: float,
    warmup_steps: int = 10,
    decay_steps: int = 0,
):
    if not params:
        raise ValueError("no trainable parameters for this plan")
    opt = torch.optim.RMSprop(params, lr=learning_rate, alpha=RMSPROP_ALPHA)

    def factor(step: int) -> float:
        warm = min(1.0, (step + 1) / max(1, warmup_steps))
        if decay_steps > 0:
            progress = min(1.0, step / decay_steps)
            return warm * (0.05 + 0.95 * 0.5 * (1.0 + math.cos(math.pi * progress)))
        return warm

    sched = torch.optim.lr_scheduler.LambdaLR(opt, factor)
    return opt, sched


def param_group_hashes(model: MultimodalModel) -> dict[str, str]:
    """sha256 per group over parameter names and exact float64 bytes."""
    out = {}
    for name, module in model.parameter_groups().items():
        h = hashlib.sha256()
        for pname, param in sorted(module.named_parameters()):
            h.update(pname.encode())
            h.update(param.detach().contiguous().numpy().tobytes())
        out[name] = h.hexdigest()
    return out
