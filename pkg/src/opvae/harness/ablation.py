"""Expanding a base config into ablation variants."""
from __future__ import annotations

from .config import ExperimentConfig, UsageError

AXES = {
    # SMA2C encoder input masks
    "encoder_inputs": ("sma2c", [{"a2c": {"inputs": m}} for m in ("full", "obs_action", "obs_only")]),
    # OMDDPG with and without the discrimination term
    "discrimination": ("omddpg", None),
}


def ablation_matrix(base: ExperimentConfig, axis: str) -> list[ExperimentConfig]:
    if axis not in AXES:
        raise UsageError(f"unknown ablation axis {axis!r}; choose from {sorted(AXES)}")
    family, overrides = AXES[axis]
    if base.family != family:
        raise UsageError(f"axis {axis!r} applies to {family} configs, got {base.method}")
    if overrides is None:
        lam = base["vae"]["lam"] or 1.0
        overrides = [{"vae": {"lam": lam}}, {"vae": {"lam": 0.0}}]
    # the method field is reset to the family so variants differ only in the ablated knob
    return [base.with_overrides({"method": family, "name": None, **o}) for o in overrides]
