"""Per-group Adam for Gaussian clouds."""

import logging
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from core.config.settings import TrainConfig
from core.errors import InvalidParameterError, OptimizerDivergenceError, ShapeError
from core.render.backward import ParamGrads
from core.scene.gaussians import PARAM_FIELDS, GaussianCloud, normalize_quaternions

logger = logging.getLogger(__name__)

BETA1 = 0.9
BETA2 = 0.999
ADAM_EPS = 1e-15
SH_REST_LR_FACTOR = 1.0 / 20.0


@dataclass
class OptimizerState:
    """First and second moments per parameter group plus the step counter."""
    exp_avg: Dict[str, np.ndarray] = field(default_factory=dict)
    exp_avg_sq: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    @classmethod
    def zeros(cls, cloud: GaussianCloud) -> "OptimizerState":
        params = cloud.params()
        return cls(
            exp_avg={k: np.zeros_like(v) for k, v in params.items()},
            exp_avg_sq={k: np.zeros_like(v) for k, v in params.items()},
        )

    def __len__(self) -> int:
        return self.exp_avg["positions"].shape[0]

    def select(self, index) -> "OptimizerState":
        """Keep the moments of a subset of Gaussians, in order."""
        return OptimizerState(
            exp_avg={k: v[index].copy() for k, v in self.exp_avg.items()},
            exp_avg_sq={k: v[index].copy() for k, v in self.exp_avg_sq.items()},
            step=self.step,
        )

    def extend(self, count: int) -> "OptimizerState":
        """Append zeroed moments for ``count`` new Gaussians."""
        def pad(v):
            return np.concatenate([v, np.zeros((count,) + v.shape[1:])], axis=0)
        return OptimizerState(
            exp_avg={k: pad(v) for k, v in self.exp_avg.items()},
            exp_avg_sq={k: pad(v) for k, v in self.exp_avg_sq.items()},
            step=self.step,
        )

    def check_matches(self, cloud: GaussianCloud) -> None:
        for name, arr in cloud.params().items():
            for moments in (self.exp_avg, self.exp_avg_sq):
                if moments[name].shape != arr.shape:
                    raise ShapeError(f"Optimizer moments for {name} are {moments[name].shape}, "
                                     f"parameters are {arr.shape}")


def position_lr(step: int, cfg: TrainConfig, extent: float = 1.0) -> float:
    """Log-linear decay from position_lr_init to position_lr_final, scaled by scene extent."""
    if cfg.position_lr_init == 0.0:
        return 0.0
    t = min(max(step, 0) / float(cfg.iterations), 1.0)
    if cfg.position_lr_final == 0.0:
        lr = (1.0 - t) * cfg.position_lr_init
    else:
        lr = float(np.exp((1.0 - t) * np.log(cfg.position_lr_init) + t * np.log(cfg.position_lr_final)))
    return lr * extent


def learning_rates(step: int, cfg: TrainConfig, extent: float = 1.0) -> Dict[str, float]:
    """Learning rate per parameter group at a step."""
    return {
        "positions": position_lr(step, cfg, extent),
        "rotations": cfg.rotation_lr,
        "log_scales": cfg.scale_lr,
        "opacity_logits": cfg.opacity_lr,
        "sh_coeffs": cfg.sh_lr,
    }


def adam_step(cloud: GaussianCloud, grads: ParamGrads, state: OptimizerState,
              lrs: Dict[str, float]) -> Tuple[GaussianCloud, OptimizerState]:
    """One bias-corrected Adam update of every parameter group.

    Higher-order SH coefficients use 1/20 of the SH learning rate.
    Quaternions are renormalized after the update.

    Returns:
        Tuple of (updated cloud, updated state)

    Raises:
        ShapeError: Gradients or moments do not match the cloud.
        OptimizerDivergenceError: The update produced a non-finite parameter.
    """
    state.check_matches(cloud)
    step = state.step + 1
    bias1 = 1.0 - BETA1 ** step
    bias2 = 1.0 - BETA2 ** step

    exp_avg, exp_avg_sq, updated = {}, {}, {}
    for name in PARAM_FIELDS:
        p = getattr(cloud, name)
        g = getattr(grads, name)
        if g.shape != p.shape:
            raise ShapeError(f"Gradient for {name} is {g.shape}, parameters are {p.shape}")
        m = BETA1 * state.exp_avg[name] + (1.0 - BETA1) * g
        v = BETA2 * state.exp_avg_sq[name] + (1.0 - BETA2) * g * g
        lr = lrs[name]
        if name == "sh_coeffs" and p.shape[1] > 1:
            lr = np.full((1, p.shape[1], 1), lr * SH_REST_LR_FACTOR)
            lr[:, 0] = lrs[name]
        new = p - lr * (m / bias1) / (np.sqrt(v / bias2) + ADAM_EPS)
        if not np.all(np.isfinite(new)):
            bad = int(np.argmax(~np.all(np.isfinite(new.reshape(len(new), -1)), axis=1)))
            raise OptimizerDivergenceError(f"Adam step {step} made {name} of Gaussian {bad} non-finite")
        exp_avg[name], exp_avg_sq[name], updated[name] = m, v, new

    try:
        updated["rotations"] = normalize_quaternions(updated["rotations"])
    except InvalidParameterError as e:
        raise OptimizerDivergenceError(f"Adam step {step} collapsed a quaternion to zero") from e

    new_state = OptimizerState(exp_avg=exp_avg, exp_avg_sq=exp_avg_sq, step=step)
    return GaussianCloud(sh_degree=cloud.sh_degree, **updated), new_state
