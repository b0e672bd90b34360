"""Pipeline configuration, loaded from JSON with environment fallback."""

import dataclasses
import json
import os

from .errors import FlipchipError

ENV_VAR = "FLIPCHIP_CONFIG"


@dataclasses.dataclass(frozen=True)
class PipelineConfig:
    # height maps
    substrate_thickness_um: float = 525.2
    step_threshold_um: float = 400.0
    mask_threshold_um: float = 2.0
    bow_patch_fraction: float = 0.1
    # cpw defaults
    eps: float = 11.45
    eps_top: float = 11.45
    d_um: float = 10.0
    h_um: float = 525.0
    h_top_um: float = 525.0
    # notch fitting and photon number
    wing_fraction: float = 0.2
    attenuation_band_db: float = 3.0
    # participation-ratio anchor; relative Q is skipped when anchor_q is unset
    relq_anchor_w_um: float = 5.0
    relq_anchor_q: float = None
    output_dir: str = "flipchip-out"

    def __post_init__(self):
        for name in ("substrate_thickness_um", "step_threshold_um", "mask_threshold_um", "d_um", "h_um"):
            if not getattr(self, name) > 0:
                raise FlipchipError(f"config: {name} must be positive")
        if not 0 < self.bow_patch_fraction <= 0.5:
            raise FlipchipError("config: bow_patch_fraction must be in (0, 0.5]")
        if not 0 < self.wing_fraction < 0.5:
            raise FlipchipError("config: wing_fraction must be in (0, 0.5)")
        if min(self.eps, self.eps_top) < 1:
            raise FlipchipError("config: permittivities must be >= 1")

    def as_dict(self):
        return dataclasses.asdict(self)


def load_config(path=None):
    """Config from ``path``, else from $FLIPCHIP_CONFIG, else defaults."""
    path = path or os.environ.get(ENV_VAR)
    if not path:
        return PipelineConfig()
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise FlipchipError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise FlipchipError(f"config file {path} is not valid JSON: {exc}") from None
    known = {f.name for f in dataclasses.fields(PipelineConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise FlipchipError(f"config: unknown key(s) {', '.join(unknown)}")
    return PipelineConfig(**data)
