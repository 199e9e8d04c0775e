import configparser
import copy
import math
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import BadValue, UnknownKey, UnknownPreset


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class RunSection(Section):
    seed: int = 0
    dataset_path: str = ""
    log_file: str = "run.log"


class ModelSection(Section):
    sign_convention: Literal["inside-positive", "inside-negative"] = "inside-positive"
    coarse_resolution: int = Field(16, ge=2)
    coarse_feature_dim: int = Field(32, ge=1)
    fine_levels: int = 6
    fine_min_resolution: int = 16
    fine_max_resolution: int = 64
    fine_feature_dim: int = Field(4, ge=1)
    color_levels: int = 10
    color_min_resolution: int = 16
    color_max_resolution: int = 256
    color_feature_dim: int = Field(2, ge=1)
    geo_feature_dim: int = Field(32, ge=1)
    coarse_hidden: int = Field(64, ge=1)
    fine_hidden: int = Field(64, ge=1)
    fine_hidden_layers: int = Field(3, ge=1)
    color_hidden: int = Field(64, ge=1)
    color_hidden_layers: int = Field(2, ge=1)
    position_encoding_levels: int = Field(6, ge=0)
    direction_encoding_levels: int = Field(4, ge=0)
    softplus_sharpness: float = Field(100.0, gt=0)
    fine_grid_init_std: float = Field(1e-2, ge=0)
    coarse_grid_init_std: float = Field(1e-2, ge=0)
    use_coarse_grid: bool = True
    use_color_grids: bool = True
    init_sphere_radius: float = Field(0.5, gt=0)
    init_points: int = Field(2000, ge=1)
    init_max_iterations: int = Field(200, ge=0)
    init_learning_rate: float = Field(1e-2, gt=0)
    init_tolerance: float = Field(0.05, gt=0)
    init_fail_tolerance: float = Field(0.15, gt=0)

    @model_validator(mode="after")
    def check_ranges(self):
        for prefix in ("fine", "color"):
            levels = getattr(self, f"{prefix}_levels")
            low, high = getattr(self, f"{prefix}_min_resolution"), getattr(self, f"{prefix}_max_resolution")
            if levels < 2:
                raise ValueError(f"{prefix}_levels must be at least 2")
            if not 2 <= low <= high:
                raise ValueError(f"{prefix} resolutions must satisfy 2 <= min <= max")
        if self.init_tolerance > self.init_fail_tolerance:
            raise ValueError("init_tolerance must not exceed init_fail_tolerance")
        return self


class RenderingSection(Section):
    samples_per_ray: int = Field(32, ge=1)
    near: float = Field(0.05, ge=0)
    far: float = 2.0 * math.sqrt(3.0)
    beta_mode: Literal["adaptive", "fixed", "global"] = "adaptive"
    beta_c0: float = Field(1.208e-2, gt=0)
    beta_c1: float = Field(6.26471e-6, gt=0)
    beta_c2: float = Field(2.3e-3, gt=0)
    fixed_beta: float = Field(1e-2, gt=0)
    counter_resolution: int = Field(64, ge=1)

    @model_validator(mode="after")
    def check_bounds(self):
        if not self.near < self.far:
            raise ValueError("near must be below far")
        return self


class LossSection(Section):
    weight_rgb: float = Field(1.0, ge=0)
    weight_warp: float = Field(0.5, ge=0)
    weight_flow: float = Field(0.001, ge=0)
    weight_depth: float = Field(0.1, ge=0)
    weight_normal: float = Field(0.05, ge=0)
    weight_eikonal: float = Field(0.1, ge=0)
    eikonal_points: int = Field(256, ge=0)
    eikonal_surface_std: float = Field(0.05, ge=0)
    bootstrap_depth_scale: float = 20.0
    bootstrap_depth_shift: float = 0.0


class MappingSection(Section):
    pixels: int = Field(2048, ge=1)
    iterations: int = Field(100, ge=1)
    stride: int = Field(5, ge=1)
    frames: int = Field(16, ge=3)
    global_keyframes: int = Field(5, ge=0)
    recent_keyframes: int = Field(10, ge=0)
    recent_window: int = Field(20, ge=1)
    keyframe_interval: int = Field(10, ge=1)
    stage2_start: float = Field(0.25, ge=0, le=1)
    stage3_start: float = Field(0.75, ge=0, le=1)
    lr_coarse_grid: float = Field(1e-2, gt=0)
    lr_fine_grid: float = Field(1e-2, gt=0)
    lr_color_grid: float = Field(1e-2, gt=0)
    lr_decoder: float = Field(1e-3, gt=0)
    lr_pose: float = Field(5e-4, gt=0)
    lr_beta: float = Field(1e-3, gt=0)
    adam_beta1: float = Field(0.9, ge=0, lt=1)
    adam_beta2: float = Field(0.999, ge=0, lt=1)
    adam_eps: float = Field(1e-8, gt=0)

    @model_validator(mode="after")
    def check_stages(self):
        if self.stage2_start > self.stage3_start:
            raise ValueError("stage boundaries must be ordered")
        if self.global_keyframes + self.recent_keyframes + 1 != self.frames:
            raise ValueError("frames must equal global_keyframes + recent_keyframes + 1")
        return self


class TrackingSection(Section):
    pixels: int = Field(512, ge=1)
    iterations: int = Field(100, ge=1)
    lr: float = Field(1e-3, gt=0)
    use_gt_poses: bool = False


class SynthSection(Section):
    width: int = Field(64, ge=2)
    height: int = Field(48, ge=2)
    fx: float = Field(50.0, gt=0)
    fy: float = Field(50.0, gt=0)
    cx: float = 32.0
    cy: float = 24.0
    frames: int = Field(20, ge=1)
    trajectory: Literal["circle", "lemniscate"] = "circle"
    trajectory_radius: float = Field(0.45, gt=0)
    trajectory_height: float = 0.0
    trajectory_arc_degrees: float = Field(60.0, gt=0)
    target_x: float = 0.0
    target_y: float = 0.0
    target_z: float = 0.45
    room_half_extent: float = Field(0.8, gt=0, le=0.9)
    depth_scale_min: float = Field(0.5, gt=0)
    depth_scale_max: float = Field(2.0, gt=0)
    depth_shift_max: float = Field(0.1, ge=0)
    normal_noise_deg: float = Field(3.0, ge=0)
    texture_seed: int = 7
    flow_max_gap: int = Field(20, ge=1)
    heldout_views: int = Field(5, ge=0)

    @model_validator(mode="after")
    def check_camera(self):
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ValueError("principal point must lie inside the image")
        if self.depth_scale_min > self.depth_scale_max:
            raise ValueError("depth_scale_min must not exceed depth_scale_max")
        return self


class EvalSection(Section):
    mesh_resolution: int = Field(128, ge=16)
    completion_threshold: float = Field(0.05, gt=0)
    mesh_samples: int = Field(20000, ge=1)
    align_scale: bool = True


class RunConfig(Section):
    preset: Literal["desk", "paper", "micro"] = "desk"
    run: RunSection = Field(default_factory=RunSection)
    model: ModelSection = Field(default_factory=ModelSection)
    rendering: RenderingSection = Field(default_factory=RenderingSection)
    losses: LossSection = Field(default_factory=LossSection)
    mapping: MappingSection = Field(default_factory=MappingSection)
    tracking: TrackingSection = Field(default_factory=TrackingSection)
    synth: SynthSection = Field(default_factory=SynthSection)
    eval: EvalSection = Field(default_factory=EvalSection)


SECTIONS = ("run", "model", "rendering", "losses", "mapping", "tracking", "synth", "eval")

# Field defaults are the desk preset; the other presets override.
PRESETS: Dict[str, Dict[str, Dict[str, Any]]] = {
    "desk": {},
    "paper": {
        "model": {
            "coarse_resolution": 32,
            "fine_levels": 8, "fine_min_resolution": 32, "fine_max_resolution": 128,
            "color_levels": 16, "color_min_resolution": 16, "color_max_resolution": 2048,
        },
        "mapping": {"pixels": 8096},
        "tracking": {"pixels": 1024},
        "eval": {"mesh_resolution": 512},
    },
    # tiny widths for the test suite and the gradcheck command
    "micro": {
        "model": {
            "coarse_resolution": 4, "coarse_feature_dim": 4,
            "fine_levels": 2, "fine_min_resolution": 4, "fine_max_resolution": 6, "fine_feature_dim": 2,
            "color_levels": 2, "color_min_resolution": 4, "color_max_resolution": 6, "color_feature_dim": 2,
            "geo_feature_dim": 4, "coarse_hidden": 8, "fine_hidden": 8, "fine_hidden_layers": 1,
            "color_hidden": 8, "color_hidden_layers": 1, "position_encoding_levels": 2,
            "direction_encoding_levels": 1, "init_points": 400, "init_max_iterations": 60,
            "init_tolerance": 0.1, "init_fail_tolerance": 0.5,
        },
        "rendering": {"samples_per_ray": 8, "counter_resolution": 8},
        "losses": {"eikonal_points": 8},
        "mapping": {"pixels": 8, "iterations": 2, "frames": 4, "global_keyframes": 1, "recent_keyframes": 2,
                    "recent_window": 4},
        "tracking": {"pixels": 4, "iterations": 3},
        "synth": {"width": 16, "height": 12, "fx": 12.0, "fy": 12.0, "cx": 8.0, "cy": 6.0, "frames": 6,
                  "heldout_views": 2},
        "eval": {"mesh_resolution": 24, "mesh_samples": 500},
    },
}


def preset_defaults(preset: str) -> Dict[str, Dict[str, Any]]:
    if preset not in PRESETS:
        raise UnknownPreset(f"unknown preset {preset!r}; expected one of {sorted(PRESETS)}")
    return copy.deepcopy(PRESETS[preset])


def _parse_scalar(raw: str) -> str:
    raw = raw.strip()
    if len(raw) >= 2 and raw[0] == raw[-1] == '"':
        return raw[1:-1]
    return raw


def build_config(values: Dict[str, Dict[str, Any]], preset: str = "desk",
                 seed: Optional[int] = None) -> RunConfig:
    merged = preset_defaults(preset)
    for section, entries in values.items():
        if section not in SECTIONS:
            raise UnknownKey(section)
        merged.setdefault(section, {}).update(entries)
    if seed is not None:
        merged.setdefault("run", {})["seed"] = seed
    try:
        return RunConfig.model_validate({"preset": preset, **merged})
    except ValidationError as exc:
        error = exc.errors()[0]
        name = ".".join(str(p) for p in error["loc"])
        if error["type"] == "extra_forbidden":
            raise UnknownKey(name) from exc
        raise BadValue(name) from exc


def parse_config_text(text: str) -> Dict[str, Dict[str, str]]:
    parser = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise BadValue(str(exc).splitlines()[0]) from exc
    return {section: {key: _parse_scalar(raw) for key, raw in parser.items(section)}
            for section in parser.sections()}


def load_config(path: Optional[Union[str, Path]] = None, preset: str = "desk",
                seed: Optional[int] = None) -> RunConfig:
    """INI `[section]` / `key = value` file over preset defaults."""
    values = {}
    if path is not None:
        values = parse_config_text(Path(path).read_text(encoding="utf-8"))
    return build_config(values, preset=preset, seed=seed)


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str):
        return f'"{value}"'
    return str(value)


def dump_config(config: RunConfig) -> str:
    lines = []
    for section in SECTIONS:
        lines.append(f"[{section}]")
        for key, value in getattr(config, section).model_dump().items():
            lines.append(f"{key} = {_format_value(value)}")
        lines.append("")
    return "\n".join(lines)
