"""Pydantic models for QCNN experiments.

Experiment configuration and the records written by the harness, shared by
the CLI and the sweep workers.
"""
import hashlib
import json
from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from colorspace import ColorSpaceError, channel_names, parse_color_space
from templates import ChannelMode, FilterKind, TemplateError, TemplateKind, parse_filter_kind


_SPACE_LABELS = {"RGB01": "RGB", "LAB": "LAB", "YCBCR": "YCBCR"}
ROW_LABELS = {"RGB": "RGB", "LAB": "LAB", "YCBCR": "YCbCr"}


# ============ CONFIG ============

class ExperimentConfig(BaseModel):
    """One training run."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    color_space: Literal["RGB", "LAB", "YCBCR"] = Field(default="LAB", description="Input color space")
    channel: str = Field(default="0", description="'0', '1', '2' or 'all'")
    template: str = Field(default="C14", description="Filter name, e.g. U1_CRX")
    seed: int = Field(default=0, ge=0)
    epochs: int = Field(default=20, ge=0)
    batch_size: int = Field(default=50, ge=1)
    learning_rate: float = Field(default=0.01, gt=0)
    hidden_width: int = Field(default=32, ge=1)
    stride: int = Field(default=1, ge=1, le=2)
    image_size: int = Field(default=10, ge=2)
    classes: tuple[int, int] = (0, 1)
    train_per_class: int = Field(default=500, ge=1)
    test_per_class: int = Field(default=100, ge=1)
    trainable_cphase: bool = False
    repeats: int = Field(default=1, ge=1)
    prng: Literal["PCG64"] = "PCG64"
    data_dir: Path = Path("data")
    output_dir: Path = Path("runs")

    @model_validator(mode="before")
    @classmethod
    def _normalize(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        data = dict(data)
        if "color_space" in data:
            try:
                data["color_space"] = _SPACE_LABELS[parse_color_space(data["color_space"]).value]
            except (ColorSpaceError, KeyError):
                raise ValueError(f"color_space must be RGB, LAB or YCBCR, got {data['color_space']!r}")
        if "channel" in data:
            data["channel"] = _normalize_channel(data["channel"], data.get("color_space", "LAB"))
        if "template" in data:
            try:
                data["template"] = parse_filter_kind(data["template"]).value
            except TemplateError as e:
                raise ValueError(str(e))
        return data

    @field_validator("classes", mode="before")
    @classmethod
    def _parse_classes(cls, value: Any) -> Any:
        if isinstance(value, str):
            value = [int(v) for v in value.replace(" ", "").split(",") if v]
        value = tuple(value)
        if len(value) != 2 or value[0] == value[1] or any(not 0 <= int(v) <= 9 for v in value):
            raise ValueError(f"classes must be two distinct CIFAR labels, got {value}")
        return value

    @property
    def channel_mode(self) -> ChannelMode:
        return ChannelMode.CHANNEL_OVERWRITE if self.channel == "all" else ChannelMode.SINGLE

    @property
    def channel_index(self) -> Optional[int]:
        return None if self.channel == "all" else int(self.channel)

    @property
    def filter_kind(self) -> FilterKind:
        return parse_filter_kind(self.template)

    @property
    def template_kind(self) -> TemplateKind:
        return TemplateKind(self.filter_kind, self.channel_mode)

    @property
    def row_label(self) -> str:
        """Table row: the channel name, or the color space for full-channel runs."""
        if self.channel == "all":
            return ROW_LABELS[self.color_space]
        return channel_names(self.color_space)[int(self.channel)]

    @property
    def run_id(self) -> str:
        return f"{self.color_space}-{self.row_label}-{self.filter_kind.label}-s{self.seed}"

    @property
    def fingerprint(self) -> str:
        """Hash of every setting that affects results; the data and output paths are excluded."""
        payload = self.model_dump(mode="json", exclude={"data_dir", "output_dir"})
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def _normalize_channel(value: Any, color_space: str) -> str:
    text = str(value).strip()
    if text.lower() == "all":
        return "all"
    if text in ("0", "1", "2"):
        return text
    try:
        names = channel_names(color_space)
    except ColorSpaceError:
        names = ()
    for index, name in enumerate(names):
        if text.lower() == name.lower():
            return str(index)
    raise ValueError(f"channel must be 0, 1, 2, all or one of {names}, got {value!r}")


# ============ METRICS ============

class EpochRecord(BaseModel):
    epoch: int = Field(ge=1)
    train_loss: float
    train_acc: float = Field(ge=0.0, le=1.0)
    test_loss: float
    test_acc: float = Field(ge=0.0, le=1.0)


class RunMetrics(BaseModel):
    """Everything recorded for one training run."""
    config: ExperimentConfig
    epochs: list[EpochRecord] = []
    final_test_loss: float
    final_test_accuracy: float = Field(ge=0.0, le=1.0)
    wall_seconds: float = 0.0
    optimizer_steps: int = 0
    circuit_evaluations: int = 0
    evaluations_per_image: int = 0
    n_parameters: int = 0

    @model_validator(mode="after")
    def _epochs_recorded(self) -> "RunMetrics":
        if len(self.epochs) != self.config.epochs:
            raise ValueError(f"{len(self.epochs)} epoch records for {self.config.epochs} configured epochs")
        return self


# ============ SWEEP ============

class SweepCell(BaseModel):
    """One sweep cell: a (color space, channel, template) combination."""
    color_space: str
    channel: str
    row: str
    template: str
    seeds: list[int] = []
    accuracies: list[float] = []
    mean_accuracy: Optional[float] = None
    std_accuracy: Optional[float] = None
    runtime_seconds: float = 0.0
    reference_accuracy: Optional[float] = None
    error: Optional[str] = None
    config_fingerprint: Optional[str] = None

    @property
    def key(self) -> str:
        return f"{self.color_space}_{self.row}__{self.template}"

    @property
    def ok(self) -> bool:
        return self.error is None and self.mean_accuracy is not None


# ============ CHECKS ============

class GradcheckReport(BaseModel):
    template: str
    channel_mode: str
    trials: int
    tolerance: float
    max_relative_error: float
    per_parameter_max_error: list[float] = []
    passed: bool


class SelftestCheck(BaseModel):
    name: str
    passed: bool
    detail: str = ""
    seconds: float = 0.0


class SelftestReport(BaseModel):
    checks: list[SelftestCheck] = []

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)
