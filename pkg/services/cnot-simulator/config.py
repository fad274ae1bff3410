"""
Experiment Configuration
TOML experiment files validated into gate, window, input, noise, PZT and cascade settings
"""
import hashlib
import json
import math
from pathlib import Path
from typing import List, Literal, Optional

import structlog
import toml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pydantic_core import PydanticCustomError

from circuits import CascadeConfig, GateConfig
from core_state import JonesVector, Polarization, delay_to_bins, path_difference_to_delay
from exceptions import ConfigParseError, ConfigValidationError
from measurement import DEFAULT_NM_PER_VOLT, DEFAULT_WAVELENGTH_NM, CoincidenceWindow
from montecarlo import MAX_SEED, NoiseConfig

logger = structlog.get_logger()

DEFAULT_DELAY_BINS = 19
AMPLITUDE_TOLERANCE = 1e-6
ROUNDING_WARN_FRACTION = 0.01
_INV_SQRT2 = 1.0 / math.sqrt(2.0)


def _invariant(key: str, message: str) -> PydanticCustomError:
    return PydanticCustomError("invariant", "{key}: {detail}", {"key": key, "detail": message})


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GateSection(_Section):
    delay_bins: Optional[int] = Field(default=None, ge=1, description="Long-short delay in time bins")
    path_difference_m: Optional[float] = Field(default=None, gt=0, description="Long-short path difference (alternative to delay_bins)")
    theta1_rad: float = Field(default=0.0, description="Interferometer 1 phase")
    theta2_rad: float = Field(default=0.0, description="Interferometer 2 phase")


class WindowSection(_Section):
    delta_t_ns: float = Field(default=1.0, gt=0, description="Coincidence window")
    bin_ns: float = Field(default=0.1, gt=0, description="Time-bin duration")


class InputSection(_Section):
    alpha_re: float = _INV_SQRT2
    alpha_im: float = 0.0
    beta_re: float = _INV_SQRT2
    beta_im: float = 0.0
    target_pol: Literal["H", "V"] = "H"


class NoiseSection(_Section):
    pair_rate: float = Field(default=20000.0, ge=0)
    efficiency_1: float = Field(default=1.0, gt=0, le=1)
    efficiency_2: float = Field(default=1.0, gt=0, le=1)
    dark_rate_1: float = Field(default=0.0, ge=0)
    dark_rate_2: float = Field(default=0.0, ge=0)
    phase_jitter_sigma: float = Field(default=0.0, ge=0)
    leakage: float = Field(default=0.0, ge=0, lt=1)
    integration_s: float = Field(default=10.0, gt=0)
    seed: int = Field(default=0, ge=0, lt=MAX_SEED)


class PztSection(_Section):
    nm_per_volt: float = Field(default=DEFAULT_NM_PER_VOLT, gt=0)
    wavelength_nm: float = Field(default=DEFAULT_WAVELENGTH_NM, gt=0)


class CascadeSection(_Section):
    delays_bins: List[int] = Field(..., min_length=1)


class ExperimentConfig(_Section):
    """Validated experiment file; omitted sections and keys take the nominal defaults"""

    gate: GateSection = Field(default_factory=GateSection)
    window: WindowSection = Field(default_factory=WindowSection)
    input: InputSection = Field(default_factory=InputSection)
    noise: NoiseSection = Field(default_factory=NoiseSection)
    pzt: PztSection = Field(default_factory=PztSection)
    cascade: Optional[CascadeSection] = None

    @model_validator(mode="after")
    def _check_invariants(self) -> "ExperimentConfig":
        gate, window = self.gate, self.window

        if gate.path_difference_m is not None:
            if gate.delay_bins is not None:
                raise _invariant("gate.path_difference_m", "give either delay_bins or path_difference_m, not both")
            bins, rel_error = delay_to_bins(path_difference_to_delay(gate.path_difference_m), window.bin_ns * 1e-9)
            if bins < 1:
                raise _invariant("gate.path_difference_m", "path difference is shorter than one time bin")
            if rel_error > ROUNDING_WARN_FRACTION:
                logger.warning("Path difference rounded to whole bins",
                               path_difference_m=gate.path_difference_m,
                               delay_bins=bins,
                               rounding_error=round(rel_error, 4))
            gate.delay_bins = bins
        elif gate.delay_bins is None:
            gate.delay_bins = DEFAULT_DELAY_BINS

        if not window.delta_t_ns < gate.delay_bins * window.bin_ns:
            raise _invariant(
                "window.delta_t_ns",
                f"window {window.delta_t_ns} ns must be shorter than the delay {gate.delay_bins * window.bin_ns:g} ns",
            )

        inp = self.input
        norm = inp.alpha_re ** 2 + inp.alpha_im ** 2 + inp.beta_re ** 2 + inp.beta_im ** 2
        if abs(norm - 1.0) > AMPLITUDE_TOLERANCE:
            raise _invariant("input", f"|alpha|^2 + |beta|^2 must be 1, got {norm:.9g}")

        if self.cascade is not None:
            if any(d < 1 for d in self.cascade.delays_bins):
                raise _invariant("cascade.delays_bins", "every delay must be >= 1 bin")
            if not self.window_bins < min(self.cascade.delays_bins):
                raise _invariant("window.delta_t_ns", "window must be shorter than the shortest cascade delay")
        return self

    @property
    def window_bins(self) -> int:
        # |dt| * bin < delta_t  <=>  |dt| < ceil(delta_t / bin) for integer dt
        return math.ceil(round(self.window.delta_t_ns / self.window.bin_ns, 9))

    def gate_config(self) -> GateConfig:
        return GateConfig(
            delay_bins=self.gate.delay_bins,
            theta1=self.gate.theta1_rad,
            theta2=self.gate.theta2_rad,
        )

    def coincidence_window(self) -> CoincidenceWindow:
        return CoincidenceWindow(self.window_bins, self.window.bin_ns * 1e-9)

    def jones(self) -> JonesVector:
        inp = self.input
        return JonesVector.from_unnormalized(complex(inp.alpha_re, inp.alpha_im), complex(inp.beta_re, inp.beta_im))

    def target(self) -> Polarization:
        return Polarization(self.input.target_pol)

    def noise_config(self, seed: Optional[int] = None) -> NoiseConfig:
        values = self.noise.model_dump()
        if seed is not None:
            values["seed"] = seed
        return NoiseConfig(**values)

    def cascade_config(self) -> CascadeConfig:
        if self.cascade is None:
            raise ConfigValidationError("cascade", "section is required for a cascade check")
        return CascadeConfig.from_delays(self.cascade.delays_bins, self.window_bins, self.gate_config())

    def config_hash(self) -> str:
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def flat_params(self) -> dict:
        """Section-prefixed key/value pairs, e.g. {"gate.delay_bins": 19}"""
        flat = {}
        for section, values in self.model_dump().items():
            if values is None:
                continue
            for key, value in values.items():
                flat[f"{section}.{key}"] = value
        return flat


def _validation_key(error: dict) -> str:
    ctx = error.get("ctx") or {}
    if "key" in ctx:
        return ctx["key"]
    return ".".join(str(part) for part in error["loc"]) or "config"


def parse_config(text: str) -> ExperimentConfig:
    """
    Parse and validate an experiment file

    Args:
        text: TOML text; bracketed sections with one key = value per line

    Returns:
        Fully validated ExperimentConfig with defaults applied

    Raises:
        ConfigParseError: malformed text (carries the line number)
        ConfigValidationError: unknown key or violated invariant (carries the dotted key)
    """
    try:
        raw = toml.loads(text)
    except toml.TomlDecodeError as e:
        raise ConfigParseError(getattr(e, "lineno", None), e.msg) from e

    try:
        config = ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        ctx = first.get("ctx") or {}
        message = ctx.get("detail", first["msg"])
        raise ConfigValidationError(_validation_key(first), message) from e

    logger.debug("Config parsed", config_hash=config.config_hash(), delay_bins=config.gate.delay_bins)
    return config


def load_config(path: Optional[str]) -> ExperimentConfig:
    """Read and parse a config file; None gives the nominal defaults"""
    if path is None:
        return parse_config("")
    data = Path(path).read_bytes()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise ConfigParseError(data.count(b"\n", 0, e.start) + 1, f"not valid UTF-8 ({e.reason})") from e
    return parse_config(text)
