"""Typed experiment description built from the layered configuration."""

import math
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from fiber_nlc.coeffs.types import QuadratureSpec
from fiber_nlc.core.config import Config
from fiber_nlc.core.errors import ConfigurationError
from fiber_nlc.core.technique import LinkSetup, Technique, TechniqueFactory
from fiber_nlc.model.types import LinkConfig, PulseParams, dbm_to_w, peak_power_from_launch

# Placeholder peak power for table building; coefficients do not depend on it
TABLE_PEAK_POWER = 1e-3


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class LinkSection(_Section):
    alpha_db_per_km: float = Field(default=0.2, ge=0)
    beta2_ps2_per_km: float = -20.47
    gamma_per_w_per_km: float = Field(default=1.22, ge=0)
    span_length_km: float = Field(default=80.0, gt=0)
    n_spans: int = Field(default=35, ge=1)
    noise_figure_db: float = 5.5
    center_wavelength_nm: float = Field(default=1550.0, gt=0)


class SignalSection(_Section):
    symbol_rate_gbaud: float = Field(default=32.0, gt=0)
    rrc_rolloff: float = Field(default=0.1, ge=0, le=1)
    rrc_span_symbols: int = Field(default=32, ge=8)
    tau_over_t: float = Field(default=0.5, gt=0)


class SimulationSection(_Section):
    samples_per_symbol: int = Field(default=16, ge=2)
    step_size_km: float = Field(default=0.8, gt=0)
    ase_enabled: bool = True


class QuadratureSection(_Section):
    rule: str = "gauss-legendre"
    order: int = Field(default=8, ge=1)
    panels_z: int = Field(default=4, ge=2)
    panels_s: int = Field(default=4, ge=2)
    rel_tol: float = Field(default=1e-6, gt=0)
    max_doublings: int = Field(default=5, ge=0)
    screen_margin_db: float = Field(default=6.0, ge=0)


class CoefficientSection(_Section):
    window: int = Field(default=100, gt=0)
    mu_db: float = -40.0
    quant_divisor: float = Field(default=32.0, ge=0)
    quadrature: QuadratureSection = QuadratureSection()

    @field_validator("window")
    @classmethod
    def _even_window(cls, value: int) -> int:
        if value % 2:
            raise ValueError(f"window must be even, got {value}")
        return value


class PredistortionSection(_Section):
    epsilon_fo: float = Field(default=1.0, ge=0)
    epsilon_so: float = Field(default=1.0, ge=0)
    use_term2: bool = False
    optimize_epsilon: bool = False
    epsilon_grid: List[float] = Field(default_factory=lambda: [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5])

    @field_validator("epsilon_grid")
    @classmethod
    def _grid(cls, value: List[float]) -> List[float]:
        if not value:
            raise ValueError("epsilon_grid must not be empty")
        if any(v < 0 for v in value):
            raise ValueError("epsilon_grid values must be non-negative")
        return value


class DbpSection(_Section):
    steps_per_span: int = Field(default=1, ge=1)
    samples_per_symbol: int = Field(default=2, ge=2)


class ComplexitySection(_Section):
    n_fft: int = Field(default=4096, ge=1)
    n_samples: int = Field(default=4096, ge=1)
    dbp_steps: List[int] = Field(default_factory=lambda: [1, 2, 4])


class ExperimentSection(_Section):
    techniques: List[str] = Field(default_factory=lambda: ["edc", "fo", "so", "dbp"])
    launch_power_dbm: List[float] = Field(default_factory=lambda: [-2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0])
    n_frames: int = Field(default=4, ge=1)
    n_symbols_per_frame: int = Field(default=65536, ge=1)
    seed: int = Field(default=1, ge=0)
    ber_threshold: float = Field(default=2e-2, gt=0, lt=0.5)
    span_grid: List[int] = Field(default_factory=lambda: [20, 30, 40, 50, 60, 70, 80])
    mu_grid: List[float] = Field(default_factory=lambda: [-10.0, -20.0, -30.0, -40.0, -50.0])

    @field_validator("techniques", "launch_power_dbm", "span_grid", "mu_grid")
    @classmethod
    def _non_empty(cls, value: List[Any]) -> List[Any]:
        if not value:
            raise ValueError("grid must not be empty")
        return value

    @field_validator("span_grid")
    @classmethod
    def _positive_spans(cls, value: List[int]) -> List[int]:
        if any(v < 1 for v in value):
            raise ValueError("span counts must be >= 1")
        return value


class RuntimeSection(_Section):
    workers: int = Field(default=4, ge=1)
    max_runtime_seconds: float = Field(default=0, ge=0)
    tables_dir: str = "./tables"
    output: str = "results.csv"
    throttle_ms: int = Field(default=100, ge=0)


class ExperimentSpec(_Section):
    """Everything one run of the harness needs, validated.

    The sections mirror the configuration file. Build it with
    :meth:`from_config` so that invalid values surface as
    ``ConfigurationError``.
    """

    log_level: Literal["debug", "info", "warning", "error"] = "info"
    link: LinkSection = LinkSection()
    signal: SignalSection = SignalSection()
    simulation: SimulationSection = SimulationSection()
    coefficients: CoefficientSection = CoefficientSection()
    predistortion: PredistortionSection = PredistortionSection()
    dbp: DbpSection = DbpSection()
    complexity: ComplexitySection = ComplexitySection()
    experiment: ExperimentSection = ExperimentSection()
    runtime: RuntimeSection = RuntimeSection()

    @model_validator(mode="after")
    def _frame_holds_window(self) -> "ExperimentSpec":
        needed = self.coefficients.window + 2 * self.edge_guard()
        if self.experiment.n_symbols_per_frame <= needed:
            raise ValueError(
                f"n_symbols_per_frame must exceed window + 2 x edge guard = {needed}, "
                f"got {self.experiment.n_symbols_per_frame}"
            )
        return self

    @classmethod
    def from_config(cls, config: Config) -> "ExperimentSpec":
        """Validate a configuration into a spec.

        Raises:
            ConfigurationError: With the pydantic messages if a value is invalid
        """
        try:
            return cls.model_validate(config.as_dict())
        except ValidationError as e:
            messages = [
                f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in e.errors()
            ]
            raise ConfigurationError("Invalid experiment spec", details={"errors": messages}) from e

    def to_config(self) -> Config:
        """The resolved configuration this spec was built from."""
        return Config(self.model_dump())

    @property
    def symbol_rate(self) -> float:
        return self.signal.symbol_rate_gbaud * 1e9

    def link_config(self, n_spans: Optional[int] = None) -> LinkConfig:
        """Link in SI units, optionally with another span count."""
        values = self.link.model_dump()
        if n_spans is not None:
            values["n_spans"] = int(n_spans)
        return LinkConfig.from_table_units(**values)

    def pulse(self, launch_power_dbm: Optional[float] = None) -> PulseParams:
        """Gaussian model pulse; ``P0`` carries the launch power if one is given."""
        pulse = PulseParams.from_symbol_rate(
            self.symbol_rate,
            tau_over_t=self.signal.tau_over_t,
            P0=TABLE_PEAK_POWER,
            rrc_rolloff=self.signal.rrc_rolloff,
        )
        if launch_power_dbm is None:
            return pulse
        return pulse.with_peak_power(peak_power_from_launch(dbm_to_w(launch_power_dbm), pulse))

    def quadrature(self) -> QuadratureSpec:
        quad = self.coefficients.quadrature.model_dump()
        quad.pop("screen_margin_db")
        return QuadratureSpec(**quad)

    def setup(self, launch_power_dbm: float) -> LinkSetup:
        """Link setup of one launch power."""
        return LinkSetup(
            link=self.link_config(),
            pulse=self.pulse(launch_power_dbm),
            launch_power_dbm=float(launch_power_dbm),
            samples_per_symbol=self.simulation.samples_per_symbol,
            rx_samples_per_symbol=self.dbp.samples_per_symbol,
        )

    def edge_guard(self) -> int:
        """Symbols excluded at each frame edge.

        Half the predistortion window, the RRC span and the dispersion memory
        of the whole link in symbols.
        """
        link = self.link
        length = link.span_length_km * 1e3 * link.n_spans
        beta2 = abs(link.beta2_ps2_per_km) * 1e-27
        bandwidth = 2.0 * math.pi * self.symbol_rate * (1.0 + self.signal.rrc_rolloff)
        memory = beta2 * length * bandwidth * self.symbol_rate
        return self.coefficients.window // 2 + self.signal.rrc_span_symbols + int(math.ceil(memory))

    def with_spans(self, n_spans: int) -> "ExperimentSpec":
        """Copy of the spec for another link length, revalidated."""
        data = self.model_dump()
        data["link"]["n_spans"] = int(n_spans)
        try:
            return ExperimentSpec.model_validate(data)
        except ValidationError as e:
            raise ConfigurationError(
                f"Invalid experiment spec for {n_spans} spans", details={"errors": [str(e)]}
            ) from e

    def technique_config(self, label: str) -> Dict[str, Any]:
        """Technique type and settings for a label such as ``so`` or ``dbp-2``."""
        parsed = TechniqueFactory.parse_label(label)
        kind = parsed["type"]
        if kind == "fo":
            parsed.update(epsilon=self.predistortion.epsilon_fo, window=self.coefficients.window)
        elif kind == "so":
            parsed.update(
                epsilon=self.predistortion.epsilon_so,
                epsilon_fo=self.predistortion.epsilon_fo,
                window=self.coefficients.window,
                use_term2=self.predistortion.use_term2,
            )
        elif kind == "dbp":
            parsed.setdefault("steps_per_span", self.dbp.steps_per_span)
            parsed.update(n_fft=self.complexity.n_fft, n_samples=self.complexity.n_samples)
        return parsed

    def techniques(self) -> List[Technique]:
        """Technique instances in the configured order, labelled as given."""
        result = []
        for label in self.experiment.techniques:
            config = self.technique_config(label)
            kind = config.pop("type")
            result.append(TechniqueFactory.create_technique(kind, label.strip().lower(), config))
        return result
