import json
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .bloch import BlochParams
from .equilibrium import beta_from_temperature_mk
from .exceptions import ProblemValidationError
from .problems import INSTANCES, IsingProblem, get_instance, load_problem
from .schedules import AnySchedule, OnsetWindow, Schedule, TabulatedSchedule
from .spinbath import BathSpec

ModelName = Literal["schrodinger", "bloch", "lindblad", "markov", "spinbath", "gibbs", "extract"]
ScheduleKind = Literal["standard", "fast"]

# Effective temperature (mK) and base dissipation rate (1/ns) fitted per instance.
INSTANCE_DEFAULTS: Dict[str, Tuple[float, float]] = {
    "2S1": (35.0, 0.01),
    "2S2": (28.0, 0.003),
    "2S3": (28.0, 0.001),
}
DEFAULT_TEMPERATURE_MK = 35.0
DEFAULT_C = 0.01
DEFAULT_ONSET_US = (0.0, 1.2)
NO_ONSET_US = (0.0, 0.0)

DEFAULT_DT_NS = {
    "schrodinger": 0.01,
    "bloch": 0.01,
    "lindblad": 0.1,
    "markov": 1.0,
    "spinbath": 0.01,
}
TWO_SPIN_MODELS = {"lindblad", "markov", "spinbath", "extract"}


class SweepRange(BaseModel):
    """Log-spaced annealing times in microseconds."""

    start_us: float = Field(gt=0.0, description="First annealing time (µs)")
    stop_us: float = Field(gt=0.0, description="Last annealing time (µs)")
    points: int = Field(default=20, ge=1, description="Number of annealing times")

    def times_us(self) -> List[float]:
        if self.points == 1:
            return [self.start_us]
        return [float(x) for x in np.geomspace(self.start_us, self.stop_us, self.points)]


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(validate_assignment=True)

    # What to simulate
    model: ModelName = Field(default="lindblad", description="Dynamical model or analysis mode")
    problem: str = Field(default="2S1", description="Instance name or path to a problem JSON file")
    schedule: ScheduleKind = Field(default="standard", description="Annealing schedule fit")
    schedule_files: Optional[Tuple[Path, Path]] = Field(
        default=None, description="CSV tables of (s, A) and (s, B) in GHz; replace the schedule fit"
    )
    onset_us: Optional[Tuple[float, float]] = Field(
        default=None, description="Field onset window (µs); 0-1.2 µs, or none on the fast schedule, if unset"
    )
    embed: bool = Field(default=False, description="Replace fields by auxiliary flux-bias qubits")
    tdse_method: Literal["product", "magnus"] = Field(default="product", description="TDSE stepper")

    # Model parameters
    temperature_mk: Optional[float] = Field(default=None, gt=0.0, description="Effective temperature (mK); instance default if unset")
    beta: Optional[float] = Field(default=None, ge=0.0, description="Inverse temperature; overrides temperature_mk")
    c: Optional[float] = Field(default=None, ge=0.0, description="Base dissipation rate (1/ns); instance default if unset")
    bloch: BlochParams = Field(default_factory=BlochParams, description="Bloch relaxation parameters")
    bath: BathSpec = Field(default_factory=BathSpec, description="Spin-bath parameters")

    # Sweep
    t_a_us: Optional[List[float]] = Field(default=None, description="Explicit annealing times (µs)")
    sweep: Optional[SweepRange] = Field(default=None, description="Log-spaced annealing times")
    dt_ns: Optional[float] = Field(default=None, gt=0.0, description="Time step (ns); model default if unset")
    seeds: List[int] = Field(default_factory=lambda: [0], description="Random seeds")

    # Chains (gibbs mode)
    chain_lengths: List[int] = Field(default_factory=list, description="Open-chain lengths for <E>")
    chain_j: float = Field(default=-0.1, description="Chain coupling")

    # Extraction
    input: Optional[Path] = Field(default=None, description="Frequency CSV or sample file")
    smooth: bool = Field(default=False, description="Add-half smoothing before extraction")
    bootstrap: int = Field(default=0, ge=0, description="Bootstrap resamples (0 disables)")

    # Output
    output: Path = Field(default=Path("results/sweep.csv"), description="Result file")
    jobs: int = Field(default=1, ge=1, description="Worker processes for sweeps")
    verbose: bool = Field(default=False, description="Enable verbose output")

    @model_validator(mode="after")
    def _check_onset(self) -> "ExperimentConfig":
        if self.onset_us is None:
            return self
        start, end = self.onset_us
        if start < 0 or end < start:
            raise ValueError(f"Onset window must satisfy 0 <= start <= end, got {self.onset_us}")
        return self

    @classmethod
    def from_json(cls, path: Path) -> "ExperimentConfig":
        """Load a configuration document; unknown keys are rejected."""
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ValueError(f"Cannot read config {path}: {e}") from e
        if not isinstance(data, dict):
            raise ValueError(f"Config {path} must be a JSON object")
        unknown = set(data) - set(cls.model_fields)
        if unknown:
            raise ValueError(f"Unknown config keys: {', '.join(sorted(unknown))}")
        try:
            return cls(**data)
        except ValidationError as e:
            raise ValueError(str(e)) from e

    def resolve_problem(self) -> IsingProblem:
        if self.problem in INSTANCES:
            return get_instance(self.problem)
        path = Path(self.problem)
        if path.exists():
            return load_problem(path)
        raise ProblemValidationError(f"'{self.problem}' is neither an instance name nor a problem file")

    @property
    def effective_temperature_mk(self) -> float:
        """Explicit temperature, else the instance's fitted one, else 35 mK."""
        if self.temperature_mk is not None:
            return self.temperature_mk
        return INSTANCE_DEFAULTS.get(self.problem, (DEFAULT_TEMPERATURE_MK, DEFAULT_C))[0]

    @property
    def dissipation_rate(self) -> float:
        if self.c is not None:
            return self.c
        return INSTANCE_DEFAULTS.get(self.problem, (DEFAULT_TEMPERATURE_MK, DEFAULT_C))[1]

    @property
    def effective_beta(self) -> float:
        if self.beta is not None:
            return self.beta
        return beta_from_temperature_mk(self.effective_temperature_mk)

    @property
    def effective_onset_us(self) -> Tuple[float, float]:
        if self.onset_us is not None:
            return self.onset_us
        if self.schedule == "fast" and self.schedule_files is None:
            return NO_ONSET_US
        return DEFAULT_ONSET_US

    @property
    def onset(self) -> OnsetWindow:
        return OnsetWindow.from_us(*self.effective_onset_us)

    @property
    def annealing_schedule(self) -> AnySchedule:
        if self.schedule_files is not None:
            try:
                return TabulatedSchedule.from_files(*self.schedule_files)
            except (OSError, ValueError) as e:
                raise ValueError(f"Cannot load schedule tables {self.schedule_files}: {e}") from e
        return Schedule.fast() if self.schedule == "fast" else Schedule.standard()

    @property
    def step_ns(self) -> float:
        return self.dt_ns if self.dt_ns is not None else DEFAULT_DT_NS.get(self.model, 0.01)

    def annealing_times_ns(self) -> List[float]:
        if self.t_a_us is not None:
            times = list(self.t_a_us)
        elif self.sweep is not None:
            times = self.sweep.times_us()
        else:
            times = []
        return [1e3 * t for t in times]

    def validate_for_model(self) -> None:
        """Check cross-field consistency for the chosen model."""
        if self.model == "gibbs":
            if self.chain_lengths and min(self.chain_lengths) < 2:
                raise ValueError("Chain lengths must be at least 2")
            if not self.chain_lengths:
                self.resolve_problem()
            return

        p = self.resolve_problem()
        if self.model == "bloch" and p.n != 1:
            raise ValueError(f"Bloch model needs a 1-spin problem, '{p.name}' has {p.n} spins")
        if self.model in TWO_SPIN_MODELS and p.n != 2:
            raise ValueError(f"{self.model} needs a 2-spin problem, '{p.name}' has {p.n} spins")
        if self.model == "extract":
            if self.input is None:
                raise ValueError("Extraction needs an input file")
            if not self.input.exists():
                raise ValueError(f"Input file does not exist: {self.input}")
            return

        if not self.annealing_times_ns():
            raise ValueError("The annealing-time sweep is empty; set t_a_us or sweep")
        if min(self.annealing_times_ns()) < self.step_ns:
            raise ValueError(f"Time step {self.step_ns} ns exceeds the shortest annealing time")
        if self.embed and self.model != "schrodinger":
            raise ValueError("Flux-bias embedding is only available for the schrodinger model")
        if self.schedule_files is not None:
            self.annealing_schedule
        if self.model == "spinbath" and not self.seeds:
            raise ValueError("Spin-bath runs need at least one seed")
