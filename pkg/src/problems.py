"""Ising problem instances, basis indexing, fast-anneal embedding and gauge transforms.

Basis convention: spin ``k`` (0-based) is bit ``n-1-k`` of the configuration
index, so spin 1 is the most significant bit and ``S = +1`` (up) is bit 0.
For two spins the order is (up-up, up-down, down-up, down-down).
"""

import json
import math
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .exceptions import AnnealingError, EmbeddingError, ProblemValidationError

MAX_QUBITS = 24


def domain_error(exc: ValidationError) -> AnnealingError:
    """Turn a pydantic validation failure into the library's own error type.

    Errors raised by our validators are unwrapped; plain field constraint
    failures become ``ProblemValidationError``.
    """
    for detail in exc.errors():
        cause = (detail.get("ctx") or {}).get("error")
        if isinstance(cause, AnnealingError):
            return cause
    messages = "; ".join(
        f"{'.'.join(str(part) for part in detail['loc']) or 'value'}: {detail['msg']}" for detail in exc.errors()
    )
    return ProblemValidationError(messages)


class DomainModel(BaseModel):
    """BaseModel whose construction raises ``AnnealingError`` subclasses instead of ``ValidationError``."""

    def __init__(self, **data):
        try:
            super().__init__(**data)
        except ValidationError as e:
            raise domain_error(e) from e


def spin_table(n: int) -> np.ndarray:
    """Return the ``(2**n, n)`` table of spin values in index order."""
    if not 1 <= n <= MAX_QUBITS:
        raise ProblemValidationError(f"Qubit count must be in [1, {MAX_QUBITS}], got {n}")
    index = np.arange(2**n, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    bits = (index[:, None] >> shifts[None, :]) & 1
    return (1 - 2 * bits).astype(np.int8)


class IsingProblem(DomainModel):
    """Problem Hamiltonian H_P = sum_i h_i S_i + sum_{i>j} J_ij S_i S_j."""

    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=1, le=MAX_QUBITS, description="Number of qubits")
    h: Tuple[float, ...] = Field(description="Local fields, one per qubit")
    J: Dict[Tuple[int, int], float] = Field(default_factory=dict, description="Couplings keyed by (i, j), i > j")
    name: Optional[str] = Field(default=None, description="Instance label")
    h_bound: float = Field(default=4.0, gt=0.0, description="Sanity bound on |h_i|")
    j_bound: float = Field(default=2.0, gt=0.0, description="Sanity bound on |J_ij|")

    @model_validator(mode="before")
    @classmethod
    def _normalize_pairs(cls, data):
        if not isinstance(data, dict) or "J" not in data:
            return data
        raw = data["J"]
        items = raw.items() if isinstance(raw, dict) else [((t[0], t[1]), t[2]) for t in raw]
        couplings: Dict[Tuple[int, int], float] = {}
        for (i, j), value in items:
            i, j = int(i), int(j)
            if i == j:
                raise ProblemValidationError(f"Self-coupling on qubit {i} is not allowed")
            key = (max(i, j), min(i, j))
            if key in couplings:
                raise ProblemValidationError(f"Coupling {key} specified more than once")
            couplings[key] = float(value)
        return {**data, "J": couplings}

    @field_validator("h")
    @classmethod
    def _finite_fields(cls, value: Tuple[float, ...]) -> Tuple[float, ...]:
        if not all(math.isfinite(x) for x in value):
            raise ProblemValidationError("Local fields must be finite")
        return value

    @model_validator(mode="after")
    def _check_ranges(self) -> "IsingProblem":
        if len(self.h) != self.n:
            raise ProblemValidationError(f"Expected {self.n} fields, got {len(self.h)}")
        if any(abs(x) > self.h_bound for x in self.h):
            raise ProblemValidationError(f"Field magnitude exceeds {self.h_bound}")
        for (i, j), value in self.J.items():
            if not (0 <= j < i < self.n):
                raise ProblemValidationError(f"Coupling index ({i}, {j}) out of range for n={self.n}")
            if not math.isfinite(value) or abs(value) > self.j_bound:
                raise ProblemValidationError(f"Coupling ({i}, {j}) = {value} outside [-{self.j_bound}, {self.j_bound}]")
        return self

    def field_energies(self) -> np.ndarray:
        """Linear part sum_i h_i S_i for every configuration."""
        return spin_table(self.n).astype(float) @ np.asarray(self.h, dtype=float)

    def coupling_energies(self) -> np.ndarray:
        """Quadratic part sum_{i>j} J_ij S_i S_j for every configuration."""
        spins = spin_table(self.n).astype(float)
        energy = np.zeros(2**self.n)
        for (i, j), value in self.J.items():
            energy += value * spins[:, i] * spins[:, j]
        return energy

    def energies(self) -> np.ndarray:
        """Energies of all 2**n configurations in index order."""
        return self.field_energies() + self.coupling_energies()

    def coupling_matrix(self) -> np.ndarray:
        matrix = np.zeros((self.n, self.n))
        for (i, j), value in self.J.items():
            matrix[i, j] = value
        return matrix


class SpinConfiguration(DomainModel):
    """A computational basis state given by its spins and its index."""

    model_config = ConfigDict(frozen=True)

    spins: Tuple[int, ...]
    index: int

    @model_validator(mode="after")
    def _check_bijection(self) -> "SpinConfiguration":
        if any(s not in (1, -1) for s in self.spins):
            raise ProblemValidationError(f"Spins must be +1 or -1, got {self.spins}")
        if self.index != spins_to_index(self.spins):
            raise ProblemValidationError(f"Index {self.index} does not match spins {self.spins}")
        return self

    @property
    def n(self) -> int:
        return len(self.spins)

    @classmethod
    def from_spins(cls, spins: Sequence[int]) -> "SpinConfiguration":
        spins = tuple(int(s) for s in spins)
        return cls(spins=spins, index=spins_to_index(spins))

    @classmethod
    def from_index(cls, n: int, index: int) -> "SpinConfiguration":
        if not 0 <= index < 2**n:
            raise ProblemValidationError(f"Index {index} out of range for n={n}")
        spins = tuple(1 - 2 * ((index >> (n - 1 - k)) & 1) for k in range(n))
        return cls(spins=spins, index=index)

    @classmethod
    def from_string(cls, token: str) -> "SpinConfiguration":
        """Parse '+-' style tokens ('+'/'u'/'↑' is up, '-'/'d'/'↓' is down)."""
        mapping = {"+": 1, "u": 1, "↑": 1, "-": -1, "d": -1, "↓": -1}
        try:
            return cls.from_spins([mapping[ch] for ch in token.strip()])
        except KeyError as e:
            raise ProblemValidationError(f"Unrecognized spin symbol {e} in '{token}'") from None

    def label(self) -> str:
        return "".join("↑" if s == 1 else "↓" for s in self.spins)


def spins_to_index(spins: Sequence[int]) -> int:
    n = len(spins)
    return sum(((1 - s) // 2) << (n - 1 - k) for k, s in enumerate(spins))


def problem_energy(p: IsingProblem, c: SpinConfiguration) -> float:
    """Evaluate H_P for one configuration."""
    if c.n != p.n:
        raise ProblemValidationError(f"Configuration has {c.n} spins, problem has {p.n}")
    s = c.spins
    energy = sum(h * si for h, si in zip(p.h, s))
    energy += sum(value * s[i] * s[j] for (i, j), value in p.J.items())
    return float(energy)


class EmbeddedProblem(DomainModel):
    """Fast-anneal embedding: one flux-biased auxiliary qubit per nonzero field.

    Auxiliary qubits are appended after the original ones. ``h_fb`` is the flux
    bias in rad/ns; it enters the Hamiltonian as ``-h_fb * sigma_z`` on each
    auxiliary qubit so that the auxiliaries are pinned up and the coupling
    ``J = h_i`` reproduces the original field.
    """

    model_config = ConfigDict(frozen=True)

    base: IsingProblem
    auxiliary_map: Dict[int, int]
    h_fb: float = Field(gt=0.0, description="Flux bias offset (rad/ns)")

    @model_validator(mode="after")
    def _check_map(self) -> "EmbeddedProblem":
        nonzero = {i for i, h in enumerate(self.base.h) if h != 0.0}
        if set(self.auxiliary_map) != nonzero:
            raise EmbeddingError("Every qubit with a nonzero field needs exactly one auxiliary qubit")
        expected = set(range(self.base.n, self.base.n + len(nonzero)))
        if set(self.auxiliary_map.values()) != expected:
            raise EmbeddingError("Auxiliary qubits must be numbered after the original qubits")
        return self

    @property
    def n(self) -> int:
        return self.base.n + len(self.auxiliary_map)

    @property
    def problem(self) -> IsingProblem:
        couplings = dict(self.base.J)
        for original, aux in self.auxiliary_map.items():
            couplings[(aux, original)] = self.base.h[original]
        return IsingProblem(
            n=self.n,
            h=(0.0,) * self.n,
            J=couplings,
            name=f"{self.base.name or 'problem'}-embedded",
            j_bound=max(self.base.j_bound, self.base.h_bound),
        )

    def flux_bias(self) -> np.ndarray:
        """Per-qubit bias magnitudes (rad/ns); zero on original qubits."""
        bias = np.zeros(self.n)
        for aux in self.auxiliary_map.values():
            bias[aux] = self.h_fb
        return bias

    def original_marginals(self, probabilities: np.ndarray) -> np.ndarray:
        """Sum out the auxiliary qubits (the least significant bits)."""
        k = len(self.auxiliary_map)
        return np.asarray(probabilities).reshape(2**self.base.n, 2**k).sum(axis=1)


def embedding_threshold(p: IsingProblem, schedule) -> float:
    """pi * max_s max(A(s), B(s) max|h_i|) in rad/ns."""
    s = np.linspace(0.0, 1.0, 1001)
    h_max = max((abs(x) for x in p.h), default=0.0)
    return float(math.pi * np.max(np.maximum(schedule.A(s), schedule.B(s) * h_max)))


def embed_fast_anneal(p: IsingProblem, h_fb: Optional[float] = None, schedule=None) -> EmbeddedProblem:
    """Move every nonzero field onto a coupling with a flux-biased auxiliary qubit."""
    from .schedules import Schedule

    schedule = schedule or Schedule.fast()
    threshold = embedding_threshold(p, schedule)
    if h_fb is None:
        h_fb = 100.0 * threshold
    if h_fb <= threshold:
        raise EmbeddingError(f"Flux bias {h_fb:.4g} rad/ns does not exceed the required {threshold:.4g} rad/ns")

    nonzero = [i for i, h in enumerate(p.h) if h != 0.0]
    auxiliary_map = {original: p.n + k for k, original in enumerate(nonzero)}
    logger.debug(f"Embedding {p.name or 'problem'}: {len(nonzero)} auxiliary qubits, h_fb={h_fb:.4g} rad/ns")
    return EmbeddedProblem(base=p, auxiliary_map=auxiliary_map, h_fb=h_fb)


def spin_reversal_transform(p: IsingProblem, flips: Sequence[bool]) -> IsingProblem:
    """Gauge transform: flip h_i on flipped sites and J_ij when exactly one end is flipped."""
    if len(flips) != p.n:
        raise ProblemValidationError(f"Expected {p.n} flip flags, got {len(flips)}")
    sign = [-1.0 if f else 1.0 for f in flips]
    return p.model_copy(
        update={
            "h": tuple(s * h for s, h in zip(sign, p.h)),
            "J": {(i, j): sign[i] * sign[j] * value for (i, j), value in p.J.items()},
        }
    )


def flip_index(index: int, n: int, flips: Sequence[bool]) -> int:
    """Index of the configuration with the flipped sites reversed."""
    mask = sum(1 << (n - 1 - k) for k, f in enumerate(flips) if f)
    return index ^ mask


def unflip_probabilities(probabilities: np.ndarray, flips: Sequence[bool]) -> np.ndarray:
    """Map populations of a gauge-transformed run back to the original labels."""
    probabilities = np.asarray(probabilities)
    n = int(round(math.log2(probabilities.size)))
    permutation = [flip_index(i, n, flips) for i in range(probabilities.size)]
    return probabilities[permutation]


def random_flips(n: int, rng: np.random.Generator, probability: float = 0.5) -> Tuple[bool, ...]:
    return tuple(bool(x) for x in rng.random(n) < probability)


def ferromagnetic_chain(N: int, J: float = -0.1) -> IsingProblem:
    """Open chain with uniform nearest-neighbour coupling and zero fields."""
    if N < 2:
        raise ProblemValidationError(f"Chain needs at least 2 spins, got {N}")
    return IsingProblem(n=N, h=(0.0,) * N, J={(i + 1, i): J for i in range(N - 1)}, name=f"chain-{N}")


INSTANCES: Dict[str, IsingProblem] = {
    "1S-0": IsingProblem(n=1, h=(0.0,), name="1S-0"),
    "1S-0.1": IsingProblem(n=1, h=(0.1,), name="1S-0.1"),
    "1S-0.2": IsingProblem(n=1, h=(0.2,), name="1S-0.2"),
    "1S-0.25": IsingProblem(n=1, h=(0.25,), name="1S-0.25"),
    "2S1": IsingProblem(n=2, h=(-1.0, -1.0), J={(1, 0): 0.95}, name="2S1"),
    # Coupling sign chosen so that three levels are degenerate at E = -1.
    "2S2": IsingProblem(n=2, h=(-1.0, -1.0), J={(1, 0): 1.0}, name="2S2"),
    "2S3": IsingProblem(n=2, h=(-0.95, -0.95), J={(1, 0): 1.0}, name="2S3"),
    "2S4": IsingProblem(n=2, h=(-0.07, 0.05), J={(1, 0): 0.1}, name="2S4"),
    # Field-free instances for the fast schedule; no auxiliary qubits needed.
    "2S-fast": IsingProblem(n=2, h=(0.0, 0.0), J={(1, 0): 0.05}, name="2S-fast"),
    "3S-fast": IsingProblem(n=3, h=(0.0, 0.0, 0.0), J={(1, 0): 1.0, (2, 0): -0.05, (2, 1): -0.1}, name="3S-fast"),
}


def get_instance(name: str) -> IsingProblem:
    try:
        return INSTANCES[name]
    except KeyError:
        raise ProblemValidationError(f"Unknown instance '{name}'. Available: {', '.join(INSTANCES)}") from None


def load_problem(path: Path) -> IsingProblem:
    """Load a problem document: {"n": 2, "h": [...], "J": [[i, j, value], ...]}."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ProblemValidationError(f"Cannot read problem file {path}: {e}") from e
    data.setdefault("name", Path(path).stem)
    data.setdefault("J", [])
    return IsingProblem(**data)


def dump_problem(p: IsingProblem) -> str:
    return json.dumps(
        {"n": p.n, "h": list(p.h), "J": [[i, j, v] for (i, j), v in sorted(p.J.items())], "name": p.name},
        indent=2,
    )
