"""Maximum-entropy extraction of (h1, h2, J, beta) from two-spin frequencies.

Frequencies are ordered like basis indices: f1 = up-up, f2 = up-down,
f3 = down-up, f4 = down-down (spin 1 first). The model behind both methods
is p ~ exp(-l1 S1 - l2 S2 - l3 S1 S2), so the multipliers estimate beta h.
"""

from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.optimize import brentq
from scipy.special import logsumexp

from .equilibrium import temperature_mk
from .exceptions import NonIdentifiableError, NoSolutionError, ProblemValidationError, ZeroFrequencyError
from .problems import IsingProblem, SpinConfiguration

BETA_BRACKET_LIMIT = 1e4


class FrequencyTable(BaseModel):
    """Empirical frequencies f1..f4 with an optional sample count."""

    model_config = ConfigDict(frozen=True)

    f: Tuple[float, float, float, float]
    count: Optional[int] = Field(default=None, gt=0)

    @field_validator("f")
    @classmethod
    def _check_frequencies(cls, f: Tuple[float, ...]) -> Tuple[float, ...]:
        if any(x < 0 for x in f):
            raise ValueError(f"Frequencies must be nonnegative, got {f}")
        if abs(sum(f) - 1.0) > 1e-9:
            raise ValueError(f"Frequencies sum to {sum(f):.12f}, expected 1")
        return f

    @classmethod
    def from_counts(cls, counts: Sequence[int]) -> "FrequencyTable":
        counts = np.asarray(counts, dtype=float)
        if counts.shape != (4,):
            raise ProblemValidationError(f"Expected 4 counts, got {counts.shape}")
        total = counts.sum()
        if total <= 0:
            raise ProblemValidationError("No samples to build a frequency table from")
        return cls(f=tuple(float(x) for x in counts / total), count=int(round(total)))

    @classmethod
    def from_probabilities(cls, probabilities: Sequence[float], count: Optional[int] = None) -> "FrequencyTable":
        p = np.clip(np.asarray(probabilities, dtype=float), 0.0, None)
        return cls(f=tuple(float(x) for x in p / p.sum()), count=count)

    def as_array(self) -> np.ndarray:
        return np.array(self.f)


class ExtractedModel(BaseModel):
    model_config = ConfigDict(frozen=True)

    lambdas: Tuple[float, float, float]
    beta: float
    h1_hat: float
    h2_hat: float
    J_hat: float

    @property
    def temperature_mk(self) -> float:
        return temperature_mk(self.beta)


def spin_averages(t: FrequencyTable) -> Tuple[float, float, float]:
    """(<S1>, <S2>, <S1 S2>) of the table."""
    f1, f2, f3, f4 = t.f
    return f1 + f2 - f3 - f4, f1 - f2 + f3 - f4, f1 - f2 - f3 + f4


def lambdas_from_averages(a: float, b: float, c: float) -> Tuple[float, float, float]:
    """Closed-form multipliers from the spin averages a = <S1>, b = <S2>, c = <S1 S2>."""
    up_up = 1 + a + b + c
    up_down = 1 + a - b - c
    down_up = 1 - a + b - c
    down_down = 1 - a - b + c
    if min(up_up, up_down, down_up, down_down) <= 0:
        raise ZeroFrequencyError(f"Spin averages ({a}, {b}, {c}) imply a zero frequency")
    l1 = 0.25 * np.log(down_up * down_down / (up_up * up_down))
    l2 = 0.25 * np.log(up_down * down_down / (up_up * down_up))
    l3 = 0.25 * np.log(up_down * down_up / (up_up * down_down))
    return float(l1), float(l2), float(l3)


def lambdas_from_frequencies(t: FrequencyTable) -> Tuple[float, float, float]:
    f1, f2, f3, f4 = t.f
    zero = [i + 1 for i, x in enumerate(t.f) if x == 0.0]
    if zero:
        raise ZeroFrequencyError(f"Frequencies f{zero} are zero; the closed-form multipliers diverge")
    return (
        float(0.25 * np.log(f3 * f4 / (f1 * f2))),
        float(0.25 * np.log(f2 * f4 / (f1 * f3))),
        float(0.25 * np.log(f2 * f3 / (f1 * f4))),
    )


def maxent_distribution(lambdas: Sequence[float]) -> np.ndarray:
    """p_i for given multipliers, in index order."""
    l1, l2, l3 = lambdas
    s1 = np.array([1, 1, -1, -1])
    s2 = np.array([1, -1, 1, -1])
    exponent = -(l1 * s1 + l2 * s2 + l3 * s1 * s2)
    return np.exp(exponent - logsumexp(exponent))


def _two_spin_parameters(p: IsingProblem) -> Tuple[float, float, float]:
    if p.n != 2:
        raise ProblemValidationError(f"Extraction needs a 2-spin problem, got n={p.n}")
    return p.h[0], p.h[1], p.J.get((1, 0), 0.0)


def method1(t: FrequencyTable, p: IsingProblem) -> ExtractedModel:
    """Multipliers from the frequencies, then the beta minimizing |beta (h1, h2, J) - lambda|^2."""
    lambdas = np.array(lambdas_from_frequencies(t))
    h = np.array(_two_spin_parameters(p))
    denominator = float(h @ lambdas)
    if denominator == 0.0:
        raise NonIdentifiableError("h . lambda = 0; beta cannot be determined from these frequencies")
    beta = float(lambdas @ lambdas) / denominator
    h1_hat, h2_hat, J_hat = lambdas / beta
    return ExtractedModel(
        lambdas=tuple(float(x) for x in lambdas), beta=beta, h1_hat=h1_hat, h2_hat=h2_hat, J_hat=J_hat
    )


def _mean_energy_signed(energies: np.ndarray, beta: float) -> float:
    exponent = -beta * energies
    return float(np.exp(exponent - logsumexp(exponent)) @ energies)


def method2(t: FrequencyTable, p: IsingProblem, rtol: float = 1e-10) -> float:
    """beta with <E>_Gibbs(beta) equal to the empirical mean energy."""
    energies = p.energies()
    empirical = float(t.as_array() @ energies)
    e_min, e_max = energies.min(), energies.max()
    if np.isclose(e_min, e_max, rtol=0.0, atol=1e-15):
        raise NonIdentifiableError("All energies are equal; the mean energy does not depend on beta")
    if not e_min < empirical < e_max:
        raise NoSolutionError(f"Empirical <E>={empirical:.6g} outside the open interval ({e_min:.6g}, {e_max:.6g})")

    def residual(beta: float) -> float:
        return _mean_energy_signed(energies, beta) - empirical

    at_zero = residual(0.0)
    if np.isclose(at_zero, 0.0, rtol=0.0, atol=1e-12):
        return 0.0
    # <E> decreases with beta, so the root lies on the side where the residual changes sign
    direction = 1.0 if at_zero > 0 else -1.0
    bound = 1.0
    while residual(direction * bound) * at_zero > 0:
        bound *= 2.0
        if bound > BETA_BRACKET_LIMIT:
            raise NoSolutionError(f"No root for beta within |beta| <= {BETA_BRACKET_LIMIT}")
    lo, hi = sorted((0.0, direction * bound))
    return float(brentq(residual, lo, hi, rtol=rtol, xtol=1e-14))


def smooth_add_half(t: FrequencyTable) -> FrequencyTable:
    """(count f_i + 1/2) / (count + 2); keeps every frequency positive."""
    if t.count is None:
        raise ProblemValidationError("Add-half smoothing needs the sample count")
    counts = np.asarray(t.f) * t.count
    return FrequencyTable(f=tuple(float(x) for x in (counts + 0.5) / (t.count + 2)), count=t.count)


class BootstrapResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    method: str
    mean: float
    std: float
    resamples: int
    failures: int


def bootstrap_beta(
    t: FrequencyTable,
    p: IsingProblem,
    method: str = "method2",
    resamples: int = 1000,
    seed: int = 0,
    smooth: bool = False,
) -> BootstrapResult:
    """Multinomial resampling of the counts; failed resamples are counted, not averaged."""
    if t.count is None:
        raise ProblemValidationError("Bootstrap needs the sample count")
    if method not in ("method1", "method2"):
        raise ValueError(f"Unknown extraction method: {method}")
    rng = np.random.Generator(np.random.Philox(seed))
    draws = rng.multinomial(t.count, t.as_array(), size=resamples)

    betas = []
    for counts in draws:
        table = FrequencyTable.from_counts(counts)
        if smooth:
            table = smooth_add_half(table)
        try:
            betas.append(method1(table, p).beta if method == "method1" else method2(table, p))
        except (ZeroFrequencyError, NonIdentifiableError, NoSolutionError):
            continue
    failures = resamples - len(betas)
    if not betas:
        raise NoSolutionError(f"All {resamples} bootstrap resamples failed for {method}")
    if failures:
        logger.debug(f"{failures}/{resamples} bootstrap resamples failed for {method}")
    values = np.array(betas)
    return BootstrapResult(
        method=method,
        mean=float(values.mean()),
        std=float(values.std(ddof=1)) if len(values) > 1 else 0.0,
        resamples=resamples,
        failures=failures,
    )


def frequencies_from_samples(lines: Iterable[str]) -> FrequencyTable:
    """Count two-spin samples given one spin string per line ("+-", "ud", ...)."""
    counts = np.zeros(4, dtype=int)
    for number, line in enumerate(lines, start=1):
        token = line.strip()
        if not token or token.startswith("#"):
            continue
        try:
            config = SpinConfiguration.from_string(token)
        except ValueError as e:
            raise ProblemValidationError(f"Line {number}: {e}") from e
        if len(config.spins) != 2:
            raise ProblemValidationError(f"Line {number}: expected 2 spins, got {len(config.spins)}")
        counts[config.index] += 1
    return FrequencyTable.from_counts(counts)


def sample_gibbs_counts(probabilities: Sequence[float], draws: int, seed: int = 0) -> np.ndarray:
    """Multinomial counts from a seeded Philox generator."""
    rng = np.random.Generator(np.random.Philox(seed))
    return rng.multinomial(draws, np.asarray(probabilities, dtype=float) / np.sum(probabilities))


class ExtractionReport(BaseModel):
    """Both methods side by side; a failed method keeps its error message."""

    model_config = ConfigDict(frozen=True)

    instance: str
    method1: Optional[ExtractedModel] = None
    method1_error: Optional[str] = None
    method2_beta: Optional[float] = None
    method2_error: Optional[str] = None
    bootstrap: Tuple[BootstrapResult, ...] = ()

    @property
    def method2_temperature_mk(self) -> Optional[float]:
        if self.method2_beta is None or self.method2_beta <= 0:
            return None
        return temperature_mk(self.method2_beta)


def extract(
    t: FrequencyTable,
    p: IsingProblem,
    smooth: bool = False,
    resamples: int = 0,
    seed: int = 0,
) -> ExtractionReport:
    """Run both methods; errors of one method do not stop the other."""
    table = smooth_add_half(t) if smooth else t
    fields = {"instance": p.name}
    try:
        fields["method1"] = method1(table, p)
    except (ZeroFrequencyError, NonIdentifiableError) as e:
        logger.debug(f"Method 1 failed for {p.name}: {e}")
        fields["method1_error"] = f"{type(e).__name__}: {e}"
    try:
        fields["method2_beta"] = method2(table, p)
    except (NonIdentifiableError, NoSolutionError) as e:
        logger.debug(f"Method 2 failed for {p.name}: {e}")
        fields["method2_error"] = f"{type(e).__name__}: {e}"

    if resamples and t.count:
        results = []
        for method in ("method1", "method2"):
            try:
                results.append(bootstrap_beta(t, p, method, resamples, seed, smooth))
            except NoSolutionError as e:
                logger.debug(str(e))
        fields["bootstrap"] = tuple(results)
    return ExtractionReport(**fields)
