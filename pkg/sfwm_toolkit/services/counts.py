"""Detection-count model, correlation estimators and seeded count simulation."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from sfwm_toolkit.errors import DomainError, InconsistentDataError, UndefinedEstimatorError
from sfwm_toolkit.services.spectral import pair_probability_ratio

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]

P_MAX_LIMIT = 0.1


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float


@dataclass(frozen=True)
class CountModelParams:
    """Shared parameters of the singles and coincidence curves.

    ``tau_p`` is kept positive: the curves are unchanged under
    (τ_p, τ_c) → (-τ_p, τ_c - τ_p), so only |τ_p| is observable. ``tau_c`` is a real offset.
    """

    n_s: float
    n_i: float
    eta_s: float
    eta_i: float
    p_max: float
    sigma: float
    tau_p: float
    tau_c: float

    def __post_init__(self) -> None:
        if self.n_s < 0 or self.n_i < 0:
            raise DomainError("noise counts must be non-negative")
        for name in ("eta_s", "eta_i"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {value}")
        if not 0.0 <= self.p_max <= P_MAX_LIMIT:
            raise DomainError(f"p_max must lie in [0, {P_MAX_LIMIT}], got {self.p_max}")
        if self.sigma <= 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")
        if self.tau_p <= 0:
            raise DomainError(f"tau_p must be positive, got {self.tau_p}")
        if not math.isfinite(self.tau_c):
            raise DomainError("tau_c must be finite")

    def pair_probability(self, tau_exp: npt.ArrayLike) -> FloatArray:
        taus = np.asarray(tau_exp, dtype=np.float64) - self.tau_c
        ratio = pair_probability_ratio(taus, self.sigma, self.tau_p)
        return np.asarray(self.p_max * np.asarray(ratio), dtype=np.float64)


@dataclass(frozen=True)
class CountRecord:
    """Counts at one stage delay; singles are multiplied by ``scale`` when used."""

    tau_exp: float
    c_s: int
    c_i: int
    c_si: int
    r: int
    scale: float = 1.0

    def __post_init__(self) -> None:
        if min(self.c_s, self.c_i, self.c_si) < 0:
            raise DomainError("counts must be non-negative")
        if self.r <= 0:
            raise DomainError("pulse count R must be positive")
        if self.scale <= 0:
            raise DomainError("scale factor must be positive")
        if self.c_si > min(self.singles_s, self.singles_i):
            raise DomainError(
                f"coincidences {self.c_si} exceed singles at tau={self.tau_exp} ps"
            )

    @property
    def singles_s(self) -> float:
        return self.c_s * self.scale

    @property
    def singles_i(self) -> float:
        return self.c_i * self.scale


@dataclass(frozen=True)
class TripleCountRecord:
    c_s: int
    c_s_prime: int
    c_i: int
    c_si: int
    c_ss_prime: int
    c_s_prime_i: int
    c_ss_prime_i: int
    r: int

    def __post_init__(self) -> None:
        counts = (
            self.c_s, self.c_s_prime, self.c_i, self.c_si,
            self.c_ss_prime, self.c_s_prime_i, self.c_ss_prime_i,
        )
        if min(counts) < 0 or self.r <= 0:
            raise DomainError("counts must be non-negative and R positive")
        if self.c_si > min(self.c_s, self.c_i):
            raise DomainError("C_si exceeds its singles")
        if self.c_ss_prime > min(self.c_s, self.c_s_prime):
            raise DomainError("C_ss' exceeds its singles")
        if self.c_s_prime_i > min(self.c_s_prime, self.c_i):
            raise DomainError("C_s'i exceeds its singles")
        if self.c_ss_prime_i > min(self.c_si, self.c_s_prime_i, self.c_ss_prime):
            raise DomainError("C_ss'i exceeds its two-fold coincidences")


def expected_counts(
    params: CountModelParams, tau_exp: npt.ArrayLike, r: float
) -> tuple[FloatArray, FloatArray, FloatArray]:
    """E[C_s], E[C_i], E[C_si] at stage delays ``tau_exp`` over ``r`` pulse pairs."""
    if r <= 0:
        raise DomainError("pulse count R must be positive")
    p = params.pair_probability(tau_exp)
    c_s = params.n_s + params.eta_s * p * r
    c_i = params.n_i + params.eta_i * p * r
    c_si = (
        params.n_s * params.n_i / r
        + (1.0 - params.eta_s) * p * params.n_i
        + (1.0 - params.eta_i) * p * params.n_s
        + params.eta_s * params.eta_i * p * r
    )
    return c_s, c_i, c_si


def cross_correlation(record: CountRecord) -> Estimate:
    """g²_si = C_si·R/(C_s·C_i) with Poisson-propagated standard error."""
    if record.c_s == 0 or record.c_i == 0:
        raise UndefinedEstimatorError("g2_si undefined: zero singles")
    scale_factor = record.r / (record.singles_s * record.singles_i)
    value = record.c_si * scale_factor
    # scaled singles carry variance scale·mean, i.e. relative variance 1/raw count
    rel_sq_singles = 1.0 / record.c_s + 1.0 / record.c_i
    stderr = scale_factor * math.sqrt(
        max(record.c_si, 1) + record.c_si**2 * rel_sq_singles
    )
    return Estimate(value, stderr)


def conditional_autocorr(record: TripleCountRecord) -> Estimate:
    """g²_ss'|i = C_ss'i·C_i/(C_si·C_s'i)."""
    if record.c_si == 0 or record.c_s_prime_i == 0:
        raise UndefinedEstimatorError("g2_ss'|i undefined: zero heralded coincidences")
    factor = record.c_i / (record.c_si * record.c_s_prime_i)
    value = record.c_ss_prime_i * factor
    rel_sq = 1.0 / record.c_i + 1.0 / record.c_si + 1.0 / record.c_s_prime_i
    stderr = factor * math.sqrt(max(record.c_ss_prime_i, 1) + record.c_ss_prime_i**2 * rel_sq)
    return Estimate(value, stderr)


@dataclass(frozen=True)
class NoiseLevels:
    """Noise singles per pulse pair, the n_s/R and n_i/R of the count model."""

    s: float
    i: float

    def __post_init__(self) -> None:
        if self.s < 0 or self.i < 0:
            raise DomainError("noise levels must be non-negative")

    @classmethod
    def from_record(cls, record: CountRecord) -> NoiseLevels:
        """Noise read off a record taken far from pump overlap."""
        return cls(record.singles_s / record.r, record.singles_i / record.r)

    @classmethod
    def from_single_pumps(
        cls, pump1: CountRecord, pump2: CountRecord, blocked: CountRecord
    ) -> NoiseLevels:
        """Noise from pump-1-only, pump-2-only and both-blocked records.

        Dark counts appear in both single-pump records and are removed once.
        """
        s = pump1.singles_s / pump1.r + pump2.singles_s / pump2.r - blocked.singles_s / blocked.r
        i = pump1.singles_i / pump1.r + pump2.singles_i / pump2.r - blocked.singles_i / blocked.r
        if s < 0 or i < 0:
            raise InconsistentDataError(
                "blocked-pump counts exceed the sum of the single-pump counts"
            )
        return cls(s, i)


@dataclass(frozen=True)
class SourcePerformance:
    eta_s: float
    eta_i: float
    p: float
    pair_dominated: bool


def source_performance(
    peak: CountRecord, noise: NoiseLevels, *, pair_dominated: bool = True
) -> SourcePerformance:
    """Heralding efficiencies and pair probability from one record plus measured noise.

    Eliminating the efficiencies from the count model leaves
    (N_s + N_i)p² - Xp + ΔC_sΔC_i/R = 0. Its two roots map onto each other under
    p → η_sη_i pR/(N_s + N_i). The smaller root is the solution with η_sη_iR above
    N_s + N_i, where true coincidences outnumber noise-seeded ones; pass
    ``pair_dominated=False`` for the other branch.
    """
    r = float(peak.r)
    n_s = noise.s * r
    n_i = noise.i * r
    excess_s = peak.singles_s - n_s
    excess_i = peak.singles_i - n_i
    if excess_s <= 0 or excess_i <= 0:
        raise InconsistentDataError("singles show no excess over the measured noise")
    total_noise = n_s + n_i
    product = excess_s * excess_i / r
    x = peak.c_si - n_s * n_i / r + (excess_s * n_i + excess_i * n_s) / r
    disc = x * x - 4.0 * total_noise * product
    if x <= 0 or disc < 0:
        raise InconsistentDataError(
            "coincidences are inconsistent with the singles and noise levels"
        )
    root = math.sqrt(disc)
    if pair_dominated or total_noise == 0:
        p = 2.0 * product / (x + root)
    else:
        p = (x + root) / (2.0 * total_noise)
    eta_s = excess_s / (p * r)
    eta_i = excess_i / (p * r)
    if eta_s > 1.0 or eta_i > 1.0:
        raise InconsistentDataError(
            f"branch gives efficiencies above one (eta_s={eta_s:.4g}, eta_i={eta_i:.4g})"
        )
    logger.debug(
        "source_performance_estimated",
        extra={"eta_s": eta_s, "eta_i": eta_i, "p": p, "pair_dominated": pair_dominated},
    )
    return SourcePerformance(eta_s=eta_s, eta_i=eta_i, p=p, pair_dominated=pair_dominated)


def _class_probabilities(e_s: float, e_i: float, e_si: float, r: float) -> FloatArray:
    both = e_si / r
    signal_only = (e_s - e_si) / r
    idler_only = (e_i - e_si) / r
    probs = np.array([both, signal_only, idler_only], dtype=np.float64)
    if np.any(probs < 0):
        logger.warning(
            "count_classes_clipped",
            extra={"both": both, "signal_only": signal_only, "idler_only": idler_only},
        )
        probs = np.clip(probs, 0.0, None)
    none = 1.0 - float(probs.sum())
    if none < 0:
        raise DomainError("expected counts imply more than one click per pulse")
    return np.append(probs, none)


def simulate_counts(
    params: CountModelParams,
    tau_exp: npt.ArrayLike,
    r: int,
    seed: int,
) -> list[CountRecord]:
    """Draw one acquisition of R pulses per delay.

    Each pulse falls into one of four disjoint classes (coincidence, signal-only, idler-only,
    no click) whose probabilities reproduce E[C_s], E[C_i] and E[C_si]; the class totals
    are one multinomial draw. Delay k uses ``SeedSequence(seed).spawn(n)[k]``.
    """
    taus = np.atleast_1d(np.asarray(tau_exp, dtype=np.float64))
    e_s, e_i, e_si = expected_counts(params, taus, r)
    children = np.random.SeedSequence(seed).spawn(taus.size)
    records: list[CountRecord] = []
    for k, tau in enumerate(taus):
        probs = _class_probabilities(float(e_s[k]), float(e_i[k]), float(e_si[k]), r)
        rng = np.random.default_rng(children[k])
        both, signal_only, idler_only, _ = rng.multinomial(r, probs)
        records.append(
            CountRecord(
                tau_exp=float(tau),
                c_s=int(both + signal_only),
                c_i=int(both + idler_only),
                c_si=int(both),
                r=r,
            )
        )
    logger.debug("counts_simulated", extra={"points": len(records), "seed": seed})
    return records


@dataclass(frozen=True)
class HeraldingSetup:
    """Three-detector heralding: signal arm split onto APD_s and APD_s', idler on APD_i.

    Pulses carry k pairs with single-mode thermal statistics μ^k/(1+μ)^(k+1), truncated at
    ``max_pairs`` and renormalized. ``noise_*`` are per-pulse background click probabilities.
    """

    mean_pairs: float
    eta_s: float
    eta_i: float
    noise_s: float = 0.0
    noise_s_prime: float = 0.0
    noise_i: float = 0.0
    split: float = 0.5
    max_pairs: int = 4

    def __post_init__(self) -> None:
        if self.mean_pairs < 0:
            raise DomainError("mean pair number must be non-negative")
        for name in ("eta_s", "eta_i", "noise_s", "noise_s_prime", "noise_i", "split"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {value}")
        if self.max_pairs < 1:
            raise DomainError("max_pairs must be at least 1")

    def pair_distribution(self) -> FloatArray:
        k = np.arange(self.max_pairs + 1, dtype=np.float64)
        mu = self.mean_pairs
        weights = mu**k / (1.0 + mu) ** (k + 1.0)
        return np.asarray(weights / weights.sum(), dtype=np.float64)


_PATTERNS = tuple(itertools.product((0, 1), repeat=3))


def _no_click_probability(setup: HeraldingSetup, silent: tuple[int, int, int]) -> float:
    """P(no detector in the ``silent`` mask clicks)."""
    quiet_s, quiet_sp, quiet_i = silent
    sig = 1.0 - setup.eta_s * (setup.split * quiet_s + (1.0 - setup.split) * quiet_sp)
    idl = 1.0 - setup.eta_i * quiet_i
    per_pair = sig * idl
    pk = setup.pair_distribution()
    pairs = float(np.sum(pk * per_pair ** np.arange(pk.size)))
    noise = 1.0
    for flag, n in zip(silent, (setup.noise_s, setup.noise_s_prime, setup.noise_i)):
        if flag:
            noise *= 1.0 - n
    return pairs * noise


def click_pattern_probabilities(setup: HeraldingSetup) -> dict[tuple[int, int, int], float]:
    """Exact per-pulse probability of every click pattern (s, s', i) by inclusion-exclusion."""
    probs: dict[tuple[int, int, int], float] = {}
    for pattern in _PATTERNS:
        clicked = [k for k, flag in enumerate(pattern) if flag]
        total = 0.0
        for size in range(len(clicked) + 1):
            for subset in itertools.combinations(clicked, size):
                quiet = [0 if (pattern[k] and k not in subset) else 1 for k in range(3)]
                silent = (quiet[0], quiet[1], quiet[2])
                total += (-1.0) ** size * _no_click_probability(setup, silent)
        probs[pattern] = max(total, 0.0)
    return probs


def _triple_from_totals(totals: dict[tuple[int, int, int], float]) -> dict[str, float]:
    def count(*need: int) -> float:
        return sum(v for pattern, v in totals.items() if all(pattern[k] for k in need))

    return {
        "c_s": count(0),
        "c_s_prime": count(1),
        "c_i": count(2),
        "c_si": count(0, 2),
        "c_ss_prime": count(0, 1),
        "c_s_prime_i": count(1, 2),
        "c_ss_prime_i": count(0, 1, 2),
    }


def expected_triple_counts(setup: HeraldingSetup, r: int) -> dict[str, float]:
    probs = click_pattern_probabilities(setup)
    return _triple_from_totals({k: v * r for k, v in probs.items()})


def expected_conditional_autocorr(setup: HeraldingSetup) -> float:
    e = expected_triple_counts(setup, 1)
    if e["c_si"] == 0 or e["c_s_prime_i"] == 0:
        raise UndefinedEstimatorError("no heralded coincidences in this setup")
    return e["c_ss_prime_i"] * e["c_i"] / (e["c_si"] * e["c_s_prime_i"])


def simulate_triple_counts(setup: HeraldingSetup, r: int, seed: int) -> TripleCountRecord:
    probs = click_pattern_probabilities(setup)
    weights = np.array([probs[p] for p in _PATTERNS], dtype=np.float64)
    weights /= weights.sum()
    draws = np.random.default_rng(np.random.SeedSequence(seed)).multinomial(r, weights)
    totals = {pattern: float(n) for pattern, n in zip(_PATTERNS, draws)}
    counts = _triple_from_totals(totals)
    return TripleCountRecord(r=r, **{k: int(v) for k, v in counts.items()})
