"""Headline efficiency ratios (parameter and sample efficiency) with paired
per-fold aggregation and one-sided significance testing."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from scipy import stats

from .errors import ChanceLevelDenominator, UnpairedCells

DENOM_TOL = 1e-9


@dataclass(frozen=True)
class CellResult:
    model_tag: str
    setting: str  # full_ft | linear_probe | peft | supervised
    dataset_id: str
    fold_id: int
    seed: int
    metric_name: str
    value: float
    budget: int | None = None

    def key(self) -> tuple:
        return (self.fold_id, self.seed, self.budget)


@dataclass
class EfficiencyReport:
    kind: str  # "PE" | "SE"
    mean: float
    std: float
    n: int
    values: list[float]
    p_value: float | None = None
    test_name: str | None = None
    n_excluded: int = 0
    excluded: list[tuple] = field(default_factory=list)


def parameter_efficiency(p_s: float, p_ft: float, p_chance: float) -> float:
    """Fraction of the full-fine-tuning margin over chance retained by a
    parameter-efficient setting: (p_s - p_chance) / (p_ft - p_chance)."""
    if abs(p_ft - p_chance) < DENOM_TOL:
        raise ChanceLevelDenominator(
            f"full fine-tuning performance {p_ft} is at chance level {p_chance}"
        )
    return (p_s - p_chance) / (p_ft - p_chance)


def sample_efficiency(p_d: float, p_sup: float, p_chance: float) -> float:
    """Foundation-model margin over chance relative to the supervised baseline
    at the same budget; values > 1 mean the foundation model is ahead."""
    if abs(p_sup - p_chance) < DENOM_TOL:
        raise ChanceLevelDenominator(
            f"supervised baseline performance {p_sup} is at chance level {p_chance}"
        )
    return (p_d - p_chance) / (p_sup - p_chance)


def sign_test_greater(diffs: list[float]) -> float:
    """Exact one-sided binomial sign test for median(diff) > 0.

    Zero differences are dropped; with no non-zero differences the data carry
    no directional evidence and p = 0.5.
    """
    nonzero = [d for d in diffs if d != 0]
    if not nonzero:
        return 0.5
    n = len(nonzero)
    wins = sum(1 for d in nonzero if d > 0)
    return float(sum(math.comb(n, k) for k in range(wins, n + 1)) / 2 ** n)


def paired_significance(diffs: list[float]) -> tuple[float, str]:
    """One-sided p-value for diffs > 0; Wilcoxon signed-rank for n >= 10,
    exact sign test below that (and when every difference is zero)."""
    nonzero = [d for d in diffs if d != 0]
    if len(nonzero) >= 10:
        p = stats.wilcoxon(nonzero, alternative="greater", mode="exact").pvalue
        return float(p), "wilcoxon_signed_rank_one_sided"
    return sign_test_greater(diffs), "exact_sign_test_one_sided"


def aggregate(
    cells: list[CellResult],
    numerator_setting: str,
    denominator_setting: str,
    p_chance: float,
    kind: str = "SE",
) -> EfficiencyReport:
    """Pair cells on (fold_id, seed, budget), compute the per-pair ratio, then
    mean +- std. For SE, a one-sided paired test of numerator > denominator.

    Pairs whose denominator does not exceed chance are excluded from the mean
    and reported individually, never clamped.
    """
    num = {c.key(): c for c in cells if c.setting == numerator_setting}
    den = {c.key(): c for c in cells if c.setting == denominator_setting}
    if not num or not den:
        raise UnpairedCells(
            f"no cells for settings {numerator_setting!r} / {denominator_setting!r}"
        )
    if set(num) != set(den):
        missing = set(num) ^ set(den)
        raise UnpairedCells(f"unpaired (fold, seed, budget) keys: {sorted(missing)}")

    ratio = parameter_efficiency if kind == "PE" else sample_efficiency
    values, diffs, excluded = [], [], []
    for key in sorted(num, key=lambda k: (k[0], k[1], k[2] if k[2] is not None else -1)):
        p_num, p_den = num[key].value, den[key].value
        if p_den - p_chance < DENOM_TOL:
            excluded.append((key, p_num, p_den))
            continue
        values.append(ratio(p_num, p_den, p_chance))
        diffs.append(p_num - p_den)

    if not values:
        raise UnpairedCells("every pair had a chance-level or pathological denominator")
    n = len(values)
    mean = sum(values) / n
    std = math.sqrt(sum((v - mean) ** 2 for v in values) / n) if n > 1 else 0.0
    p_value = test_name = None
    if kind == "SE":
        p_value, test_name = paired_significance(diffs)
    return EfficiencyReport(
        kind=kind, mean=mean, std=std, n=n, values=values,
        p_value=p_value, test_name=test_name,
        n_excluded=len(excluded), excluded=excluded,
    )
