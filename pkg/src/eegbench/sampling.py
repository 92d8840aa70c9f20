"""Between-subjects cross-validation folds and budget-constrained,
class-stratified training subsets."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientData, TooFewSubjects
from .preprocess import Epoch, EpochSet


@dataclass(frozen=True)
class BudgetSpec:
    s_total: int
    n_subjects: int
    seed: int = 0

    def __post_init__(self):
        if self.s_total < 1:
            raise ValueError("s_total must be >= 1")
        if self.n_subjects < 1:
            raise ValueError("n_subjects must be >= 1")


@dataclass
class FoldSpec:
    fold_id: int
    train_subjects: list[str]
    val_subjects: list[str]
    test_subjects: list[str]


def _seeded_draw(rng: np.random.Generator, items: list[str], k: int) -> list[str]:
    """Draw k items without replacement; names are sorted first so the draw is
    invariant to input ordering."""
    ordered = sorted(items)
    picks = rng.choice(len(ordered), size=k, replace=False)
    return [ordered[i] for i in sorted(picks)]


def largest_remainder(total: int, weights: list[float]) -> list[int]:
    """Apportion `total` integer units proportionally to `weights`.

    Floors the exact shares, then hands the remaining units to the largest
    fractional remainders (ties broken by index).
    """
    wsum = float(sum(weights))
    if wsum <= 0:
        return [0] * len(weights)
    exact = [total * w / wsum for w in weights]
    counts = [int(np.floor(e)) for e in exact]
    leftover = total - sum(counts)
    order = sorted(range(len(weights)), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in order[:leftover]:
        counts[i] += 1
    return counts


def make_folds(subjects: list[str], scheme: str, seed: int = 0) -> list[FoldSpec]:
    """Build between-subjects CV folds.

    scheme: "kfold<k>" (e.g. "kfold5") or "loso". Test sets partition the
    subject universe; 20% of each fold's remaining subjects (at least 1) are
    held out for validation by seeded draw.
    """
    unique = sorted(set(subjects))
    rng = np.random.default_rng(seed)
    if scheme == "loso":
        if len(unique) < 2:
            raise TooFewSubjects("LOSO needs at least 2 subjects")
        test_sets = [[s] for s in unique]
    elif scheme.startswith("kfold"):
        k = int(scheme[len("kfold"):])
        if len(unique) < k:
            raise TooFewSubjects(f"{len(unique)} subjects for {k}-fold CV")
        shuffled = [str(s) for s in rng.permutation(unique)]
        sizes = largest_remainder(len(unique), [1.0] * k)
        test_sets, start = [], 0
        for size in sizes:
            test_sets.append(sorted(shuffled[start : start + size]))
            start += size
    else:
        raise ValueError(f"unknown CV scheme {scheme!r}")

    folds = []
    for fold_id, test in enumerate(test_sets):
        rest = [s for s in unique if s not in test]
        n_val = max(1, round(0.2 * len(rest)))
        if n_val >= len(rest):
            n_val = len(rest) - 1
        val = _seeded_draw(rng, rest, n_val) if n_val > 0 else []
        train = [s for s in rest if s not in val]
        folds.append(FoldSpec(fold_id=fold_id, train_subjects=train,
                              val_subjects=val, test_subjects=test))
    return folds


def _subject_class_quotas(quota: int, available: list[int]) -> list[int]:
    """Per-class counts for one subject: equal largest-remainder shares over
    the K classes, with any class deficit redistributed to classes that still
    have spare epochs."""
    k = len(available)
    if quota > sum(available):
        raise InsufficientData(
            f"subject has {sum(available)} epochs, quota is {quota}"
        )
    counts = largest_remainder(quota, [1.0] * k)
    while True:
        deficit = sum(max(0, c - a) for c, a in zip(counts, available))
        if deficit == 0:
            return counts
        counts = [min(c, a) for c, a in zip(counts, available)]
        spare = [a - c for c, a in zip(counts, available)]
        extra = largest_remainder(deficit, [float(s > 0) for s in spare])
        counts = [c + e for c, e in zip(counts, extra)]


def sample_budget(
    epoch_set: EpochSet,
    budget: BudgetSpec,
    train_subjects: list[str],
) -> tuple[EpochSet, list[int]]:
    """Draw exactly budget.s_total epochs, class-stratified within each of
    budget.n_subjects seeded-drawn training subjects.

    Returns the sampled EpochSet and the chosen epoch indices into
    epoch_set.epochs (the reproducibility manifest).
    """
    if budget.n_subjects > len(train_subjects):
        raise InsufficientData(
            f"budget wants {budget.n_subjects} subjects, fold has {len(train_subjects)}"
        )
    rng = np.random.default_rng(budget.seed)
    chosen = _seeded_draw(rng, list(train_subjects), budget.n_subjects)

    by_subject_class: dict[str, list[list[int]]] = {
        s: [[] for _ in range(epoch_set.n_classes)] for s in chosen
    }
    for idx, ep in enumerate(epoch_set.epochs):
        if ep.subject_id in by_subject_class:
            by_subject_class[ep.subject_id][ep.label].append(idx)

    quotas = largest_remainder(budget.s_total, [1.0] * budget.n_subjects)
    picked: list[int] = []
    for subject, quota in zip(chosen, quotas):
        pools = by_subject_class[subject]
        available = [len(p) for p in pools]
        try:
            class_counts = _subject_class_quotas(quota, available)
        except InsufficientData as err:
            raise InsufficientData(f"subject {subject!r}: {err}") from None
        for pool, count in zip(pools, class_counts):
            if count == 0:
                continue
            idxs = rng.choice(len(pool), size=count, replace=False)
            picked.extend(pool[i] for i in sorted(idxs))

    picked.sort()
    epochs = [epoch_set.epochs[i] for i in picked]
    sampled = EpochSet(epochs=epochs, n_classes=epoch_set.n_classes,
                       class_names=list(epoch_set.class_names))
    return sampled, picked
