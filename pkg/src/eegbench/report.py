"""Rendered tables: parameter-efficiency, sample-efficiency (with significance
stars), and channel-efficiency summaries. Metric values render as x100
percentages; efficiency ratios render as plain ratios."""

from __future__ import annotations

from collections import defaultdict

from .efficiency import CellResult, aggregate
from .errors import UnpairedCells
from .metrics import chance_level


def _stars(p_value: float | None) -> str:
    if p_value is None:
        return ""
    if p_value < 0.001:
        return "**"
    if p_value < 0.05:
        return "*"
    return ""


def _render_grid(title: str, rows: list[str], cols: list[str],
                 cell_of: dict[tuple[str, str], str]) -> str:
    widths = [max(len(r) for r in rows + [title])]
    for c in cols:
        widths.append(max(len(c), max((len(cell_of.get((r, c), "")) for r in rows), default=0)))
    header = "  ".join(t.ljust(w) for t, w in zip([title] + cols, widths))
    lines = [header, "-" * len(header)]
    for r in rows:
        cells = [cell_of.get((r, c), "-").ljust(w) for c, w in zip(cols, widths[1:])]
        lines.append("  ".join([r.ljust(widths[0])] + cells))
    return "\n".join(lines) + "\n"


def render_pe_table(cells: list[CellResult], metric: str, n_classes: int) -> str:
    """Per-fold PE aggregated per (model, setting) x dataset, as in a
    linear-probe/PEFT efficiency table."""
    chance = chance_level(metric, n_classes)
    scoped = [c for c in cells if c.metric_name == metric]
    datasets = sorted({c.dataset_id for c in scoped})
    pairs = sorted({(c.model_tag, c.setting) for c in scoped
                    if c.setting in ("linear_probe", "peft")})
    grid = {}
    rows = []
    for model, setting in pairs:
        row = f"{model}/{setting}"
        rows.append(row)
        for ds in datasets:
            subset = [c for c in scoped if c.dataset_id == ds
                      and c.model_tag in (model,) and c.setting == setting]
            full = [c for c in scoped if c.dataset_id == ds and c.setting == "full_ft"
                    and c.model_tag == model]
            if not subset or not full:
                continue
            try:
                rep = aggregate(subset + full, setting, "full_ft", chance, kind="PE")
            except UnpairedCells:
                continue
            grid[(row, ds)] = f"{rep.mean:.2f} +- {rep.std:.2f}"
    return _render_grid(f"PE ({metric})", rows, datasets, grid)


def render_se_table(cells: list[CellResult], metric: str, n_classes: int,
                    supervised_tag: str | None = None) -> str:
    """SE per (model, setting) x budget vs the supervised baseline, with
    significance stars (* p<0.05, ** p<0.001)."""
    chance = chance_level(metric, n_classes)
    scoped = [c for c in cells if c.metric_name == metric]
    budgets = sorted({c.budget for c in scoped if c.budget is not None})
    cols = [str(b) for b in budgets]
    sup = [c for c in scoped if c.setting == "supervised"
           and (supervised_tag is None or c.model_tag == supervised_tag)]
    pairs = sorted({(c.model_tag, c.setting) for c in scoped
                    if c.setting in ("linear_probe", "peft")})
    grid = {}
    rows = []
    for model, setting in pairs:
        row = f"{model}/{setting}"
        rows.append(row)
        for b in budgets:
            num = [c for c in scoped if c.budget == b and c.model_tag == model
                   and c.setting == setting]
            den = [c for c in sup if c.budget == b]
            if not num or not den:
                continue
            try:
                rep = aggregate(num + den, setting, "supervised", chance, kind="SE")
            except UnpairedCells:
                continue
            grid[(row, str(b))] = f"{rep.mean:.2f} +- {rep.std:.2f}{_stars(rep.p_value)}"
    table = _render_grid(f"SE ({metric})", rows, cols, grid)
    return table + "significance: * p<0.05, ** p<0.001 (paired one-sided)\n"


def render_channel_table(cells: list[CellResult], metric: str) -> str:
    """Mean +- std of the raw metric (x100) per (model, setting) x dataset for
    a channel-restricted run."""
    scoped = [c for c in cells if c.metric_name == metric]
    datasets = sorted({c.dataset_id for c in scoped})
    by_key = defaultdict(list)
    for c in scoped:
        by_key[(f"{c.model_tag}/{c.setting}", c.dataset_id)].append(c.value)
    rows = sorted({k[0] for k in by_key})
    grid = {}
    for (row, ds), values in by_key.items():
        mean = 100.0 * sum(values) / len(values)
        var = sum((100.0 * v - mean) ** 2 for v in values) / len(values)
        grid[(row, ds)] = f"{mean:.2f} +- {var ** 0.5:.2f}"
    return _render_grid(f"{metric} x100", rows, datasets, grid)
