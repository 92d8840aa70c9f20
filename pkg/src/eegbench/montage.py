"""Channel-efficiency montage protocols: sparse per-lobe selection and
single-region restriction over 10-20/10-10 channel names."""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import LobeEmpty, MissingChannel, UnknownChannel
from .preprocess import EpochSet

LOBES = ("frontal", "central", "temporal", "parietal", "occipital")

# longest prefix first; each maps a 10-20/10-10 site prefix to a lobe
_PREFIX_RULES = (
    ("FP", "frontal"),
    ("AF", "frontal"),
    ("FC", "central"),
    ("FT", "temporal"),
    ("TP", "temporal"),
    ("CP", "parietal"),
    ("PO", "occipital"),
    ("F", "frontal"),
    ("C", "central"),
    ("T", "temporal"),
    ("P", "parietal"),
    ("O", "occipital"),
)

_SUFFIX_RE = re.compile(r"^(z|\d{1,2}h?)$", re.IGNORECASE)


@dataclass
class ChannelTaxonomy:
    lobe_of: dict[str, str]
    midline: dict[str, bool]
    unknown: list[str] = field(default_factory=list)

    def channels_in(self, lobe: str) -> list[str]:
        return [ch for ch, lb in self.lobe_of.items() if lb == lobe]

    def midline_channels(self) -> list[str]:
        return [ch for ch, flag in self.midline.items() if flag]


@dataclass
class MontageSelection:
    mode: str  # "sparse" | "lobe_restricted" | "identity"
    selected: list[str]
    seed: int = 0


def _classify_one(name: str) -> tuple[str, bool]:
    # bipolar derivations ("Fpz-Cz") follow their leading electrode;
    # a vendor "EEG " prefix is tolerated
    site = name.split("-")[0].strip()
    if site.upper().startswith("EEG "):
        site = site[4:].strip()
    upper = site.upper()
    for prefix, lobe in _PREFIX_RULES:
        if upper.startswith(prefix):
            suffix = site[len(prefix):]
            if _SUFFIX_RE.match(suffix):
                return lobe, suffix.lower() == "z"
    raise UnknownChannel(f"channel name {name!r} matches no 10-20/10-10 rule")


def classify_channels(names: list[str], overrides: dict[str, str] | None = None) -> ChannelTaxonomy:
    """Map channel names to cortical lobes by site-prefix rules.

    Unknown names are excluded and reported on the taxonomy, not fatal.
    `overrides` forces name -> lobe for nonstandard montages.
    """
    taxonomy = ChannelTaxonomy(lobe_of={}, midline={})
    for name in names:
        if overrides and name in overrides:
            taxonomy.lobe_of[name] = overrides[name]
            taxonomy.midline[name] = name.split("-")[0].strip().lower().endswith("z")
            continue
        try:
            lobe, mid = _classify_one(name)
        except UnknownChannel:
            taxonomy.unknown.append(name)
            continue
        taxonomy.lobe_of[name] = lobe
        taxonomy.midline[name] = mid
    return taxonomy


def select_sparse(taxonomy: ChannelTaxonomy, n_per_lobe: int, seed: int = 0) -> MontageSelection:
    """Pick n_per_lobe channels from every lobe (all of them if the lobe is
    smaller), by seeded draw over the name-sorted lobe members."""
    if n_per_lobe < 1:
        raise ValueError("n_per_lobe must be >= 1")
    rng = np.random.default_rng(seed)
    selected: list[str] = []
    for lobe in LOBES:
        members = sorted(taxonomy.channels_in(lobe))
        if not members:
            raise LobeEmpty(f"lobe {lobe!r} has no channels in this montage")
        take = min(n_per_lobe, len(members))
        picks = rng.choice(len(members), size=take, replace=False)
        selected.extend(members[i] for i in sorted(picks))
    return MontageSelection(mode=f"sparse({n_per_lobe})", selected=selected, seed=seed)


def select_lobe_restricted(taxonomy: ChannelTaxonomy, region: str) -> MontageSelection:
    """All and only the channels of one region; 'midline' filters on the z flag."""
    if region == "midline":
        selected = taxonomy.midline_channels()
    elif region in LOBES:
        selected = taxonomy.channels_in(region)
    else:
        raise ValueError(f"unknown region {region!r}")
    if not selected:
        raise LobeEmpty(f"region {region!r} has no channels in this montage")
    return MontageSelection(mode=f"lobe_restricted({region})", selected=selected)


def apply(selection: MontageSelection, epoch_set: EpochSet,
          channels: list[str]) -> tuple[EpochSet, list[str]]:
    """Reduce every epoch to the selected channel rows, in selection order.

    `channels` names the rows of the epochs' data matrices.
    """
    index = {ch: i for i, ch in enumerate(channels)}
    missing = [ch for ch in selection.selected if ch not in index]
    if missing:
        raise MissingChannel(f"selected channels absent from epochs: {missing}")
    rows = [index[ch] for ch in selection.selected]
    epochs = [replace(ep, data=ep.data[rows, :]) for ep in epoch_set.epochs]
    reduced = EpochSet(epochs=epochs, n_classes=epoch_set.n_classes,
                       class_names=list(epoch_set.class_names))
    return reduced, list(selection.selected)
