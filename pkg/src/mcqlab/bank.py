"""Pooled-template multiple-choice item banks.

Items are assembled from per-header answer pools: every header owns a pool
of correct statements and a pool of incorrect statements (distractors).  A
plain item draws one correct answer plus a truncated-Poisson number of
distractors; special items carry a "None of the above" / "All of the above"
option that is always placed fourth and last, and that can itself be the
correct answer (``*_PLUS``) or a distractor (``*_MINUS``).
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.special import gammaln

from ._validation import as_generator

NOTA_TEXT = "None of the above"
AOTA_TEXT = "All of the above"

#: Number of listed (non-special) options in a NOTA/AOTA item.
SPECIAL_LISTED = 3
#: Index of the special option ("fourth and last").
SPECIAL_INDEX = 3


class PoolExhaustedError(ValueError):
    """An answer pool is smaller than the number of draws requested."""


class ItemKind(str, Enum):
    PLAIN = "PLAIN"
    NOTA_PLUS = "NOTA_PLUS"
    NOTA_MINUS = "NOTA_MINUS"
    AOTA_PLUS = "AOTA_PLUS"
    AOTA_MINUS = "AOTA_MINUS"

    @property
    def is_special(self) -> bool:
        return self is not ItemKind.PLAIN

    @property
    def special_is_correct(self) -> bool:
        return self in (ItemKind.NOTA_PLUS, ItemKind.AOTA_PLUS)

    @property
    def special_text(self) -> str | None:
        if self in (ItemKind.NOTA_PLUS, ItemKind.NOTA_MINUS):
            return NOTA_TEXT
        if self in (ItemKind.AOTA_PLUS, ItemKind.AOTA_MINUS):
            return AOTA_TEXT
        return None


KIND_ORDER = tuple(ItemKind)


@dataclass(frozen=True)
class HeaderTemplate:
    """A shared question stem plus its answer pools.

    ``correct_pool`` needs at least three entries (an all-of-the-above item
    lists three correct statements) and ``distractor_pool`` at least seven
    (the largest supported distractor count).  The two pools must be
    disjoint and must not contain the special option texts.
    """

    header_id: int
    stem_text: str
    correct_pool: tuple[str, ...]
    distractor_pool: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "correct_pool", tuple(self.correct_pool))
        object.__setattr__(self, "distractor_pool", tuple(self.distractor_pool))
        if len(self.correct_pool) < 3:
            raise ValueError(
                f"header {self.header_id}: correct_pool needs >= 3 entries, "
                f"got {len(self.correct_pool)}"
            )
        if len(self.distractor_pool) < 7:
            raise ValueError(
                f"header {self.header_id}: distractor_pool needs >= 7 entries, "
                f"got {len(self.distractor_pool)}"
            )
        for name, pool in (("correct_pool", self.correct_pool),
                           ("distractor_pool", self.distractor_pool)):
            if len(set(pool)) != len(pool):
                raise ValueError(f"header {self.header_id}: duplicate texts in {name}")
        overlap = set(self.correct_pool) & set(self.distractor_pool)
        if overlap:
            raise ValueError(
                f"header {self.header_id}: pools are not disjoint: {sorted(overlap)[:3]}"
            )
        reserved = {NOTA_TEXT, AOTA_TEXT}
        if reserved & (set(self.correct_pool) | set(self.distractor_pool)):
            raise ValueError(
                f"header {self.header_id}: pools must not contain the special "
                f"option texts {sorted(reserved)}"
            )


@dataclass(frozen=True)
class Item:
    """One multiple-choice item.

    ``n_distractors`` is always ``len(options) - 1``; special-kind items
    have exactly four options with the special text at index 3.
    """

    item_id: int
    header_id: int
    options: tuple[str, ...]
    correct_index: int
    kind: ItemKind
    n_distractors: int

    def __post_init__(self):
        object.__setattr__(self, "options", tuple(self.options))
        object.__setattr__(self, "kind", ItemKind(self.kind))
        validate_item(self)

    @property
    def n_options(self) -> int:
        return len(self.options)


def validate_item(item: Item) -> None:
    """Check every structural invariant of ``item``; raise ValueError on the first violation."""
    opts = item.options
    if len(set(opts)) != len(opts):
        raise ValueError(f"item {item.item_id}: duplicate option texts")
    if not 0 <= item.correct_index < len(opts):
        raise ValueError(
            f"item {item.item_id}: correct_index {item.correct_index} out of range"
        )
    if item.n_distractors != len(opts) - 1:
        raise ValueError(
            f"item {item.item_id}: n_distractors {item.n_distractors} != "
            f"{len(opts) - 1} (option count - 1)"
        )
    kind = item.kind
    if kind is ItemKind.PLAIN:
        if not 1 <= item.n_distractors <= 7:
            raise ValueError(
                f"item {item.item_id}: plain items need 1..7 distractors, "
                f"got {item.n_distractors}"
            )
        if NOTA_TEXT in opts or AOTA_TEXT in opts:
            raise ValueError(f"item {item.item_id}: plain item carries a special option")
    else:
        if len(opts) != 4:
            raise ValueError(f"item {item.item_id}: {kind.value} items need 4 options")
        if opts[SPECIAL_INDEX] != kind.special_text:
            raise ValueError(
                f"item {item.item_id}: option 4 must be {kind.special_text!r}"
            )
        if kind.special_is_correct and item.correct_index != SPECIAL_INDEX:
            raise ValueError(
                f"item {item.item_id}: {kind.value} requires correct_index 3"
            )
        if not kind.special_is_correct and item.correct_index >= SPECIAL_INDEX:
            raise ValueError(
                f"item {item.item_id}: {kind.value} requires correct_index < 3"
            )


def make_item(item_id: int, header_id: int, options: Sequence[str],
              correct_index: int, kind: ItemKind | str = ItemKind.PLAIN) -> Item:
    """Build a hand-specified item (validated); counterpart to pool assembly."""
    options = tuple(options)
    return Item(
        item_id=item_id,
        header_id=header_id,
        options=options,
        correct_index=int(correct_index),
        kind=ItemKind(kind),
        n_distractors=len(options) - 1,
    )


@dataclass(frozen=True)
class BankSpec:
    """Generation parameters for one bank."""

    items_per_header: int
    kind_weights: Mapping[ItemKind, float]
    poisson_lambda: float = 4.0
    distractor_min: int = 1
    distractor_max: int = 7
    seed: int = 0

    def __post_init__(self):
        weights = {ItemKind(k): float(v) for k, v in self.kind_weights.items()}
        object.__setattr__(self, "kind_weights", weights)
        if self.items_per_header < 1:
            raise ValueError("items_per_header must be >= 1")
        if any(v < 0 for v in weights.values()):
            raise ValueError("kind_weights must be nonnegative")
        total = sum(weights.values())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"kind_weights must sum to 1, got {total!r}")
        if not 1 <= self.distractor_min <= self.distractor_max <= 7:
            raise ValueError(
                f"need 1 <= distractor_min <= distractor_max <= 7, got "
                f"[{self.distractor_min}, {self.distractor_max}]"
            )
        if not self.poisson_lambda > 0:
            raise ValueError("poisson_lambda must be positive")

    def weight_vector(self) -> np.ndarray:
        return np.array([self.kind_weights.get(k, 0.0) for k in KIND_ORDER])


def truncated_poisson_pmf(lam: float, lo: int, hi: int) -> np.ndarray:
    """Poisson(lam) pmf restricted to ``lo..hi`` and renormalized."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if not 1 <= lo <= hi:
        raise ValueError(f"need 1 <= lo <= hi, got [{lo}, {hi}]")
    k = np.arange(lo, hi + 1)
    logpmf = k * np.log(lam) - lam - gammaln(k + 1)
    pmf = np.exp(logpmf - logpmf.max())
    return pmf / pmf.sum()


def sample_distractor_counts(lam: float, lo: int, hi: int, size: int,
                             rng=None) -> np.ndarray:
    """Draw ``size`` distractor counts from the truncated Poisson by inverse CDF."""
    rng = as_generator(rng)
    cdf = np.cumsum(truncated_poisson_pmf(lam, lo, hi))
    u = rng.random(size)
    return lo + np.searchsorted(cdf, u, side="right").clip(max=hi - lo)


def sample_distractor_count(lam: float, lo: int, hi: int, rng=None) -> int:
    return int(sample_distractor_counts(lam, lo, hi, 1, rng)[0])


def _draw(pool: Sequence[str], n: int, rng: np.random.Generator) -> list[str]:
    """Sample ``n`` texts without replacement."""
    if n > len(pool):
        raise PoolExhaustedError(
            f"cannot draw {n} options from a pool of {len(pool)}"
        )
    idx = rng.choice(len(pool), size=n, replace=False)
    return [pool[i] for i in idx]


def assemble_item(header: HeaderTemplate, kind: ItemKind | str,
                  n_distractors: int = 0, rng=None, item_id: int = 0) -> Item:
    """Assemble one item from a header's pools.

    Plain items use ``n_distractors`` draws from the distractor pool plus a
    single correct answer, in shuffled order.  Special kinds ignore
    ``n_distractors``: they list three options (shuffled) and append the
    special text as the fourth.
    """
    rng = as_generator(rng)
    kind = ItemKind(kind)

    if kind is ItemKind.PLAIN:
        if not 1 <= n_distractors <= 7:
            raise ValueError(
                f"plain items need n_distractors in 1..7, got {n_distractors}"
            )
        correct = _draw(header.correct_pool, 1, rng)[0]
        options = [correct] + _draw(header.distractor_pool, n_distractors, rng)
        order = rng.permutation(len(options))
        options = [options[i] for i in order]
        correct_index = options.index(correct)
    elif kind is ItemKind.AOTA_PLUS:
        listed = _draw(header.correct_pool, SPECIAL_LISTED, rng)
        options = [listed[i] for i in rng.permutation(SPECIAL_LISTED)]
        options.append(AOTA_TEXT)
        correct_index = SPECIAL_INDEX
    elif kind is ItemKind.NOTA_PLUS:
        listed = _draw(header.distractor_pool, SPECIAL_LISTED, rng)
        options = [listed[i] for i in rng.permutation(SPECIAL_LISTED)]
        options.append(NOTA_TEXT)
        correct_index = SPECIAL_INDEX
    else:
        # NOTA-/AOTA-: one correct statement among the listed three, the
        # special option is a distractor.
        correct = _draw(header.correct_pool, 1, rng)[0]
        listed = [correct] + _draw(header.distractor_pool, SPECIAL_LISTED - 1, rng)
        order = rng.permutation(SPECIAL_LISTED)
        listed = [listed[i] for i in order]
        options = listed + [kind.special_text]
        correct_index = listed.index(correct)

    return Item(
        item_id=item_id,
        header_id=header.header_id,
        options=tuple(options),
        correct_index=correct_index,
        kind=kind,
        n_distractors=len(options) - 1,
    )


@dataclass
class BankManifest:
    """Tallies of a generated bank.

    ``plain_by_n_distractors`` counts plain items by distractor count;
    ``four_option_by_kind`` counts the four-option subset by kind (plain
    three-distractor items included), the layout used for option-type
    analyses.
    """

    n_items: int = 0
    by_header: dict = field(default_factory=dict)
    by_kind: dict = field(default_factory=dict)
    plain_by_n_distractors: dict = field(default_factory=dict)
    four_option_by_kind: dict = field(default_factory=dict)

    @classmethod
    def from_items(cls, items: Sequence[Item]) -> "BankManifest":
        by_header = Counter(it.header_id for it in items)
        by_kind = Counter(it.kind.value for it in items)
        plain = Counter(
            it.n_distractors for it in items if it.kind is ItemKind.PLAIN
        )
        four_opt = Counter(
            it.kind.value for it in items if it.n_options == 4
        )
        return cls(
            n_items=len(items),
            by_header={int(k): by_header[k] for k in sorted(by_header)},
            by_kind={k: by_kind[k] for k in sorted(by_kind)},
            plain_by_n_distractors={int(k): plain[k] for k in sorted(plain)},
            four_option_by_kind={k: four_opt[k] for k in sorted(four_opt)},
        )

    def to_dict(self) -> dict:
        return {
            "n_items": self.n_items,
            "by_header": {str(k): v for k, v in self.by_header.items()},
            "by_kind": dict(self.by_kind),
            "plain_by_n_distractors": {
                str(k): v for k, v in self.plain_by_n_distractors.items()
            },
            "four_option_by_kind": dict(self.four_option_by_kind),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BankManifest":
        return cls(
            n_items=d["n_items"],
            by_header={int(k): v for k, v in d["by_header"].items()},
            by_kind=dict(d["by_kind"]),
            plain_by_n_distractors={
                int(k): v for k, v in d["plain_by_n_distractors"].items()
            },
            four_option_by_kind=dict(d["four_option_by_kind"]),
        )


def generate_bank(spec: BankSpec, headers: Sequence[HeaderTemplate]):
    """Generate ``items_per_header`` items for every header.

    Returns ``(items, manifest)``.  Each header's items are produced from a
    seed derived from ``(spec.seed, header position)``, so the result does
    not depend on whether headers are processed sequentially or in
    parallel, and is byte-for-byte reproducible for a fixed spec.
    """
    if not headers:
        raise ValueError("generate_bank needs at least one header")
    seen = set()
    for h in headers:
        if h.header_id in seen:
            raise ValueError(f"duplicate header_id {h.header_id}")
        seen.add(h.header_id)

    weights = spec.weight_vector()
    children = np.random.SeedSequence(spec.seed).spawn(len(headers))
    items: list[Item] = []
    next_id = 0
    for header, child in zip(headers, children):
        rng = np.random.default_rng(child)
        kind_idx = rng.choice(len(KIND_ORDER), size=spec.items_per_header, p=weights)
        for ki in kind_idx:
            kind = KIND_ORDER[ki]
            if kind is ItemKind.PLAIN:
                k = sample_distractor_count(
                    spec.poisson_lambda, spec.distractor_min, spec.distractor_max, rng
                )
            else:
                k = SPECIAL_LISTED
            try:
                item = assemble_item(header, kind, k, rng, item_id=next_id)
            except PoolExhaustedError as exc:
                raise PoolExhaustedError(
                    f"header {header.header_id}, item {next_id} ({kind.value}): {exc}"
                ) from exc
            items.append(item)
            next_id += 1
    return items, BankManifest.from_items(items)


# ---------------------------------------------------------------------------
# JSON persistence (schemas documented in the README)

def load_headers(path) -> list[HeaderTemplate]:
    """Read header templates from a JSON array of
    ``{header_id, stem_text, correct_pool[], distractor_pool[]}``."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, list):
        raise ValueError(f"{path}: expected a JSON array of header objects")
    return [
        HeaderTemplate(
            header_id=int(h["header_id"]),
            stem_text=str(h["stem_text"]),
            correct_pool=tuple(h["correct_pool"]),
            distractor_pool=tuple(h["distractor_pool"]),
        )
        for h in raw
    ]


def save_headers(path, headers: Sequence[HeaderTemplate]) -> None:
    payload = [
        {
            "header_id": h.header_id,
            "stem_text": h.stem_text,
            "correct_pool": list(h.correct_pool),
            "distractor_pool": list(h.distractor_pool),
        }
        for h in headers
    ]
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def save_bank(path, items: Sequence[Item], manifest: BankManifest) -> None:
    payload = {
        "schema_version": 1,
        "items": [
            {
                "item_id": it.item_id,
                "header_id": it.header_id,
                "options": list(it.options),
                "correct_index": it.correct_index,
                "kind": it.kind.value,
                "n_distractors": it.n_distractors,
            }
            for it in items
        ],
        "manifest": manifest.to_dict(),
    }
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_bank(path):
    """Read a bank JSON file; every item is re-validated on load."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    items = [
        Item(
            item_id=int(d["item_id"]),
            header_id=int(d["header_id"]),
            options=tuple(d["options"]),
            correct_index=int(d["correct_index"]),
            kind=ItemKind(d["kind"]),
            n_distractors=int(d["n_distractors"]),
        )
        for d in raw["items"]
    ]
    return items, BankManifest.from_dict(raw["manifest"])
