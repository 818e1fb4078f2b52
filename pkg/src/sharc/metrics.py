"""Retrieval evaluation: rank-k accuracy (CMC) and mean average precision.

Both metrics operate on ranked gallery id lists plus subject labels, so they
are independent of how the scores were produced. A query whose subject never
appears in the gallery has undefined metrics and raises UnmatchableQuery
unless the caller opts into skipping such queries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidInput, UnmatchableQuery

DEFAULT_RANKS = (1, 5, 10, 20)


def _check_inputs(ranked_lists, query_labels, gallery_labels, skip_unmatchable):
    if len(ranked_lists) != len(query_labels):
        raise InvalidInput(
            f"{len(ranked_lists)} ranked lists but {len(query_labels)} query labels"
        )
    matchable = set(gallery_labels.values())
    keep = [i for i, lab in enumerate(query_labels) if lab in matchable]
    if len(keep) != len(query_labels) and not skip_unmatchable:
        missing = [i for i in range(len(query_labels)) if i not in set(keep)]
        raise UnmatchableQuery(
            f"queries with no correct gallery entry: indices {missing}"
        )
    if not keep:
        raise InvalidInput("no matchable queries")
    return keep


def cmc(
    ranked_lists: list[list[str]],
    query_labels: list[str],
    gallery_labels: dict[str, str],
    k: int,
    skip_unmatchable: bool = False,
) -> float:
    """Fraction of queries whose top-k ranked ids contain a correct subject."""
    if k < 1:
        raise InvalidInput(f"k must be positive, got {k}")
    keep = _check_inputs(ranked_lists, query_labels, gallery_labels, skip_unmatchable)
    hits = 0
    for i in keep:
        top = ranked_lists[i][:k]
        if any(gallery_labels[g] == query_labels[i] for g in top):
            hits += 1
    return hits / len(keep)


def average_precision(ranked: list[str], label: str, gallery_labels: dict[str, str]) -> float:
    """Precision averaged over the ranks of the correct entries."""
    correct_ranks = [
        pos + 1 for pos, g in enumerate(ranked) if gallery_labels[g] == label
    ]
    if not correct_ranks:
        raise UnmatchableQuery(f"label {label!r} absent from the ranked list")
    return sum((hit + 1) / rank_pos for hit, rank_pos in enumerate(correct_ranks)) / len(
        correct_ranks
    )


def mean_average_precision(
    ranked_lists: list[list[str]],
    query_labels: list[str],
    gallery_labels: dict[str, str],
    skip_unmatchable: bool = False,
) -> float:
    keep = _check_inputs(ranked_lists, query_labels, gallery_labels, skip_unmatchable)
    aps = [average_precision(ranked_lists[i], query_labels[i], gallery_labels) for i in keep]
    return float(np.mean(aps))


@dataclass
class EvalReport:
    """Rank-k accuracies, mAP, and the per-query APs behind it."""

    rank_k: dict[int, float]
    map_score: float
    per_query_ap: list[float] = field(default_factory=list)

    def lines(self) -> list[str]:
        out = [f"rank_{k}={v!r}" for k, v in sorted(self.rank_k.items())]
        out.append(f"map={self.map_score!r}")
        return out

    def csv_rows(self) -> list[str]:
        header = ",".join([f"rank_{k}" for k in sorted(self.rank_k)] + ["map"])
        values = ",".join(
            [repr(self.rank_k[k]) for k in sorted(self.rank_k)] + [repr(self.map_score)]
        )
        return [header, values]


def evaluate_ranking(
    ranked_lists: list[list[str]],
    query_labels: list[str],
    gallery_labels: dict[str, str],
    ranks: tuple[int, ...] = DEFAULT_RANKS,
    skip_unmatchable: bool = False,
) -> EvalReport:
    keep = _check_inputs(ranked_lists, query_labels, gallery_labels, skip_unmatchable)
    rank_k = {
        k: cmc(ranked_lists, query_labels, gallery_labels, k, skip_unmatchable)
        for k in ranks
    }
    aps = [average_precision(ranked_lists[i], query_labels[i], gallery_labels) for i in keep]
    return EvalReport(rank_k=rank_k, map_score=float(np.mean(aps)), per_query_ap=aps)
