"""Query-to-gallery scoring, weighted fusion, and ranked candidate lists.

Shape embeddings are compared by cosine similarity, appearance embeddings by
Euclidean distance. The two live on different scales, so before fusion the
appearance distances are negated and min-max rescaled to [0, 1] per query row
(an all-equal row maps to 0.5 everywhere); the raw negated-distance scale is
kept behind a flag. Fusion is the entrywise weighted average
alpha * shape + (1 - alpha) * appearance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import cosine_similarity, euclidean_distance
from .exceptions import AlignmentError, InvalidInput
from .gallery import GalleryIndex


@dataclass
class ScoreMatrix:
    """Queries x gallery-subjects score table with its id axes."""

    scores: np.ndarray  # (Q, G) float64
    query_ids: list[str]
    gallery_ids: list[str]

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64)
        if s.ndim != 2:
            raise InvalidInput(f"scores must be 2-D, got shape {s.shape}")
        if s.shape != (len(self.query_ids), len(self.gallery_ids)):
            raise InvalidInput(
                f"scores shape {s.shape} does not match {len(self.query_ids)} queries x "
                f"{len(self.gallery_ids)} gallery ids"
            )
        if not np.all(np.isfinite(s)):
            raise InvalidInput("scores contain non-finite entries")
        self.scores = s

    def write_csv(self, path, header_comment: str | None = None) -> None:
        """Comma-separated export: gallery ids as header, one row per query."""
        with open(path, "w", newline="") as f:
            if header_comment is not None:
                f.write(f"# {header_comment}\n")
            f.write("query_id," + ",".join(self.gallery_ids) + "\n")
            for qid, row in zip(self.query_ids, self.scores):
                # repr of a python float round-trips exactly; numpy scalars do not
                f.write(qid + "," + ",".join(repr(float(x)) for x in row) + "\n")

    @classmethod
    def read_csv(cls, path) -> "ScoreMatrix":
        query_ids, rows = [], []
        gallery_ids = None
        with open(path, "r") as f:
            for line in f:
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                cells = line.split(",")
                if gallery_ids is None:
                    if cells[0] != "query_id":
                        raise InvalidInput(f"{path}: expected query_id header")
                    gallery_ids = cells[1:]
                    continue
                query_ids.append(cells[0])
                rows.append([float(x) for x in cells[1:]])
        if gallery_ids is None:
            raise InvalidInput(f"{path}: empty score file")
        return cls(scores=np.array(rows, dtype=np.float64), query_ids=query_ids, gallery_ids=gallery_ids)


def _per_subject(index: GalleryIndex) -> tuple[list[str], list[list[int]]]:
    """Gallery subject ids in first-seen order, with their entry indices."""
    order: dict[str, list[int]] = {}
    for i, e in enumerate(index.entries):
        order.setdefault(e.subject_id, []).append(i)
    return list(order), list(order.values())


def shape_scores(queries: list[tuple[str, np.ndarray]], index: GalleryIndex) -> ScoreMatrix:
    """Cosine similarity of each query shape embedding against each subject.

    A subject with several index entries (per-tracklet mode) scores as the max
    over its entries.
    """
    subjects, entry_idx = _per_subject(index)
    scores = np.empty((len(queries), len(subjects)))
    for qi, (_, q) in enumerate(queries):
        for gi, idxs in enumerate(entry_idx):
            scores[qi, gi] = max(cosine_similarity(q, index.entries[i].shape) for i in idxs)
    return ScoreMatrix(scores=scores, query_ids=[qid for qid, _ in queries], gallery_ids=subjects)


def appearance_scores(
    queries: list[tuple[str, np.ndarray]], index: GalleryIndex, rescale: bool = True
) -> ScoreMatrix:
    """Euclidean-distance scores per subject, as similarities.

    Distances are negated (per-tracklet mode keeps the smallest distance per
    subject) and, unless rescale=False, min-max normalized to [0, 1] within
    each query row; a degenerate all-equal row becomes 0.5 everywhere.
    """
    subjects, entry_idx = _per_subject(index)
    sims = np.empty((len(queries), len(subjects)))
    for qi, (_, q) in enumerate(queries):
        for gi, idxs in enumerate(entry_idx):
            sims[qi, gi] = max(
                -euclidean_distance(q, index.entries[i].appearance) for i in idxs
            )
    if rescale:
        lo = sims.min(axis=1, keepdims=True)
        hi = sims.max(axis=1, keepdims=True)
        span = hi - lo
        flat = span[:, 0] == 0.0
        span[flat] = 1.0
        sims = (sims - lo) / span
        sims[flat] = 0.5
    return ScoreMatrix(scores=sims, query_ids=[qid for qid, _ in queries], gallery_ids=subjects)


def fuse_scores(s_shape: ScoreMatrix, s_app: ScoreMatrix, alpha: float) -> ScoreMatrix:
    """Weighted average alpha * shape + (1 - alpha) * appearance, entrywise."""
    if not (0.0 <= alpha <= 1.0):
        raise InvalidInput(f"alpha must be in [0, 1], got {alpha}")
    if s_shape.query_ids != s_app.query_ids or s_shape.gallery_ids != s_app.gallery_ids:
        raise AlignmentError("score matrices disagree on query/gallery id order")
    fused = alpha * s_shape.scores + (1.0 - alpha) * s_app.scores
    return ScoreMatrix(scores=fused, query_ids=list(s_shape.query_ids), gallery_ids=list(s_shape.gallery_ids))


def rank(scores: ScoreMatrix) -> list[list[str]]:
    """Descending-score gallery id list per query; ties break by ascending id."""
    ids = np.array(scores.gallery_ids)
    out = []
    for row in scores.scores:
        # lexsort: last key is primary, so sort by -score then id
        order = np.lexsort((ids, -row))
        out.append([scores.gallery_ids[j] for j in order])
    return out
