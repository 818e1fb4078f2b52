"""Command-line entry point.

Commands: synth, enroll, query, evaluate, ablate-gamma, ablate-alpha,
train-toy. Every command takes --config (key=value file, see config module),
plus optional --threads and --out; --out defaults to the data_dir named in
the config, so a config-only session reads and writes one directory. Outputs
are deterministic given the seeds in the config; every generated table starts
with a `#` comment naming the tool version and the hash of the resolved
config. Exit codes: 0 success, 2 missing input file, 3 invalid configuration.

Ablation switches zero out the corresponding modality input (rather than
removing the encoder), so the model topology never changes between runs.
"""

from __future__ import annotations

import argparse
import errno
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .config import RunConfig, build_appearance_model, build_shape_model, parse_config
from .encoders import (
    SKELETON_JOINTS,
    EncoderParams,
    SilhouetteInput,
    SkeletonFrame,
    SmplParams,
    save_encoder,
)
from .exceptions import ConfigError, CorruptFile, ProtocolError
from .gallery import (
    AppearanceModel,
    GalleryIndex,
    TrackletRecord,
    load_index,
    read_manifest,
    register,
    save_index,
    tracklet_embeddings,
    write_manifest,
)
from .losses import make_toy_dataset, train_toy
from .matcher import ScoreMatrix, appearance_scores, fuse_scores, rank, shape_scores
from .metrics import evaluate_ranking
from .prng import derive_seed
from .shape import ShapeModel
from .synth import generate_dataset, load_dataset, split_protocol, write_dataset

GAMMA_SWEEP = (1.0, 0.2, 0.1, 0.0)
ALPHA_SWEEP = (0.05, 0.1, 0.2, 0.3, 0.4)


def _comment(cfg: RunConfig) -> str:
    return f"sharc {__version__} config={cfg.hash()}"


def _require_file(path: str) -> None:
    if not os.path.exists(path):
        raise FileNotFoundError(errno.ENOENT, "missing file", path)


def _zero_drops(record: TrackletRecord, cfg: RunConfig) -> TrackletRecord:
    """Apply modality ablations by zeroing the dropped inputs."""
    ab = cfg.ablation
    if not (ab.drop_silhouette or ab.drop_smpl or ab.drop_skeleton):
        return record
    sils, smpls, skels = record.silhouettes, record.smpls, record.skeletons
    if ab.drop_silhouette:
        h, w = record.silhouettes[0].mask.shape
        blank = SilhouetteInput(mask=np.zeros((h, w)), masked_rgb=np.zeros((h, w, 3)))
        sils = [blank] * len(record)
    if ab.drop_smpl:
        zero = SmplParams(camera=np.zeros(3), shape=np.zeros(10), joint_rotations=np.zeros(72))
        smpls = [zero] * len(record)
    if ab.drop_skeleton:
        still = SkeletonFrame(joints=np.zeros((SKELETON_JOINTS, 2)), confidence=np.zeros(SKELETON_JOINTS))
        skels = [still] * len(record)
    return TrackletRecord(
        tracklet_id=record.tracklet_id,
        subject_id=record.subject_id,
        clothing_id=record.clothing_id,
        silhouettes=sils,
        smpls=smpls,
        skeletons=skels,
        appearance=record.appearance,
    )


def _load_records(manifest_path: str, cfg: RunConfig) -> list[TrackletRecord]:
    _require_file(manifest_path)
    return [_zero_drops(r, cfg) for r in load_dataset(manifest_path)]


def _embed_all(
    records: list[TrackletRecord],
    shape_model: ShapeModel,
    appearance_model: AppearanceModel,
    threads: int,
) -> list[tuple[str, np.ndarray, np.ndarray]]:
    """(tracklet_id, shape vector, appearance vector) per record, input order."""

    def one(rec: TrackletRecord):
        sv, av = tracklet_embeddings(rec, shape_model, appearance_model)
        return rec.tracklet_id, sv, av

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, records))
    return [one(r) for r in records]


def _score_queries(
    embs: list[tuple[str, np.ndarray, np.ndarray]], index: GalleryIndex, cfg: RunConfig
) -> tuple[ScoreMatrix, ScoreMatrix, ScoreMatrix]:
    s_shape = shape_scores([(tid, sv) for tid, sv, _ in embs], index)
    s_app = appearance_scores(
        [(tid, av) for tid, _, av in embs], index, rescale=cfg.model.rescale_appearance
    )
    fused = fuse_scores(s_shape, s_app, cfg.model.alpha)
    return s_shape, s_app, fused


def _rank1(fused: ScoreMatrix, subject_of: dict[str, str]) -> float:
    ranked = rank(fused)
    labels = [subject_of[q] for q in fused.query_ids]
    gallery_labels = {g: g for g in fused.gallery_ids}
    report = evaluate_ranking(ranked, labels, gallery_labels, ranks=(1,))
    return report.rank_k[1]


def _write_table(path: str, comment: str, header: str, rows: list[str]) -> None:
    with open(path, "w") as f:
        f.write(f"# {comment}\n{header}\n")
        for row in rows:
            f.write(row + "\n")


def cmd_synth(cfg: RunConfig, out: str, threads: int) -> int:
    records = generate_dataset(cfg.dataset)
    manifest_path = write_dataset(records, out)
    rows = read_manifest(manifest_path)
    write_manifest(rows, manifest_path, _comment(cfg))
    gallery, query = split_protocol(rows, cfg.protocol.gallery_ratio, cfg.protocol.split_seed)
    write_manifest(gallery, os.path.join(out, "gallery.csv"), _comment(cfg))
    write_manifest(query, os.path.join(out, "query.csv"), _comment(cfg))
    print(f"wrote {len(records)} tracklets, {len(gallery)} gallery / {len(query)} query")
    return 0


def cmd_enroll(cfg: RunConfig, out: str, threads: int) -> int:
    records = _load_records(os.path.join(cfg.data_dir, "gallery.csv"), cfg)
    index = register(
        records,
        build_shape_model(cfg),
        build_appearance_model(cfg),
        centroid=cfg.ablation.centroid,
        threads=threads,
    )
    save_index(index, os.path.join(out, "index.shrc"))
    print(f"registered {len(records)} tracklets into {len(index)} entries")
    return 0


def cmd_query(cfg: RunConfig, out: str, threads: int) -> int:
    index_path = os.path.join(out, "index.shrc")
    _require_file(index_path)
    index = load_index(index_path)
    records = _load_records(os.path.join(cfg.data_dir, "query.csv"), cfg)
    embs = _embed_all(records, build_shape_model(cfg), build_appearance_model(cfg), threads)
    s_shape, s_app, fused = _score_queries(embs, index, cfg)
    s_shape.write_csv(os.path.join(out, "scores_shape.csv"), _comment(cfg))
    s_app.write_csv(os.path.join(out, "scores_appearance.csv"), _comment(cfg))
    fused.write_csv(os.path.join(out, "scores_fused.csv"), _comment(cfg))
    print(f"scored {len(records)} queries against {len(fused.gallery_ids)} subjects")
    return 0


def cmd_evaluate(cfg: RunConfig, out: str, threads: int) -> int:
    fused_path = os.path.join(out, "scores_fused.csv")
    query_path = os.path.join(cfg.data_dir, "query.csv")
    _require_file(fused_path)
    _require_file(query_path)
    fused = ScoreMatrix.read_csv(fused_path)
    subject_of = {r.tracklet_id: r.subject_id for r in read_manifest(query_path)}
    ranked = rank(fused)
    report = evaluate_ranking(
        ranked,
        [subject_of[q] for q in fused.query_ids],
        {g: g for g in fused.gallery_ids},
    )
    with open(os.path.join(out, "report.txt"), "w") as f:
        f.write(f"# {_comment(cfg)}\n")
        for line in report.lines():
            f.write(line + "\n")
    table = report.csv_rows()
    _write_table(os.path.join(out, "report.csv"), _comment(cfg), table[0], table[1:])
    for line in report.lines():
        print(line)
    return 0


def cmd_ablate_gamma(cfg: RunConfig, out: str, threads: int) -> int:
    gallery = _load_records(os.path.join(cfg.data_dir, "gallery.csv"), cfg)
    queries = _load_records(os.path.join(cfg.data_dir, "query.csv"), cfg)
    subject_of = {r.tracklet_id: r.subject_id for r in queries}
    shape_model = build_shape_model(cfg)
    rows = []
    for gamma in GAMMA_SWEEP:
        app_model = build_appearance_model(cfg, gamma=gamma)
        index = register(gallery, shape_model, app_model, centroid=cfg.ablation.centroid, threads=threads)
        embs = _embed_all(queries, shape_model, app_model, threads)
        _, _, fused = _score_queries(embs, index, cfg)
        rows.append(f"{gamma!r},{_rank1(fused, subject_of)!r}")
    _write_table(os.path.join(out, "ablate_gamma.csv"), _comment(cfg), "gamma,rank1", rows)
    print("\n".join(["gamma,rank1"] + rows))
    return 0


def cmd_ablate_alpha(cfg: RunConfig, out: str, threads: int) -> int:
    gallery = _load_records(os.path.join(cfg.data_dir, "gallery.csv"), cfg)
    queries = _load_records(os.path.join(cfg.data_dir, "query.csv"), cfg)
    subject_of = {r.tracklet_id: r.subject_id for r in queries}
    shape_model = build_shape_model(cfg)
    app_model = build_appearance_model(cfg)
    index = register(gallery, shape_model, app_model, centroid=cfg.ablation.centroid, threads=threads)
    embs = _embed_all(queries, shape_model, app_model, threads)
    s_shape, s_app, _ = _score_queries(embs, index, cfg)
    rows = []
    for alpha in ALPHA_SWEEP:
        fused = fuse_scores(s_shape, s_app, alpha)
        rows.append(f"{alpha!r},{_rank1(fused, subject_of)!r}")
    _write_table(os.path.join(out, "ablate_alpha.csv"), _comment(cfg), "alpha,rank1", rows)
    print("\n".join(["alpha,rank1"] + rows))
    return 0


def cmd_train_toy(cfg: RunConfig, out: str, threads: int) -> int:
    t = cfg.train
    dataset = make_toy_dataset(t.num_ids, t.samples_per_id, t.input_dim, t.noise, t.data_seed)
    params = EncoderParams.initialize(
        (t.input_dim, t.hidden_dim, t.embed_dim), derive_seed(t.seed, 1)
    )
    result = train_toy(params, dataset, t.objective, t.steps, t.lr, derive_seed(t.seed, 2))
    _write_table(
        os.path.join(out, "loss_trace.csv"),
        _comment(cfg),
        "step,loss",
        [f"{i},{loss!r}" for i, loss in enumerate(result.trace)],
    )
    save_encoder(result.params, os.path.join(out, "trained_encoder.shrcenc"))
    print(f"objective={t.objective} initial={result.trace[0]!r} final={result.trace[-1]!r}")
    return 0


_COMMANDS = {
    "synth": (cmd_synth, "generate the synthetic dataset and its gallery/query split"),
    "enroll": (cmd_enroll, "embed gallery tracklets and save the index"),
    "query": (cmd_query, "score query tracklets against a saved index"),
    "evaluate": (cmd_evaluate, "compute CMC/mAP from saved fused scores"),
    "ablate-gamma": (cmd_ablate_gamma, "rank-1 sweep over the flattening exponent"),
    "ablate-alpha": (cmd_ablate_alpha, "rank-1 sweep over the fusion weight"),
    "train-toy": (cmd_train_toy, "fit a small encoder with the training objectives"),
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sharc", description="multimodal person identification pipeline"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (fn, help_text) in _COMMANDS.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True, help="key=value config file")
        sp.add_argument("--threads", type=int, default=1, help="worker cap for embedding")
        sp.add_argument("--out", default=None, help="output directory (default: data_dir from config)")
        sp.set_defaults(fn=fn)
    args = parser.parse_args(argv)

    if not os.path.exists(args.config):
        print(f"error: missing file: {args.config}", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return 3
    out = args.out if args.out is not None else cfg.data_dir
    os.makedirs(out, exist_ok=True)
    try:
        return args.fn(cfg, out, max(args.threads, 1))
    except FileNotFoundError as exc:
        print(f"error: missing file: {exc.filename or exc}", file=sys.stderr)
        return 2
    except CorruptFile as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ProtocolError) as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
