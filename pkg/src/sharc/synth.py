"""Seeded synthetic dataset generator.

Each subject gets a latent body shape, gait parameters, and an appearance
signature, all derived from (dataset seed, subject index). Frames for a
tracklet are drawn from an independent stream keyed by (seed, subject,
tracklet), so generation order does not matter and reruns are byte-identical.

Identity signal is injected into every modality: the latent shape drives the
body-model shape vector and the silhouette width profile, the gait parameters
drive joint trajectories and silhouette sway, and the appearance signature
drives the RGB texture. Clothing is an additive low-dimensional offset on the
appearance pattern plus a multiplicative perturbation of silhouette thickness,
so appearance matching degrades under clothes change while body shape mostly
survives. Noise knobs: silhouette pixel flip rate, keypoint jitter sigma
(also drives viewpoint wobble and body-parameter noise), and the clothing
shift magnitude (also scales a small per-frame texture noise).

Tracklet i of a subject wears clothing variant i mod clothing_variants, so
with tracklets_per_id <= clothing_variants no two tracklets of a subject
share an outfit and any gallery/query split is a clothes-change protocol.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np

from .encoders import (
    SKELETON_JOINTS,
    SilhouetteInput,
    SkeletonFrame,
    SmplParams,
)
from .exceptions import CorruptFile, InvalidInput, ProtocolError
from .gallery import ManifestRow, TrackletRecord, read_manifest, write_manifest
from .prng import SplitMix64, derive_seed

DATA_MAGIC = b"SHRCDAT1"

SIGNATURE_DIM = 6

# section tags inside a SHRCDAT1 frame, in on-disk order
_TAG_MASK = 1
_TAG_RGB = 2
_TAG_SMPL = 3
_TAG_SKELETON = 4
_TAG_APPEARANCE = 5

# canonical 17-joint layout (x, y), y up, unit height torso
_BASE_JOINTS = np.array(
    [
        [0.00, 0.90],  # nose
        [-0.04, 0.95],
        [0.04, 0.95],  # eyes
        [-0.10, 0.90],
        [0.10, 0.90],  # ears
        [-0.25, 0.60],
        [0.25, 0.60],  # shoulders
        [-0.33, 0.33],
        [0.33, 0.33],  # elbows
        [-0.40, 0.08],
        [0.40, 0.08],  # wrists
        [-0.15, 0.00],
        [0.15, 0.00],  # hips
        [-0.17, -0.50],
        [0.17, -0.50],  # knees
        [-0.18, -0.95],
        [0.18, -0.95],  # ankles
    ]
)
_SWING_JOINTS = np.array([7, 8, 9, 10, 13, 14, 15, 16])  # elbows, wrists, knees, ankles
_SWING_SIGN = np.array([1.0, -1.0, 1.0, -1.0, -1.0, 1.0, -1.0, 1.0])


@dataclass(frozen=True)
class IdentityProfile:
    """Per-subject latent factors, deterministic in (seed, subject index)."""

    subject_id: str
    latent_shape: np.ndarray  # (10,)
    gait_phase_params: np.ndarray  # (3,): phase offset, stride frequency, swing amplitude
    appearance_signature: np.ndarray  # (SIGNATURE_DIM,)


@dataclass(frozen=True)
class DatasetSpec:
    num_ids: int
    tracklets_per_id: int
    frames_per_tracklet: int
    clothing_variants: int
    sil_flip_rate: float
    keypoint_jitter: float
    appearance_shift: float
    seed: int
    height: int = 16
    width: int = 16

    def __post_init__(self):
        for name in ("num_ids", "tracklets_per_id", "frames_per_tracklet", "clothing_variants"):
            if getattr(self, name) < 1:
                raise InvalidInput(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 0.0 <= self.sil_flip_rate <= 1.0:
            raise InvalidInput(f"sil_flip_rate must be in [0, 1], got {self.sil_flip_rate}")
        if self.keypoint_jitter < 0.0 or self.appearance_shift < 0.0:
            raise InvalidInput("keypoint_jitter and appearance_shift must be nonnegative")
        if self.height < 4 or self.width < 4:
            raise InvalidInput(f"frame grid must be at least 4x4, got {self.height}x{self.width}")


def subject_label(index: int) -> str:
    return f"s{index:03d}"


def identity_profile(spec: DatasetSpec, subject_index: int) -> IdentityProfile:
    rng = SplitMix64(derive_seed(spec.seed, 1, subject_index))
    latent = rng.uniform_array(-1.0, 1.0, (10,))
    phase = rng.uniform_array(0.0, 1.0, (1,))[0]
    freq = rng.uniform_array(0.6, 1.4, (1,))[0]
    amp = rng.uniform_array(0.05, 0.15, (1,))[0]
    signature = rng.uniform_array(-1.0, 1.0, (SIGNATURE_DIM,))
    return IdentityProfile(
        subject_id=subject_label(subject_index),
        latent_shape=latent,
        gait_phase_params=np.array([phase, freq, amp]),
        appearance_signature=signature,
    )


def _clothing_factors(spec: DatasetSpec, subject_index: int, variant: int):
    """(thickness multiplier, appearance offset vector) for one outfit."""
    rng = SplitMix64(derive_seed(spec.seed, 2, subject_index, variant))
    thickness = 1.0 + 0.2 * rng.uniform_array(-1.0, 1.0, (1,))[0]
    offset = rng.normals(SIGNATURE_DIM)
    return thickness, offset


def _texture_basis(h: int, w: int) -> np.ndarray:
    """(SIGNATURE_DIM, h, w, 3) fixed sinusoidal patterns mixing space and channel."""
    ys = np.linspace(0.0, 1.0, h)[:, None, None]
    xs = np.linspace(0.0, 1.0, w)[None, :, None]
    cs = np.arange(3)[None, None, :]
    basis = []
    for s in range(SIGNATURE_DIM):
        fy, fx = 1 + s % 3, 1 + (s // 2) % 3
        basis.append(np.sin(2 * np.pi * (fy * ys + 0.37 * s)) * np.cos(2 * np.pi * fx * xs) + 0.3 * np.sin(cs + s))
    return np.stack(basis)


def _silhouette_profile(h: int, latent: np.ndarray) -> np.ndarray:
    """Half-width per row in [0, 1] units of the grid width: head, torso, legs."""
    rows = np.arange(h) / h
    width = np.where(rows < 0.2, 0.10, np.where(rows < 0.6, 0.22 + 0.05 * np.tanh(latent[1]), 0.13))
    scale = 1.0 + 0.3 * np.tanh(latent[0])
    return width * scale


def generate_tracklet(spec: DatasetSpec, subject_index: int, tracklet_index: int) -> TrackletRecord:
    """All modality frames for one tracklet, from its own PRNG stream."""
    if not 0 <= subject_index < spec.num_ids:
        raise InvalidInput(f"subject_index {subject_index} out of range [0, {spec.num_ids})")
    if not 0 <= tracklet_index < spec.tracklets_per_id:
        raise InvalidInput(f"tracklet_index {tracklet_index} out of range [0, {spec.tracklets_per_id})")
    profile = identity_profile(spec, subject_index)
    variant = tracklet_index % spec.clothing_variants
    thickness, clothing_offset = _clothing_factors(spec, subject_index, variant)
    rng = SplitMix64(derive_seed(spec.seed, 3, subject_index, tracklet_index))

    h, w = spec.height, spec.width
    basis = _texture_basis(h, w)
    half_width = _silhouette_profile(h, profile.latent_shape) * thickness
    phase0, freq, amp = profile.gait_phase_params
    yaw = spec.keypoint_jitter * rng.uniform_array(-0.5, 0.5, (1,))[0]
    width_mult = 1.0 - 0.2 * abs(np.sin(yaw))

    sils, smpls, skels, apps = [], [], [], []
    t_count = spec.frames_per_tracklet
    for t in range(t_count):
        gait = 2.0 * np.pi * (freq * t / max(t_count, 2) + phase0)
        swing = amp * np.sin(gait)

        # silhouette: column-symmetric body with gait sway, then pixel flips
        rows = np.arange(h) / h
        center = 0.5 * w + swing * w * 0.5 * (1.0 - rows)
        widths = half_width * w * width_mult
        xs = np.arange(w)[None, :]
        mask = (np.abs(xs - center[:, None]) <= widths[:, None]).astype(np.float64)
        if spec.sil_flip_rate > 0.0:
            flips = rng.uniform_array(0.0, 1.0, (h, w)) < spec.sil_flip_rate
            mask = np.where(flips, 1.0 - mask, mask)

        # appearance: signature texture + clothing offset, squashed into (0, 1)
        coeff = profile.appearance_signature + spec.appearance_shift * clothing_offset
        pattern = np.tensordot(coeff, basis, axes=1)
        if spec.appearance_shift > 0.0:
            pattern = pattern + 0.1 * spec.appearance_shift * rng.normals(h * w * 3).reshape(h, w, 3)
        modulation = 1.0 + 0.1 * np.sin(gait)
        appearance = 0.5 + 0.5 * np.tanh(pattern * modulation)

        sils.append(SilhouetteInput(mask=mask, masked_rgb=appearance * mask[:, :, None]))
        apps.append(appearance)

        # body model: latent shape plus gait-driven joint rotations
        cam = np.array([yaw, 0.0, 1.0])
        shape_noise = 0.1 * spec.keypoint_jitter * rng.normals(10)
        rot = np.zeros(72)
        rot[3:27:3] = swing * np.sin(0.5 * np.arange(8))
        rot = rot + 0.1 * spec.keypoint_jitter * rng.normals(72)
        smpls.append(
            SmplParams(camera=cam, shape=profile.latent_shape + shape_noise, joint_rotations=rot)
        )

        # skeleton: scaled canonical joints, limbs swinging in anti-phase
        scale = 1.0 + 0.3 * np.tanh(profile.latent_shape[0])
        joints = _BASE_JOINTS * scale
        joints[:, 0] = joints[:, 0] * width_mult
        joints[_SWING_JOINTS, 0] += swing * _SWING_SIGN
        noise = spec.keypoint_jitter * rng.normals(SKELETON_JOINTS * 2).reshape(SKELETON_JOINTS, 2)
        joints = joints + noise
        conf = np.clip(1.0 - np.linalg.norm(noise, axis=1), 0.0, 1.0)
        skels.append(SkeletonFrame(joints=joints, confidence=conf))

    return TrackletRecord(
        tracklet_id=f"{profile.subject_id}_t{tracklet_index:02d}",
        subject_id=profile.subject_id,
        clothing_id=f"c{variant}",
        silhouettes=sils,
        smpls=smpls,
        skeletons=skels,
        appearance=apps,
    )


def generate_dataset(spec: DatasetSpec) -> list[TrackletRecord]:
    """Every tracklet of every subject, subject-major order."""
    return [
        generate_tracklet(spec, s, t)
        for s in range(spec.num_ids)
        for t in range(spec.tracklets_per_id)
    ]


def split_protocol(records: list, ratio: float, seed: int) -> tuple[list, list]:
    """Per-subject disjoint gallery/query split.

    `ratio` is the gallery fraction; each subject contributes
    clamp(round(ratio * k), 1, k - 1) of its k tracklets to the gallery after a
    seeded shuffle, so every query subject stays represented. Items only need
    `subject_id` and `tracklet_id` attributes (records and manifest rows both
    work).
    """
    if not 0.0 < ratio < 1.0:
        raise InvalidInput(f"ratio must be in (0, 1), got {ratio}")
    by_subject: dict[str, list] = {}
    for r in records:
        by_subject.setdefault(r.subject_id, []).append(r)
    gallery, query = [], []
    for subject in sorted(by_subject):
        items = sorted(by_subject[subject], key=lambda r: r.tracklet_id)
        k = len(items)
        if k < 2:
            raise ProtocolError(f"subject {subject} has {k} tracklet(s), need at least 2 to split")
        rng = SplitMix64(derive_seed(seed, 4, subject))
        for i in range(k - 1, 0, -1):  # Fisher-Yates
            j = int(rng.uniforms(1)[0] * (i + 1))
            items[i], items[j] = items[j], items[i]
        n_gal = min(max(int(round(ratio * k)), 1), k - 1)
        gallery.extend(items[:n_gal])
        query.extend(items[n_gal:])
    return gallery, query


# ---------------------------------------------------------------------------
# SHRCDAT1 container
# ---------------------------------------------------------------------------


def _write_section(f, tag: int, values: np.ndarray) -> None:
    flat = np.asarray(values, dtype="<f4").reshape(-1)
    f.write(struct.pack("<II", tag, flat.size))
    f.write(flat.tobytes())


def write_tracklet_frames(record: TrackletRecord, path) -> None:
    """Serialize one tracklet's frames; all payloads little-endian f32.

    Layout: magic, u32 frame count, u32 height, u32 width, then per frame five
    tagged sections (mask, rgb, body params, skeleton, appearance), each a u32
    tag, u32 float count, payload.
    """
    h, w = record.silhouettes[0].mask.shape
    with open(path, "wb") as f:
        f.write(DATA_MAGIC)
        f.write(struct.pack("<III", len(record), h, w))
        for sil, smpl, skel, app in zip(
            record.silhouettes, record.smpls, record.skeletons, record.appearance
        ):
            _write_section(f, _TAG_MASK, sil.mask)
            _write_section(f, _TAG_RGB, sil.masked_rgb)
            _write_section(f, _TAG_SMPL, smpl.as_vector())
            _write_section(f, _TAG_SKELETON, skel.as_vector())
            _write_section(f, _TAG_APPEARANCE, app)


def read_tracklet_frames(path, tracklet_id: str, subject_id: str, clothing_id: str) -> TrackletRecord:
    """Parse a SHRCDAT1 container back into a tracklet record."""
    with open(path, "rb") as f:
        raw = f.read()
    if raw[: len(DATA_MAGIC)] != DATA_MAGIC:
        raise CorruptFile(f"{path}: bad magic, not a frame container")
    off = len(DATA_MAGIC)

    def take(count: int) -> bytes:
        nonlocal off
        if off + count > len(raw):
            raise CorruptFile(f"{path}: truncated at byte {off}")
        chunk = raw[off : off + count]
        off += count
        return chunk

    n_frames, h, w = struct.unpack("<III", take(12))

    def section(expected_tag: int, expected_count: int) -> np.ndarray:
        tag, count = struct.unpack("<II", take(8))
        if tag != expected_tag or count != expected_count:
            raise CorruptFile(
                f"{path}: expected section {expected_tag} with {expected_count} floats, "
                f"got tag {tag} with {count}"
            )
        return np.frombuffer(take(4 * count), dtype="<f4").astype(np.float64)

    sils, smpls, skels, apps = [], [], [], []
    for _ in range(n_frames):
        mask = section(_TAG_MASK, h * w).reshape(h, w)
        rgb = section(_TAG_RGB, h * w * 3).reshape(h, w, 3)
        smpl_vec = section(_TAG_SMPL, 85)
        skel_vec = section(_TAG_SKELETON, SKELETON_JOINTS * 3)
        app = section(_TAG_APPEARANCE, h * w * 3).reshape(h, w, 3)
        sils.append(SilhouetteInput(mask=mask, masked_rgb=rgb))
        smpls.append(SmplParams(camera=smpl_vec[:3], shape=smpl_vec[3:13], joint_rotations=smpl_vec[13:]))
        skels.append(
            SkeletonFrame(
                joints=skel_vec[: SKELETON_JOINTS * 2].reshape(SKELETON_JOINTS, 2),
                confidence=skel_vec[SKELETON_JOINTS * 2 :],
            )
        )
        apps.append(app)
    if off != len(raw):
        raise CorruptFile(f"{path}: {len(raw) - off} trailing bytes")
    return TrackletRecord(
        tracklet_id=tracklet_id,
        subject_id=subject_id,
        clothing_id=clothing_id,
        silhouettes=sils,
        smpls=smpls,
        skeletons=skels,
        appearance=apps,
    )


def write_dataset(records: list[TrackletRecord], out_dir) -> str:
    """Write frame containers plus the manifest; returns the manifest path.

    frames_path entries are relative to the manifest's directory.
    """
    frames_dir = os.path.join(out_dir, "frames")
    os.makedirs(frames_dir, exist_ok=True)
    rows = []
    for rec in records:
        rel = os.path.join("frames", f"{rec.tracklet_id}.dat")
        write_tracklet_frames(rec, os.path.join(out_dir, rel))
        rows.append(
            ManifestRow(
                tracklet_id=rec.tracklet_id,
                subject_id=rec.subject_id,
                clothing_id=rec.clothing_id,
                frames_path=rel,
            )
        )
    manifest_path = os.path.join(out_dir, "manifest.csv")
    write_manifest(rows, manifest_path)
    return manifest_path


def load_dataset(manifest_path) -> list[TrackletRecord]:
    """Read every tracklet named by a manifest; paths resolve against it."""
    base = os.path.dirname(os.path.abspath(manifest_path))
    records = []
    for row in read_manifest(manifest_path):
        path = os.path.join(base, row.frames_path)
        if not os.path.exists(path):
            raise CorruptFile(f"{manifest_path}: missing frame container {row.frames_path}")
        records.append(
            read_tracklet_frames(path, row.tracklet_id, row.subject_id, row.clothing_id)
        )
    return records
