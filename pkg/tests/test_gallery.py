import numpy as np
import pytest

from sharc.appearance import AttentionParams
from sharc.encoders import EncoderParams, SilhouetteInput, SkeletonFrame, SmplParams
from sharc.exceptions import CorruptIndex, EmptyInput, InvalidInput, SubjectMismatch
from sharc.gallery import (
    AppearanceModel,
    ManifestRow,
    TrackletRecord,
    build_pseudo_video,
    chunk_frames,
    load_index,
    read_manifest,
    register,
    save_index,
    tracklet_embeddings,
    write_manifest,
)
from sharc.shape import ShapeModel
from sharc.synth import DatasetSpec, generate_dataset


class TestChunking:
    def test_short_tracklet_cycles(self):
        assert chunk_frames(1) == [[0] * 8]
        assert chunk_frames(5) == [[0, 1, 2, 3, 4, 0, 1, 2]]

    def test_exact_group(self):
        assert chunk_frames(8) == [list(range(8))]

    def test_remainder_cycles_within_itself(self):
        assert chunk_frames(9) == [list(range(8)), [8] * 8]
        assert chunk_frames(20) == [
            list(range(8)),
            list(range(8, 16)),
            [16, 17, 18, 19, 16, 17, 18, 19],
        ]

    def test_multiples(self):
        assert chunk_frames(16) == [list(range(8)), list(range(8, 16))]

    def test_rejects_nonpositive(self):
        with pytest.raises(EmptyInput):
            chunk_frames(0)

    def test_every_group_has_eight_indices(self):
        for n in range(1, 40):
            for group in chunk_frames(n):
                assert len(group) == 8
                assert all(0 <= i < n for i in group)


def _dataset(num_ids=3, tpi=2, frames=9, seed=77):
    return generate_dataset(
        DatasetSpec(
            num_ids=num_ids,
            tracklets_per_id=tpi,
            frames_per_tracklet=frames,
            clothing_variants=1,
            sil_flip_rate=0.0,
            keypoint_jitter=0.0,
            appearance_shift=0.0,
            seed=seed,
        )
    )


def _models(c=16, c_m=12):
    shape_model = ShapeModel.build(
        sil_encoder=EncoderParams.initialize((4, 8, c), seed=1),
        smpl_encoder=EncoderParams.initialize((85, 32, c), seed=2),
        skeleton_encoder=EncoderParams.initialize((51, 32, c_m), seed=3),
        bins=4,
    )
    app_model = AppearanceModel(
        encoder=EncoderParams.initialize((3, 8, c), seed=4),
        attention=AttentionParams.initialize(c, seed=5),
    )
    return shape_model, app_model


class TestPseudoVideo:
    def test_concatenates_in_order(self):
        a, b = _dataset(num_ids=1)[:2]
        joined = build_pseudo_video([a, b])
        assert len(joined) == len(a) + len(b)
        assert joined.clothing_id == "mixed"
        assert joined.subject_id == a.subject_id
        np.testing.assert_array_equal(joined.silhouettes[0].mask, a.silhouettes[0].mask)
        np.testing.assert_array_equal(joined.silhouettes[len(a)].mask, b.silhouettes[0].mask)

    def test_rejects_mixed_subjects(self):
        recs = _dataset(num_ids=2, tpi=1)
        with pytest.raises(SubjectMismatch):
            build_pseudo_video(recs)

    def test_rejects_empty(self):
        with pytest.raises(EmptyInput):
            build_pseudo_video([])


class TestRegister:
    def test_centroid_is_mean_of_tracklet_embeddings(self):
        recs = _dataset(num_ids=2, tpi=3)
        sm, am = _models()
        index = register(recs, sm, am, centroid=True)
        assert len(index) == 2
        subject = index.entries[0].subject_id
        own = sorted(
            (r for r in recs if r.subject_id == subject), key=lambda r: r.tracklet_id
        )
        embs = [tracklet_embeddings(r, sm, am) for r in own]
        np.testing.assert_array_equal(
            index.entries[0].shape, np.mean([e[0] for e in embs], axis=0)
        )
        np.testing.assert_array_equal(
            index.entries[0].appearance, np.mean([e[1] for e in embs], axis=0)
        )
        assert index.entries[0].source_count == 3

    def test_registration_order_does_not_matter(self):
        recs = _dataset(num_ids=3, tpi=2)
        sm, am = _models()
        a = register(recs, sm, am, centroid=True)
        b = register(list(reversed(recs)), sm, am, centroid=True)
        for ea, eb in zip(a.entries, b.entries):
            assert ea.subject_id == eb.subject_id
            np.testing.assert_array_equal(ea.shape, eb.shape)
            np.testing.assert_array_equal(ea.appearance, eb.appearance)

    def test_threading_matches_serial(self):
        recs = _dataset(num_ids=3, tpi=2)
        sm, am = _models()
        serial = register(recs, sm, am, centroid=True, threads=1)
        threaded = register(recs, sm, am, centroid=True, threads=4)
        for ea, eb in zip(serial.entries, threaded.entries):
            np.testing.assert_array_equal(ea.shape, eb.shape)
            np.testing.assert_array_equal(ea.appearance, eb.appearance)

    def test_per_tracklet_mode_keeps_every_entry(self):
        recs = _dataset(num_ids=2, tpi=3)
        sm, am = _models()
        index = register(recs, sm, am, centroid=False)
        assert len(index) == 6
        assert all(e.source_count == 1 for e in index.entries)
        assert index.subject_ids() == ["s000", "s001"]

    def test_empty_rejected(self):
        sm, am = _models()
        with pytest.raises(EmptyInput):
            register([], sm, am)


class TestIndexFile:
    def test_roundtrip(self, tmp_path):
        recs = _dataset(num_ids=2, tpi=2)
        sm, am = _models()
        index = register(recs, sm, am)
        path = tmp_path / "g.shrc"
        save_index(index, path)
        loaded = load_index(path)
        assert [e.subject_id for e in loaded.entries] == [e.subject_id for e in index.entries]
        for ea, eb in zip(index.entries, loaded.entries):
            # persisted as f32
            np.testing.assert_allclose(eb.shape, ea.shape, rtol=0, atol=1e-6)
            np.testing.assert_allclose(eb.appearance, ea.appearance, rtol=0, atol=1e-6)
            assert eb.source_count == ea.source_count
        # save(load(x)) is byte-stable
        path2 = tmp_path / "g2.shrc"
        save_index(loaded, path2)
        assert path.read_bytes() == path2.read_bytes()

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "x.shrc"
        p.write_bytes(b"WRONGMAG" + b"\x00" * 8)
        with pytest.raises(CorruptIndex):
            load_index(p)

    def test_truncation_and_trailing(self, tmp_path):
        recs = _dataset(num_ids=1, tpi=2)
        sm, am = _models()
        p = tmp_path / "x.shrc"
        save_index(register(recs, sm, am), p)
        raw = p.read_bytes()
        p.write_bytes(raw[:-5])
        with pytest.raises(CorruptIndex):
            load_index(p)
        p.write_bytes(raw + b"\x00")
        with pytest.raises(CorruptIndex):
            load_index(p)


class TestManifest:
    def test_roundtrip_with_comment(self, tmp_path):
        rows = [
            ManifestRow("s000_t00", "s000", "c0", "frames/s000_t00.dat"),
            ManifestRow("s001_t00", "s001", "c1", "frames/s001_t00.dat"),
        ]
        p = tmp_path / "m.csv"
        write_manifest(rows, p, header_comment="tool 0.0 config=abc")
        assert p.read_text().startswith("# tool 0.0 config=abc\n")
        assert read_manifest(p) == rows

    def test_rejects_wrong_header(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(InvalidInput):
            read_manifest(p)
