import struct
from collections import Counter

import numpy as np
import pytest

from aggnet.datasets import (
    DatasetSplit, IdentityRecord, epoch_length, gen_synthetic, load_embeddings, sample_batch,
    write_embeddings,
)
from aggnet.errors import ConfigError, FormatError, NotFoundError, SamplingError
from aggnet.numcore import make_rng


class TestGenSynthetic:

    def test_zero_noise_identical_samples(self):
        data = gen_synthetic(20, 3, 5, 2.0, 0.0, make_rng(0))
        for _, part in data.parts():
            for rec in part:
                assert np.array_equal(rec.samples, np.repeat(rec.samples[:1], 3, axis=0))

    def test_split_sizes(self):
        data = gen_synthetic(10, 4, 3, 1.0, 0.1, make_rng(0))
        assert (len(data.train), len(data.validation), len(data.test)) == (8, 1, 1)

    def test_nearest_centroid_oracle(self):
        data = gen_synthetic(200, 5, 16, 5.0, 0.1, make_rng(1))
        recs = [r for _, p in data.parts() for r in p]
        centroids = np.stack([r.samples.mean(0) for r in recs])
        hits = total = 0
        for j, rec in enumerate(recs):
            for x in rec.samples:
                hits += int(np.argmin(np.sum((centroids - x) ** 2, axis=1)) == j)
                total += 1
        assert hits / total > 0.99

    def test_latent_means_on_sphere(self):
        data = gen_synthetic(50, 2, 8, 3.0, 0.0, make_rng(2))
        norms = [np.linalg.norm(r.samples[0]) for _, p in data.parts() for r in p]
        np.testing.assert_allclose(norms, 3.0, atol=1e-12)

    def test_disjoint_splits(self):
        data = gen_synthetic(100, 2, 4, 1.0, 0.1, make_rng(3))
        ids = [{r.identity_id for r in p} for _, p in data.parts()]
        assert not (ids[0] & ids[1]) and not (ids[0] & ids[2]) and not (ids[1] & ids[2])

    def test_bad_dimensions(self):
        with pytest.raises(ConfigError):
            gen_synthetic(10, 2, 0, 1.0, 0.1, make_rng(0))
        with pytest.raises(ConfigError):
            gen_synthetic(10, 2, 3, 1.0, -0.1, make_rng(0))


def _write_three(tmp_path):
    rng = np.random.default_rng(0)
    split = DatasetSplit(
        train=[IdentityRecord(7, rng.standard_normal((2, 4)).astype(np.float32).astype(np.float64)),
               IdentityRecord(3, rng.standard_normal((2, 4)).astype(np.float32).astype(np.float64))],
        validation=[],
        test=[IdentityRecord(9, rng.standard_normal((2, 4)).astype(np.float32).astype(np.float64))],
    )
    return write_embeddings(split, tmp_path / "emb.txt"), split


class TestEmbeddingFiles:
    """Manifest + float32 data + (id, split) rows."""

    def test_three_identities(self, tmp_path):
        path, split = _write_three(tmp_path)
        loaded = load_embeddings(path)
        assert len(loaded.train) + len(loaded.validation) + len(loaded.test) == 3
        assert [r.identity_id for r in loaded.train] == [7, 3]
        np.testing.assert_array_equal(loaded.test[0].samples, split.test[0].samples)

    def test_round_trip_byte_identical(self, tmp_path):
        path, _ = _write_three(tmp_path)
        originals = {p.name: p.read_bytes() for p in tmp_path.iterdir()}
        write_embeddings(load_embeddings(path), tmp_path / "emb.txt")
        assert {p.name: p.read_bytes() for p in tmp_path.iterdir()} == originals

    def test_generated_round_trip(self, tmp_path):
        data = gen_synthetic(30, 3, 6, 2.0, 0.3, make_rng(4))
        path = write_embeddings(data, tmp_path / "g.txt")
        first = (tmp_path / "g.f32").read_bytes(), (tmp_path / "g.ids").read_bytes()
        write_embeddings(load_embeddings(path), path)
        assert ((tmp_path / "g.f32").read_bytes(), (tmp_path / "g.ids").read_bytes()) == first

    def test_missing_key(self, tmp_path):
        path, _ = _write_three(tmp_path)
        path.write_text("dim=4\ncount=6\ndata_file=emb.f32\n")
        with pytest.raises(FormatError, match="ids_file"):
            load_embeddings(path)

    def test_short_data_file_reports_offset(self, tmp_path):
        path, _ = _write_three(tmp_path)
        data = tmp_path / "emb.f32"
        data.write_bytes(data.read_bytes()[:-4])
        with pytest.raises(FormatError) as exc:
            load_embeddings(path)
        assert exc.value.offset == 92

    def test_identity_in_two_splits(self, tmp_path):
        path, _ = _write_three(tmp_path)
        ids = tmp_path / "emb.ids"
        raw = bytearray(ids.read_bytes())
        raw[5:10] = struct.pack("<IB", 7, 2)  # second row of identity 7 tagged test
        ids.write_bytes(bytes(raw))
        with pytest.raises(FormatError) as exc:
            load_embeddings(path)
        assert exc.value.offset == 5

    def test_unknown_tag(self, tmp_path):
        path, _ = _write_three(tmp_path)
        ids = tmp_path / "emb.ids"
        raw = bytearray(ids.read_bytes())
        raw[4] = 5
        ids.write_bytes(bytes(raw))
        with pytest.raises(FormatError, match="split tag"):
            load_embeddings(path)

    def test_train_identity_needs_two_samples(self, tmp_path):
        split = DatasetSplit(train=[IdentityRecord(1, np.ones((1, 3)))])
        path = write_embeddings(split, tmp_path / "one.txt")
        with pytest.raises(FormatError, match="fewer than 2"):
            load_embeddings(path)

    def test_non_finite_value(self, tmp_path):
        path, _ = _write_three(tmp_path)
        data = tmp_path / "emb.f32"
        raw = bytearray(data.read_bytes())
        raw[8:12] = np.array([np.nan], dtype="<f4").tobytes()
        data.write_bytes(bytes(raw))
        with pytest.raises(FormatError) as exc:
            load_embeddings(path)
        assert exc.value.offset == 8

    def test_find(self, tmp_path):
        path, _ = _write_three(tmp_path)
        data = load_embeddings(path)
        assert data.find(9).identity_id == 9
        with pytest.raises(NotFoundError):
            data.find(1000)


class TestSampleBatch:

    def test_single_identity_two_samples(self):
        rec = IdentityRecord(0, np.array([[1.0, 0.0], [0.0, 1.0]]))
        batch = sample_batch([rec], 1, 1, make_rng(0))
        pair = {tuple(batch.enrolled[0, 0]), tuple(batch.queries[0, 0])}
        assert pair == {(1.0, 0.0), (0.0, 1.0)}

    def test_protocol_counts(self):
        data = gen_synthetic(400, 3, 4, 1.0, 0.1, make_rng(0))
        batch = sample_batch(data.train, 64, 4, make_rng(1))
        assert batch.enrolled.shape == (64, 4, 4) and batch.queries.shape == (64, 4, 4)
        labels = batch.labels
        assert labels.shape == (256, 64)
        assert labels.sum() == 256
        assert (~labels).sum() == 256 * 63
        np.testing.assert_array_equal(labels.sum(1), 1)

    def test_group_of_query(self):
        data = gen_synthetic(40, 3, 4, 1.0, 0.1, make_rng(0))
        batch = sample_batch(data.train, 3, 2, make_rng(1))
        np.testing.assert_array_equal(batch.group_of_query, [0, 0, 1, 1, 2, 2])

    def test_frequency(self):
        recs = [IdentityRecord(i, np.random.default_rng(i).standard_normal((3, 2))) for i in range(8)]
        rng = make_rng(11)
        counts = Counter()
        for _ in range(1000):
            counts.update(sample_batch(recs, 2, 2, rng).identity_ids.ravel().tolist())
        for i in range(8):
            assert abs(counts[i] / 1000 - 0.5) <= 0.05

    def test_distinct_identities_and_samples(self):
        data = gen_synthetic(60, 4, 5, 1.0, 0.3, make_rng(2))
        rng = make_rng(3)
        for _ in range(50):
            batch = sample_batch(data.train, 4, 3, rng)
            ids = batch.identity_ids.ravel()
            assert len(set(ids.tolist())) == ids.size
            assert not np.any(np.all(batch.enrolled == batch.queries, axis=-1))

    def test_same_seed_same_batches(self):
        data = gen_synthetic(60, 4, 5, 1.0, 0.3, make_rng(2))
        a, b = make_rng(9), make_rng(9)
        for _ in range(5):
            x, y = sample_batch(data.train, 4, 2, a), sample_batch(data.train, 4, 2, b)
            assert np.array_equal(x.enrolled, y.enrolled) and np.array_equal(x.queries, y.queries)

    def test_insufficient_identities(self):
        data = gen_synthetic(20, 3, 4, 1.0, 0.1, make_rng(0))
        with pytest.raises(SamplingError):
            sample_batch(data.train, 5, 4, make_rng(0))

    def test_epoch_length(self):
        assert epoch_length(512, 16, 4) == 8
        assert epoch_length(100, 64, 4) == 0
