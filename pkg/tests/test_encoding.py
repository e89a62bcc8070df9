import struct

import numpy as np
import pytest

from kar.adaptor import AugmentedVector
from kar.encoding import (
    CacheError,
    CacheMissError,
    EncodeError,
    HashTokenEncoder,
    KnowledgeRepresentation,
    PrecomputedEncoder,
    RepresentationCache,
    VectorRecord,
    aggregate,
    encode_tokens,
    expected_file_size,
    prestore,
    prestore_augmented,
    represent,
    wavg_weights,
    write_cache,
)
from kar.errors import ConfigError

ROWS = np.array([[1.0, 3.0], [3.0, 5.0]])


def _size_by_hand(keys, dim):
    # magic + version + dim + count, then per key: u16 len + bytes + u8 kind + u64 row
    return 4 + 2 + 4 + 8 + sum(2 + len(k.encode()) + 1 + 8 for k in keys) + len(keys) * dim * 4


def _parse_by_hand(path):
    raw = open(path, "rb").read()
    assert raw[:4] == b"KARV"
    version, dim, count = struct.unpack_from("<HIQ", raw, 4)
    off = 18
    index = []
    for _ in range(count):
        (klen,) = struct.unpack_from("<H", raw, off)
        key = raw[off + 2:off + 2 + klen].decode()
        kind, row = struct.unpack_from("<BQ", raw, off + 2 + klen)
        index.append((key, kind, row))
        off += 2 + klen + 9
    rows = np.frombuffer(raw[off:], dtype="<f4").reshape(count, dim)
    return version, dim, index, rows


class TestEncoders:
    def test_hash_encoder_rows(self):
        enc = HashTokenEncoder(dim=16, seed=5)
        mat = encode_tokens("a b", enc)
        assert mat.shape == (2, 16)
        np.testing.assert_array_equal(mat[0], enc.token_vector("a"))
        np.testing.assert_array_equal(mat[1], enc.token_vector("b"))
        assert not np.array_equal(mat[0], mat[1])

    def test_deterministic_across_instances(self):
        a = encode_tokens("the quick fox", HashTokenEncoder(32, seed=1))
        b = encode_tokens("the quick fox", HashTokenEncoder(32, seed=1))
        c = encode_tokens("the quick fox", HashTokenEncoder(32, seed=2))
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)

    @pytest.mark.parametrize("text", ["", "   \n"])
    def test_empty_text(self, text):
        with pytest.raises(EncodeError):
            encode_tokens(text, HashTokenEncoder(8))

    def test_dim_range(self):
        HashTokenEncoder(4096)
        with pytest.raises(ValueError):
            HashTokenEncoder(4097)

    def test_precomputed_token_rows(self, tmp_path):
        rng = np.random.default_rng(0)
        toks = rng.standard_normal((3, 8)).astype(np.float32)
        recs = [VectorRecord(f"u1/{t}", "preference", toks[t]) for t in (2, 0, 1)]
        recs.append(VectorRecord("i9", "item_factual", toks[0]))
        write_cache(recs, tmp_path / "tok.karv")
        enc = PrecomputedEncoder(tmp_path / "tok.karv")
        np.testing.assert_array_equal(enc.encode("ignored", "u1", "preference"), toks)
        assert enc.encode("x", "i9", "item_factual").shape == (1, 8)
        with pytest.raises(CacheMissError):
            enc.encode("x", "nobody", "preference")


class TestAggregate:
    def test_avg(self):
        np.testing.assert_array_equal(aggregate(ROWS, "avg"), [2.0, 4.0])

    def test_last(self):
        np.testing.assert_array_equal(aggregate(ROWS, "last"), [3.0, 5.0])

    def test_wavg(self):
        # weights 1/3, 2/3 recomputed by hand
        want = [1 / 3 * 1 + 2 / 3 * 3, 1 / 3 * 3 + 2 / 3 * 5]
        np.testing.assert_allclose(aggregate(ROWS, "wavg"), want, rtol=0, atol=1e-12)
        np.testing.assert_allclose(want, [7 / 3, 13 / 3], atol=1e-12)

    def test_unknown_method(self):
        with pytest.raises(ConfigError):
            aggregate(ROWS, "cls")

    @pytest.mark.parametrize("T", [1, 2, 7, 300])
    def test_wavg_weights(self, T):
        w = wavg_weights(T)
        assert np.all(w > 0) and np.all(np.diff(w) >= 0)
        assert abs(w.sum() - 1) < 1e-12

    def test_single_row_all_methods(self, rng):
        row = rng.standard_normal((1, 5))
        for m in ("avg", "last", "wavg"):
            np.testing.assert_array_equal(aggregate(row, m), row[0])

    def test_avg_permutation_invariant_last_not(self, rng):
        tok = rng.standard_normal((6, 4))
        perm = tok[::-1]
        np.testing.assert_allclose(aggregate(tok, "avg"), aggregate(perm, "avg"), atol=1e-12)
        assert not np.allclose(aggregate(tok, "last"), aggregate(perm, "last"))

    def test_represent(self):
        rep = represent("a b c", HashTokenEncoder(8), "avg", "u3", "preference")
        assert rep.vector.shape == (8,) and rep.entity_id == "u3"


def _special_f32(rng, n):
    bits = rng.integers(0, 2**32, size=n, dtype=np.uint64).astype(np.uint32)
    vals = bits.view(np.float32)
    vals = vals[np.isfinite(vals)]
    specials = np.array([0.0, -0.0, 1e-45, -1e-45, 1.17549e-38, -3e-39, np.finfo(np.float32).max,
                         np.finfo(np.float32).tiny, -np.finfo(np.float32).max], dtype=np.float32)
    return np.concatenate([specials, vals])


class TestCache:
    def test_round_trip_three(self, tmp_path, rng):
        reps = [KnowledgeRepresentation(rng.standard_normal(6).astype(np.float32), str(i), "preference")
                for i in range(3)]
        cache = prestore(reps, tmp_path / "r.karv")
        for r in reps:
            np.testing.assert_array_equal(cache.get(r.entity_id, "preference"), r.vector)

    def test_bit_exact_random_payloads(self, tmp_path, rng):
        for trial in range(20):
            dim = int(rng.integers(1, 40))
            n = int(rng.integers(1, 30))
            pool = _special_f32(rng, n * dim * 2)
            mat = rng.choice(pool, size=(n, dim)).astype(np.float32)
            mat[0, 0] = -0.0
            keys = [f"e{trial}-{i}-" + "x" * int(rng.integers(0, 12)) for i in range(n)]
            recs = [VectorRecord(k, i % 2, mat[i]) for i, k in enumerate(keys)]
            path = write_cache(recs, tmp_path / f"c{trial}.karv").path
            back = RepresentationCache(path)
            for i, k in enumerate(keys):
                got = back.get(k, i % 2).astype(np.float32)
                assert got.view(np.uint32).tolist() == mat[i].view(np.uint32).tolist()
            assert path.stat().st_size == _size_by_hand(keys, dim) == expected_file_size(keys, dim)

    def test_signed_zero_and_subnormal(self, tmp_path):
        v = np.array([0.0, -0.0, 1e-45, -1e-40], dtype=np.float32)
        cache = write_cache([VectorRecord("k", "fact", v)], tmp_path / "z.karv")
        got = cache.get("k", "fact")
        assert np.signbit(got[1]) and not np.signbit(got[0])
        assert got.view(np.uint32).tolist() == v.view(np.uint32).tolist()

    def test_layout_matches_documented_format(self, tmp_path, rng):
        vecs = rng.standard_normal((2, 3)).astype(np.float32)
        write_cache([VectorRecord("alpha", "preference", vecs[0]),
                     VectorRecord("β", "item_factual", vecs[1])], tmp_path / "l.karv")
        version, dim, index, rows = _parse_by_hand(tmp_path / "l.karv")
        assert version == 1 and dim == 3
        assert index == [("alpha", 0, 0), ("β", 1, 1)]
        np.testing.assert_array_equal(rows, vecs)
        assert (tmp_path / "l.karv").stat().st_size == _size_by_hand(["alpha", "β"], 3)

    def test_missing_key(self, tmp_path):
        cache = write_cache([VectorRecord("a", "fact", np.ones(2))], tmp_path / "m.karv")
        with pytest.raises(CacheMissError):
            cache.get("b", "fact")
        with pytest.raises(CacheMissError):
            cache.get("a", "preference")

    def test_mixed_dims(self, tmp_path):
        with pytest.raises(CacheError):
            write_cache([VectorRecord("a", 0, np.ones(8)), VectorRecord("b", 0, np.ones(16))],
                        tmp_path / "x.karv")

    def test_duplicate_overwrites_with_warning(self, tmp_path, caplog):
        cache = write_cache([VectorRecord("a", 0, np.zeros(2)), VectorRecord("a", 0, np.ones(2))],
                            tmp_path / "d.karv")
        assert len(cache) == 1
        np.testing.assert_array_equal(cache.get("a", 0), [1, 1])
        assert "duplicate" in caplog.text

    def test_index_covers_rows_once(self, tmp_path, rng):
        recs = [VectorRecord(str(i), i % 2, rng.standard_normal(4)) for i in range(25)]
        _, _, index, _ = _parse_by_hand(write_cache(recs, tmp_path / "i.karv").path)
        assert sorted(r for _, _, r in index) == list(range(25))

    def test_corrupt_files(self, tmp_path):
        p = write_cache([VectorRecord("a", 0, np.ones(4))], tmp_path / "c.karv").path
        raw = p.read_bytes()
        p.write_bytes(raw[:-1])
        with pytest.raises(CacheError, match="size"):
            RepresentationCache(p)
        p.write_bytes(b"XXXX" + raw[4:])
        with pytest.raises(CacheError, match="magic"):
            RepresentationCache(p)

    def test_augmented_q32_and_ratio(self, tmp_path, rng):
        m, q, n = 64, 32, 40
        ids = [str(i) for i in range(n)]
        reps = [KnowledgeRepresentation(rng.standard_normal(m), i, "preference") for i in ids]
        augs = [AugmentedVector(rng.standard_normal(q).astype(np.float32), "reasoning", i) for i in ids]
        rc = prestore(reps, tmp_path / "reps.karv")
        ac = prestore_augmented(augs, tmp_path / "aug.karv")
        for a in augs:
            np.testing.assert_array_equal(ac.get(a.entity_id, "reasoning"), a.vector)
        rs, as_ = rc.path.stat().st_size, ac.path.stat().st_size
        assert as_ == _size_by_hand(ids, q)
        ratio = rs / as_
        assert 0.9 * m / q < ratio <= m / q
        assert (rs - _size_by_hand(ids, 0)) / (as_ - _size_by_hand(ids, 0)) == m / q

    def test_matrix_order(self, tmp_path, rng):
        recs = [VectorRecord(str(i), "fact", rng.standard_normal(3)) for i in range(5)]
        cache = write_cache(recs, tmp_path / "o.karv")
        mat = cache.matrix(["4", "0", "2"], "fact")
        np.testing.assert_array_equal(mat[0], recs[4].vector.astype(np.float32))
        with pytest.raises(CacheMissError):
            cache.matrix(["9"], "fact")
