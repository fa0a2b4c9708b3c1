"""Embedding store I/O, grid reshaping, and the remote fetch client."""

import struct

import numpy as np
import pytest
import requests

from chunkprobe import store
from chunkprobe.errors import FetchError, ShapeError, StoreFormatError


def make_store(n=5, dim=768, model="test-model", seed=0):
    g = np.random.default_rng(seed)
    ids = [f"sid{i:04d}" for i in range(n)]
    return store.EmbeddingStore(ids, g.standard_normal((n, dim)).astype(np.float32),
                                model)


class TestEmbeddingStore:
    def test_lookup(self):
        st = make_store()
        assert len(st) == 5
        assert st.dim == 768
        assert "sid0003" in st
        assert "nope" not in st
        np.testing.assert_array_equal(st.get("sid0001"), st.vectors[1])

    def test_missing(self):
        st = make_store()
        assert st.missing(["sid0000", "zz", "sid0004", "yy"]) == ["zz", "yy"]

    def test_get_unknown_raises(self):
        with pytest.raises(KeyError, match="not in store"):
            make_store().get("absent")

    def test_duplicate_ids_rejected(self):
        with pytest.raises(StoreFormatError, match="duplicate"):
            store.EmbeddingStore(["a", "a"], np.zeros((2, 4), dtype=np.float32))

    def test_id_count_mismatch_rejected(self):
        with pytest.raises(StoreFormatError):
            store.EmbeddingStore(["a"], np.zeros((2, 4), dtype=np.float32))

    def test_non_2d_rejected(self):
        with pytest.raises(ShapeError):
            store.EmbeddingStore(["a"], np.zeros(4, dtype=np.float32))


class TestReshape:
    def test_rowmajor_layout(self):
        v = np.arange(768.0)
        grid = store.reshape_768_to_32x24(v)
        assert grid.shape == (32, 24)
        assert grid[0, 23] == 23.0
        assert grid[1, 0] == 24.0

    def test_colmajor_layout(self):
        v = np.arange(768.0)
        grid = store.reshape_768_to_32x24(v, order="colmajor")
        assert grid.shape == (32, 24)
        assert grid[0, 1] == 32.0
        assert grid[1, 0] == 1.0

    def test_orders_permute_same_values(self):
        v = np.random.default_rng(0).standard_normal(768)
        a = store.reshape_768_to_32x24(v, "rowmajor")
        b = store.reshape_768_to_32x24(v, "colmajor")
        assert sorted(a.ravel()) == sorted(b.ravel())
        assert not np.array_equal(a, b)

    def test_wrong_length_rejected(self):
        with pytest.raises(ShapeError):
            store.reshape_768_to_32x24(np.zeros(100))

    def test_unknown_order_rejected(self):
        with pytest.raises(ShapeError):
            store.reshape_768_to_32x24(np.zeros(768), order="diagonal")


class TestStoreFiles:
    def test_round_trip_exact(self, tmp_path):
        st = make_store(n=7, dim=64)
        path = tmp_path / "emb.bin"
        store.write_store(st, path)
        back = store.read_store(path)
        assert back.sentence_ids == st.sentence_ids
        assert back.model_name == "test-model"
        np.testing.assert_array_equal(back.vectors, st.vectors)
        assert back.vectors.dtype == np.float32

    def test_manifest_written(self, tmp_path):
        st = make_store(n=3, dim=8)
        path = tmp_path / "emb.bin"
        store.write_store(st, path)
        lines = (tmp_path / "emb.bin.manifest.tsv").read_text().splitlines()
        assert lines[0] == "row\tsentence_id\tmodel\tdim"
        assert lines[1] == "0\tsid0000\ttest-model\t8"
        assert len(lines) == 4

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "emb.bin"
        path.write_bytes(b"NOTMAGIC" + struct.pack("<II", 0, 0))
        with pytest.raises(StoreFormatError, match="magic"):
            store.read_store(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "emb.bin"
        path.write_bytes(b"SEBE")
        with pytest.raises(StoreFormatError, match="too short"):
            store.read_store(path)

    def test_truncated_payload(self, tmp_path):
        st = make_store(n=4, dim=16)
        path = tmp_path / "emb.bin"
        store.write_store(st, path)
        raw = path.read_bytes()
        path.write_bytes(raw[:-8])
        with pytest.raises(StoreFormatError, match="payload"):
            store.read_store(path)

    def test_trailing_bytes_rejected(self, tmp_path):
        st = make_store(n=4, dim=16)
        path = tmp_path / "emb.bin"
        store.write_store(st, path)
        path.write_bytes(path.read_bytes() + b"\x00\x00\x00\x00")
        with pytest.raises(StoreFormatError, match="payload"):
            store.read_store(path)

    def test_missing_manifest(self, tmp_path):
        st = make_store(n=2, dim=4)
        path = tmp_path / "emb.bin"
        store.write_store(st, path)
        (tmp_path / "emb.bin.manifest.tsv").unlink()
        with pytest.raises(StoreFormatError, match="manifest"):
            store.read_store(path)

    def test_manifest_row_count_mismatch(self, tmp_path):
        st = make_store(n=3, dim=4)
        path = tmp_path / "emb.bin"
        store.write_store(st, path)
        mpath = tmp_path / "emb.bin.manifest.tsv"
        lines = mpath.read_text().splitlines()
        mpath.write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(StoreFormatError, match="manifest lists"):
            store.read_store(path)

    def test_manifest_bad_header(self, tmp_path):
        st = make_store(n=1, dim=4)
        path = tmp_path / "emb.bin"
        store.write_store(st, path)
        mpath = tmp_path / "emb.bin.manifest.tsv"
        mpath.write_text("wrong\theader\n0\ta\tm\t4\n")
        with pytest.raises(StoreFormatError, match="header"):
            store.read_store(path)

    def test_write_is_deterministic(self, tmp_path):
        st = make_store(n=6, dim=32)
        store.write_store(st, tmp_path / "a.bin")
        store.write_store(st, tmp_path / "b.bin")
        assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()


class FakeResponse:
    def __init__(self, status_code, body=None):
        self.status_code = status_code
        self._body = body

    def json(self):
        if self._body is None:
            raise ValueError("no body")
        return self._body


class FakeSession:
    """Scripted HTTP session: pops one response (or exception) per post."""

    def __init__(self, script):
        self.script = list(script)
        self.calls = []

    def post(self, url, json=None, timeout=None):
        self.calls.append((url, json))
        item = self.script.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


def good_body(n):
    return {"dim": 768, "vectors": [[float(i)] * 768 for i in range(n)]}


class TestFetchRemote:
    def test_success_preserves_order(self):
        sess = FakeSession([FakeResponse(200, good_body(3))])
        out = store.fetch_remote("http://svc", ["a", "b", "c"], "m", session=sess)
        assert out.shape == (3, 768)
        assert out.dtype == np.float32
        np.testing.assert_array_equal(out[2], np.full(768, 2.0))
        url, payload = sess.calls[0]
        assert url == "http://svc/embed"
        assert payload == {"model": "m", "sentences": ["a", "b", "c"]}

    def test_retries_then_succeeds(self):
        sess = FakeSession([FakeResponse(500), FakeResponse(503),
                            FakeResponse(200, good_body(2))])
        out = store.fetch_remote("http://svc/", ["a", "b"], "m",
                                 backoff=0.0, session=sess)
        assert out.shape == (2, 768)
        assert len(sess.calls) == 3

    def test_connection_errors_retried(self):
        sess = FakeSession([requests.ConnectionError("refused"),
                            FakeResponse(200, good_body(1))])
        out = store.fetch_remote("http://svc", ["a"], "m",
                                 backoff=0.0, session=sess)
        assert out.shape == (1, 768)

    def test_exhausted_attempts_raise(self):
        sess = FakeSession([FakeResponse(500)] * 3)
        with pytest.raises(FetchError, match="after 3 attempts"):
            store.fetch_remote("http://svc", ["a"], "m", backoff=0.0, session=sess)
        assert len(sess.calls) == 3

    def test_wrong_dim_aborts_without_retry(self):
        sess = FakeSession([FakeResponse(200, {"dim": 512, "vectors": [[0.0] * 512]})])
        with pytest.raises(FetchError, match="dim 512"):
            store.fetch_remote("http://svc", ["a"], "m", backoff=0.0, session=sess)
        assert len(sess.calls) == 1

    def test_count_mismatch_aborts_without_retry(self):
        sess = FakeSession([FakeResponse(200, good_body(1))])
        with pytest.raises(FetchError, match="1 vectors for 2"):
            store.fetch_remote("http://svc", ["a", "b"], "m",
                               backoff=0.0, session=sess)
        assert len(sess.calls) == 1

    def test_empty_input_short_circuits(self):
        sess = FakeSession([])
        out = store.fetch_remote("http://svc", [], "m", session=sess)
        assert out.shape == (0, 768)
        assert sess.calls == []
