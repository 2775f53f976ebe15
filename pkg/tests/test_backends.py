"""Transports, the replay store, and the BridgeClient policy layer."""

import json
import shlex
import socket
import threading
import time

import numpy as np
import pytest

from conftest import STUB_CMD
from vpeval.backends import (
    BridgeClient,
    FileTransport,
    RecordingTransport,
    SubprocessTransport,
    TcpTransport,
    Transport,
    canonical_key,
    open_backend,
    open_transport,
)
from vpeval.errors import (
    CapabilityError,
    ComputationError,
    ConfigurationError,
    ProtocolError,
)
from vpeval.markers import BoundingBox
from vpeval.wire import Op


class CannedTransport(Transport):
    """Returns preset tensors and counts exchanges; optional delay widens
    race windows for the concurrency test."""

    def __init__(self, tensors, delay=0.0):
        self.tensors = tensors
        self.delay = delay
        self.exchanges = 0

    def _exchange(self, op, metadata, tensor):
        self.exchanges += 1
        if self.delay:
            time.sleep(self.delay)
        return [t.copy() for t in self.tensors]


class TestCanonicalKey:
    def test_image_key_ignores_metadata(self):
        arr = np.ones(4, np.float32)
        assert canonical_key(Op.EMBED_IMAGE, "a", arr) == canonical_key(
            Op.EMBED_IMAGE, "b", arr
        )

    def test_image_key_tracks_content(self):
        a = canonical_key(Op.EMBED_IMAGE, tensor=np.zeros(4, np.float32))
        b = canonical_key(Op.EMBED_IMAGE, tensor=np.ones(4, np.float32))
        assert a != b
        assert a.startswith("embed_image:")

    def test_text_key_is_readable(self):
        assert canonical_key(Op.EMBED_TEXT, "a malignant nodule") == (
            "embed_text:a malignant nodule"
        )

    def test_grads_key_couples_image_and_prompt(self):
        arr = np.ones(4, np.float32)
        a = canonical_key(Op.ATTN_GRADS, "p1", arr)
        b = canonical_key(Op.ATTN_GRADS, "p2", arr)
        assert a != b and a.startswith("attn_grads:")

    def test_model_info_is_constant(self):
        assert canonical_key(Op.MODEL_INFO) == "model_info"


class TestFileTransport:
    def test_missing_directory_rejected(self, tmp_path):
        with pytest.raises(ConfigurationError, match="does not exist"):
            FileTransport(tmp_path / "nope")

    def test_put_then_request_round_trips(self, tmp_path):
        store = FileTransport(tmp_path)
        vec = np.array([1.5, -2.25, 0.0], np.float32)
        store.put(canonical_key(Op.EMBED_TEXT, "hello"), [vec])
        out = FileTransport(tmp_path).request(Op.EMBED_TEXT, "hello")
        assert len(out) == 1
        assert np.array_equal(out[0].view(np.uint32), vec.view(np.uint32))

    def test_multi_tensor_responses(self, tmp_path):
        store = FileTransport(tmp_path)
        a, b = np.ones(2, np.float32), np.zeros((2, 2), np.float32)
        store.put("model_info", [a, b])
        out = store.request(Op.MODEL_INFO)
        assert len(out) == 2

    def test_missing_embed_is_a_protocol_error(self, tmp_path):
        store = FileTransport(tmp_path)
        with pytest.raises(ProtocolError, match="missing required"):
            store.request(Op.EMBED_TEXT, "never recorded")

    @pytest.mark.parametrize("op", [Op.ATTN_GRADS, Op.SEGMENT_BOX, Op.MODEL_INFO])
    def test_missing_optional_op_is_a_capability_error(self, tmp_path, op):
        store = FileTransport(tmp_path)
        with pytest.raises(CapabilityError, match="no recording"):
            store.request(op, "x", np.zeros((2, 2), np.float32))

    def test_corrupt_index_rejected(self, tmp_path):
        (tmp_path / "index.json").write_text("{not json")
        with pytest.raises(ConfigurationError, match="unreadable index"):
            FileTransport(tmp_path)

    def test_index_pointing_at_missing_file(self, tmp_path):
        store = FileTransport(tmp_path)
        name = store.put("embed_text:x", [np.ones(1, np.float32)])
        (tmp_path / f"{name}.vpt").unlink()
        with pytest.raises(ProtocolError, match="unreadable"):
            store.request(Op.EMBED_TEXT, "x")

    def test_put_overwrites(self, tmp_path):
        store = FileTransport(tmp_path)
        store.put("embed_text:x", [np.zeros(2, np.float32)])
        store.put("embed_text:x", [np.ones(2, np.float32)])
        out = store.request(Op.EMBED_TEXT, "x")
        assert np.array_equal(out[0], np.ones(2, np.float32))

    def test_keys_sorted(self, tmp_path):
        store = FileTransport(tmp_path)
        store.put("embed_text:b", [np.ones(1, np.float32)])
        store.put("embed_text:a", [np.ones(1, np.float32)])
        assert store.keys() == ["embed_text:a", "embed_text:b"]

    def test_index_is_valid_json_after_puts(self, tmp_path):
        store = FileTransport(tmp_path)
        store.put("embed_text:x", [np.ones(1, np.float32)])
        index = json.loads((tmp_path / "index.json").read_text())
        assert "embed_text:x" in index


class TestRecordingTransport:
    def test_captures_for_replay(self, tmp_path):
        vec = np.array([3.0, 4.0], np.float32)
        live = CannedTransport([vec])
        rec = RecordingTransport(live, FileTransport(tmp_path))
        out_live = rec.request(Op.EMBED_TEXT, "p")
        out_replay = FileTransport(tmp_path).request(Op.EMBED_TEXT, "p")
        assert np.array_equal(
            out_live[0].view(np.uint32), out_replay[0].view(np.uint32)
        )


class TestBridgeClient:
    def test_embeddings_come_back_unit_length(self):
        client = BridgeClient(CannedTransport([np.array([3.0, 4.0], np.float32)]))
        vec = client.embed_text("p")
        assert vec.dtype == np.float64
        assert np.allclose(vec, [0.6, 0.8])
        assert np.linalg.norm(vec) == pytest.approx(1.0, abs=1e-12)

    def test_zero_norm_embedding_rejected(self):
        client = BridgeClient(CannedTransport([np.zeros(4, np.float32)]))
        with pytest.raises(ComputationError, match="norm"):
            client.embed_text("p")

    def test_identical_requests_hit_backend_once(self):
        live = CannedTransport([np.ones(4, np.float32)])
        client = BridgeClient(live)
        a = client.embed_text("same")
        b = client.embed_text("same")
        assert np.array_equal(a, b)
        assert live.exchanges == 1
        assert client.cache_hits == 1
        assert client.calls["embed_text"] == 1

    def test_distinct_requests_are_distinct_calls(self):
        live = CannedTransport([np.ones(4, np.float32)])
        client = BridgeClient(live)
        client.embed_text("a")
        client.embed_text("b")
        assert live.exchanges == 2
        assert client.calls["embed_text"] == 2

    def test_concurrent_identical_requests_single_flight(self):
        live = CannedTransport([np.ones(4, np.float32)], delay=0.02)
        client = BridgeClient(live)
        results = []

        def hit():
            results.append(client.embed_text("shared"))

        threads = [threading.Thread(target=hit) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert live.exchanges == 1
        assert len(results) == 8

    def test_wrong_tensor_count_rejected(self):
        client = BridgeClient(
            CannedTransport([np.ones(2, np.float32), np.ones(2, np.float32)])
        )
        with pytest.raises(ProtocolError, match="expected 1"):
            client.embed_text("p")

    def test_wrong_rank_rejected(self):
        client = BridgeClient(CannedTransport([np.ones((2, 2), np.float32)]))
        with pytest.raises(ProtocolError, match="rank"):
            client.embed_text("p")

    def test_segment_box_shape_checks(self):
        pixels = np.zeros((8, 8), np.float32)
        box = BoundingBox(1.0, 1.0, 5.0, 5.0)
        good = BridgeClient(CannedTransport([np.ones((8, 8), np.float32)]))
        assert good.segment_box(pixels, box).shape == (8, 8)

        with pytest.raises(ComputationError, match="2-D"):
            good.segment_box(np.zeros((8, 8, 3), np.float32), box)

        bad = BridgeClient(CannedTransport([np.ones((4, 4), np.float32)]))
        with pytest.raises(ProtocolError, match="mask shape"):
            bad.segment_box(pixels, box)

    def test_model_info_parsing(self):
        info_vec = np.array([512, 100.0, 12, 12, 197], np.float32)
        client = BridgeClient(CannedTransport([info_vec]))
        info = client.model_info()
        assert (info.embed_dim, info.layers, info.heads, info.tokens) == (512, 12, 12, 197)
        assert info.logit_scale == 100.0

    def test_model_info_wrong_size(self):
        client = BridgeClient(CannedTransport([np.ones(3, np.float32)]))
        with pytest.raises(ProtocolError, match="expected 5"):
            client.model_info()

    def test_attn_grads_rank_checked(self):
        grads = np.zeros((2, 2, 5, 5), np.float32)
        client = BridgeClient(CannedTransport([grads]))
        out = client.attn_grads(np.zeros((3, 4, 4), np.float32), "p")
        assert out.shape == (2, 2, 5, 5) and out.dtype == np.float64

    def test_context_manager_closes_transport(self):
        closed = []

        class Closing(CannedTransport):
            def close(self):
                closed.append(True)

        with BridgeClient(Closing([np.ones(1, np.float32)])):
            pass
        assert closed == [True]


class TestSubprocessBackend:
    def test_model_info_constants(self):
        with BridgeClient(SubprocessTransport(shlex.split(STUB_CMD))) as client:
            info = client.model_info()
            assert info.embed_dim == 16
            assert info.logit_scale == 50.0
            assert (info.layers, info.heads, info.tokens) == (2, 2, 17)

    def test_deterministic_across_processes(self):
        def embed_once():
            with BridgeClient(SubprocessTransport(shlex.split(STUB_CMD))) as client:
                return client.embed_text("a malignant nodule")

        assert np.array_equal(embed_once(), embed_once())

    def test_error_response_surfaces_message(self):
        with SubprocessTransport(shlex.split(STUB_CMD)) as transport:
            with pytest.raises(ProtocolError, match="backend error"):
                transport.request(Op.EMBED_TEXT, "__raise__")
            # The process survives an error response and keeps serving.
            out = transport.request(Op.EMBED_TEXT, "still alive")
            assert out[0].shape == (16,)

    def test_request_after_exit_rejected(self):
        transport = SubprocessTransport(shlex.split(STUB_CMD))
        transport.close()
        with pytest.raises(ProtocolError, match="exited"):
            transport.request(Op.EMBED_TEXT, "late")

    def test_empty_command_rejected(self):
        with pytest.raises(ConfigurationError, match="empty"):
            SubprocessTransport([])

    def test_unlaunchable_command_rejected(self):
        with pytest.raises(ConfigurationError, match="cannot launch"):
            SubprocessTransport(["/nonexistent/backend-binary"])


class TestRecordThenReplay:
    def test_replay_is_bit_exact(self, tmp_path):
        pixels = np.random.default_rng(0).random((3, 8, 8)).astype(np.float32)
        gray = np.random.default_rng(1).random((16, 16)).astype(np.float32)
        box = BoundingBox(2.0, 2.0, 10.0, 10.0)

        store = FileTransport(tmp_path)
        with BridgeClient(
            RecordingTransport(SubprocessTransport(shlex.split(STUB_CMD)), store)
        ) as live:
            live_out = {
                "text": live.embed_text("a malignant nodule"),
                "image": live.embed_image(pixels),
                "grads": live.attn_grads(pixels, "a malignant nodule"),
                "mask": live.segment_box(gray, box),
                "info": live.model_info(),
            }

        with BridgeClient(FileTransport(tmp_path)) as replay:
            assert np.array_equal(replay.embed_text("a malignant nodule"), live_out["text"])
            assert np.array_equal(replay.embed_image(pixels), live_out["image"])
            assert np.array_equal(
                replay.attn_grads(pixels, "a malignant nodule"), live_out["grads"]
            )
            assert np.array_equal(replay.segment_box(gray, box), live_out["mask"])
            assert replay.model_info() == live_out["info"]


class TestLocators:
    def test_file_locator(self, tmp_path):
        transport = open_transport(f"file:{tmp_path}")
        assert isinstance(transport, FileTransport)

    def test_sidecar_locator(self):
        with open_backend(f"sidecar:{STUB_CMD}") as client:
            assert client.model_info().embed_dim == 16

    def test_tcp_locator_round_trip(self):
        from stub_sidecar import serve

        server = socket.create_server(("127.0.0.1", 0))
        port = server.getsockname()[1]

        def run_one():
            conn, _ = server.accept()
            with conn:
                stream = conn.makefile("rwb")
                serve(stream, stream)

        thread = threading.Thread(target=run_one, daemon=True)
        thread.start()
        transport = open_transport(f"tcp:127.0.0.1:{port}")
        try:
            out = transport.request(Op.EMBED_TEXT, "hello")
            assert out[0].shape == (16,)
        finally:
            transport.close()
            thread.join(timeout=5)
            server.close()

    @pytest.mark.parametrize(
        "spec",
        ["file:", "tcp:localhost", "tcp:host:notaport", "carrier:pigeon", "sidecar:"],
    )
    def test_bad_locators(self, spec):
        with pytest.raises(ConfigurationError):
            open_transport(spec)
