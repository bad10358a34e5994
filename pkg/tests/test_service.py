import io

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

import refocus.service as service
from refocus.oracle import generate_scene
from refocus.raster import resize_bilinear


def png_bytes(img):
    q = np.clip(np.rint(np.asarray(img) * 255.0), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(q, "RGB").save(buf, format="PNG")
    return buf.getvalue()


def pfm_bytes(d):
    h, w = d.shape
    return b"Pf\n" + f"{w} {h}\n".encode() + b"-1.0\n" + d[::-1].astype("<f4").tobytes()


@pytest.fixture(scope="module")
def client():
    return TestClient(service.create_app(), raise_server_exceptions=False)


@pytest.fixture(scope="module")
def session(client):
    scene = generate_scene(7, 96, 96)
    resp = client.post("/session", files={
        "image": ("img.png", png_bytes(scene.composite()), "image/png"),
        "disparity": ("d.pfm", pfm_bytes(scene.disparity()), "application/octet-stream"),
    })
    assert resp.status_code == 200
    return scene, resp.json()


class TestHealth:
    def test_ok(self, client):
        resp = client.get("/health")
        assert resp.status_code == 200
        assert resp.text == "ok"


class TestSession:
    def test_created_with_dims(self, session):
        _, meta = session
        assert meta["width"] == 96 and meta["height"] == 96
        assert meta["session_id"]

    def test_oversize_rejected(self, client, monkeypatch):
        monkeypatch.setattr(service, "MAX_PIXELS", 1000)
        resp = client.post("/session", files={
            "image": ("img.png", png_bytes(np.zeros((64, 64, 3))), "image/png")})
        assert resp.status_code == 413

    def test_bad_image_rejected(self, client):
        resp = client.post("/session", files={"image": ("x.png", b"not a png", "image/png")})
        assert resp.status_code == 400


class TestRender:
    def test_identity_at_k_zero(self, client, session):
        scene, meta = session
        resp = client.post("/render", json={"session_id": meta["session_id"],
                                            "K": 0.0, "d_f": 0.5})
        assert resp.status_code == 200
        out = np.asarray(Image.open(io.BytesIO(resp.content)), dtype=np.float64) / 255.0
        assert out.shape == (96, 96, 3)  # below the preview cap, no resize
        assert np.abs(out - scene.composite()).max() <= 1.5 / 255

    def test_deterministic_bytes(self, client, session):
        _, meta = session
        body = {"session_id": meta["session_id"], "K": 8.0, "focus_point": [10, 10]}
        a = client.post("/render", json=body)
        b = client.post("/render", json=body)
        assert a.status_code == 200
        assert a.content == b.content
        assert "X-Refocus-Df" in a.headers

    def test_unknown_session(self, client):
        resp = client.post("/render", json={"session_id": "nope", "K": 1.0, "d_f": 0.5})
        assert resp.status_code == 404

    def test_requires_exactly_one_focus(self, client, session):
        _, meta = session
        resp = client.post("/render", json={"session_id": meta["session_id"], "K": 1.0})
        assert resp.status_code == 400
        resp = client.post("/render", json={"session_id": meta["session_id"], "K": 1.0,
                                            "d_f": 0.5, "focus_point": [1, 1]})
        assert resp.status_code == 400

    def test_invalid_params_rejected(self, client, session):
        _, meta = session
        for patch in ({"K": -1.0}, {"gamma": 9.0}, {"blades": 2}, {"quality": "huge"},
                      {"mode": "x"}, {"nr_mode": "x"}):
            body = {"session_id": meta["session_id"], "K": 5.0, "d_f": 0.5}
            body.update(patch)
            resp = client.post("/render", json=body)
            assert resp.status_code == 400, patch

    def test_missing_disparity_rejected(self, client):
        resp = client.post("/session", files={
            "image": ("img.png", png_bytes(np.zeros((48, 48, 3)) + 0.5), "image/png")})
        sid = resp.json()["session_id"]
        resp = client.post("/render", json={"session_id": sid, "K": 2.0, "d_f": 0.5})
        assert resp.status_code == 400
        assert "disparity" in resp.json()["error"]


class TestErrormap:
    def test_png_returned(self, client, session):
        scene, meta = session
        resp = client.get("/errormap", params={"session_id": meta["session_id"],
                                               "K": 10.0, "d_f": scene.d_bg})
        assert resp.status_code == 200
        assert resp.headers["content-type"] == "image/png"
        arr = np.asarray(Image.open(io.BytesIO(resp.content)))
        assert arr.shape == (96, 96, 3)
        assert arr.max() > 0  # a depth boundary exists, so the map is nonempty


class TestPreviewFullAgreement:
    def test_structural_agreement(self, client):
        from refocus.metrics import psnr

        scene = generate_scene(3, 240, 180)  # force a real preview downscale
        resp = client.post("/session", files={
            "image": ("i.png", png_bytes(scene.composite()), "image/png"),
            "disparity": ("d.pfm", pfm_bytes(scene.disparity()), "application/octet-stream")})
        sid = resp.json()["session_id"]
        monkey = service.PREVIEW_MAX_DIM
        try:
            service.PREVIEW_MAX_DIM = 120  # shrink the cap instead of uploading 768px+
            resp2 = client.post("/session", files={
                "image": ("i.png", png_bytes(scene.composite()), "image/png"),
                "disparity": ("d.pfm", pfm_bytes(scene.disparity()), "application/octet-stream")})
            sid = resp2.json()["session_id"]
        finally:
            service.PREVIEW_MAX_DIM = monkey
        body = {"session_id": sid, "K": 10.0, "d_f": scene.d_bg, "quality": "preview"}
        preview = client.post("/render", json=body)
        body["quality"] = "full"
        full = client.post("/render", json=body)
        pv = np.asarray(Image.open(io.BytesIO(preview.content)), dtype=np.float64) / 255.0
        fl = np.asarray(Image.open(io.BytesIO(full.content)), dtype=np.float64) / 255.0
        down = resize_bilinear(fl, pv.shape[1], pv.shape[0])
        assert psnr(pv, down) >= 30.0
