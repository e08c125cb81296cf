import json
import struct

import numpy as np
import pytest
import yaml

from conftest import make_windows
from pdmsynth import container
from pdmsynth.benchmark import benchmark_config, tiny_config
from pdmsynth.config import ConfigError, config_from_dict, load_config
from pdmsynth.denoiser import forward, init_params, ConSignal
from pdmsynth.store import ArtifactStore, dir_digest, stage_key


# -- container -------------------------------------------------------------------

def test_container_header_layout():
    buf = container.dumps("windows", (2, 3), {"a": np.arange(6, dtype=np.float32).reshape(2, 3)})
    assert buf[:4] == b"PDMS"
    assert struct.unpack_from("<I", buf, 4) == (1,)
    kind, dims, arrays = container.loads(buf)
    assert kind == "windows" and dims == (2, 3)
    np.testing.assert_array_equal(arrays["a"], np.arange(6).reshape(2, 3))
    assert buf[-4:] == struct.pack("<f", 5.0)


def test_container_rejects_garbage():
    with pytest.raises(container.ContainerError, match="magic"):
        container.loads(b"NOPE" + b"\0" * 20)
    good = container.dumps("x", (1,), {"a": np.zeros(4)})
    with pytest.raises(container.ContainerError):
        container.loads(good[:-3])
    with pytest.raises(container.ContainerError):
        container.loads(good + b"\0")


def test_denoiser_roundtrip(tmp_path, rng):
    p = init_params(0, l=16, d=2, h=4, R=3, e=8, B=2, T=10, dilations=(1, 2, 4)).astype(np.float32)
    for k, v in p.arrays.items():
        p.arrays[k] = (v + rng.normal(0, 0.1, v.shape)).astype(np.float32)
    p.block_enabled = [True, False, True]
    container.save_denoiser(tmp_path / "m.pdms", p)
    q = container.load_denoiser(tmp_path / "m.pdms")
    assert q.dims == p.dims and q.dilations == p.dilations and q.block_enabled == p.block_enabled
    assert list(q.arrays) == list(p.arrays)
    x = rng.normal(size=(16, 2))
    c = ConSignal.make(1, 2, 1)
    assert np.array_equal(forward(p, x, 3, c), forward(q, x, 3, c))
    with pytest.raises(container.ContainerError, match="windows"):
        container.load_windows(tmp_path / "m.pdms")


def test_windows_roundtrip(tmp_path, rng):
    ws = make_windows(rng.normal(size=(5, 8, 2)).astype(np.float32), bearing_ids=[3, 3, 4, 4, 4],
                      faulty=[False, True, False, False, True])
    container.save_windows(tmp_path / "w.pdms", ws)
    back = container.load_windows(tmp_path / "w.pdms")
    assert [(w.bearing_id, w.window_index, w.is_faulty) for w in back] == \
        [(w.bearing_id, w.window_index, w.is_faulty) for w in ws]
    for a, b in zip(ws, back):
        np.testing.assert_array_equal(a.values, b.values)


# -- store ----------------------------------------------------------------------

def test_store_roundtrip_and_append_only_index(tmp_path):
    st = ArtifactStore(tmp_path)
    key = stage_key("ingest", {"a": 1}, {})
    assert key == stage_key("ingest", {"a": 1}, {}) != stage_key("ingest", {"a": 2}, {})
    assert st.lookup("ingest", key) is None
    p = st.begin("ingest", key)
    (p / "x.txt").write_text("hello")
    assert st.lookup("ingest", key) is None  # not committed yet
    dig = st.commit("ingest", key, "ingest")
    assert st.lookup("ingest", key) == p and st.digest(p) == dig == dir_digest(p)
    before = (tmp_path / "index.jsonl").read_text()
    k2 = stage_key("partition", {}, {"ingest": dig})
    st.begin("partition", k2)
    st.commit("partition", k2)
    after = (tmp_path / "index.jsonl").read_text()
    assert after.startswith(before) and len(st.entries()) == 2


def test_dir_digest_tracks_content(tmp_path):
    (tmp_path / "a").write_text("1")
    d1 = dir_digest(tmp_path)
    (tmp_path / "a").write_text("2")
    assert dir_digest(tmp_path) != d1


# -- config -------------------------------------------------------------------------

def test_config_roundtrip_via_yaml(tmp_path):
    cfg = tiny_config(out=str(tmp_path / "o"))
    (tmp_path / "c.yaml").write_text(yaml.safe_dump(cfg.to_dict()))
    back = load_config(tmp_path / "c.yaml").validate()
    assert back.to_dict() == json.loads(json.dumps(cfg.to_dict()))
    assert back.horizon == 4 * 64


def test_default_horizon_is_eight_windows():
    assert config_from_dict({"partition": {"o": None}}).horizon == 8 * 2560
    assert benchmark_config().validate().partition.gamma == 0.3


@pytest.mark.parametrize("data,msg", [
    ({"partition": {"gamma": 0.0}}, "gamma"),
    ({"partition": {"gamma": 1.0}}, "gamma"),
    ({"bogus": 1}, "unknown key"),
    ({"train": {"epochs": 3, "nope": 1}}, "unknown key"),
    ({"source": {"kind": "pronostia", "path": "/definitely/missing"}}, "does not exist"),
    ({"source": {"kind": "csv"}}, "source.kind"),
    ({"mode": "sideways"}, "mode"),
    ({"partition": {"k": 2, "complete_run_ids": [0]}}, "complete_run_ids"),
    ({"train": {"learning_rate": 2.0}}, "learning_rate"),
    ({"seeds": []}, "seeds"),
])
def test_config_rejections(data, msg):
    with pytest.raises(ConfigError, match=msg):
        config_from_dict(data).validate()


def test_config_rejects_non_mapping():
    with pytest.raises(ConfigError):
        config_from_dict({"train": [1, 2]})
