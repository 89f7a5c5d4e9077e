import math

import numpy as np
import pytest

from rddi import dataset as ds


@pytest.fixture(scope="module")
def tiny():
    return ds.generate(2, 3, 0.1, 1.0, seed=7)


def test_generate_is_byte_deterministic(tmp_path, tiny):
    ds.save(tiny, tmp_path / "a.bin")
    ds.save(ds.generate(2, 3, 0.1, 1.0, seed=7), tmp_path / "b.bin")
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()


def test_generate_depends_on_seed(tiny):
    assert not np.array_equal(tiny.spacings, ds.generate(2, 3, 0.1, 1.0, seed=8).spacings)


def test_labels_satisfy_trace_rule():
    data = ds.generate(6, 20, 0.1, 1.0, seed=1)
    assert np.all(np.abs(np.exp(data.labels).sum(axis=1) - 6) <= 1e-8 * 6)
    assert np.all(np.diff(data.labels, axis=1) >= 0)
    assert np.all((data.spacings >= 0.1) & (data.spacings <= 1.0))
    ds.check_integrity(data)


def test_strong_interaction_labels():
    data = ds.generate(32, 1, 0.25, 0.25, seed=0)
    assert data.spacings[0] == 0.25
    assert data.labels[0, 0] < math.log(0.1)
    assert data.labels[0, 31] > math.log(1.5)


@pytest.mark.parametrize("args", [(2, 0, 0.1, 1.0), (2, 3, 0.0, 1.0), (2, 3, 0.5, 0.4)])
def test_generate_validates(args):
    with pytest.raises(ValueError):
        ds.generate(*args, seed=0)


def test_split_nine_to_one():
    data = ds.generate(2, 10, 0.1, 1.0, seed=3)
    train, test = ds.split(data, 0.9, seed=5)
    assert (len(train), len(test)) == (9, 1)
    merged = np.sort(np.concatenate([train.spacings, test.spacings]))
    assert np.array_equal(merged, np.sort(data.spacings))
    again, _ = ds.split(data, 0.9, seed=5)
    assert np.array_equal(again.spacings, train.spacings)


def test_split_rejects_empty_partition():
    data = ds.generate(2, 3, 0.1, 1.0, seed=3)
    with pytest.raises(ValueError):
        ds.split(data, 0.1)
    with pytest.raises(ValueError):
        ds.split(data, 1.0)


def test_save_load_round_trip(tmp_path, tiny):
    path = tmp_path / "d.bin"
    ds.save(tiny, path)
    back = ds.load(path)
    assert np.array_equal(back.images, tiny.images)
    assert np.array_equal(back.labels, tiny.labels)
    assert np.array_equal(back.spacings, tiny.spacings)
    assert (back.seed, back.transform, back.spacing_min, back.spacing_max) == (7, "ln", 0.1, 1.0)
    ds.save(back, tmp_path / "e.bin")
    assert (tmp_path / "e.bin").read_bytes() == path.read_bytes()


def test_layout_is_little_endian_records(tmp_path, tiny):
    path = tmp_path / "d.bin"
    ds.save(tiny, path)
    raw = path.read_bytes()
    assert raw[:8] == b"RDDIDSET"
    payload = np.frombuffer(raw[ds._HEADER.size :], dtype="<f8").reshape(3, 2 * 4 + 2 + 1)
    assert np.array_equal(payload[:, :4], tiny.images[:, 0].reshape(3, 4))
    assert np.array_equal(payload[:, -1], tiny.spacings)


def test_load_errors(tmp_path, tiny):
    path = tmp_path / "d.bin"
    ds.save(tiny, path)
    raw = path.read_bytes()
    (tmp_path / "magic.bin").write_bytes(b"XXXXXXXX" + raw[8:])
    (tmp_path / "trunc.bin").write_bytes(raw[:-3])
    (tmp_path / "head.bin").write_bytes(raw[:10])
    extra = bytearray(raw)
    extra[16] = 4  # count field: 3 -> 4
    (tmp_path / "count.bin").write_bytes(bytes(extra))
    for name in ("magic", "trunc", "head", "count"):
        with pytest.raises(ds.DatasetFormatError):
            ds.load(tmp_path / f"{name}.bin")


def test_integrity_check_flags_bad_label(tiny):
    bad = tiny.subset([0, 1, 2])
    bad.labels = bad.labels.copy()
    bad.labels[1, 0] += 1e-3
    with pytest.raises(ds.DatasetFormatError):
        ds.check_integrity(bad)
