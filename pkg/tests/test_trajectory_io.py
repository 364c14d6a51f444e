import hashlib
import struct

import numpy as np
import pytest

from app.errors import TrajectoryFormatError
from app.services.sde_simulator import BLOWUP, SimConfig, simulate
from app.services.trajectory_io import (
    FLAG_BLOWUP,
    FLAG_DRIFT,
    FLAG_NOISE,
    HEADER_SIZE,
    MAGIC,
    Manifest,
    decode_trajectory,
    encode_trajectory,
    expected_size,
    file_sha256,
    read_manifest,
    read_trajectory,
    trajectory_name,
    write_manifest,
    write_member,
    write_trajectory,
)

X2 = (0.0, 0.0, 1.0)


@pytest.fixture
def traj():
    return simulate(SimConfig(N=4, T=0.05, F=X2, seed=9), stream=3)


def test_header_layout(traj):
    data = encode_trajectory(traj)
    assert data[:5] == MAGIC
    N, dt, steps, seed, flags, stream = struct.unpack_from("<IdQQBQ", data, len(MAGIC))
    assert (N, dt, steps, seed, stream) == (4, traj.dt, traj.config.steps, 9, 3)
    assert flags == FLAG_DRIFT | FLAG_NOISE
    assert len(data) == expected_size(4, steps, drift=True, noise=True)
    # u_0 и steps состояний, плюс дрейф и шум по steps строк
    assert len(data) == HEADER_SIZE + (steps + 1) * 4 * 16 + 2 * steps * 4 * 16


def test_decode_restores_records(traj):
    back = decode_trajectory(encode_trajectory(traj), traj.config)
    assert back.stream == 3
    assert np.array_equal(back.states, traj.states)
    assert np.array_equal(back.drift, traj.drift)
    assert np.array_equal(back.noise, traj.noise)
    assert back.completed


def test_decode_without_config_reads_states(traj):
    back = decode_trajectory(encode_trajectory(traj))
    assert back.N == 4
    assert back.dt == traj.dt
    assert np.array_equal(back.states, traj.states)


def test_blowup_flag():
    blown = simulate(SimConfig(N=4, T=0.05, F=X2, blowup_threshold=1e-3))
    data = encode_trajectory(blown)
    assert struct.unpack_from("<IdQQBQ", data, len(MAGIC))[4] & FLAG_BLOWUP
    back = decode_trajectory(data, blown.config)
    assert back.status == BLOWUP
    assert back.blowup_step == blown.blowup_step


def test_no_optional_blocks():
    bare = simulate(SimConfig(N=4, T=0.05, F=X2, record_drift=False, record_noise=False))
    data = encode_trajectory(bare)
    assert len(data) == HEADER_SIZE + bare.records * 4 * 16
    assert decode_trajectory(data).drift is None


@pytest.mark.parametrize(
    "mutate, code",
    [
        (lambda d: b"XXXX1" + d[5:], "bad_magic"),
        (lambda d: d[:-8], "bad_length"),
        (lambda d: d[:10], "bad_magic"),
    ],
)
def test_corrupt_files(traj, mutate, code):
    with pytest.raises(TrajectoryFormatError) as exc:
        decode_trajectory(mutate(encode_trajectory(traj)))
    assert exc.value.code == code


def test_config_mismatch(traj):
    other = SimConfig(N=8, T=0.05, F=X2)
    with pytest.raises(TrajectoryFormatError) as exc:
        decode_trajectory(encode_trajectory(traj), other)
    assert exc.value.code == "config_mismatch"


def test_seed_mismatch(traj):
    other = SimConfig(N=4, T=0.05, F=X2, seed=10)
    with pytest.raises(TrajectoryFormatError) as exc:
        decode_trajectory(encode_trajectory(traj), other)
    assert exc.value.code == "config_mismatch"


def test_file_replays_from_seed_and_stream(traj, tmp_path):
    path = tmp_path / trajectory_name(traj.stream)
    write_trajectory(path, traj)
    back = read_trajectory(path, traj.config)
    replay = simulate(back.config, back.stream)
    assert np.array_equal(replay.states, back.states)


def test_write_and_hash(traj, tmp_path):
    path = tmp_path / "sub" / trajectory_name(traj.stream)
    digest = write_trajectory(path, traj)
    assert path.name == "traj_00003.wasb"
    assert digest == hashlib.sha256(path.read_bytes()).hexdigest() == file_sha256(path)
    assert np.array_equal(read_trajectory(path).states, traj.states)


def test_same_config_same_bytes(tmp_path):
    config = SimConfig(N=4, T=0.05, F=X2, seed=12)
    first = write_member(tmp_path / "a", simulate(config, 1))
    second = write_member(tmp_path / "b", simulate(config, 1))
    assert first == second
    assert first.name == "traj_00001.wasb"


def test_manifest_round_trip(tmp_path):
    manifest = Manifest(
        name="ou",
        kind="simulate",
        config={"N": 4, "F": [0.0]},
        code_version="test",
        seed=2**64 - 1,
        outputs={"b.wasb": "2" * 64, "a.wasb": "1" * 64},
    )
    path = write_manifest(tmp_path / "manifest.json", manifest)
    text = path.read_text(encoding="utf-8")
    assert text.index('"a.wasb"') < text.index('"b.wasb"')
    back = read_manifest(path)
    assert back == manifest
    assert back.content_hash == manifest.content_hash


def test_bad_manifest(tmp_path):
    path = tmp_path / "manifest.json"
    path.write_text('{"name": "x"}', encoding="utf-8")
    with pytest.raises(TrajectoryFormatError) as exc:
        read_manifest(path)
    assert exc.value.code == "bad_manifest"
