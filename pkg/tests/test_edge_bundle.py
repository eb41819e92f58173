import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kiteplan import edge_bundle as eb
from kiteplan.bench.validate import rk4_step
from kiteplan.dynamics import MODELS, SystemId

from oracles import key_ball_scan


def test_record_sizes_follow_the_fixed_layout():
    # key + control as float64, one uint32 step count, terminal state as float64
    expected = {SystemId.UC: 8 * (1 + 2) + 4 + 8 * 3,
                SystemId.SOC: 8 * (3 + 2) + 4 + 8 * 5,
                SystemId.DI: 8 * (3 + 3) + 4 + 8 * 6}
    assert {s: eb.record_size(m) for s, m in MODELS.items()} == expected
    assert expected == {SystemId.UC: 52, SystemId.SOC: 84, SystemId.DI: 100}
    # magic(8) version(4) code(4) dt(8) t_max(8) seed(8) count(8) three dims(12)
    assert eb.HEADER_SIZE == 60


def test_header_fields_are_little_endian(small_bundles):
    raw = eb.to_bytes(small_bundles[SystemId.SOC])
    assert raw[:8] == b"KITEBNDL"
    version, code = struct.unpack_from("<II", raw, 8)
    dt, t_max = struct.unpack_from("<dd", raw, 16)
    seed, n = struct.unpack_from("<QQ", raw, 32)
    assert (version, dt, t_max, seed, n) == (1, 0.1, 3.0, 7, 10_000)
    assert code == MODELS[SystemId.SOC].code
    first_key = struct.unpack_from("<3d", raw, 60)
    assert first_key == tuple(small_bundles[SystemId.SOC].keys[0])


@pytest.mark.parametrize("sid", list(SystemId), ids=lambda s: s.value)
def test_round_trip_is_bitwise(sid, small_bundles, tmp_path):
    b = small_bundles[sid]
    path = tmp_path / "b.bin"
    eb.save(b, path)
    raw = path.read_bytes()
    assert len(raw) == eb.HEADER_SIZE + len(b) * eb.record_size(b.model)
    back = eb.load(path)
    assert eb.to_bytes(back) == raw
    for f in ("keys", "controls", "steps", "terminals"):
        assert np.array_equal(getattr(back, f), getattr(b, f))


def test_full_di_file_size(bundles, tmp_path):
    path = tmp_path / "di.bin"
    eb.save(bundles[SystemId.DI], path)
    assert path.stat().st_size == 60 + 100_000 * 100


def test_load_errors(small_bundles):
    raw = eb.to_bytes(small_bundles[SystemId.UC])
    with pytest.raises(eb.BundleFormatError, match="system mismatch"):
        eb.from_bytes(raw, expect_system="SOC")
    with pytest.raises(eb.BundleFormatError, match="magic"):
        eb.from_bytes(b"NOTABNDL" + raw[8:])
    bad_version = raw[:8] + struct.pack("<I", 99) + raw[12:]
    with pytest.raises(eb.BundleFormatError, match="version"):
        eb.from_bytes(bad_version)
    with pytest.raises(eb.BundleFormatError, match="size"):
        eb.from_bytes(raw[:-1])
    with pytest.raises(eb.BundleFormatError):
        eb.from_bytes(raw[:20])


def test_generation_is_seed_deterministic():
    m = MODELS[SystemId.SOC]
    a = eb.generate_bundle(m, 500, seed=3)
    b = eb.generate_bundle(m, 500, seed=3)
    c = eb.generate_bundle(m, 500, seed=4)
    assert eb.to_bytes(a) == eb.to_bytes(b)
    assert eb.to_bytes(a) != eb.to_bytes(c)


def test_generation_rejects_bad_sizes():
    with pytest.raises(ValueError):
        eb.generate_bundle(MODELS[SystemId.UC], 0)


def _python_propagate(model, x, u, n):
    x = [float(v) for v in x]
    for _ in range(n):
        x = rk4_step(model, x, [float(v) for v in u])
    return np.array(x)


@pytest.mark.parametrize("sid", list(SystemId), ids=lambda s: s.value)
def test_stored_edges_match_an_independent_integrator(sid, small_bundles):
    b = small_bundles[sid]
    m = b.model
    rng = np.random.default_rng(0)
    for i in rng.choice(len(b), 40, replace=False):
        xf = _python_propagate(m, b.start_state(i), b.controls[i], int(b.steps[i]))
        d = np.abs(xf - b.terminals[i])
        d[m.angle_mask] = np.minimum(d[m.angle_mask], 2 * math.pi - d[m.angle_mask])
        assert d.max() < 1e-9


def test_verify_flags_tampered_edges(small_bundles):
    b = small_bundles[SystemId.SOC]
    assert eb.verify_bundle(b).size == 0
    bad = eb.from_bytes(eb.to_bytes(b))
    bad.terminals[5, 0] += 1e-6
    bad.controls[9, 0] = 3.0
    bad.steps[11] = 31
    assert eb.verify_bundle(bad).tolist() == [5, 9, 11]


def test_instantiate_translates_the_endpoint(small_bundles):
    b = small_bundles[SystemId.UC]
    at = np.array([4.0, -2.0, b.keys[3, 0]])
    u, dur, xf = eb.instantiate(b, 3, at)
    assert dur == pytest.approx(b.steps[3] * 0.1)
    ref = _python_propagate(b.model, at, u, int(b.steps[3]))
    np.testing.assert_allclose(xf[:2], ref[:2], atol=1e-9)


@settings(max_examples=150, deadline=None)
@given(sid=st.sampled_from(list(SystemId)), seed=st.integers(0, 2**31),
       delta=st.sampled_from([0.0, 0.05, 0.15, 0.3, 1.0, 3.3, 7.0]))
def test_radius_query_matches_linear_scan(sid, seed, delta, small_bundles_subset):
    b = small_bundles_subset[sid]
    index = eb.KeyIndex(b)
    rng = np.random.default_rng(seed)
    q = b.model.sample_rem(rng)
    if rng.random() < 0.3:
        q = b.keys[rng.integers(len(b))].copy()
    got = eb.query_radius(index, q, delta)
    assert got == key_ball_scan(b.keys.tolist(), q.tolist(), index.weights.tolist(),
                                index.angle_mask.tolist(), delta)


def test_query_near_the_angle_seam(small_bundles):
    b = small_bundles[SystemId.UC]
    index = eb.KeyIndex(b)
    for q in (math.pi, -math.pi + 1e-12, 3.0):
        ids = index.query([q], 0.3)
        assert np.array_equal(ids, index.brute_force([q], 0.3))
        assert np.any(b.keys[ids, 0] > 0) and np.any(b.keys[ids, 0] < 0)


def test_query_rejects_negative_radius(small_bundles):
    with pytest.raises(ValueError):
        eb.KeyIndex(small_bundles[SystemId.DI]).query([0, 0, 0], -1.0)


def test_query_results_are_sorted_ids(small_bundles):
    index = eb.KeyIndex(small_bundles[SystemId.DI])
    ids = index.query([0.1, -0.2, 0.0], 0.2)
    assert ids.size > 0 and np.all(np.diff(ids) > 0)
