import random

import pytest

from conftest import random_message
from hrgc import sim
from hrgc.errors import InvalidParams, LengthMismatch
from hrgc.matrices import profile_digest


def make_cluster(profile, seed, directory=None):
    return sim.cluster_init(profile, random_message(profile, seed),
                            directory=directory)


def test_cluster_init_shapes(q3_msr, q4_msr):
    c3 = make_cluster(q3_msr, 1)
    assert len(c3.nodes) == 9
    assert all(len(n.y) == 3 and len(n.y[0]) == 6 for n in c3.nodes)
    c4 = make_cluster(q4_msr, 1)
    assert len(c4.nodes) == 16
    assert all(len(n.y) == 4 and len(n.y[0]) == 60 for n in c4.nodes)


def test_cluster_init_length_check(q3_msr):
    with pytest.raises(LengthMismatch):
        sim.cluster_init(q3_msr, [0] * 53)


def test_repair_plain_restores_bytes(q3_msr):
    cluster = make_cluster(q3_msr, 2)
    original = [row[:] for row in cluster.nodes[5].y]
    sim.fail_node(cluster, 5)
    report, log = sim.repair(cluster, 5, "plain")
    assert report.ok
    assert cluster.nodes[5].y == original
    assert log.meta["op"] == "repair"


def test_repair_requires_failed_node(q3_msr):
    cluster = make_cluster(q3_msr, 3)
    with pytest.raises(InvalidParams):
        sim.repair(cluster, 0, "plain")


def test_detect_escalates_to_recovery(q4_msr):
    cluster = make_cluster(q4_msr, 4)
    truth = [row[:] for row in cluster.nodes[3].y]
    sim.fail_node(cluster, 3)
    adversary = sim.AdversarySpec(nodes=frozenset({2, 5}), seed=11)
    report, log = sim.repair(cluster, 3, "detect", adversary)
    assert log.meta.get("escalated")
    assert report.mode == "recover"
    assert report.ok
    assert cluster.nodes[3].y == truth
    assert set(report.corrupted) == {2, 5}
    assert cluster.known_corrupt >= {2, 5}


def test_overwhelming_adversary_never_silent(q3_msr):
    # budget floor((9 - 2 - 1)/2) = 3; four same-layer attackers must yield
    # an explicit failure or a correct repair, never silent corruption
    for seed in range(6):
        cluster = make_cluster(q3_msr, 50 + seed)
        truth = [row[:] for row in cluster.nodes[0].y]
        sim.fail_node(cluster, 0)
        evil = frozenset(random.Random(seed).sample(range(1, 9), 4))
        adversary = sim.AdversarySpec(nodes=evil, strategy="layer", layer=2,
                                      seed=seed)
        report, _ = sim.repair(cluster, 0, "recover", adversary)
        if report.ok:
            assert cluster.nodes[0].y == truth
        else:
            assert report.failure is not None
            assert cluster.nodes[0] is None


def test_reconstruct_plain_and_detect_exact(q3_msr, q3_mbr):
    for profile in (q3_msr, q3_mbr):
        cluster = make_cluster(profile, 6)
        for mode in ("plain", "detect"):
            report, log = sim.reconstruct(cluster, mode)
            assert report.ok
            assert report.message == cluster.truth_message
            assert log.meta["matches_truth"]


def test_reconstruct_detect_escalation(q4_mbr):
    cluster = make_cluster(q4_mbr, 7)
    adversary = sim.AdversarySpec(nodes=frozenset({1}), seed=21)
    report, log = sim.reconstruct(cluster, "detect", adversary)
    assert log.meta.get("escalated")
    assert report.ok and report.message == cluster.truth_message
    assert report.corrupted == frozenset({1})


def test_adversary_containment(q3_msr):
    cluster = make_cluster(q3_msr, 8)
    before = {g: [row[:] for row in cluster.nodes[g].y] for g in range(9)}
    adversary = sim.AdversarySpec(nodes=frozenset({2, 3}), seed=5)
    sim.reconstruct(cluster, "recover", adversary)
    sim.fail_node(cluster, 7)
    sim.repair(cluster, 7, "recover", adversary)
    for g in range(9):
        assert cluster.nodes[g].y == before[g]


def test_determinism(q3_msr):
    results = []
    for _ in range(2):
        cluster = make_cluster(q3_msr, 9)
        sim.fail_node(cluster, 2)
        adversary = sim.AdversarySpec(nodes=frozenset({4}), seed=13)
        rep1, log1 = sim.repair(cluster, 2, "detect", adversary)
        rep2, log2 = sim.reconstruct(cluster, "detect", adversary)
        results.append((rep1.mode, rep1.ok, sorted(rep1.corrupted),
                        rep2.ok, rep2.message, log1.records, log2.records))
    assert results[0] == results[1]


def test_bandwidth_audit_msr_plain(q4_msr):
    cluster = make_cluster(q4_msr, 10)
    sim.fail_node(cluster, 6)
    _, log = sim.repair(cluster, 6, "plain")
    audit = sim.bandwidth_audit(log, q4_msr)
    assert audit["ok"]
    per_layer = audit["phases"]["plain"]["per_layer"]
    for l in range(4):
        # d_l * (A / alpha_l) = 2A = 120 per layer
        assert per_layer[l]["actual"] == 120
    assert audit["phases"]["plain"]["total_actual"] == 480


def test_bandwidth_audit_mbr_plain(q4_mbr):
    cluster = make_cluster(q4_mbr, 11)
    sim.fail_node(cluster, 6)
    _, log = sim.repair(cluster, 6, "plain")
    audit = sim.bandwidth_audit(log, q4_mbr)
    assert audit["ok"]
    per_layer = audit["phases"]["plain"]["per_layer"]
    for l in range(4):
        assert per_layer[l]["actual"] == 60     # alpha_l * (A/alpha_l) = A
    assert audit["phases"]["plain"]["total_actual"] == 240


def test_bandwidth_audit_reconstruct(q4_msr):
    cluster = make_cluster(q4_msr, 30)
    _, log = sim.reconstruct(cluster, "plain")
    audit = sim.bandwidth_audit(log, q4_msr)
    assert audit["ok"]
    per_layer = audit["phases"]["plain"]["per_layer"]
    for l in range(4):
        assert per_layer[l]["actual"] == q4_msr.k[l] * q4_msr.A
    _, dlog = sim.reconstruct(cluster, "detect")
    daudit = sim.bandwidth_audit(dlog, q4_msr)
    assert daudit["ok"]
    for l in range(4):
        assert (daudit["phases"]["detect"]["per_layer"][l]["actual"]
                == (q4_msr.k[l] + 1) * q4_msr.A)


def test_bandwidth_audit_detect_increment(q4_msr):
    cluster = make_cluster(q4_msr, 12)
    sim.fail_node(cluster, 1)
    _, plain_log = sim.repair(cluster, 1, "plain")
    sim.fail_node(cluster, 2)
    _, detect_log = sim.repair(cluster, 2, "detect")
    plain_total = plain_log.total_symbols("plain")
    detect_total = detect_log.total_symbols("detect")
    extra = sum(q4_msr.A // a for a in q4_msr.alpha)
    assert detect_total == plain_total + extra


def test_node_file_round_trip(q3_msr, tmp_path):
    cluster = make_cluster(q3_msr, 13, directory=str(tmp_path))
    data = (tmp_path / sim.node_filename(4)).read_bytes()
    assert data[:4] == b"HRGC"
    assert data[4] == 1
    assert data[5] == 0                                # msr
    assert int.from_bytes(data[6:8], "little") == 3    # q
    assert int.from_bytes(data[8:10], "little") == 4   # node id
    assert int.from_bytes(data[10:14], "little") == 8  # m
    assert tuple(data[14:17]) == (3, 2, 1)
    assert tuple(data[17:20]) == (4, 3, 2)
    assert data[20:28] == profile_digest(q3_msr)
    assert len(data) == 28 + 3 * 6
    state = sim.load_node(str(tmp_path / sim.node_filename(4)), q3_msr)
    assert state.node_id == 4
    assert state.y == cluster.nodes[4].y


def test_cluster_persistence_round_trip(q3_mbr, tmp_path):
    cluster = make_cluster(q3_mbr, 14, directory=str(tmp_path))
    sim.fail_node(cluster, 3)
    loaded = sim.load_cluster(str(tmp_path))
    assert loaded.profile.lam == q3_mbr.lam
    assert loaded.nodes[3] is None
    for g in range(9):
        if g != 3:
            assert loaded.nodes[g].y == cluster.nodes[g].y
    report, _ = sim.repair(loaded, 3, "plain")
    assert report.ok
    reloaded = sim.load_cluster(str(tmp_path))
    assert reloaded.nodes[3].y == report.y


def test_parse_adversary():
    spec = sim.parse_adversary("nodes=2,5;strategy=offset;seed=7;offset=3")
    assert spec.nodes == frozenset({2, 5})
    assert spec.strategy == "offset"
    assert spec.seed == 7 and spec.offset == 3
    with pytest.raises(InvalidParams):
        sim.parse_adversary("strategy=random")


def test_omniscient_collusion_defeats_detection(q3_msr):
    # two colluding helpers that know every encoding row can craft errors the
    # two-window comparison cannot see: repair finishes with no alarm and a
    # wrong result -- the reason row secrecy matters
    cluster = make_cluster(q3_msr, 15)
    truth = [row[:] for row in cluster.nodes[0].y]
    sim.fail_node(cluster, 0)
    adversary = sim.AdversarySpec(
        nodes=frozenset({1, 2}), strategy="consistent_pair",
        knowledge="omniscient", seed=17,
    )
    report, log = sim.repair(cluster, 0, "detect", adversary)
    assert report.ok
    assert "alarm" not in log.meta
    assert cluster.nodes[0].y != truth


def test_consistent_pair_requires_omniscience():
    with pytest.raises(InvalidParams):
        sim.AdversarySpec(nodes=frozenset({1, 2}), strategy="consistent_pair")
