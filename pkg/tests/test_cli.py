import json
import os
import random

import pytest

from hrgc import cli
from hrgc.errors import HrgcError


def run(argv):
    return cli.main(argv)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """profile + encoded 165-byte file, q=4 MSR."""
    root = tmp_path_factory.mktemp("cli")
    profile = str(root / "profile.txt")
    assert run(["profile", "--mode", "msr", "--q", "4", "--m", "37",
                "--alphas", "6,5,4,3", "--seed", "1", "--out", profile]) == 0
    payload = bytes(random.Random(5).randrange(256) for _ in range(165))
    src = root / "input.bin"
    src.write_bytes(payload)
    cluster = str(root / "cluster")
    assert run(["encode", "--profile", profile, "--input", str(src),
                "--outdir", cluster]) == 0
    return {"root": root, "profile": profile, "cluster": cluster,
            "payload": payload}


def test_end_to_end_round_trip(workspace):
    root = workspace["root"]
    cluster = workspace["cluster"]
    assert run(["fail", "--cluster", cluster, "--node", "7"]) == 0
    assert run(["repair", "--cluster", cluster, "--node", "7",
                "--mode", "plain"]) == 0
    out = str(root / "out.bin")
    assert run(["reconstruct", "--cluster", cluster, "--mode", "plain",
                "--out", out]) == 0
    assert open(out, "rb").read() == workspace["payload"]


def test_verify_consistent_cluster(workspace):
    assert run(["verify", "--cluster", workspace["cluster"]]) == 0


def test_repair_with_adversary_escalates(workspace):
    cluster = workspace["cluster"]
    jsonp = str(workspace["root"] / "repair.json")
    assert run(["fail", "--cluster", cluster, "--node", "9"]) == 0
    code = run(["repair", "--cluster", cluster, "--node", "9",
                "--mode", "detect",
                "--adversary", "nodes=2,5;strategy=random;seed=3",
                "--json", jsonp])
    assert code == 0
    report = json.load(open(jsonp))
    assert report["escalated"] is True
    assert report["corrupted"] == [2, 5]
    assert report["ok"] is True
    # cluster is intact again for subsequent tests
    assert run(["verify", "--cluster", cluster]) == 0


def test_reconstruct_with_adversary(workspace):
    root = workspace["root"]
    out = str(root / "out2.bin")
    jsonp = str(root / "rec.json")
    # node 6 is among the staged responders (ascending ids)
    code = run(["reconstruct", "--cluster", workspace["cluster"],
                "--mode", "detect",
                "--adversary", "nodes=6;strategy=random;seed=9",
                "--out", out, "--json", jsonp])
    assert code == 0
    report = json.load(open(jsonp))
    assert report["escalated"] is True and report["corrupted"] == [6]
    assert open(out, "rb").read() == workspace["payload"]


def test_alarm_without_escalation_exit_code(workspace):
    code = run(["reconstruct", "--cluster", workspace["cluster"],
                "--mode", "detect", "--policy", "report",
                "--adversary", "nodes=4;strategy=random;seed=1",
                "--out", str(workspace["root"] / "never.bin")])
    assert code == cli.EXIT_ALARM


def test_decode_failure_exit_code(workspace, tmp_path):
    # an adversary far beyond every budget forces the failure exit path
    code = run(["reconstruct", "--cluster", workspace["cluster"],
                "--mode", "recover",
                "--adversary", "nodes=0,1,2,3,4,5,6,7,8,9,10,11;seed=2",
                "--out", str(tmp_path / "never.bin")])
    assert code == cli.EXIT_DECODE_FAILURE


def test_capability_csv(tmp_path):
    out = str(tmp_path / "cap.csv")
    assert run(["capability", "--q-range", "4:16:2", "--out", out]) == 0
    lines = [ln for ln in open(out).read().split("\n") if ln]
    assert lines[1] == "q,alphas,ds,tau_hmsr,tau_rsmsr"
    assert lines[2].startswith('4,')
    assert len(lines) == 2 + 7


def test_bad_input_exit_codes(tmp_path):
    # invalid alpha
    code = run(["profile", "--mode", "msr", "--q", "4", "--m", "37",
                "--alphas", "6,6,4,3", "--out", str(tmp_path / "p.txt")])
    assert code == cli.EXIT_BAD_INPUT
    # io error
    code = run(["encode", "--profile", str(tmp_path / "missing.txt"),
                "--input", str(tmp_path / "nope"),
                "--outdir", str(tmp_path / "c")])
    assert code == cli.EXIT_IO


def test_packing_round_trip_every_length():
    # q=4 packs arbitrary bytes (two nibbles each); q=3 packs one byte per
    # symbol, so both payload bytes and the length-prefix bytes must stay
    # below q^2 -- hence the tiny lengths
    for q, B, lengths in ((4, 1320, (0, 1, 7, 164, 165)), (3, 54, (0, 1, 7, 8))):
        for n in lengths:
            if q == 4:
                data = bytes((7 * i + 1) % 256 for i in range(n))
            else:
                data = bytes((i * 3 + 1) % 9 for i in range(n))
            chunks = cli.pack_file(data, q, B)
            assert all(len(c) == B for c in chunks)
            assert cli.unpack_file(chunks, q) == data


def test_packing_rejects_large_bytes_for_small_q():
    with pytest.raises(HrgcError):
        cli.bytes_to_symbols(bytes([200]), 3)
    # q=16 admits every byte value
    assert cli.bytes_to_symbols(bytes([255, 0]), 16) == [255, 0]


def test_multichunk_packing():
    data = bytes(range(256)) * 4
    chunks = cli.pack_file(data, 4, 1320)
    assert len(chunks) == 2
    assert cli.unpack_file(chunks, 4) == data
