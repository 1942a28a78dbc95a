"""Deterministic in-process storage cluster: node lifecycle, staged request
rounds as message exchanges, adversary injection, and flat-file persistence.

Every operation is a pure function of (cluster state, adversary spec, op
counter): adversaries draw from a Random seeded by (spec.seed, op counter),
and all helper sets are ascending-id deterministic.  Adversaries only perturb
outgoing copies; stored node state is never touched except when a finished
repair installs the replacement.  An alarm under the default escalate policy
always ends in either a recover-mode result or an explicit failure report.
"""

from __future__ import annotations

import os
import random
from dataclasses import dataclass, field as dfield

from . import hmbr, hmsr
from .errors import HrgcError, InvalidParams, LengthMismatch, NotEnoughHelpers
from .hmsr import HelpSymbolBatch, NodeState
from .linalg import solve_square, transpose
from .matrices import (
    CodeProfile,
    profile_digest,
    profile_from_text,
    profile_to_text,
)

NODE_MAGIC = b"HRGC"
NODE_VERSION = 1


def _op_rng(adversary, op_counter):
    return random.Random(adversary.seed * 1_000_003 + op_counter)


@dataclass(frozen=True)
class AdversarySpec:
    """Which nodes lie, and how.

    strategy: "random" (uniform resample), "offset" (add a constant),
    "layer" (random nonzero offsets in one layer only), "collusive_random"
    (shared stream, same effect as random), or "consistent_pair"
    (omniscient-only: craft repair-detect errors that the two-window
    comparison cannot see).
    knowledge: "own" nodes know only their own encoding rows; "omniscient"
    unlocks consistent_pair.
    activation: per-(layer, block) probability of perturbing.
    """
    nodes: frozenset
    strategy: str = "random"
    knowledge: str = "own"
    activation: float = 1.0
    seed: int = 0
    offset: int = 1
    layer: int | None = None

    def __post_init__(self):
        if self.strategy == "consistent_pair" and self.knowledge != "omniscient":
            raise InvalidParams("consistent_pair requires omniscient knowledge")


def parse_adversary(text: str) -> AdversarySpec:
    """Parse "nodes=2,5;strategy=random;seed=7;activation=1.0;..."."""
    kv = {}
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        key, _, val = part.partition("=")
        kv[key.strip()] = val.strip()
    if "nodes" not in kv:
        raise InvalidParams("adversary spec needs nodes=...")
    return AdversarySpec(
        nodes=frozenset(int(v) for v in kv["nodes"].split(",") if v),
        strategy=kv.get("strategy", "random"),
        knowledge=kv.get("knowledge", "own"),
        activation=float(kv.get("activation", "1.0")),
        seed=int(kv.get("seed", "0")),
        offset=int(kv.get("offset", "1")),
        layer=int(kv["layer"]) if "layer" in kv else None,
    )


@dataclass
class ExchangeLog:
    meta: dict = dfield(default_factory=dict)
    records: list = dfield(default_factory=list)  # (phase, requester, responder, level, symbols)

    def add(self, phase, requester, responder, level, symbols):
        self.records.append((phase, requester, responder, level, symbols))

    def total_symbols(self, phase=None):
        return sum(r[4] for r in self.records if phase is None or r[0] == phase)

    def responders(self, phase):
        return [(r[2], r[3]) for r in self.records if r[0] == phase]


class Cluster:
    def __init__(self, profile: CodeProfile, nodes, truth_message=None,
                 truth_nodes=None, directory=None):
        self.profile = profile
        self.nodes = list(nodes)              # NodeState | None per slot
        self.truth_message = truth_message
        self.truth_nodes = truth_nodes        # node id -> original Y
        self.known_corrupt = set()
        self.directory = directory
        self.op_counter = 0

    def live_ids(self):
        return [g for g, ns in enumerate(self.nodes) if ns is not None]

    def _engine(self):
        return hmsr if self.profile.mode == "msr" else hmbr


def cluster_init(profile: CodeProfile, message, retain_truth=True,
                 directory=None) -> Cluster:
    if len(message) != profile.B:
        raise LengthMismatch(f"message length {len(message)} != B={profile.B}")
    if profile.mode == "msr":
        nodes = hmsr.encode(hmsr.arrange_st(message, profile), profile)
    else:
        nodes = hmbr.encode_mbr(hmbr.arrange_m(message, profile), profile)
    cluster = Cluster(
        profile, nodes,
        truth_message=list(message) if retain_truth else None,
        truth_nodes={n.node_id: [row[:] for row in n.y] for n in nodes}
        if retain_truth else None,
        directory=directory,
    )
    if directory:
        save_cluster(cluster, directory)
    return cluster


def fail_node(cluster: Cluster, z: int):
    if cluster.nodes[z] is None:
        raise InvalidParams(f"node {z} already failed")
    cluster.nodes[z] = None
    if cluster.directory:
        _write_manifest(cluster)


# -- adversary machinery --------------------------------------------------------


def _activated(rng, spec, l):
    if spec.strategy == "layer" and l != spec.layer:
        return False
    return spec.activation >= 1.0 or rng.random() < spec.activation


def _perturb_symbol(F, rng, spec, value):
    if spec.strategy == "offset":
        return F.add(value, spec.offset or 1)
    if spec.strategy == "layer":
        return F.add(value, rng.randrange(1, F.order))
    return rng.randrange(F.order)  # random / collusive_random


def _corrupt_repair_batches(cluster, batches, spec, rng):
    F = cluster.profile.field
    out = []
    for b in batches:
        if spec is None or b.helper_id not in spec.nodes:
            out.append(b)
            continue
        symbols = dict(b.symbols)
        for (l, t) in sorted(symbols):
            if _activated(rng, spec, l):
                symbols[(l, t)] = _perturb_symbol(F, rng, spec, symbols[(l, t)])
        out.append(HelpSymbolBatch(helper_id=b.helper_id, level=b.level,
                                   symbols=symbols))
    return out


def _corrupt_recon_batches(cluster, batches, spec, rng):
    profile = cluster.profile
    F = profile.field
    out = []
    for b in batches:
        if spec is None or b.helper_id not in spec.nodes:
            out.append(b)
            continue
        rows = {l: list(row) for l, row in b.rows.items()}
        for l in sorted(rows):
            a = profile.alpha[l]
            for t in range(profile.blocks(l)):
                if _activated(rng, spec, l):
                    for c in range(t * a, (t + 1) * a):
                        rows[l][c] = _perturb_symbol(F, rng, spec, rows[l][c])
        out.append(HelpSymbolBatch(helper_id=b.helper_id, level=b.level,
                                   rows=rows))
    return out


def _apply_consistent_pair(cluster, z, batches, spec, rng):
    """Craft errors satisfying the two-window identity (needs the stacked
    encoding rows -- the omniscient override)."""
    profile = cluster.profile
    F = profile.field
    by_id = {b.helper_id: HelpSymbolBatch(b.helper_id, b.level, dict(b.symbols))
             for b in batches}
    for l in range(profile.q):
        d = profile.d[l]
        contributors = sorted(
            (b for b in by_id.values() if b.level >= l), key=lambda b: b.helper_id
        )[:d + 1]
        ids = [b.helper_id for b in contributors]
        corrupt_pos = [i for i, g in enumerate(ids) if g in spec.nodes]
        if len(corrupt_pos) < 2:
            continue
        if profile.mode == "msr":
            row = lambda g: profile.nu_row(g, l)
        else:
            row = lambda g: list(profile.mu_row(g, l))
        basis = [row(g) for g in ids[1:]]
        zeta = solve_square(F, transpose(basis), row(ids[0]))
        coeff = {0: 1}
        coeff.update({r: F.neg(zeta[r - 1]) for r in range(1, d + 1)})
        p1, p2 = corrupt_pos[0], corrupt_pos[1]
        if not coeff[p1] or not coeff[p2]:
            continue
        for t in range(profile.blocks(l)):
            e1 = rng.randrange(1, F.order)
            e2 = F.div(F.neg(F.mul(coeff[p1], e1)), coeff[p2])
            b1, b2 = by_id[ids[p1]], by_id[ids[p2]]
            b1.symbols[(l, t)] = F.add(b1.symbols[(l, t)], e1)
            b2.symbols[(l, t)] = F.add(b2.symbols[(l, t)], e2)
    return list(by_id.values())


# -- operations -------------------------------------------------------------------


def repair(cluster: Cluster, z: int, mode: str, adversary: AdversarySpec = None,
           policy: str = "escalate"):
    """Repair failed node z.  Returns (RepairReport, ExchangeLog)."""
    profile = cluster.profile
    if cluster.nodes[z] is not None:
        raise InvalidParams(f"node {z} is not failed")
    engine = cluster._engine()
    cluster.op_counter += 1
    rng = _op_rng(adversary, cluster.op_counter) if adversary else None
    log = ExchangeLog(meta={"op": "repair", "mode": mode, "target": z})

    def gather(phase, plan):
        batches = []
        for g, level in plan:
            batches.append(engine.helper_response(cluster.nodes[g], profile,
                                                  level, z))
            log.add(phase, z, g, level,
                    sum(profile.blocks(l) for l in range(level + 1)))
        if adversary and adversary.strategy == "consistent_pair":
            return _apply_consistent_pair(cluster, z, batches, adversary, rng)
        return _corrupt_repair_batches(cluster, batches, adversary, rng)

    live = cluster.live_ids()
    if mode in ("plain", "detect"):
        plan = engine.staged_request_plan(profile, mode, live)
        batches = gather(mode, plan)
        if profile.mode == "msr":
            fn = hmsr.regenerate_plain if mode == "plain" else hmsr.regenerate_detect
        else:
            fn = (hmbr.regenerate_mbr_plain if mode == "plain"
                  else hmbr.regenerate_mbr_detect)
        report = fn(z, batches, profile)
        if report.alarm and policy == "escalate":
            log.meta["alarm"] = report.alarm
            log.meta["escalated"] = True
            report = _repair_recover(cluster, z, gather, log)
    elif mode == "recover":
        report = _repair_recover(cluster, z, gather, log)
    else:
        raise InvalidParams(f"unknown repair mode {mode!r}")

    if report.ok:
        digest = profile_digest(profile)
        cluster.nodes[z] = NodeState(node_id=z, y=report.y, digest=digest)
        if cluster.directory:
            save_node(cluster.directory, profile, cluster.nodes[z])
            _write_manifest(cluster)
    cluster.known_corrupt |= set(report.corrupted)
    return report, log


def _repair_recover(cluster, z, gather, log):
    profile = cluster.profile
    live = [g for g in cluster.live_ids() if g != z]
    if len(live) != profile.n_nodes - 1:
        raise NotEnoughHelpers(
            f"recovery repair needs all {profile.n_nodes - 1} other nodes live"
        )
    batches = gather("recover", [(g, profile.q - 1) for g in live])
    fn = (hmsr.regenerate_recover if profile.mode == "msr"
          else hmbr.regenerate_mbr_recover)
    return fn(z, batches, profile, prior_flags=frozenset(cluster.known_corrupt))


def reconstruct(cluster: Cluster, mode: str, adversary: AdversarySpec = None,
                policy: str = "escalate"):
    """Reconstruct the stored file.  Returns (ReconstructReport, ExchangeLog)."""
    profile = cluster.profile
    engine = cluster._engine()
    cluster.op_counter += 1
    rng = _op_rng(adversary, cluster.op_counter) if adversary else None
    log = ExchangeLog(meta={"op": "reconstruct", "mode": mode})

    def gather(phase, plan):
        batches = []
        for g, level in plan:
            batches.append(engine.recon_response(cluster.nodes[g], profile, level))
            log.add(phase, "dc", g, level, (level + 1) * profile.A)
        return _corrupt_recon_batches(cluster, batches, adversary, rng)

    live = cluster.live_ids()
    if mode in ("plain", "detect"):
        plan = engine.staged_request_plan(profile, mode, live, counts=profile.k)
        batches = gather(mode, plan)
        if profile.mode == "msr":
            fn = (hmsr.reconstruct_plain if mode == "plain"
                  else hmsr.reconstruct_detect)
        else:
            fn = (hmbr.reconstruct_mbr_plain if mode == "plain"
                  else hmbr.reconstruct_mbr_detect)
        report = fn(batches, profile)
        if report.alarm and policy == "escalate":
            log.meta["alarm"] = report.alarm
            log.meta["escalated"] = True
            report = _recon_recover(cluster, gather)
    elif mode == "recover":
        report = _recon_recover(cluster, gather)
    else:
        raise InvalidParams(f"unknown reconstruct mode {mode!r}")

    cluster.known_corrupt |= set(report.corrupted)
    if cluster.truth_message is not None and report.ok:
        log.meta["matches_truth"] = report.message == cluster.truth_message
    return report, log


def _recon_recover(cluster, gather):
    profile = cluster.profile
    batches = gather("recover", [(g, profile.q - 1) for g in cluster.live_ids()])
    fn = (hmsr.reconstruct_recover if profile.mode == "msr"
          else hmbr.reconstruct_mbr_recover)
    return fn(batches, profile, prior_flags=frozenset(cluster.known_corrupt))


# -- bandwidth accounting ---------------------------------------------------------


def bandwidth_audit(log: ExchangeLog, profile: CodeProfile) -> dict:
    """Compare logged per-layer symbol counts against the protocol totals."""
    op = log.meta.get("op")
    phases = sorted({r[0] for r in log.records})
    out = {"op": op, "phases": {}, "ok": True}
    q2 = profile.n_nodes
    for phase in phases:
        responders = log.responders(phase)
        per_layer = {}
        for l in range(profile.q):
            contributors = sum(1 for _, level in responders if level >= l)
            if phase == "plain":
                expected_n = profile.d[l] if op == "repair" else profile.k[l]
            elif phase == "detect":
                expected_n = (profile.d[l] if op == "repair" else profile.k[l]) + 1
            else:
                expected_n = q2 - 1 if op == "repair" else q2
            unit = profile.blocks(l) if op == "repair" else profile.A
            per_layer[l] = {
                "actual": contributors * unit,
                "expected": expected_n * unit,
            }
            if per_layer[l]["actual"] != per_layer[l]["expected"]:
                out["ok"] = False
        actual_total = log.total_symbols(phase)
        expected_total = sum(v["expected"] for v in per_layer.values())
        out["phases"][phase] = {
            "per_layer": per_layer,
            "total_actual": actual_total,
            "total_expected": expected_total,
        }
        if actual_total != expected_total:
            out["ok"] = False
    return out


# -- persistence -------------------------------------------------------------------


def node_filename(g: int) -> str:
    return f"node_{g:03d}.bin"


def save_node(directory, profile: CodeProfile, state: NodeState):
    data = encode_node_bytes(profile, state)
    with open(os.path.join(directory, node_filename(state.node_id)), "wb") as fh:
        fh.write(data)


def encode_node_bytes(profile: CodeProfile, state: NodeState) -> bytes:
    q = profile.q
    out = bytearray()
    out += NODE_MAGIC
    out.append(NODE_VERSION)
    out.append(0 if profile.mode == "msr" else 1)
    out += q.to_bytes(2, "little")
    out += state.node_id.to_bytes(2, "little")
    out += profile.m.to_bytes(4, "little")
    out += bytes(profile.alpha)
    out += bytes(profile.k)
    out += state.digest
    for row in state.y:
        out += bytes(row)
    assert len(out) == 4 + 1 + 1 + 2 + 2 + 4 + q + q + 8 + q * profile.A
    return bytes(out)


def decode_node_bytes(data: bytes, profile: CodeProfile) -> NodeState:
    q = profile.q
    if data[:4] != NODE_MAGIC:
        raise HrgcError("bad node file magic")
    if data[4] != NODE_VERSION:
        raise HrgcError(f"unsupported node file version {data[4]}")
    mode = "msr" if data[5] == 0 else "mbr"
    if mode != profile.mode:
        raise HrgcError("node file mode does not match the profile")
    if int.from_bytes(data[6:8], "little") != q:
        raise HrgcError("node file q does not match the profile")
    node_id = int.from_bytes(data[8:10], "little")
    if int.from_bytes(data[10:14], "little") != profile.m:
        raise HrgcError("node file m does not match the profile")
    off = 14
    if tuple(data[off:off + q]) != profile.alpha:
        raise HrgcError("node file alpha does not match the profile")
    off += q
    if tuple(data[off:off + q]) != profile.k:
        raise HrgcError("node file k does not match the profile")
    off += q
    digest = data[off:off + 8]
    if digest != profile_digest(profile):
        raise HrgcError("node file profile digest mismatch")
    off += 8
    payload = data[off:]
    if len(payload) != q * profile.A:
        raise HrgcError("node file payload length mismatch")
    y = [list(payload[r * profile.A:(r + 1) * profile.A]) for r in range(q)]
    return NodeState(node_id=node_id, y=y, digest=bytes(digest))


def load_node(path, profile: CodeProfile) -> NodeState:
    with open(path, "rb") as fh:
        return decode_node_bytes(fh.read(), profile)


def _write_manifest(cluster: Cluster):
    lines = [f"digest={profile_digest(cluster.profile).hex()}"]
    for g in range(cluster.profile.n_nodes):
        status = "live" if cluster.nodes[g] is not None else "failed"
        lines.append(f"node_{g:03d}={node_filename(g)},{status}")
    path = os.path.join(cluster.directory, "manifest.txt")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def save_cluster(cluster: Cluster, directory):
    os.makedirs(directory, exist_ok=True)
    cluster.directory = directory
    with open(os.path.join(directory, "profile.txt"), "w") as fh:
        fh.write(profile_to_text(cluster.profile))
    for state in cluster.nodes:
        if state is not None:
            save_node(directory, cluster.profile, state)
    _write_manifest(cluster)


def load_cluster(directory) -> Cluster:
    with open(os.path.join(directory, "profile.txt")) as fh:
        profile = profile_from_text(fh.read())
    nodes = [None] * profile.n_nodes
    manifest = {}
    with open(os.path.join(directory, "manifest.txt")) as fh:
        for line in fh:
            key, _, val = line.strip().partition("=")
            manifest[key] = val
    if manifest.get("digest") != profile_digest(profile).hex():
        raise HrgcError("manifest digest does not match the profile")
    for g in range(profile.n_nodes):
        fname, _, status = manifest[f"node_{g:03d}"].partition(",")
        if status == "live":
            nodes[g] = load_node(os.path.join(directory, fname), profile)
            if nodes[g].node_id != g:
                raise HrgcError(f"node file {fname} has id {nodes[g].node_id}")
    cluster = Cluster(profile, nodes, directory=directory)
    return cluster
