"""Operator command line: profile / encode / fail / repair / reconstruct /
capability / verify.

Exit codes: 0 ok, 2 unresolved alarm, 3 decode failure, 4 bad input, 5 io
error.  Every run is reproducible from its flags and seeds.

Byte packing: GF(16) stores two symbols per byte (high nibble first); every
other q stores one symbol per byte, which requires input bytes < q^2.  The
payload is prefixed with its 8-byte little-endian length, then zero-padded to
a whole number of B-symbol chunks, each encoded independently.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import sim
from .capability import capability_sweep, sweep_csv
from .decoder import erasure_solve
from .errors import HrgcError
from .matrices import profile_from_text, profile_new, profile_to_text

EXIT_OK = 0
EXIT_ALARM = 2
EXIT_DECODE_FAILURE = 3
EXIT_BAD_INPUT = 4
EXIT_IO = 5


# -- byte <-> symbol packing ---------------------------------------------------


def bytes_to_symbols(data: bytes, q: int):
    if q == 4:
        out = []
        for b in data:
            out.append(b >> 4)
            out.append(b & 0x0F)
        return out
    limit = q * q
    for i, b in enumerate(data):
        if b >= limit:
            raise HrgcError(
                f"byte {b} at offset {i} not below q^2={limit}; "
                f"direct byte packing needs q=4 or q=16"
            )
    return list(data)


def symbols_to_bytes(symbols, q: int) -> bytes:
    if q == 4:
        if len(symbols) % 2:
            symbols = list(symbols) + [0]
        return bytes(
            (symbols[i] << 4) | symbols[i + 1] for i in range(0, len(symbols), 2)
        )
    return bytes(symbols)


def pack_file(data: bytes, q: int, B: int):
    """Length-prefix, symbol-encode, zero-pad to whole B-symbol chunks."""
    framed = len(data).to_bytes(8, "little") + data
    syms = bytes_to_symbols(framed, q)
    chunks = max(1, -(-len(syms) // B))
    syms += [0] * (chunks * B - len(syms))
    return [syms[i * B:(i + 1) * B] for i in range(chunks)]


def unpack_file(chunks, q: int) -> bytes:
    syms = [s for chunk in chunks for s in chunk]
    raw = symbols_to_bytes(syms, q)
    if len(raw) < 8:
        raise HrgcError("decoded payload shorter than its length prefix")
    length = int.from_bytes(raw[:8], "little")
    if length > len(raw) - 8:
        raise HrgcError("length prefix exceeds decoded payload")
    return raw[8:8 + length]


# -- helpers ----------------------------------------------------------------------


def _load_profile(path):
    with open(path) as fh:
        return profile_from_text(fh.read())


def _emit(args, payload: dict):
    if getattr(args, "json", None):
        with open(args.json, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True, default=_jsonable)
            fh.write("\n")
    for key in sorted(payload):
        print(f"{key}: {_display(payload[key])}")


def _jsonable(v):
    if isinstance(v, (frozenset, set)):
        return sorted(v)
    if isinstance(v, bytes):
        return v.hex()
    raise TypeError(f"not jsonable: {type(v)}")


def _display(v):
    if isinstance(v, (frozenset, set)):
        return sorted(v)
    return v


def _report_exit(report) -> int:
    if report.ok:
        return EXIT_OK
    if report.failure is not None:
        return EXIT_DECODE_FAILURE
    return EXIT_ALARM


def _report_payload(report, log=None):
    out = {
        "mode": report.mode,
        "ok": report.ok,
        "corrupted": sorted(report.corrupted),
    }
    if report.alarm is not None:
        out["alarm"] = report.alarm
    if report.failure is not None:
        out["failure"] = report.failure
    if log is not None:
        out["downloaded_symbols"] = log.total_symbols()
        if "alarm" in log.meta:
            out["alarm"] = log.meta["alarm"]
            out["escalated"] = bool(log.meta.get("escalated"))
    return out


# -- subcommands -------------------------------------------------------------------


def cmd_profile(args) -> int:
    alpha = [int(v) for v in args.alphas.split(",")]
    k = [int(v) for v in args.ks.split(",")] if args.ks else None
    profile = profile_new(args.mode, args.q, args.m, alpha, k=k, seed=args.seed)
    with open(args.out, "w") as fh:
        fh.write(profile_to_text(profile))
    _emit(args, {
        "profile": args.out, "mode": profile.mode, "q": profile.q,
        "m": profile.m, "kappa": list(profile.kappa), "alpha": list(profile.alpha),
        "d": list(profile.d), "k": list(profile.k), "A": profile.A, "B": profile.B,
    })
    return EXIT_OK


def cmd_encode(args) -> int:
    profile = _load_profile(args.profile)
    with open(args.input, "rb") as fh:
        data = fh.read()
    chunks = pack_file(data, profile.q, profile.B)
    if len(chunks) != 1:
        raise HrgcError(
            f"input needs {len(chunks)} chunks; one cluster holds one "
            f"B={profile.B} chunk (split the file upstream)"
        )
    cluster = sim.cluster_init(profile, chunks[0], retain_truth=False,
                               directory=args.outdir)
    _emit(args, {
        "outdir": args.outdir,
        "nodes": profile.n_nodes,
        "symbols": profile.B,
        "manifest": os.path.join(args.outdir, "manifest.txt"),
    })
    return EXIT_OK


def cmd_fail(args) -> int:
    cluster = sim.load_cluster(args.cluster)
    sim.fail_node(cluster, args.node)
    _emit(args, {"failed": args.node, "live": cluster.live_ids()})
    return EXIT_OK


def cmd_repair(args) -> int:
    cluster = sim.load_cluster(args.cluster)
    adversary = sim.parse_adversary(args.adversary) if args.adversary else None
    report, log = sim.repair(cluster, args.node, args.mode, adversary,
                             policy=args.policy)
    _emit(args, _report_payload(report, log))
    return _report_exit(report)


def cmd_reconstruct(args) -> int:
    cluster = sim.load_cluster(args.cluster)
    adversary = sim.parse_adversary(args.adversary) if args.adversary else None
    report, log = sim.reconstruct(cluster, args.mode, adversary,
                                  policy=args.policy)
    payload = _report_payload(report, log)
    if report.ok:
        data = unpack_file([report.message], cluster.profile.q)
        with open(args.out, "wb") as fh:
            fh.write(data)
        payload["out"] = args.out
        payload["bytes"] = len(data)
    _emit(args, payload)
    return _report_exit(report)


def cmd_capability(args) -> int:
    start, stop, step = (int(v) for v in args.q_range.split(":"))
    rows = capability_sweep(start, stop, step)
    text = sweep_csv(rows)
    with open(args.out, "w") as fh:
        fh.write(text)
    _emit(args, {"out": args.out, "rows": len(rows)})
    return EXIT_OK


def cmd_verify(args) -> int:
    """Re-derive the per-node layer identities across the cluster."""
    cluster = sim.load_cluster(args.cluster)
    profile = cluster.profile
    engine = cluster._engine()
    F = profile.field
    suspect = set()
    for l in range(profile.q):
        if profile.mode == "msr":
            gen = [profile.nu_row(g, l) for g in range(profile.n_nodes)]
        else:
            gen = [list(profile.mu_row(g, l)) for g in range(profile.n_nodes)]
        tildes = {
            g: engine.tilde_rows(profile, cluster.nodes[g])
            for g in cluster.live_ids()
        }
        a = profile.alpha[l]
        for t in range(profile.blocks(l)):
            for col in range(a):
                values = [
                    tildes[g][l][t * a + col] if g in tildes else None
                    for g in range(profile.n_nodes)
                ]
                try:
                    erasure_solve(F, gen, values)
                except HrgcError as exc:
                    positions = getattr(exc, "positions", frozenset())
                    suspect |= set(positions)
                    if not positions:
                        _emit(args, {"consistent": False, "error": str(exc)})
                        return EXIT_DECODE_FAILURE
    payload = {"consistent": not suspect, "suspect_nodes": sorted(suspect)}
    _emit(args, payload)
    return EXIT_OK if not suspect else EXIT_DECODE_FAILURE


def build_parser():
    p = argparse.ArgumentParser(
        prog="hrgc",
        description="Layered regenerating-code toolkit and cluster simulator",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("profile", help="create a code profile")
    sp.add_argument("--mode", choices=["msr", "mbr"], required=True)
    sp.add_argument("--q", type=int, required=True)
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--alphas", required=True, help="comma-separated layer sizes")
    sp.add_argument("--ks", help="comma-separated k sequence (mbr)")
    sp.add_argument("--seed", type=int, default=1)
    sp.add_argument("--out", required=True)
    sp.add_argument("--json")
    sp.set_defaults(fn=cmd_profile)

    sp = sub.add_parser("encode", help="encode a file into a cluster directory")
    sp.add_argument("--profile", required=True)
    sp.add_argument("--input", required=True)
    sp.add_argument("--outdir", required=True)
    sp.add_argument("--json")
    sp.set_defaults(fn=cmd_encode)

    sp = sub.add_parser("fail", help="mark a node failed")
    sp.add_argument("--cluster", required=True)
    sp.add_argument("--node", type=int, required=True)
    sp.add_argument("--json")
    sp.set_defaults(fn=cmd_fail)

    sp = sub.add_parser("repair", help="regenerate a failed node")
    sp.add_argument("--cluster", required=True)
    sp.add_argument("--node", type=int, required=True)
    sp.add_argument("--mode", choices=["plain", "detect", "recover"],
                    default="plain")
    sp.add_argument("--adversary", help="nodes=..;strategy=..;seed=..")
    sp.add_argument("--policy", choices=["escalate", "report"],
                    default="escalate")
    sp.add_argument("--json")
    sp.set_defaults(fn=cmd_repair)

    sp = sub.add_parser("reconstruct", help="rebuild the original file")
    sp.add_argument("--cluster", required=True)
    sp.add_argument("--mode", choices=["plain", "detect", "recover"],
                    default="plain")
    sp.add_argument("--adversary")
    sp.add_argument("--policy", choices=["escalate", "report"],
                    default="escalate")
    sp.add_argument("--out", required=True)
    sp.add_argument("--json")
    sp.set_defaults(fn=cmd_reconstruct)

    sp = sub.add_parser("capability", help="write the capability sweep CSV")
    sp.add_argument("--q-range", default="4:16:2", help="start:stop:step")
    sp.add_argument("--out", required=True)
    sp.add_argument("--json")
    sp.set_defaults(fn=cmd_capability)

    sp = sub.add_parser("verify", help="audit cluster consistency")
    sp.add_argument("--cluster", required=True)
    sp.add_argument("--json")
    sp.set_defaults(fn=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except HrgcError as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
