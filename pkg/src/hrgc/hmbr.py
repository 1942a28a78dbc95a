"""Layered MBR engine: one symmetric message matrix per block, no diagonal.

Block (l, t) is M_{l,t} = [[S, T], [T^t, 0]] with S symmetric k_l x k_l and
T of shape k_l x (alpha_l - k_l); encoding stores Y_g = B_g * G_g where row l
of G_g is mu_{g,l} M_{l,*}.  Repair downloads exactly one inner product per
helper per block and equals the per-node storage (the bandwidth-optimal
point).  All decoding here runs against plain Vandermonde matrices, so the
recovery budgets are exact; k_l = alpha_l (empty T) is a first-class case.

Node/report/batch types, the staged request plan, and the helper response
computation are shared with the MSR engine.
"""

from __future__ import annotations

from dataclasses import dataclass

from .decoder import ERASED, decode
from .errors import (
    AsymmetryDetected,
    DecodeFailure,
    LengthMismatch,
    NotEnoughHelpers,
)
from .hmsr import (
    HelpSymbolBatch,
    NodeState,
    ReconstructReport,
    RepairReport,
    _assemble_node,
    _contributors,
    _recon_contributors,
    helper_response,
    recon_response,
    row_blocks,
    staged_request_plan,
    tilde_rows,
)
from .linalg import mat_inv, mat_mul, solve_square, transpose, vec_mat
from .matrices import CodeProfile, profile_digest

__all__ = [
    "MessageMatrixM", "arrange_m", "message_from_m", "encode_mbr",
    "regenerate_mbr_plain", "regenerate_mbr_detect", "regenerate_mbr_recover",
    "reconstruct_mbr_plain", "reconstruct_mbr_detect", "reconstruct_mbr_recover",
    "rec_m", "helper_response", "recon_response", "staged_request_plan",
    "HelpSymbolBatch", "NodeState", "RepairReport", "ReconstructReport",
]


@dataclass
class MessageMatrixM:
    """s[l][t]: k_l x k_l symmetric; t_[l][t]: k_l x (alpha_l - k_l)."""
    s: list
    t_: list


def arrange_m(message, profile: CodeProfile) -> MessageMatrixM:
    if len(message) != profile.B:
        raise LengthMismatch(f"message length {len(message)} != B={profile.B}")
    s_out, t_out = [], []
    pos = 0
    for l in range(profile.q):
        a, k = profile.alpha[l], profile.k[l]
        s_layer, t_layer = [], []
        for _ in range(profile.blocks(l)):
            S = [[0] * k for _ in range(k)]
            for i in range(k):
                for j in range(i, k):
                    S[i][j] = S[j][i] = message[pos]
                    pos += 1
            T = [[0] * (a - k) for _ in range(k)]
            for i in range(k):
                for j in range(a - k):
                    T[i][j] = message[pos]
                    pos += 1
            s_layer.append(S)
            t_layer.append(T)
        s_out.append(s_layer)
        t_out.append(t_layer)
    assert pos == profile.B
    return MessageMatrixM(s=s_out, t_=t_out)


def message_from_m(m: MessageMatrixM, profile: CodeProfile):
    out = []
    for l in range(profile.q):
        a, k = profile.alpha[l], profile.k[l]
        for t in range(profile.blocks(l)):
            S, T = m.s[l][t], m.t_[l][t]
            for i in range(k):
                out.extend(S[i][i:k])
            for i in range(k):
                out.extend(T[i])
    return out


def m_block(m: MessageMatrixM, profile: CodeProfile, l: int, t: int):
    """Assemble the alpha_l x alpha_l block [[S, T], [T^t, 0]]."""
    a, k = profile.alpha[l], profile.k[l]
    S, T = m.s[l][t], m.t_[l][t]
    out = []
    for i in range(k):
        out.append(S[i] + T[i])
    for j in range(a - k):
        out.append([T[i][j] for i in range(k)] + [0] * (a - k))
    return out


def encode_mbr(m: MessageMatrixM, profile: CodeProfile):
    assert profile.mode == "mbr"
    F = profile.field
    q = profile.q
    layer_mats = []
    for l in range(q):
        blocks = [m_block(m, profile, l, t) for t in range(profile.blocks(l))]
        rows = []
        for i in range(profile.alpha[l]):
            row = []
            for blk in blocks:
                row.extend(blk[i])
            rows.append(row)
        layer_mats.append(mat_mul(F, profile.phi(l), rows))
    digest = profile_digest(profile)
    nodes = []
    for g in range(profile.n_nodes):
        tilde = [layer_mats[l][g] for l in range(q)]
        y = mat_mul(F, profile.points.basis(g), tilde)
        nodes.append(NodeState(node_id=g, y=y, digest=digest))
    return nodes


# -- repair -------------------------------------------------------------------


def regenerate_mbr_plain(z, batches, profile: CodeProfile) -> RepairReport:
    F = profile.field
    tilde = []
    for l in range(profile.q):
        d = profile.d[l]
        contributors = _contributors(batches, l)
        if len(contributors) < d:
            raise NotEnoughHelpers(
                f"layer {l} needs {d} helpers, got {len(contributors)}"
            )
        ids = [b.helper_id for b in contributors[:d]]
        W = [list(profile.mu_row(g, l)) for g in ids]
        layer_rows = []
        for t in range(profile.blocks(l)):
            p = [b.symbols[(l, t)] for b in contributors[:d]]
            layer_rows.append(solve_square(F, W, p))
        tilde.append(layer_rows)
    return RepairReport(mode="plain", ok=True, y=_assemble_node(profile, z, tilde))


def regenerate_mbr_detect(z, batches, profile: CodeProfile) -> RepairReport:
    F = profile.field
    tilde = []
    for l in range(profile.q):
        d = profile.d[l]
        contributors = _contributors(batches, l)
        if len(contributors) < d + 1:
            raise NotEnoughHelpers(
                f"detect layer {l} needs {d + 1} helpers, got {len(contributors)}"
            )
        ids = [b.helper_id for b in contributors[:d + 1]]
        W1 = [list(profile.mu_row(g, l)) for g in ids[:d]]
        W2 = [list(profile.mu_row(g, l)) for g in ids[1:]]
        layer_rows = []
        for t in range(profile.blocks(l)):
            p = [b.symbols[(l, t)] for b in contributors[:d + 1]]
            x1 = solve_square(F, W1, p[:d])
            x2 = solve_square(F, W2, p[1:])
            if x1 != x2:
                return RepairReport(
                    mode="detect", ok=False, alarm={"layer": l, "block": t},
                )
            layer_rows.append(x1)
        tilde.append(layer_rows)
    return RepairReport(mode="detect", ok=True, y=_assemble_node(profile, z, tilde))


def regenerate_mbr_recover(z, batches, profile: CodeProfile,
                           prior_flags=frozenset()) -> RepairReport:
    F = profile.field
    q2 = profile.n_nodes
    helpers = sorted(batches, key=lambda b: b.helper_id)
    if len(helpers) != q2 - 1:
        raise NotEnoughHelpers(f"recovery needs {q2 - 1} batches, got {len(helpers)}")
    ids = [b.helper_id for b in helpers]
    pts = [profile.x_value(g) for g in ids]
    flags = set(prior_flags)
    found = set()
    tallies = {}
    cap = (q2 - profile.d[-1] - 1) // 2
    tilde = [[None] * profile.blocks(l) for l in range(profile.q)]
    for l in range(profile.q - 1, -1, -1):
        d = profile.d[l]
        gen = [list(profile.mu_row(g, l)) for g in ids]
        sigma = sum(1 for g in ids if g in flags)
        tallies[l] = {"erasures": sigma, "errors": 0}
        if sigma > min(q2 - d - 1, cap):
            return RepairReport(
                mode="recover", ok=False,
                failure=f"erasure count {sigma} exceeds layer-{l} budget "
                        f"{min(q2 - d - 1, cap)}",
                corrupted=frozenset(found), tallies=tallies,
            )
        for t in range(profile.blocks(l)):
            word = [
                ERASED if b.helper_id in flags else b.symbols[(l, t)]
                for b in helpers
            ]
            try:
                res = decode(F, gen, word, points=pts)
            except DecodeFailure as exc:
                return RepairReport(
                    mode="recover", ok=False,
                    failure=f"layer {l} block {t}: {exc}",
                    corrupted=frozenset(found), tallies=tallies,
                )
            newly = {ids[i] for i in res.error_positions}
            if newly:
                flags |= newly
                found |= newly
                tallies[l]["errors"] += len(newly)
            tilde[l][t] = res.message
    return RepairReport(
        mode="recover", ok=True, y=_assemble_node(profile, z, tilde),
        corrupted=frozenset(found), tallies=tallies,
    )


# -- reconstruction --------------------------------------------------------------


def _extract_m(F, mu_rows, k, R):
    """Split W = [Omega, Delta_part]; T = Omega^-1 R2; S = Omega^-1 (R1 - Dp T^t)."""
    a = len(mu_rows[0])
    omega_inv = mat_inv(F, [row[:k] for row in mu_rows])
    dpart = [row[k:] for row in mu_rows]
    r1 = [row[:k] for row in R]
    r2 = [row[k:] for row in R]
    T = mat_mul(F, omega_inv, r2) if a > k else [[] for _ in range(k)]
    if a > k:
        corr = mat_mul(F, dpart, transpose(T))
        r1 = [[F.sub(r1[i][j], corr[i][j]) for j in range(k)] for i in range(k)]
    S = mat_mul(F, omega_inv, r1)
    for i in range(k):
        for j in range(i + 1, k):
            if S[i][j] != S[j][i]:
                raise AsymmetryDetected("S block asymmetric (corrupt responses)")
    return S, T


def reconstruct_mbr_plain(batches, profile: CodeProfile) -> ReconstructReport:
    F = profile.field
    m = MessageMatrixM(s=[[] for _ in range(profile.q)],
                       t_=[[] for _ in range(profile.q)])
    for l in range(profile.q):
        k = profile.k[l]
        resp = _recon_contributors(batches, l, k)
        mu_rows = [list(profile.mu_row(b.helper_id, l)) for b in resp]
        a = profile.alpha[l]
        for t in range(profile.blocks(l)):
            R = [row_blocks(b.rows[l], a)[t] for b in resp]
            S, T = _extract_m(F, mu_rows, k, R)
            m.s[l].append(S)
            m.t_[l].append(T)
    return ReconstructReport(mode="plain", ok=True,
                             message=message_from_m(m, profile))


def reconstruct_mbr_detect(batches, profile: CodeProfile) -> ReconstructReport:
    F = profile.field
    m = MessageMatrixM(s=[[] for _ in range(profile.q)],
                       t_=[[] for _ in range(profile.q)])
    for l in range(profile.q):
        k = profile.k[l]
        resp = _recon_contributors(batches, l, k + 1)
        mu1 = [list(profile.mu_row(b.helper_id, l)) for b in resp[:k]]
        mu2 = [list(profile.mu_row(b.helper_id, l)) for b in resp[1:]]
        a = profile.alpha[l]
        for t in range(profile.blocks(l)):
            R = [row_blocks(b.rows[l], a)[t] for b in resp]
            try:
                S1, T1 = _extract_m(F, mu1, k, R[:k])
                S2, T2 = _extract_m(F, mu2, k, R[1:])
            except AsymmetryDetected:
                return ReconstructReport(
                    mode="detect", ok=False, alarm={"layer": l, "block": t},
                )
            if S1 != S2 or T1 != T2:
                return ReconstructReport(
                    mode="detect", ok=False, alarm={"layer": l, "block": t},
                )
            m.s[l].append(S1)
            m.t_[l].append(T1)
    return ReconstructReport(mode="detect", ok=True,
                             message=message_from_m(m, profile))


def reconstruct_mbr_recover(batches, profile: CodeProfile,
                            prior_flags=frozenset()) -> ReconstructReport:
    q2 = profile.n_nodes
    rows_by_node = {b.helper_id: b.rows for b in batches}
    flags = set(prior_flags) | {g for g in range(q2) if g not in rows_by_node}
    found = set()
    tallies = {}
    m = MessageMatrixM(s=[[None] * profile.blocks(l) for l in range(profile.q)],
                       t_=[[None] * profile.blocks(l) for l in range(profile.q)])
    for l in range(profile.q - 1, -1, -1):
        k = profile.k[l]
        sigma = len(flags)
        tallies[l] = {"erasures": sigma, "errors": 0}
        # q^2 - k_l flags is the solvability frontier (sigma + 2 tau <= q^2 - k_l)
        if sigma > q2 - k:
            return ReconstructReport(
                mode="recover", ok=False,
                failure=f"flagged count {sigma} exceeds layer-{l} budget "
                        f"{q2 - k}",
                corrupted=frozenset(found), tallies=tallies,
            )
        a = profile.alpha[l]
        for t in range(profile.blocks(l)):
            blocks = [
                None if (g in flags or g not in rows_by_node)
                else row_blocks(rows_by_node[g][l], a)[t]
                for g in range(q2)
            ]
            try:
                S, T, newly = rec_m(blocks, frozenset(flags), l, profile)
            except DecodeFailure as exc:
                return ReconstructReport(
                    mode="recover", ok=False,
                    failure=f"layer {l} block {t}: {exc}",
                    corrupted=frozenset(found), tallies=tallies,
                )
            newly -= flags
            if newly:
                flags |= newly
                found |= newly
                tallies[l]["errors"] += len(newly)
            m.s[l][t] = S
            m.t_[l][t] = T
    return ReconstructReport(
        mode="recover", ok=True, message=message_from_m(m, profile),
        corrupted=frozenset(found), tallies=tallies,
    )


def rec_m(blocks, erased, l, profile: CodeProfile):
    """Recover one M block from the full q^2-node stack.

    Decodes the T columns first (length-q^2 Vandermonde words), erasing rows
    as they are caught, then the S columns of R1 - Delta_part T^t.  Exact
    whenever sigma + 2*tau <= q^2 - k_l.  Returns (S, T, corrupt ids).
    """
    F = profile.field
    q2 = profile.n_nodes
    a, k = profile.alpha[l], profile.k[l]
    mu = [list(profile.mu_row(g, l)) for g in range(q2)]
    gen = [row[:k] for row in mu]
    pts = [profile.x_value(g) for g in range(q2)]
    work_flags = set(erased)

    def decode_col(col_vals):
        word = [ERASED if g in work_flags else col_vals[g] for g in range(q2)]
        res = decode(F, gen, word, points=pts)
        return res.message, {i for i in res.error_positions}

    t_cols = []
    for c in range(a - k):
        msg, bad = decode_col([None if blocks[g] is None else blocks[g][k + c]
                               for g in range(q2)])
        work_flags |= bad
        t_cols.append(msg)
    T = [[t_cols[c][i] for c in range(a - k)] for i in range(k)]

    s_cols = []
    for c in range(k):
        def corrected(g):
            if blocks[g] is None:
                return None
            val = blocks[g][c]
            for j in range(a - k):
                dp = mu[g][k + j]
                if dp and T[c][j]:
                    val = F.sub(val, F.mul(dp, T[c][j]))
            return val
        msg, bad = decode_col([corrected(g) for g in range(q2)])
        work_flags |= bad
        s_cols.append(msg)
    S = [[s_cols[c][i] for c in range(k)] for i in range(k)]
    for i in range(k):
        for j in range(i + 1, k):
            if S[i][j] != S[j][i]:
                raise DecodeFailure("recovered block not symmetric "
                                    "(corruption beyond the budget)")

    M = []
    for i in range(k):
        M.append(S[i] + T[i])
    for j in range(a - k):
        M.append([T[i][j] for i in range(k)] + [0] * (a - k))
    corrupt = set()
    for g in range(q2):
        if blocks[g] is None:
            continue
        if vec_mat(F, mu[g], M) != blocks[g]:
            corrupt.add(g)
    return S, T, corrupt
