"""Layered MSR engine: encoding, staged repair, and file reconstruction.

Message layout: the B symbols fill two stacks of symmetric matrices S and T
(S gets the first half).  Layer l holds A/alpha_l blocks of size
alpha_l x alpha_l; blocks fill upper-triangle row-major, layers ascending,
blocks ascending.  Encoding evaluates each column of S (resp. T) as a layered
curve polynomial and stores, at node g, the q x A slice
Y_g = B_g * (U_g + lambda_g * E_g), so that row l of B_g^{-1} Y_g splits into
blocks mu_{g,l} S_{l,t} + lambda_g mu_{g,l} T_{l,t} -- one inner product per
helper is enough to repair.

Hostile-mode conventions: detect solves the same block twice from helper
windows shifted by one and alarms on mismatch; recover treats each block as a
length-(q^2-1) word under the stacked encoding vectors, erases previously
flagged nodes, and decodes.  Corruption flags accumulate across the strict
(layer descending, block ascending) recovery order within one call; keeping
them across calls is the simulator's job.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dfield

from .decoder import ERASED, decode
from .errors import (
    AsymmetryDetected,
    DecodeFailure,
    LambdaCollision,
    LengthMismatch,
    NotEnoughHelpers,
    SingularSystem,
)
from .linalg import mat_inv, mat_mul, solve_square, vec_mat
from .matrices import CodeProfile, profile_digest


# -- data types ---------------------------------------------------------------


@dataclass
class MessageMatricesST:
    """s[l][t] and t_[l][t]: symmetric alpha_l x alpha_l blocks."""
    s: list
    t_: list


@dataclass
class NodeState:
    node_id: int
    y: list                  # q x A symbol matrix
    digest: bytes


@dataclass
class HelpSymbolBatch:
    """One node's response: repair help symbols and/or reconstruction rows."""
    helper_id: int
    level: int
    symbols: dict = dfield(default=None)   # (l, t) -> symbol      (repair)
    rows: dict = dfield(default=None)      # l -> list of A symbols (reconstruct)


@dataclass
class RepairReport:
    mode: str
    ok: bool
    y: list | None = None
    alarm: dict | None = None
    failure: str | None = None
    corrupted: frozenset = frozenset()
    tallies: dict = dfield(default_factory=dict)


@dataclass
class ReconstructReport:
    mode: str
    ok: bool
    message: list | None = None
    alarm: dict | None = None
    failure: str | None = None
    corrupted: frozenset = frozenset()
    tallies: dict = dfield(default_factory=dict)


# -- message arrangement --------------------------------------------------------


def _tri(n):
    return n * (n + 1) // 2


def arrange_st(message, profile: CodeProfile) -> MessageMatricesST:
    if len(message) != profile.B:
        raise LengthMismatch(f"message length {len(message)} != B={profile.B}")
    half = profile.B // 2
    return MessageMatricesST(
        s=_fill_symmetric(message[:half], profile),
        t_=_fill_symmetric(message[half:], profile),
    )


def _fill_symmetric(syms, profile):
    out = []
    pos = 0
    for l in range(profile.q):
        a = profile.alpha[l]
        layer = []
        for _ in range(profile.blocks(l)):
            M = [[0] * a for _ in range(a)]
            for i in range(a):
                for j in range(i, a):
                    M[i][j] = M[j][i] = syms[pos]
                    pos += 1
            layer.append(M)
        out.append(layer)
    assert pos == len(syms)
    return out


def message_from_st(st: MessageMatricesST, profile: CodeProfile):
    return _read_symmetric(st.s, profile) + _read_symmetric(st.t_, profile)


def _read_symmetric(blocks, profile):
    out = []
    for l in range(profile.q):
        a = profile.alpha[l]
        for t in range(profile.blocks(l)):
            M = blocks[l][t]
            for i in range(a):
                out.extend(M[i][i:a])
    return out


# -- encoding -------------------------------------------------------------------


def _layer_matrix(blocks_l):
    """Horizontally concatenate the blocks of one layer."""
    a = len(blocks_l[0])
    rows = []
    for i in range(a):
        row = []
        for M in blocks_l:
            row.extend(M[i])
        rows.append(row)
    return rows


def encode(st: MessageMatricesST, profile: CodeProfile):
    """Produce the q^2 node states for an arranged message."""
    assert profile.mode == "msr"
    F = profile.field
    q = profile.q
    fs = [mat_mul(F, profile.phi(l), _layer_matrix(st.s[l])) for l in range(q)]
    es = [mat_mul(F, profile.phi(l), _layer_matrix(st.t_[l])) for l in range(q)]
    digest = profile_digest(profile)
    nodes = []
    for g in range(profile.n_nodes):
        lam = profile.lam[g]
        tilde = [
            [F.add(fs[l][g][c], F.mul(lam, es[l][g][c])) for c in range(profile.A)]
            for l in range(q)
        ]
        y = mat_mul(F, profile.points.basis(g), tilde)
        nodes.append(NodeState(node_id=g, y=y, digest=digest))
    return nodes


def tilde_rows(profile: CodeProfile, state: NodeState):
    """B_g^{-1} Y_g: row l carries the layer-l payload of node g."""
    return mat_mul(profile.field, profile.points.basis_inv(state.node_id), state.y)


def row_blocks(row, a):
    return [row[t * a:(t + 1) * a] for t in range(len(row) // a)]


def helper_response(state: NodeState, profile: CodeProfile, level: int,
                    target: int) -> HelpSymbolBatch:
    """Repair help symbols for layers 0..level, computed from local state only."""
    assert state.node_id != target
    F = profile.field
    tilde = tilde_rows(profile, state)
    symbols = {}
    for l in range(level + 1):
        a = profile.alpha[l]
        mu_z = profile.mu_row(target, l)
        for t, blk in enumerate(row_blocks(tilde[l], a)):
            acc = 0
            for u, v in zip(blk, mu_z):
                if u and v:
                    acc = F.add(acc, F.mul(u, v))
            symbols[(l, t)] = acc
    return HelpSymbolBatch(helper_id=state.node_id, level=level, symbols=symbols)


def recon_response(state: NodeState, profile: CodeProfile,
                   level: int) -> HelpSymbolBatch:
    """Reconstruction rows: layer rows 0..level of B_g^{-1} Y_g."""
    tilde = tilde_rows(profile, state)
    return HelpSymbolBatch(
        helper_id=state.node_id, level=level,
        rows={l: tilde[l] for l in range(level + 1)},
    )


# -- staged request protocol ----------------------------------------------------


def staged_request_plan(profile: CodeProfile, mode: str, live_ids, counts=None):
    """Assign request levels to helpers: [(helper_id, level)], ids ascending.

    counts[l] helpers end up serving layer l (counts defaults to d);
    detect mode adds one extra helper at the top level.
    """
    counts = list(profile.d if counts is None else counts)
    q = profile.q
    need = counts[0] + (1 if mode == "detect" else 0)
    live = sorted(live_ids)
    if len(live) < need:
        raise NotEnoughHelpers(f"need {need} live helpers, have {len(live)}")
    plan = []
    idx = 0
    for j in range(q - 1, -1, -1):
        fresh = counts[j] - (counts[j + 1] if j + 1 < q else 0)
        if j == q - 1 and mode == "detect":
            fresh += 1
        for _ in range(fresh):
            plan.append((live[idx], j))
            idx += 1
    return plan


def _contributors(batches, l):
    return sorted((b for b in batches if b.level >= l), key=lambda b: b.helper_id)


# -- repair ----------------------------------------------------------------------


def _assemble_node(profile, z, tilde_z):
    rows = [[s for blk in tilde_z[l] for s in blk] for l in range(profile.q)]
    return mat_mul(profile.field, profile.points.basis(z), rows)


def _repair_block_plain(profile, z, l, contributors, t):
    F = profile.field
    d = profile.d[l]
    ids = [b.helper_id for b in contributors[:d]]
    V = [profile.nu_row(g, l) for g in ids]
    p = [b.symbols[(l, t)] for b in contributors[:d]]
    try:
        x = solve_square(F, V, p)
    except SingularSystem:
        raise SingularSystem(
            f"repair window {ids} singular at layer {l}"
        ) from None
    a = profile.alpha[l]
    lam_z = profile.lam[z]
    return [F.add(x[j], F.mul(lam_z, x[a + j])) for j in range(a)]


def regenerate_plain(z, batches, profile: CodeProfile) -> RepairReport:
    tilde = []
    for l in range(profile.q):
        contributors = _contributors(batches, l)
        if len(contributors) < profile.d[l]:
            raise NotEnoughHelpers(
                f"layer {l} needs {profile.d[l]} helpers, got {len(contributors)}"
            )
        tilde.append([
            _repair_block_plain(profile, z, l, contributors, t)
            for t in range(profile.blocks(l))
        ])
    return RepairReport(mode="plain", ok=True, y=_assemble_node(profile, z, tilde))


def regenerate_detect(z, batches, profile: CodeProfile) -> RepairReport:
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
        V1 = [profile.nu_row(g, l) for g in ids[:d]]
        V2 = [profile.nu_row(g, l) for g in ids[1:]]
        layer_rows = []
        for t in range(profile.blocks(l)):
            p = [b.symbols[(l, t)] for b in contributors[:d + 1]]
            x1 = solve_square(F, V1, p[:d])
            x2 = solve_square(F, V2, p[1:])
            if x1 != x2:
                return RepairReport(
                    mode="detect", ok=False,
                    alarm={"layer": l, "block": t},
                )
            a = profile.alpha[l]
            lam_z = profile.lam[z]
            layer_rows.append(
                [F.add(x1[j], F.mul(lam_z, x1[a + j])) for j in range(a)]
            )
        tilde.append(layer_rows)
    return RepairReport(mode="detect", ok=True, y=_assemble_node(profile, z, tilde))


def regenerate_recover(z, batches, profile: CodeProfile,
                       prior_flags=frozenset()) -> RepairReport:
    """Full-strength repair: decode every block against all other nodes."""
    F = profile.field
    q2 = profile.n_nodes
    helpers = sorted(batches, key=lambda b: b.helper_id)
    if len(helpers) != q2 - 1:
        raise NotEnoughHelpers(f"recovery needs {q2 - 1} batches, got {len(helpers)}")
    ids = [b.helper_id for b in helpers]
    flags = set(prior_flags)
    found = set()
    tallies = {}
    cap = (q2 - profile.d[-1] - 1) // 2
    tilde = [[None] * profile.blocks(l) for l in range(profile.q)]
    for l in range(profile.q - 1, -1, -1):
        d = profile.d[l]
        gen = [profile.nu_row(g, l) for g in ids]
        sigma = sum(1 for g in ids if g in flags)
        tallies[l] = {"erasures": sigma, "errors": 0}
        if sigma > min(q2 - d - 1, cap):
            return RepairReport(
                mode="recover", ok=False,
                failure=f"erasure count {sigma} exceeds layer-{l} budget "
                        f"{min(q2 - d - 1, cap)}",
                corrupted=frozenset(found), tallies=tallies,
            )
        a = profile.alpha[l]
        lam_z = profile.lam[z]
        for t in range(profile.blocks(l)):
            word = [
                ERASED if b.helper_id in flags else b.symbols[(l, t)]
                for b in helpers
            ]
            try:
                res = decode(F, gen, word)
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
            x = res.message
            tilde[l][t] = [F.add(x[j], F.mul(lam_z, x[a + j])) for j in range(a)]
    return RepairReport(
        mode="recover", ok=True, y=_assemble_node(profile, z, tilde),
        corrupted=frozenset(found), tallies=tallies,
    )


# -- reconstruction ---------------------------------------------------------------


class ExtractContext:
    """Per-(layer, responder set) inverses reused across the block loop."""

    def __init__(self, profile: CodeProfile, l: int, ids):
        F = profile.field
        a = profile.alpha[l]
        assert len(ids) == a + 1
        self.profile = profile
        self.l = l
        self.ids = list(ids)
        self.mu = [list(profile.mu_row(g, l)) for g in ids]
        self.lam = [profile.lam[g] for g in ids]
        if len(set(self.lam)) != len(self.lam):
            raise LambdaCollision(f"duplicate coefficients among nodes {ids}")
        self.phi_t = [[self.mu[j][r] for j in range(a + 1)] for r in range(a)]
        self.pi_inv = []
        for i in range(a):
            cols = [j for j in range(a + 1) if j != i]
            pi = [[self.mu[j][r] for j in cols] for r in range(a)]
            self.pi_inv.append(mat_inv(F, pi))
        self.omega_inv = mat_inv(F, self.mu[:a])


def extract_st(R, ids, l, profile: CodeProfile, ctx: ExtractContext = None):
    """Invert one block from alpha_l + 1 responses (symmetry-based).

    R: (alpha_l + 1) x alpha_l stack of response blocks, row order = ids.
    Returns (S, T); raises AsymmetryDetected when the solution is not
    symmetric (possible only with corrupt input).
    """
    if ctx is None:
        ctx = ExtractContext(profile, l, ids)
    F = profile.field
    a = profile.alpha[l]
    rhat = mat_mul(F, R, ctx.phi_t)
    C = [[0] * (a + 1) for _ in range(a + 1)]
    D = [[0] * (a + 1) for _ in range(a + 1)]
    for i in range(a + 1):
        for j in range(i + 1, a + 1):
            cc, dd = _pair_solve(F, rhat[i][j], rhat[j][i], ctx.lam[i], ctx.lam[j])
            C[i][j] = C[j][i] = cc
            D[i][j] = D[j][i] = dd
    S = _rebuild(F, C, ctx, a)
    T = _rebuild(F, D, ctx, a)
    for M, name in ((S, "S"), (T, "T")):
        for i in range(a):
            for j in range(i + 1, a):
                if M[i][j] != M[j][i]:
                    raise AsymmetryDetected(
                        f"{name} block asymmetric at layer {l} (corrupt responses)"
                    )
    return S, T


def _pair_solve(F, rij, rji, lam_i, lam_j):
    """C + lam_i D = rij ; C + lam_j D = rji."""
    dd = F.div(F.sub(rij, rji), F.sub(lam_i, lam_j))
    return F.sub(rij, F.mul(lam_i, dd)), dd


def _rebuild(F, C, ctx, a):
    rows = []
    for i in range(a):
        vec = [C[i][j] for j in range(a + 1) if j != i]
        rows.append(vec_mat(F, vec, ctx.pi_inv[i]))
    return mat_mul(F, ctx.omega_inv, rows)


def _recon_contributors(batches, l, need):
    ready = _contributors(batches, l)
    if len(ready) < need:
        raise NotEnoughHelpers(f"layer {l} needs {need} responders, got {len(ready)}")
    return ready[:need]


def reconstruct_plain(batches, profile: CodeProfile) -> ReconstructReport:
    st = MessageMatricesST(s=[[] for _ in range(profile.q)],
                           t_=[[] for _ in range(profile.q)])
    for l in range(profile.q):
        k = profile.k[l]
        resp = _recon_contributors(batches, l, k)
        ids = [b.helper_id for b in resp]
        ctx = ExtractContext(profile, l, ids)
        a = profile.alpha[l]
        for t in range(profile.blocks(l)):
            R = [row_blocks(b.rows[l], a)[t] for b in resp]
            S, T = extract_st(R, ids, l, profile, ctx)
            st.s[l].append(S)
            st.t_[l].append(T)
    return ReconstructReport(
        mode="plain", ok=True, message=message_from_st(st, profile)
    )


def reconstruct_detect(batches, profile: CodeProfile) -> ReconstructReport:
    st = MessageMatricesST(s=[[] for _ in range(profile.q)],
                           t_=[[] for _ in range(profile.q)])
    for l in range(profile.q):
        k = profile.k[l]
        resp = _recon_contributors(batches, l, k + 1)
        ids = [b.helper_id for b in resp]
        # node sets {0..alpha_l} and {0..alpha_l+1} minus position alpha_l
        sel1 = list(range(k))
        sel2 = list(range(k - 1)) + [k]
        ctx1 = ExtractContext(profile, l, [ids[i] for i in sel1])
        ctx2 = ExtractContext(profile, l, [ids[i] for i in sel2])
        a = profile.alpha[l]
        for t in range(profile.blocks(l)):
            blocks_all = [row_blocks(b.rows[l], a)[t] for b in resp]
            try:
                S1, T1 = extract_st([blocks_all[i] for i in sel1],
                                    ctx1.ids, l, profile, ctx1)
                S2, T2 = extract_st([blocks_all[i] for i in sel2],
                                    ctx2.ids, l, profile, ctx2)
            except AsymmetryDetected:
                return ReconstructReport(
                    mode="detect", ok=False, alarm={"layer": l, "block": t},
                )
            if S1 != S2 or T1 != T2:
                return ReconstructReport(
                    mode="detect", ok=False, alarm={"layer": l, "block": t},
                )
            st.s[l].append(S1)
            st.t_[l].append(T1)
    return ReconstructReport(
        mode="detect", ok=True, message=message_from_st(st, profile)
    )


def reconstruct_recover(batches, profile: CodeProfile,
                        prior_flags=frozenset()) -> ReconstructReport:
    q2 = profile.n_nodes
    rows_by_node = {b.helper_id: b.rows for b in batches}
    flags = set(prior_flags) | {g for g in range(q2) if g not in rows_by_node}
    found = set()
    tallies = {}
    st_s = [[None] * profile.blocks(l) for l in range(profile.q)]
    st_t = [[None] * profile.blocks(l) for l in range(profile.q)]
    for l in range(profile.q - 1, -1, -1):
        k = profile.k[l]
        sigma = len(flags)
        tallies[l] = {"erasures": sigma, "errors": 0}
        # q^2 - k_l flags is the solvability frontier of the block solver
        # (sigma + 2 tau + 1 <= q^2 - alpha_l with tau = 0)
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
                S, T, newly = rec_st(blocks, frozenset(flags), l, profile)
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
            st_s[l][t] = S
            st_t[l][t] = T
    st = MessageMatricesST(s=st_s, t_=st_t)
    return ReconstructReport(
        mode="recover", ok=True, message=message_from_st(st, profile),
        corrupted=frozenset(found), tallies=tallies,
    )


def rec_st(blocks, erased, l, profile: CodeProfile):
    """Recover one (S, T) block from a full q^2-node response stack.

    ``blocks``: per node the alpha_l response slice, or None when the node is
    erased/missing.  Works whenever sigma + 2*tau + 1 <= q^2 - alpha_l (sigma
    prior erasures, tau undetected corrupt rows): the off-diagonal entries of
    C = Phi S' Phi^T form, per column, a length-(q^2-1) word of a dimension-
    alpha_l evaluation code; honest columns decode exactly, so corrupt rows
    collect votes from every honest column while honest rows cannot pass the
    vote threshold.  Returns (S, T, corrupt node ids).
    """
    F = profile.field
    q2 = profile.n_nodes
    a = profile.alpha[l]
    mu = [list(profile.mu_row(g, l)) for g in range(q2)]
    lam = profile.lam
    sigma = len(erased)
    tau_bud = (q2 - a - 1 - sigma) // 2
    if tau_bud < 0:
        raise DecodeFailure(f"{sigma} erasures exceed the recovery budget")

    present = [g for g in range(q2) if g not in erased]
    for g in present:
        if blocks[g] is None:
            raise DecodeFailure(f"node {g} missing without being flagged")
    mu_t = [[mu[j][r] for j in range(q2)] for r in range(a)]
    rhat = {g: vec_mat(F, blocks[g], mu_t) for g in present}

    cvals = {}
    dvals = {}
    for gi in range(q2):
        if gi in erased:
            continue
        for gj in range(gi + 1, q2):
            if gj in erased:
                continue
            cc, dd = _pair_solve(F, rhat[gi][gj], rhat[gj][gi], lam[gi], lam[gj])
            cvals[(gi, gj)] = cc
            dvals[(gi, gj)] = dd

    def column_word(vals, j):
        word = []
        for i in range(q2):
            if i == j:
                continue
            if i in erased:
                word.append(ERASED)
            else:
                word.append(vals[(min(i, j), max(i, j))])
        return word

    xs_all = [profile.x_value(g) for g in range(q2)]
    votes = {g: 0 for g in range(q2)}
    decoded_c = {}
    decoded_d = {}
    failed_cols = set()
    for j in present:
        rows_no_j = [i for i in range(q2) if i != j]
        gen = [mu[i] for i in rows_no_j]
        pts = [xs_all[i] for i in rows_no_j]
        try:
            res_c = decode(F, gen, column_word(cvals, j), tau_max=tau_bud, points=pts)
            res_d = decode(F, gen, column_word(dvals, j), tau_max=tau_bud, points=pts)
        except DecodeFailure:
            failed_cols.add(j)
            continue
        decoded_c[j] = res_c.message
        decoded_d[j] = res_d.message
        for local in res_c.error_positions | res_d.error_positions:
            votes[rows_no_j[local]] += 1

    threshold = tau_bud + 1
    suspects = {g for g, v in votes.items() if v >= threshold} | failed_cols
    good = [j for j in present if j not in suspects and j in decoded_c]
    if len(good) < a:
        raise DecodeFailure(
            f"only {len(good)} trustworthy columns for dimension {a}"
        )
    chosen = good[:a]
    minv = mat_inv(F, [[mu[j][r] for j in chosen] for r in range(a)])
    S = mat_mul(F, [[decoded_c[j][r] for j in chosen] for r in range(a)], minv)
    T = mat_mul(F, [[decoded_d[j][r] for j in chosen] for r in range(a)], minv)

    for M in (S, T):
        for i in range(a):
            for j in range(i + 1, a):
                if M[i][j] != M[j][i]:
                    raise DecodeFailure("recovered block not symmetric "
                                        "(corruption beyond the budget)")

    corrupt = set()
    for g in present:
        mS = vec_mat(F, mu[g], S)
        mT = vec_mat(F, mu[g], T)
        expect = [F.add(mS[c], F.mul(lam[g], mT[c])) for c in range(a)]
        if blocks[g] != expect:
            corrupt.add(g)
    if len(corrupt) > tau_bud:
        raise DecodeFailure(
            f"{len(corrupt)} mismatching rows exceed the budget {tau_bud}"
        )
    return S, T, corrupt
