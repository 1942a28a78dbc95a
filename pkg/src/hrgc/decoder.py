"""Errors-and-erasures decoding for codes given by an n x k generator matrix.

The generic path does a combinatorial error-support search on the syndrome of
the punctured word: supports are scanned in lexicographic order, smallest
weight first, and a result is returned only when exactly one codeword is
consistent at the winning weight (anything else raises DecodeFailure -- never
a silently ambiguous answer).  Under the usual guarantee
``erasures + 2*errors <= n - k`` (with an any-k-rows-independent generator)
the unique answer is the planted codeword.

When the generator rows are monomial evaluations [1, x_i, ..., x_i^(k-1)] the
caller may pass the evaluation ``points``; decoding then runs the
Welch-Berlekamp interpolation fast path (one linear solve) with identical
results under the guarantee.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

from .errors import DecodeFailure, Inconsistent, Underdetermined
from .linalg import (
    _eliminate,
    left_null_space,
    mat_vec,
    null_space,
    solve_least_index,
)

ERASED = None


@dataclass
class DecodeResult:
    message: list
    codeword: list
    error_positions: frozenset
    erasure_positions: frozenset


def decode(F, generator, values, tau_max=None, points=None) -> DecodeResult:
    """Decode ``values`` (entries are symbols or ERASED) against ``generator``.

    tau_max defaults to the guarantee limit floor((n - k - erasures)/2).
    """
    n = len(generator)
    k = len(generator[0])
    if len(values) != n:
        raise DecodeFailure(f"word length {len(values)} != {n}")
    erased = frozenset(i for i, v in enumerate(values) if v is ERASED)
    pos = [i for i in range(n) if i not in erased]
    if len(pos) < k:
        raise DecodeFailure(f"only {len(pos)} usable positions for dimension {k}")
    if tau_max is None:
        tau_max = max(0, (len(pos) - k) // 2)

    if points is not None:
        message = _decode_wb(F, k, [points[i] for i in pos],
                             [values[i] for i in pos], tau_max)
    else:
        message = _decode_generic(F, [generator[i] for i in pos],
                                  [values[i] for i in pos], k, tau_max)

    codeword = mat_vec(F, generator, message)
    errors = frozenset(
        i for i in pos if values[i] != codeword[i]
    )
    if len(errors) > tau_max:
        raise DecodeFailure(f"{len(errors)} mismatches exceed tau_max={tau_max}")
    return DecodeResult(message=message, codeword=codeword,
                        error_positions=errors, erasure_positions=erased)


def _decode_generic(F, G, r, k, tau_max):
    H = left_null_space(F, G)
    if len(H) != len(G) - k:
        raise DecodeFailure(f"generator rank below {k} on the usable positions")
    s = [0] * len(H)
    for idx, h in enumerate(H):
        acc = 0
        for a, b in zip(h, r):
            if a and b:
                acc = F.add(acc, F.mul(a, b))
        s[idx] = acc

    if not any(s):
        msg, _ = _solve_message(F, G, r, k)
        return msg

    npos = len(r)
    hcols = list(zip(*H)) if H else []
    for tau in range(1, tau_max + 1):
        candidates = []
        ambiguous = False
        for J in combinations(range(npos), tau):
            out = _consistent_support(F, hcols, J, s, len(H))
            if out == "multi":
                ambiguous = True
            elif out is not None:
                word = list(r)
                for j, e in zip(J, out):
                    word[j] = F.sub(word[j], e)
                if word not in candidates:
                    candidates.append(word)
        if ambiguous or len(candidates) > 1:
            raise DecodeFailure(
                f"ambiguous: multiple codewords within {tau} errors"
            )
        if candidates:
            msg, _ = _solve_message(F, G, candidates[0], k)
            return msg
    raise DecodeFailure(f"no codeword within tau_max={tau_max} errors")


def _consistent_support(F, hcols, J, s, nrows):
    """Solve H_J e = s.  Returns e (unique), 'multi', or None (inconsistent)."""
    tau = len(J)
    M = [[hcols[j][row] for j in J] + [s[row]] for row in range(nrows)]
    pivots = _eliminate(F, M, ncols=tau)
    rank = len(pivots)
    for row in range(rank, nrows):
        if M[row][tau]:
            return None
    if rank < tau:
        return "multi"
    return [M[i][tau] for i in range(tau)]


def _solve_message(F, G, word, k):
    try:
        return solve_least_index(F, G, word, k)
    except Exception as exc:
        raise DecodeFailure(str(exc)) from exc


# -- Welch-Berlekamp interpolation path ----------------------------------------


def _decode_wb(F, k, xs, r, tau_max):
    if tau_max == 0:
        G = [[F.pow(x, j) for j in range(k)] for x in xs]
        msg, _ = _solve_message(F, G, r, k)
        for x, v in zip(xs, r):
            if _poly_eval(F, msg, x) != v:
                raise DecodeFailure("inconsistent word with tau_max=0")
        return msg

    tau = tau_max
    # unknowns: Q coeffs (k + tau) then E coeffs (tau + 1); rows: Q(x) - r E(x) = 0
    rows = []
    for x, v in zip(xs, r):
        xp = [1]
        for _ in range(k + tau - 1):
            xp.append(F.mul(xp[-1], x))
        row = xp[: k + tau]
        ep = [1]
        for _ in range(tau):
            ep.append(F.mul(ep[-1], x))
        row = row + [F.neg(F.mul(v, e)) for e in ep[: tau + 1]]
        rows.append(row)
    basis = null_space(F, rows)
    sol = next((v for v in basis if any(v[k + tau:])), None)
    if sol is None:
        raise DecodeFailure("interpolation found no nonzero error locator")
    Q = sol[: k + tau]
    E = sol[k + tau:]
    f, rem = _poly_divmod(F, Q, E)
    if any(rem):
        raise DecodeFailure("error locator does not divide the interpolant")
    while len(f) > 1 and f[-1] == 0:
        f.pop()
    if len(f) > k:
        raise DecodeFailure("decoded polynomial exceeds the message degree")
    f = f + [0] * (k - len(f))
    bad = sum(1 for x, v in zip(xs, r) if _poly_eval(F, f, x) != v)
    if bad > tau_max:
        raise DecodeFailure(f"{bad} mismatches exceed tau_max={tau_max}")
    return f


def _poly_eval(F, coeffs, x):
    acc = 0
    for c in reversed(coeffs):
        acc = F.add(F.mul(acc, x), c)
    return acc


def _poly_divmod(F, num, den):
    num = list(num)
    dd = len(den) - 1
    while dd >= 0 and den[dd] == 0:
        dd -= 1
    if dd < 0:
        raise DecodeFailure("zero error locator")
    lead_inv = F.inv(den[dd])
    quot = [0] * max(1, len(num) - dd)
    for i in range(len(num) - 1, dd - 1, -1):
        c = num[i]
        if c:
            q = F.mul(c, lead_inv)
            quot[i - dd] = q
            for j in range(dd + 1):
                if den[j]:
                    num[i - dd + j] = F.sub(num[i - dd + j], F.mul(q, den[j]))
    return quot, num[:dd] if dd else []


# -- pure erasure solving -------------------------------------------------------


def erasure_solve(F, generator, values):
    """Solve from the least-index independent usable rows; verify the rest.

    Raises Underdetermined when fewer than k usable positions (or rank loss),
    Inconsistent(positions) when leftover positions disagree.
    """
    n = len(generator)
    k = len(generator[0])
    pos = [i for i in range(n) if values[i] is not ERASED]
    if len(pos) < k:
        raise Underdetermined(f"{len(pos)} usable positions < k={k}")
    G = [generator[i] for i in pos]
    r = [values[i] for i in pos]
    try:
        msg, used = solve_least_index(F, G, r, k)
    except Exception as exc:
        raise Underdetermined(str(exc)) from exc
    bad = set()
    for local, i in enumerate(pos):
        if local in used:
            continue
        have = 0
        for a, b in zip(generator[i], msg):
            if a and b:
                have = F.add(have, F.mul(a, b))
        if have != values[i]:
            bad.add(i)
    if bad:
        raise Inconsistent(bad)
    return msg
