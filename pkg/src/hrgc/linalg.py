"""Dense linear algebra over a Field: matrices are list-of-row-lists of ints."""

from __future__ import annotations

from .errors import SingularSystem


def zeros(r, c):
    return [[0] * c for _ in range(r)]


def identity(F, n):
    return [[1 if i == j else 0 for j in range(n)] for i in range(n)]


def transpose(M):
    return [list(col) for col in zip(*M)]


def mat_mul(F, A, B):
    add, mul = F.add, F.mul
    rb = len(B)
    cb = len(B[0]) if rb else 0
    out = [[0] * cb for _ in range(len(A))]
    for i, Ai in enumerate(A):
        Oi = out[i]
        for k in range(rb):
            a = Ai[k]
            if a:
                Bk = B[k]
                for j in range(cb):
                    b = Bk[j]
                    if b:
                        Oi[j] = add(Oi[j], mul(a, b))
    return out


def mat_vec(F, A, v):
    add, mul = F.add, F.mul
    out = []
    for Ai in A:
        s = 0
        for a, x in zip(Ai, v):
            if a and x:
                s = add(s, mul(a, x))
        out.append(s)
    return out


def vec_mat(F, v, A):
    """Row vector times matrix."""
    add, mul = F.add, F.mul
    cols = len(A[0])
    out = [0] * cols
    for a, Ai in zip(v, A):
        if a:
            for j in range(cols):
                b = Ai[j]
                if b:
                    out[j] = add(out[j], mul(a, b))
    return out


def dot(F, u, v):
    add, mul = F.add, F.mul
    s = 0
    for a, b in zip(u, v):
        if a and b:
            s = add(s, mul(a, b))
    return s


def _eliminate(F, M, ncols=None):
    """In-place forward elimination; returns pivot columns.  M is augmented-ok."""
    add, mul, neg, inv = F.add, F.mul, F.neg, F.inv
    rows = len(M)
    cols = ncols if ncols is not None else (len(M[0]) if rows else 0)
    pivots = []
    r = 0
    for c in range(cols):
        piv = None
        for rr in range(r, rows):
            if M[rr][c]:
                piv = rr
                break
        if piv is None:
            continue
        M[r], M[piv] = M[piv], M[r]
        ic = inv(M[r][c])
        M[r] = [mul(ic, v) for v in M[r]]
        for rr in range(rows):
            if rr != r and M[rr][c]:
                f = neg(M[rr][c])
                Mr, Mc = M[rr], M[r]
                for k in range(c, len(Mr)):
                    if Mc[k]:
                        Mr[k] = add(Mr[k], mul(f, Mc[k]))
        pivots.append(c)
        r += 1
        if r == rows:
            break
    return pivots


def rank(F, A):
    M = [row[:] for row in A]
    return len(_eliminate(F, M))


def det_nonzero(F, A):
    """True iff the square matrix is invertible (forward elimination only)."""
    add, mul, neg, inv = F.add, F.mul, F.neg, F.inv
    n = len(A)
    M = [row[:] for row in A]
    for c in range(n):
        piv = None
        for r in range(c, n):
            if M[r][c]:
                piv = r
                break
        if piv is None:
            return False
        M[c], M[piv] = M[piv], M[c]
        ic = inv(M[c][c])
        for r in range(c + 1, n):
            f = M[r][c]
            if f:
                f = neg(mul(f, ic))
                Mr, Mc = M[r], M[c]
                for k in range(c, n):
                    if Mc[k]:
                        Mr[k] = add(Mr[k], mul(f, Mc[k]))
    return True


def mat_inv(F, A):
    n = len(A)
    M = [row[:] + [1 if i == j else 0 for j in range(n)] for i, row in enumerate(A)]
    pivots = _eliminate(F, M, ncols=n)
    if len(pivots) != n:
        raise SingularSystem(f"{n}x{n} matrix not invertible")
    return [row[n:] for row in M]


def solve_square(F, A, b):
    """Solve A x = b for square regular A."""
    n = len(A)
    M = [A[i][:] + [b[i]] for i in range(n)]
    pivots = _eliminate(F, M, ncols=n)
    if len(pivots) != n:
        raise SingularSystem(f"{n}x{n} system singular")
    return [M[i][n] for i in range(n)]


def solve_least_index(F, A, b, need):
    """Solve using the least-index independent subset of the rows of A.

    Returns (x, used_rows).  Raises SingularSystem if rank < need.
    """
    used = []
    sub = []
    rhs = []
    for i, row in enumerate(A):
        trial = sub + [row]
        M = [r[:] for r in trial]
        if len(_eliminate(F, M)) == len(trial):
            sub.append(row)
            rhs.append(b[i])
            used.append(i)
            if len(sub) == need:
                break
    if len(sub) < need:
        raise SingularSystem(f"rank {len(sub)} < {need}")
    return solve_square(F, sub, rhs), used


def null_space(F, A):
    """Basis of {v : A v = 0} as a list of column vectors."""
    rows = len(A)
    cols = len(A[0]) if rows else 0
    M = [row[:] for row in A]
    pivots = _eliminate(F, M, ncols=cols)
    piv_set = set(pivots)
    free = [c for c in range(cols) if c not in piv_set]
    basis = []
    for fc in free:
        v = [0] * cols
        v[fc] = 1
        for r, pc in enumerate(pivots):
            v[pc] = F.neg(M[r][fc])
        basis.append(v)
    return basis


def left_null_space(F, G):
    """Rows h with h G = 0; returns them as a matrix (possibly empty)."""
    return [list(v) for v in null_space(F, transpose(G))]


def mat_eq(A, B):
    return A == B
