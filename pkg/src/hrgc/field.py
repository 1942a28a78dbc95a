"""Exact arithmetic over GF(q^2) for prime-power q <= 16.

Symbols are plain Python ints in [0, q^2 - 1]: the base-p digit expansion of
the index gives the coordinates of the element in the polynomial basis
{1, x, ..., x^(2s-1)} of GF(p^(2s)) = GF(q^2).  The modulus for each q is
fixed below (lexicographically smallest monic primitive polynomial with x as
a generator), so the integer representation is stable across runs and
implementations.

phi = x (index p) is the primitive element; exp/log tables are built by
repeated multiplication by x and verified to have full period q^2 - 1.
"""

from __future__ import annotations

from .errors import DivisionByZero, UnsupportedQ

# q -> (characteristic p, extension degree 2s, modulus coefficients c0..c_{2s-1};
# the leading x^(2s) coefficient is implicit).  x is primitive for every entry.
_MODULI = {
    2: (2, 2, (1, 1)),            # x^2 + x + 1
    3: (3, 2, (2, 1)),            # x^2 + x + 2
    4: (2, 4, (1, 1, 0, 0)),      # x^4 + x + 1
    5: (5, 2, (2, 1)),            # x^2 + x + 2
    7: (7, 2, (3, 1)),            # x^2 + x + 3
    8: (2, 6, (1, 1, 0, 0, 0, 0)),        # x^6 + x + 1
    9: (3, 4, (2, 1, 0, 0)),              # x^4 + x + 2
    11: (11, 2, (7, 1)),                  # x^2 + x + 7
    13: (13, 2, (2, 1)),                  # x^2 + x + 2
    16: (2, 8, (1, 0, 1, 1, 1, 0, 0, 0)),  # x^8 + x^4 + x^3 + x^2 + 1
}

SUPPORTED_Q = tuple(sorted(_MODULI))


class Field:
    """GF(q^2) with lookup-table arithmetic.  Immutable after construction."""

    def __init__(self, q: int):
        if q not in _MODULI:
            raise UnsupportedQ(
                f"q={q} not supported; choose one of {SUPPORTED_Q}"
            )
        p, deg, mod = _MODULI[q]
        self.q = q
        self.order = q * q
        self.characteristic = p
        self.degree = deg
        self.modulus = mod

        order = self.order
        # digit-wise add/neg over base p; full tables are small (order^2 <= 65536)
        digits = [self._digits(a, p, deg) for a in range(order)]
        undig = lambda ds: sum(d * p**i for i, d in enumerate(ds))
        self._neg = [undig([(-d) % p for d in digits[a]]) for a in range(order)]
        self._add = [
            [
                undig([(da + db) % p for da, db in zip(digits[a], digits[b])])
                for b in range(order)
            ]
            for a in range(order)
        ]

        # exp/log from repeated multiplication by x
        self._exp = [0] * (order - 1)
        self._log = [0] * order
        a = 1
        for i in range(order - 1):
            self._exp[i] = a
            self._log[a] = i
            a = self._mul_by_x(a)
        if a != 1 or len(set(self._exp)) != order - 1:
            raise AssertionError(f"modulus for q={q} is not primitive")
        self.phi = self._exp[1] if order > 2 else 1  # = x, index p

        self._inv = [0] * order
        for b in range(1, order):
            self._inv[b] = self._exp[(order - 1 - self._log[b]) % (order - 1)]

    @staticmethod
    def _digits(a, p, deg):
        out = []
        for _ in range(deg):
            out.append(a % p)
            a //= p
        return out

    def _mul_by_x(self, a: int) -> int:
        p, deg, mod = self.characteristic, self.degree, self.modulus
        ds = self._digits(a, p, deg)
        top = ds[-1]
        ds = [0] + ds[:-1]
        if top:
            for i in range(deg):
                ds[i] = (ds[i] - top * mod[i]) % p
        return sum(d * p**i for i, d in enumerate(ds))

    # -- arithmetic -----------------------------------------------------

    def add(self, a: int, b: int) -> int:
        return self._add[a][b]

    def neg(self, a: int) -> int:
        return self._neg[a]

    def sub(self, a: int, b: int) -> int:
        return self._add[a][self._neg[b]]

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return self._exp[(self._log[a] + self._log[b]) % (self.order - 1)]

    def inv(self, a: int) -> int:
        if a == 0:
            raise DivisionByZero("inverse of 0")
        return self._inv[a]

    def div(self, a: int, b: int) -> int:
        if b == 0:
            raise DivisionByZero("division by 0")
        if a == 0:
            return 0
        return self._exp[(self._log[a] - self._log[b]) % (self.order - 1)]

    def pow(self, a: int, e: int) -> int:
        if a == 0:
            if e == 0:
                return 1
            if e < 0:
                raise DivisionByZero("0 to a negative power")
            return 0
        return self._exp[(self._log[a] * e) % (self.order - 1)]

    def exp(self, i: int) -> int:
        """phi^i (i may be any integer)."""
        return self._exp[i % (self.order - 1)]

    def log(self, a: int) -> int:
        if a == 0:
            raise DivisionByZero("log of 0")
        return self._log[a]

    def elements(self):
        return range(self.order)

    # -- structure ------------------------------------------------------

    def trace_zero_set(self) -> tuple:
        """The q solutions of y^q + y = 0, ascending by index (theta_0 = 0)."""
        out = [a for a in range(self.order) if self.add(self.pow(a, self.q), a) == 0]
        assert out[0] == 0 and len(out) == self.q
        return tuple(out)

    def __repr__(self):
        return f"Field(q={self.q})"


def field_new(q: int) -> Field:
    """Build GF(q^2); raises UnsupportedQ for anything outside the table."""
    return Field(q)
