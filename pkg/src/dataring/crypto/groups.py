"""Prime-order groups written additively, with fixed-width element encoding.

Two implementations share one interface:

* :class:`P256Group` - NIST P-256 (prime256v1), 33-byte compressed points.
* :class:`SimulationGroup` - the integers mod the P-256 order under addition.
  Discrete logs are a modular division, so it hides nothing.  It exists so
  statistical runs of the protocol can execute 10^4 sessions quickly; never
  use it to protect data.
"""

import hashlib
from functools import reduce

from fastecdsa.curve import P256
from fastecdsa.point import Point

ELEMENT_SIZE = 33


class Group:
    name = None
    order = None
    generator = None
    identity = None
    element_size = ELEMENT_SIZE

    def add(self, a, b):
        raise NotImplementedError

    def neg(self, a):
        raise NotImplementedError

    def mul(self, a, k):
        raise NotImplementedError

    def sub(self, a, b):
        return self.add(a, self.neg(b))

    def sum(self, elements):
        return reduce(self.add, elements, self.identity)

    def base_mul(self, k):
        return self.mul(self.generator, k)

    def encode(self, a):
        raise NotImplementedError

    def decode(self, data):
        raise NotImplementedError

    def key(self, a):
        """Hashable canonical form, used by lookup tables."""
        raise NotImplementedError

    def eq(self, a, b):
        return self.key(a) == self.key(b)

    def __repr__(self):
        return f"<{type(self).__name__} {self.name}>"

    def __reduce__(self):
        # groups are singletons; pickling by name keeps worker processes cheap
        return (get_group, (self.name,))


class P256Group(Group):
    name = "p256"

    def __init__(self):
        self.curve = P256
        self.order = P256.q
        self.generator = P256.G
        self.identity = Point._identity_element()
        self._p = P256.p
        self._sqrt_exp = (P256.p + 1) // 4

    def add(self, a, b):
        return a + b

    def neg(self, a):
        if a.curve is None:
            return a
        return -a

    def mul(self, a, k):
        k %= self.order
        if k == 0 or a.curve is None:
            return self.identity
        # short negative scalars are cheaper on the negated point
        if k > self.order // 2:
            return -(a * (self.order - k))
        return a * k

    def encode(self, a):
        if a.curve is None:
            return bytes(ELEMENT_SIZE)
        return bytes([2 | (a.y & 1)]) + a.x.to_bytes(32, "big")

    def decode(self, data):
        if len(data) != ELEMENT_SIZE:
            raise ValueError(f"expected {ELEMENT_SIZE} bytes, got {len(data)}")
        if data == bytes(ELEMENT_SIZE):
            return self.identity
        prefix = data[0]
        if prefix not in (2, 3):
            raise ValueError(f"bad point prefix {prefix:#x}")
        p = self._p
        x = int.from_bytes(data[1:], "big")
        if x >= p:
            raise ValueError("x coordinate out of range")
        rhs = (pow(x, 3, p) + self.curve.a * x + self.curve.b) % p
        y = pow(rhs, self._sqrt_exp, p)
        if y * y % p != rhs:
            raise ValueError("x coordinate is not on the curve")
        if (y & 1) != (prefix & 1):
            y = p - y
        return Point(x, y, self.curve)

    def key(self, a):
        return (a.x, a.y)


class SimulationGroup(Group):
    """Z_q with addition; insecure, fast."""

    name = "sim"

    def __init__(self):
        self.order = P256.q
        seed = hashlib.sha256(b"dataring simulation generator").digest()
        self.generator = int.from_bytes(seed, "big") % self.order or 1
        self.identity = 0
        self._ginv = pow(self.generator, -1, self.order)

    def add(self, a, b):
        return (a + b) % self.order

    def neg(self, a):
        return -a % self.order

    def mul(self, a, k):
        return a * k % self.order

    def sum(self, elements):
        return sum(elements) % self.order

    def encode(self, a):
        return b"\x00" + a.to_bytes(32, "big")

    def decode(self, data):
        if len(data) != ELEMENT_SIZE or data[0] != 0:
            raise ValueError("malformed simulation-group element")
        a = int.from_bytes(data[1:], "big")
        if a >= self.order:
            raise ValueError("element out of range")
        return a

    def key(self, a):
        return a

    def dlog(self, a):
        """Exact discrete log; this is why the group is insecure."""
        return a * self._ginv % self.order


_GROUPS = {}


def get_group(name="p256"):
    if name not in _GROUPS:
        if name == "p256":
            _GROUPS[name] = P256Group()
        elif name == "sim":
            _GROUPS[name] = SimulationGroup()
        else:
            raise ValueError(f"unknown group {name!r}; choose 'p256' or 'sim'")
    return _GROUPS[name]
