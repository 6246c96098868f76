"""Reverse-mode automatic differentiation on a scalar operation tape.

Every intermediate scalar of a computation is recorded as a node on an
append-only tape.  A single reverse sweep over the tape then yields the
derivative of one chosen output with respect to every recorded node.  The
op set is deliberately small: arithmetic, min/max/abs (with a deterministic
subgradient convention), tanh, leaky ReLU, sin/cos, exp and constant powers.
That is enough to express small neural policies, the simulated plant
dynamics and min/max-based requirement margins end to end.

Subgradient convention at kinks: ``min``, ``max`` and ``abs`` route the
full gradient to the *left* operand on ties, and ``abs`` at zero uses +1.
``leaky_relu`` at zero uses slope 1 (it is ``max(x, slope*x)`` with the
same left-tie rule).  ``clamp`` is composed from ``min``/``max`` and
inherits the convention, so a saturated bound passes zero gradient.

The float/tape duality lives in :data:`FLOAT_OPS` and :class:`TapeOps`,
two interchangeable backends for the handful of non-operator functions
(tanh, min, abs, ...).  Code written against a backend plus ordinary
Python arithmetic runs unchanged on plain floats and on tape nodes, and
produces bit-identical forward values on both paths.
"""

from __future__ import annotations

import math

__all__ = [
    "Tape",
    "Node",
    "Gradient",
    "FloatOps",
    "TapeOps",
    "FLOAT_OPS",
]

# Op codes.  Parent slots: pa/pb are tape indices, -1 when unused.
_CONST = 0   # leaf (constants and differentiation inputs)
_ADD = 1     # pa + pb
_ADDC = 2    # pa + aux
_SUB = 3     # pa - pb
_CSUB = 4    # aux - pa
_MUL = 5     # pa * pb
_MULC = 6    # pa * aux
_DIV = 7     # pa / pb
_DIVC = 8    # pa / aux
_NEG = 9     # -pa
_MIN = 10    # min(pa, pb), left wins ties
_MAX = 11    # max(pa, pb), left wins ties
_ABS = 12    # |pa|, +1 at zero
_TANH = 13
_LEAKY = 14  # x if x >= 0 else aux*x
_SIN = 15
_COS = 16
_EXP = 17
_POWC = 18   # pa ** aux

_OP_NAMES = {
    _CONST: "const", _ADD: "add", _ADDC: "add_const", _SUB: "sub",
    _CSUB: "const_sub", _MUL: "mul", _MULC: "mul_const", _DIV: "div",
    _DIVC: "div_const", _NEG: "neg", _MIN: "min", _MAX: "max",
    _ABS: "abs", _TANH: "tanh", _LEAKY: "leaky_relu", _SIN: "sin",
    _COS: "cos", _EXP: "exp", _POWC: "pow_const",
}

# Ops whose derivative is discontinuous; used to measure how close a
# computation came to a tie (see Tape.kink_gap).
_KINKED = (_MIN, _MAX, _ABS, _LEAKY)


def _check_finite(x: float) -> float:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"non-finite value {x!r} cannot enter the tape")
    return x


class Node:
    """Handle to one scalar recorded on a tape.

    Supports ordinary arithmetic with other nodes of the same tape and
    with plain numbers; every operation appends a new node.
    """

    __slots__ = ("tape", "index", "value")

    def __init__(self, tape: "Tape", index: int, value: float):
        self.tape = tape
        self.index = index
        self.value = value

    # -- introspection ------------------------------------------------

    @property
    def op(self) -> str:
        return _OP_NAMES[self.tape.nodes[self.index][0]]

    @property
    def parents(self) -> tuple[int, ...]:
        _, pa, pb, _, _ = self.tape.nodes[self.index]
        return tuple(p for p in (pa, pb) if p >= 0)

    @property
    def adjoint(self) -> float:
        """d(root)/d(self) after the last backward pass, else 0."""
        adj = self.tape.adjoints
        return 0.0 if adj is None else adj[self.index]

    def __repr__(self) -> str:
        return f"Node({self.op}@{self.index}={self.value!r})"

    # -- arithmetic ----------------------------------------------------

    def _other_index(self, other: "Node") -> int:
        if other.tape is not self.tape:
            raise ValueError("cannot combine nodes from different tapes")
        return other.index

    def __add__(self, other):
        t = self.tape
        if type(other) is Node:
            return t._push(_ADD, self.index, self._other_index(other),
                           self.value + other.value, 0.0)
        return t._push(_ADDC, self.index, -1, self.value + other, float(other))

    __radd__ = __add__

    def __sub__(self, other):
        t = self.tape
        if type(other) is Node:
            return t._push(_SUB, self.index, self._other_index(other),
                           self.value - other.value, 0.0)
        # x - c recorded as x + (-c): identical IEEE result
        return t._push(_ADDC, self.index, -1, self.value - other, -float(other))

    def __rsub__(self, other):
        return self.tape._push(_CSUB, self.index, -1,
                               float(other) - self.value, float(other))

    def __mul__(self, other):
        t = self.tape
        if type(other) is Node:
            return t._push(_MUL, self.index, self._other_index(other),
                           self.value * other.value, 0.0)
        return t._push(_MULC, self.index, -1, self.value * other, float(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        t = self.tape
        if type(other) is Node:
            if other.value == 0.0:
                raise ZeroDivisionError("tape division by zero")
            return t._push(_DIV, self.index, self._other_index(other),
                           self.value / other.value, 0.0)
        if float(other) == 0.0:
            raise ZeroDivisionError("tape division by zero")
        return t._push(_DIVC, self.index, -1, self.value / other, float(other))

    def __rtruediv__(self, other):
        if self.value == 0.0:
            raise ZeroDivisionError("tape division by zero")
        num = self.tape.const(float(other))
        return self.tape._push(_DIV, num.index, self.index,
                               float(other) / self.value, 0.0)

    def __neg__(self):
        return self.tape._push(_NEG, self.index, -1, -self.value, 0.0)

    def __pow__(self, exponent):
        if type(exponent) is Node:
            raise TypeError("only constant exponents are supported")
        c = float(exponent)
        if self.value < 0.0 and c != int(c):
            raise ValueError("negative base with fractional exponent")
        return self.tape._push(_POWC, self.index, -1, self.value ** c, c)


class Gradient:
    """Map from tape nodes to d(root)/d(node) produced by backward()."""

    __slots__ = ("tape", "_adjoints")

    def __init__(self, tape: "Tape", adjoints: list[float]):
        self.tape = tape
        self._adjoints = adjoints

    def wrt(self, node: Node) -> float:
        if node.tape is not self.tape:
            raise ValueError("node does not belong to this gradient's tape")
        return self._adjoints[node.index]

    def __getitem__(self, key) -> float:
        if type(key) is Node:
            return self.wrt(key)
        return self._adjoints[key]


class Tape:
    """Append-only record of a scalar computation.

    Nodes are stored as tuples ``(op, parent_a, parent_b, value, aux)``.
    Values are immutable once recorded; ``replay`` recomputes them from
    the recorded structure and must reproduce every value bit-exactly.
    """

    __slots__ = ("nodes", "adjoints")

    def __init__(self):
        self.nodes: list[tuple] = []
        self.adjoints: list[float] | None = None

    def __len__(self) -> int:
        return len(self.nodes)

    def _push(self, op: int, pa: int, pb: int, value: float, aux: float) -> Node:
        nodes = self.nodes
        nodes.append((op, pa, pb, value, aux))
        return Node(self, len(nodes) - 1, value)

    # -- leaves ---------------------------------------------------------

    def const(self, value: float) -> Node:
        """Record a constant leaf (also used for differentiation inputs)."""
        return self._push(_CONST, -1, -1, _check_finite(value), 0.0)

    def inputs(self, values) -> list[Node]:
        """Record a sequence of leaves, e.g. a parameter vector."""
        return [self.const(v) for v in values]

    # -- non-operator primitives -----------------------------------------

    def minimum(self, a: Node, b: Node) -> Node:
        if a.tape is not self or b.tape is not self:
            raise ValueError("cannot combine nodes from different tapes")
        v = a.value if a.value <= b.value else b.value
        return self._push(_MIN, a.index, b.index, v, 0.0)

    def maximum(self, a: Node, b: Node) -> Node:
        if a.tape is not self or b.tape is not self:
            raise ValueError("cannot combine nodes from different tapes")
        v = a.value if a.value >= b.value else b.value
        return self._push(_MAX, a.index, b.index, v, 0.0)

    def absolute(self, a: Node) -> Node:
        return self._push(_ABS, a.index, -1, abs(a.value), 0.0)

    def tanh(self, a: Node) -> Node:
        return self._push(_TANH, a.index, -1, math.tanh(a.value), 0.0)

    def leaky_relu(self, a: Node, slope: float = 0.01) -> Node:
        v = a.value if a.value >= 0.0 else slope * a.value
        return self._push(_LEAKY, a.index, -1, v, float(slope))

    def sin(self, a: Node) -> Node:
        return self._push(_SIN, a.index, -1, math.sin(a.value), 0.0)

    def cos(self, a: Node) -> Node:
        return self._push(_COS, a.index, -1, math.cos(a.value), 0.0)

    def exp(self, a: Node) -> Node:
        return self._push(_EXP, a.index, -1, math.exp(a.value), 0.0)

    def clamp(self, a: Node, lo: float, hi: float) -> Node:
        """min(max(a, lo), hi); inherits the left-tie subgradient rule."""
        if lo > hi:
            raise ValueError(f"clamp bounds out of order: {lo} > {hi}")
        return self.minimum(self.maximum(a, self.const(lo)), self.const(hi))

    # -- reverse sweep -----------------------------------------------------

    def backward(self, root: Node) -> Gradient:
        """Populate adjoints of all ancestors of root; adjoint(root) = 1."""
        if root.tape is not self:
            raise ValueError("root node does not belong to this tape")
        nodes = self.nodes
        adj = [0.0] * len(nodes)
        adj[root.index] = 1.0
        for i in range(root.index, -1, -1):
            a = adj[i]
            if a == 0.0:
                continue
            op, pa, pb, v, aux = nodes[i]
            if op == _CONST:
                continue
            elif op == _ADD:
                adj[pa] += a
                adj[pb] += a
            elif op == _ADDC:
                adj[pa] += a
            elif op == _SUB:
                adj[pa] += a
                adj[pb] -= a
            elif op == _CSUB:
                adj[pa] -= a
            elif op == _MUL:
                adj[pa] += a * nodes[pb][3]
                adj[pb] += a * nodes[pa][3]
            elif op == _MULC:
                adj[pa] += a * aux
            elif op == _DIV:
                vb = nodes[pb][3]
                adj[pa] += a / vb
                adj[pb] -= a * v / vb
            elif op == _DIVC:
                adj[pa] += a / aux
            elif op == _NEG:
                adj[pa] -= a
            elif op == _MIN:
                if nodes[pa][3] <= nodes[pb][3]:
                    adj[pa] += a
                else:
                    adj[pb] += a
            elif op == _MAX:
                if nodes[pa][3] >= nodes[pb][3]:
                    adj[pa] += a
                else:
                    adj[pb] += a
            elif op == _ABS:
                if nodes[pa][3] >= 0.0:
                    adj[pa] += a
                else:
                    adj[pa] -= a
            elif op == _TANH:
                adj[pa] += a * (1.0 - v * v)
            elif op == _LEAKY:
                adj[pa] += a if nodes[pa][3] >= 0.0 else a * aux
            elif op == _SIN:
                adj[pa] += a * math.cos(nodes[pa][3])
            elif op == _COS:
                adj[pa] -= a * math.sin(nodes[pa][3])
            elif op == _EXP:
                adj[pa] += a * v
            elif op == _POWC:
                x = nodes[pa][3]
                if aux == 2.0:
                    adj[pa] += a * 2.0 * x
                else:
                    adj[pa] += a * aux * x ** (aux - 1.0)
            else:  # pragma: no cover
                raise AssertionError(f"unknown op code {op}")
        self.adjoints = adj
        return Gradient(self, adj)

    # -- diagnostics ---------------------------------------------------------

    def replay(self) -> list[float]:
        """Recompute every node value from the recorded structure."""
        out: list[float] = []
        for op, pa, pb, v, aux in self.nodes:
            if op == _CONST:
                out.append(v)
            elif op == _ADD:
                out.append(out[pa] + out[pb])
            elif op == _ADDC:
                out.append(out[pa] + aux)
            elif op == _SUB:
                out.append(out[pa] - out[pb])
            elif op == _CSUB:
                out.append(aux - out[pa])
            elif op == _MUL:
                out.append(out[pa] * out[pb])
            elif op == _MULC:
                out.append(out[pa] * aux)
            elif op == _DIV:
                out.append(out[pa] / out[pb])
            elif op == _DIVC:
                out.append(out[pa] / aux)
            elif op == _NEG:
                out.append(-out[pa])
            elif op == _MIN:
                x, y = out[pa], out[pb]
                out.append(x if x <= y else y)
            elif op == _MAX:
                x, y = out[pa], out[pb]
                out.append(x if x >= y else y)
            elif op == _ABS:
                out.append(abs(out[pa]))
            elif op == _TANH:
                out.append(math.tanh(out[pa]))
            elif op == _LEAKY:
                x = out[pa]
                out.append(x if x >= 0.0 else aux * x)
            elif op == _SIN:
                out.append(math.sin(out[pa]))
            elif op == _COS:
                out.append(math.cos(out[pa]))
            elif op == _EXP:
                out.append(math.exp(out[pa]))
            elif op == _POWC:
                out.append(out[pa] ** aux)
            else:  # pragma: no cover
                raise AssertionError(f"unknown op code {op}")
        return out

    def kink_gap(self) -> float:
        """Smallest margin by which any kinked op avoided a tie.

        Returns +inf when the tape holds no min/max/abs/leaky node.  A
        tiny gap means a finite-difference probe may straddle the kink,
        so gradient checks should skip such samples.
        """
        nodes = self.nodes
        gap = math.inf
        for op, pa, pb, v, aux in nodes:
            if op == _MIN or op == _MAX:
                g = abs(nodes[pa][3] - nodes[pb][3])
            elif op == _ABS or op == _LEAKY:
                g = abs(nodes[pa][3])
            else:
                continue
            if g < gap:
                gap = g
        return gap


class FloatOps:
    """Plain-float backend mirroring the tape primitives bit for bit."""

    __slots__ = ()

    @staticmethod
    def const(value: float) -> float:
        return float(value)

    @staticmethod
    def value(x: float) -> float:
        return x

    @staticmethod
    def minimum(a: float, b: float) -> float:
        return a if a <= b else b

    @staticmethod
    def maximum(a: float, b: float) -> float:
        return a if a >= b else b

    @staticmethod
    def absolute(a: float) -> float:
        return abs(a)

    tanh = staticmethod(math.tanh)
    sin = staticmethod(math.sin)
    cos = staticmethod(math.cos)
    exp = staticmethod(math.exp)

    @staticmethod
    def leaky_relu(a: float, slope: float = 0.01) -> float:
        return a if a >= 0.0 else slope * a

    @staticmethod
    def clamp(a: float, lo: float, hi: float) -> float:
        if lo > hi:
            raise ValueError(f"clamp bounds out of order: {lo} > {hi}")
        x = a if a >= lo else lo
        return x if x <= hi else hi


FLOAT_OPS = FloatOps()


class TapeOps:
    """Tape-recording backend; forward values match FLOAT_OPS exactly."""

    __slots__ = ("tape",)

    def __init__(self, tape: Tape):
        self.tape = tape

    def const(self, value: float) -> Node:
        return self.tape.const(value)

    @staticmethod
    def value(x: Node) -> float:
        return x.value

    def minimum(self, a: Node, b: Node) -> Node:
        return self.tape.minimum(a, b)

    def maximum(self, a: Node, b: Node) -> Node:
        return self.tape.maximum(a, b)

    def absolute(self, a: Node) -> Node:
        return self.tape.absolute(a)

    def tanh(self, a: Node) -> Node:
        return self.tape.tanh(a)

    def sin(self, a: Node) -> Node:
        return self.tape.sin(a)

    def cos(self, a: Node) -> Node:
        return self.tape.cos(a)

    def exp(self, a: Node) -> Node:
        return self.tape.exp(a)

    def leaky_relu(self, a: Node, slope: float = 0.01) -> Node:
        return self.tape.leaky_relu(a, slope)

    def clamp(self, a: Node, lo: float, hi: float) -> Node:
        return self.tape.clamp(a, lo, hi)
