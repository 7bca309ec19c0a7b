"""Reverse-mode automatic differentiation over real scalars.

A :class:`Tape` records every scalar operation as a node
``(op, parent indices, local partials, value)``.  Parents always precede
their children, so one reverse sweep over the node list accumulates the
adjoints of the whole graph.

Vars mix freely with Python floats; a float operand is folded into the
local partials instead of being recorded as its own node.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

__all__ = [
    "Tape",
    "Var",
    "ComplexPair",
    "exp",
    "sqrt",
    "maximum",
    "value_of",
    "grad_check",
]

INPUT = "input"
CONSTANT = "constant"
ADD = "add"
SUB = "sub"
MUL = "mul"
DIV = "div"
NEG = "neg"
ABS = "abs"
MAX = "max"
EXP = "exp"
SQRT = "sqrt"
POWI = "powi"

_REAL = (int, float)


class Tape:
    """Append-only record of scalar operations.

    One tape belongs to one computation; it is single-writer and Vars from
    different tapes must never be combined.
    """

    __slots__ = ("nodes",)

    def __init__(self) -> None:
        self.nodes: list[tuple] = []

    def __len__(self) -> int:
        return len(self.nodes)

    def _push(self, op: str, parents: tuple, partials: tuple, value: float) -> "Var":
        nodes = self.nodes
        idx = len(nodes)
        nodes.append((op, parents, partials, value))
        return Var(self, idx, value)

    def input(self, value: float) -> "Var":
        """Create a leaf that gradients are reported for."""
        return self._push(INPUT, (), (), float(value))

    def inputs(self, values: Sequence[float]) -> list["Var"]:
        return [self.input(v) for v in values]

    def constant(self, value: float) -> "Var":
        return self._push(CONSTANT, (), (), float(value))

    def backward(self, output: "Var") -> dict[int, float]:
        """Adjoint of ``output`` with respect to every input node.

        Inputs that ``output`` does not depend on get gradient 0.
        """
        if not isinstance(output, Var):
            raise TypeError("backward() needs a Var produced on this tape")
        if output.tape is not self:
            raise ValueError("output Var belongs to a different tape")
        nodes = self.nodes
        adj = [0.0] * (output.index + 1)
        adj[output.index] = 1.0
        for i in range(output.index, -1, -1):
            g = adj[i]
            if g == 0.0:
                continue
            _, parents, partials, _ = nodes[i]
            for p, d in zip(parents, partials):
                adj[p] += g * d
        grads = {}
        for i, node in enumerate(nodes):
            if node[0] is INPUT:
                grads[i] = adj[i] if i <= output.index else 0.0
        return grads

    def gradient(self, output: "Var", wrt: Sequence["Var"]) -> list[float]:
        """Gradient of ``output`` restricted to the Vars in ``wrt``, in order."""
        grads = self.backward(output)
        return [grads.get(v.index, 0.0) for v in wrt]


class Var:
    """A scalar value living on a tape."""

    __slots__ = ("tape", "index", "value")

    def __init__(self, tape: Tape, index: int, value: float) -> None:
        self.tape = tape
        self.index = index
        self.value = value

    def __repr__(self) -> str:
        return f"Var(value={self.value!r}, index={self.index})"

    def __float__(self) -> float:
        return float(self.value)

    def _other(self, other: "Var") -> None:
        if other.tape is not self.tape:
            raise ValueError("cannot combine Vars from different tapes")

    def __add__(self, other):
        if type(other) is not Var and not isinstance(other, _REAL):
            return NotImplemented
        if type(other) is Var:
            self._other(other)
            return self.tape._push(ADD, (self.index, other.index), (1.0, 1.0), self.value + other.value)
        return self.tape._push(ADD, (self.index,), (1.0,), self.value + other)

    def __radd__(self, other):
        if type(other) is not Var and not isinstance(other, _REAL):
            return NotImplemented
        return self.tape._push(ADD, (self.index,), (1.0,), other + self.value)

    def __sub__(self, other):
        if type(other) is not Var and not isinstance(other, _REAL):
            return NotImplemented
        if type(other) is Var:
            self._other(other)
            return self.tape._push(SUB, (self.index, other.index), (1.0, -1.0), self.value - other.value)
        return self.tape._push(SUB, (self.index,), (1.0,), self.value - other)

    def __rsub__(self, other):
        if type(other) is not Var and not isinstance(other, _REAL):
            return NotImplemented
        return self.tape._push(SUB, (self.index,), (-1.0,), other - self.value)

    def __mul__(self, other):
        if type(other) is not Var and not isinstance(other, _REAL):
            return NotImplemented
        if type(other) is Var:
            self._other(other)
            return self.tape._push(
                MUL, (self.index, other.index), (other.value, self.value), self.value * other.value
            )
        return self.tape._push(MUL, (self.index,), (other,), self.value * other)

    def __rmul__(self, other):
        if type(other) is not Var and not isinstance(other, _REAL):
            return NotImplemented
        return self.tape._push(MUL, (self.index,), (other,), other * self.value)

    def __truediv__(self, other):
        if type(other) is not Var and not isinstance(other, _REAL):
            return NotImplemented
        if type(other) is Var:
            self._other(other)
            d = other.value
            if d == 0.0:
                raise ZeroDivisionError("division by a zero-valued Var")
            v = self.value / d
            return self.tape._push(DIV, (self.index, other.index), (1.0 / d, -v / d), v)
        if other == 0:
            raise ZeroDivisionError("division by zero")
        return self.tape._push(DIV, (self.index,), (1.0 / other,), self.value / other)

    def __rtruediv__(self, other):
        if type(other) is not Var and not isinstance(other, _REAL):
            return NotImplemented
        d = self.value
        if d == 0.0:
            raise ZeroDivisionError("division by a zero-valued Var")
        v = other / d
        return self.tape._push(DIV, (self.index,), (-v / d,), v)

    def __neg__(self):
        return self.tape._push(NEG, (self.index,), (-1.0,), -self.value)

    def __pos__(self):
        return self

    def __abs__(self):
        x = self.value
        # d|x|/dx at 0 is taken as 0
        d = 1.0 if x > 0 else (-1.0 if x < 0 else 0.0)
        return self.tape._push(ABS, (self.index,), (d,), abs(x))

    def __pow__(self, n):
        if not isinstance(n, int):
            raise TypeError("only integer powers are recorded (powi)")
        x = self.value
        if n == 0:
            return self.tape._push(POWI, (self.index,), (0.0,), 1.0)
        return self.tape._push(POWI, (self.index,), (n * x ** (n - 1),), x**n)

    # comparisons act on values only; they are not differentiable
    def __lt__(self, other):
        return self.value < value_of(other)

    def __le__(self, other):
        return self.value <= value_of(other)

    def __gt__(self, other):
        return self.value > value_of(other)

    def __ge__(self, other):
        return self.value >= value_of(other)


def value_of(x) -> float:
    """Plain numeric value of a Var, ComplexPair or number."""
    if type(x) is Var:
        return x.value
    if isinstance(x, ComplexPair):
        return complex(value_of(x.re), value_of(x.im))
    return x


def exp(x):
    if type(x) is Var:
        v = math.exp(x.value)
        return x.tape._push(EXP, (x.index,), (v,), v)
    return math.exp(x)


def sqrt(x):
    """Square root; the derivative at 0 is taken as 0 so that norms of
    exactly-zero residuals contribute a zero subgradient."""
    if type(x) is Var:
        v = math.sqrt(x.value)
        d = 0.5 / v if v > 0.0 else 0.0
        return x.tape._push(SQRT, (x.index,), (d,), v)
    return math.sqrt(x)


def maximum(a, b):
    """max(a, b); on a tie the adjoint is split 0.5/0.5."""
    if type(a) is not Var and type(b) is not Var:
        return max(a, b)
    av, bv = value_of(a), value_of(b)
    if av > bv:
        da, db = 1.0, 0.0
    elif av < bv:
        da, db = 0.0, 1.0
    else:
        da = db = 0.5
    tape = a.tape if type(a) is Var else b.tape
    parents, partials = [], []
    if type(a) is Var:
        parents.append(a.index)
        partials.append(da)
    if type(b) is Var:
        if type(a) is Var:
            a._other(b)
        parents.append(b.index)
        partials.append(db)
    return tape._push(MAX, tuple(parents), tuple(partials), max(av, bv))


class ComplexPair:
    """Complex scalar held as a (re, im) pair of Vars or floats.

    Only the arithmetic needed to run an RK step on ``z' = lam * z`` and take a
    modulus is provided.
    """

    __slots__ = ("re", "im")

    def __init__(self, re, im=0.0) -> None:
        self.re = re
        self.im = im

    @staticmethod
    def wrap(x) -> "ComplexPair":
        if isinstance(x, ComplexPair):
            return x
        if isinstance(x, complex):
            return ComplexPair(x.real, x.imag)
        return ComplexPair(x, 0.0)

    def __add__(self, other):
        o = ComplexPair.wrap(other)
        return ComplexPair(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other):
        o = ComplexPair.wrap(other)
        return ComplexPair(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        return ComplexPair.wrap(other) - self

    def __mul__(self, other):
        if isinstance(other, (ComplexPair, complex)):
            o = ComplexPair.wrap(other)
            return ComplexPair(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)
        return ComplexPair(self.re * other, self.im * other)

    __rmul__ = __mul__

    def __neg__(self):
        return ComplexPair(-self.re, -self.im)

    def __abs__(self):
        return sqrt(self.re * self.re + self.im * self.im)

    def __repr__(self) -> str:
        return f"ComplexPair({self.re!r}, {self.im!r})"


def grad_check(
    fn: Callable[[list[Var]], Var],
    point: Sequence[float],
    step: float = 1e-5,
    floor: float = 1e-3,
) -> float:
    """Worst relative error between reverse-mode and central-difference gradients.

    ``fn`` maps a list of input Vars to a scalar Var.  Relative errors are
    ``|ad - fd| / max(|ad|, |fd|, floor)``, so components smaller than
    ``floor`` are compared in absolute terms (the central difference itself
    carries an ``O(step^2)`` absolute error).
    """
    if step <= 0:
        raise ValueError("step must be positive")
    point = [float(x) for x in point]

    def evaluate(x: Sequence[float]) -> tuple[float, Tape, list[Var], Var]:
        tape = Tape()
        xs = tape.inputs(x)
        out = fn(xs)
        if type(out) is not Var:
            out = tape.constant(out)
        return out.value, tape, xs, out

    _, tape, xs, out = evaluate(point)
    ad = tape.gradient(out, xs)
    worst = 0.0
    for k in range(len(point)):
        up = list(point)
        dn = list(point)
        up[k] += step
        dn[k] -= step
        fd = (evaluate(up)[0] - evaluate(dn)[0]) / (2.0 * step)
        denom = max(abs(ad[k]), abs(fd), floor)
        if ad[k] == fd:
            continue
        worst = max(worst, abs(ad[k] - fd) / denom)
    return worst
