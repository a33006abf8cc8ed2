"""Dense float64 tensors with reverse-mode differentiation.

Each differentiable op stamps its output with a global sequence number. A
:class:`Tape` is the set of nodes reachable from an output, ordered by
descending sequence number, i.e. exactly the reverse of forward execution.
"""

import contextlib
import itertools

import numpy as np

from rfcnn.errors import NumericError

_sequence = itertools.count()
_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording (inference, OHEM ranking)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def is_grad_enabled():
    return _grad_enabled


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_seq", "name")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None
        self._seq = -1
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        Tape.from_output(self).backward(self, grad)

    def __repr__(self):
        tag = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"

    def __add__(self, other):
        from rfcnn.autograd.ops import add

        return add(self, other)

    def __mul__(self, scalar):
        from rfcnn.autograd.ops import scale

        return scale(self, scalar)

    __rmul__ = __mul__


class Parameter(Tensor):
    """Trainable tensor with a momentum buffer of the same shape."""

    __slots__ = ("velocity",)

    def __init__(self, data, name=None):
        super().__init__(np.array(data, dtype=np.float64), requires_grad=True, name=name)
        self.velocity = np.zeros_like(self.data)


def make_result(data, parents, backward):
    """Wrap an op's output, attaching ``backward`` when any parent needs grads.

    ``backward(g)`` returns one gradient (or None) per parent.
    """
    data = np.asarray(data, dtype=np.float64)
    if not np.isfinite(data).all():
        raise NumericError("non-finite values produced in forward pass")
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
        out._seq = next(_sequence)
    return out


class Tape:
    """Recorded ops reachable from one output, in reverse execution order."""

    def __init__(self, nodes):
        self.nodes = nodes

    @classmethod
    def from_output(cls, output):
        seen = set()
        nodes = []
        stack = [output]
        while stack:
            t = stack.pop()
            if id(t) in seen or t._backward is None:
                continue
            seen.add(id(t))
            nodes.append(t)
            stack.extend(t._parents)
        nodes.sort(key=lambda t: t._seq, reverse=True)
        return cls(nodes)

    def __len__(self):
        return len(self.nodes)

    def backward(self, output, grad=None):
        if grad is None:
            if output.data.size != 1:
                raise ValueError("backward() without an explicit grad needs a scalar output")
            grad = np.ones_like(output.data)
        if output._backward is None:
            if output.requires_grad:
                _accumulate(output, np.asarray(grad, dtype=np.float64))
            return
        pending = {id(output): np.asarray(grad, dtype=np.float64)}
        for node in self.nodes:
            g = pending.pop(id(node), None)
            if g is None:
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                if parent._backward is None:
                    _accumulate(parent, pg)
                elif id(parent) in pending:
                    pending[id(parent)] = pending[id(parent)] + pg
                else:
                    pending[id(parent)] = pg


def _accumulate(leaf, g):
    if not np.isfinite(g).all():
        raise NumericError(f"non-finite gradient reached {leaf!r}")
    if leaf.grad is None:
        leaf.grad = np.array(g, dtype=np.float64).reshape(leaf.shape)
    else:
        leaf.grad = leaf.grad + g.reshape(leaf.shape)
