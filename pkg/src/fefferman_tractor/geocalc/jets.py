"""Pointwise jets of tensor fields.

A Jet stores, for a batch of m points, a field value and all of its partial
derivatives up to a fixed order. Part k has shape (m,) + (n,)*k + shape, the k
derivative axes coming before the tensor axes. Products distribute derivatives
by the Leibniz rule, so the order of a product is the smaller input order and
each partial derivative costs one order.
"""
import itertools

import numpy as np

_BATCH = "Z"
_DERIVATIVE_LETTERS = "ABCDEFGHIJ"


class Jet:
    __slots__ = ("parts", "dim")

    def __init__(self, parts, dim: int):
        self.parts = tuple(np.asarray(part, dtype=float) for part in parts)
        self.dim = dim
        if not self.parts:
            raise JetException("A jet needs at least its value")

    @property
    def order(self) -> int:
        return len(self.parts) - 1

    @property
    def value(self) -> np.ndarray:
        return self.parts[0]

    @property
    def shape(self) -> tuple:
        return self.parts[0].shape[1:]

    @property
    def batch(self) -> int:
        return self.parts[0].shape[0]

    @classmethod
    def constant(cls, value, batch: int, dim: int, order: int):
        value = np.asarray(value, dtype=float)
        parts = [np.broadcast_to(value, (batch,) + value.shape).copy()]
        for k in range(1, order + 1):
            parts.append(np.zeros((batch,) + (dim,) * k + value.shape))
        return cls(parts, dim)

    @classmethod
    def zeros(cls, shape, batch: int, dim: int, order: int):
        return cls.constant(np.zeros(shape), batch, dim, order)

    def truncate(self, order: int):
        if order > self.order:
            raise JetException(f"Cannot raise jet order from {self.order} to {order}")
        return Jet(self.parts[: order + 1], self.dim)

    def partial(self):
        """Partial derivative, prepended as a new first tensor slot."""
        if self.order == 0:
            raise JetException("Jet of order 0 has no derivatives left")
        # the last derivative axis of part k+1 already sits right before the tensor axes
        return Jet(self.parts[1:], self.dim)

    def _aligned(self, other):
        order = min(self.order, other.order)
        return self.parts[: order + 1], other.parts[: order + 1]

    def __add__(self, other):
        left, right = self._aligned(other)
        return Jet([a + b for a, b in zip(left, right)], self.dim)

    def __sub__(self, other):
        left, right = self._aligned(other)
        return Jet([a - b for a, b in zip(left, right)], self.dim)

    def __neg__(self):
        return Jet([-part for part in self.parts], self.dim)

    def scale(self, factor: float):
        return Jet([factor * part for part in self.parts], self.dim)

    def __mul__(self, factor):
        if isinstance(factor, Jet):
            raise JetException("Use Jet.product for products of jets")
        return self.scale(float(factor))

    __rmul__ = __mul__

    def map_tensor(self, subscripts: str):
        """Apply a single-operand einsum (transpose, trace) to the tensor axes."""
        source, target = subscripts.split("->")
        parts = []
        for k, part in enumerate(self.parts):
            letters = _DERIVATIVE_LETTERS[:k]
            parts.append(np.einsum(f"{_BATCH}{letters}{source}->{_BATCH}{letters}{target}", part))
        return Jet(parts, self.dim)

    def expand(self, axis: int):
        return Jet([np.expand_dims(part, 1 + k + axis) for k, part in enumerate(self.parts)], self.dim)

    def component(self, *index):
        """Restrict to fixed leading tensor indices."""
        parts = []
        for k, part in enumerate(self.parts):
            parts.append(part[(slice(None),) * (1 + k) + tuple(index)])
        return Jet(parts, self.dim)

    @staticmethod
    def concatenate(jets, axis: int = 0):
        order = min(jet.order for jet in jets)
        parts = []
        for k in range(order + 1):
            parts.append(np.concatenate([jet.parts[k] for jet in jets], axis=1 + k + axis))
        return Jet(parts, jets[0].dim)

    @staticmethod
    def stack(jets, axis: int = 0):
        return Jet.concatenate([jet.expand(axis) for jet in jets], axis)

    @staticmethod
    def product(subscripts: str, left, right):
        """Einsum of two jets over their tensor axes, with Leibniz rule on derivatives.

        Subscripts use lower-case letters only, e.g. "ab,bc->ac".
        """
        inputs, target = subscripts.split("->")
        left_letters, right_letters = inputs.split(",")
        order = min(left.order, right.order)
        parts = []
        for k in range(order + 1):
            letters = _DERIVATIVE_LETTERS[:k]
            total = None
            for split in range(k + 1):
                for chosen in itertools.combinations(range(k), split):
                    on_left = "".join(letters[i] for i in chosen)
                    on_right = "".join(letters[i] for i in range(k) if i not in chosen)
                    term = np.einsum(
                        f"{_BATCH}{on_left}{left_letters},{_BATCH}{on_right}{right_letters}"
                        f"->{_BATCH}{letters}{target}",
                        left.parts[split],
                        right.parts[k - split],
                    )
                    total = term if total is None else total + term
            parts.append(total)
        return Jet(parts, left.dim)

    def inverse(self):
        """Jet of the matrix inverse, from the derivatives of A·A⁻¹ = 1."""
        if len(self.shape) != 2 or self.shape[0] != self.shape[1]:
            raise JetException(f"Inverse needs a square matrix jet, got shape {self.shape}")
        inverse_value = np.linalg.inv(self.parts[0])
        parts = [inverse_value]
        for k in range(1, self.order + 1):
            letters = _DERIVATIVE_LETTERS[:k]
            accumulated = None
            for split in range(1, k + 1):
                for chosen in itertools.combinations(range(k), split):
                    on_matrix = "".join(letters[i] for i in chosen)
                    on_inverse = "".join(letters[i] for i in range(k) if i not in chosen)
                    term = np.einsum(
                        f"{_BATCH}{on_matrix}ij,{_BATCH}{on_inverse}jl->{_BATCH}{letters}il",
                        self.parts[split],
                        parts[k - split],
                    )
                    accumulated = term if accumulated is None else accumulated + term
            parts.append(-np.einsum(f"{_BATCH}ij,{_BATCH}{letters}jl->{_BATCH}{letters}il", inverse_value, accumulated))
        return Jet(parts, self.dim)


class JetException(Exception):
    pass
