"""A small, safe arithmetic grammar for metric potentials and job files.

Accepted syntax is ordinary Python arithmetic restricted to

* numbers, named coordinates and named parameters (plus ``pi`` and ``e``),
* ``+ - * / **`` and unary minus,
* the functions ``exp log sin cos tan sqrt pow sinh cosh tanh``.

Anything else (attribute access, subscripts, comparisons, lambdas, ...) is
rejected with a message naming the offending token and its column.  The parsed
tree evaluates against either ``numpy`` or ``jax.numpy``, so the same string
drives grid evaluation and automatic differentiation.
"""

from __future__ import annotations

import ast
import math

import jax.numpy as jnp
import numpy as np

FUNCTIONS = ("exp", "log", "sin", "cos", "tan", "sqrt", "pow", "sinh", "cosh", "tanh")
CONSTANTS = {"pi": math.pi, "e": math.e}

_BINOPS = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
    ast.Pow: lambda a, b: a**b,
}


class ExpressionError(ValueError):
    """Raised for text outside the grammar; carries the source and column."""

    def __init__(self, text, message, col=None):
        where = f" at column {col + 1}" if col is not None else ""
        super().__init__(f"{message}{where} in expression {text!r}")
        self.text = text
        self.col = col


class Expression:
    """A parsed expression over a fixed tuple of variable names.

    >>> Expression("t**p1", ("t", "x"), {"p1": 0.5})({"t": 4.0, "x": 0.0})
    2.0
    """

    def __init__(self, text: str, variables, parameters=None):
        self.text = str(text)
        self.variables = tuple(variables)
        self.parameters = dict(parameters or {})
        clash = set(self.variables) & set(self.parameters)
        if clash:
            raise ExpressionError(self.text, f"names used both as variable and parameter: {sorted(clash)}")
        try:
            tree = ast.parse(self.text.strip(), mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(self.text, f"syntax error: {exc.msg}", (exc.offset or 1) - 1) from None
        self._names = set()
        self._root = self._compile(tree.body)
        self.names = frozenset(self._names)

    def _compile(self, node):
        if isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
                raise ExpressionError(self.text, f"unsupported literal {node.value!r}", node.col_offset)
            value = float(node.value)
            return lambda env, xp: value
        if isinstance(node, ast.Name):
            name = node.id
            if name in self.variables:
                self._names.add(name)
                return lambda env, xp: env[name]
            if name in self.parameters:
                value = float(self.parameters[name])
                return lambda env, xp: value
            if name in CONSTANTS:
                value = CONSTANTS[name]
                return lambda env, xp: value
            raise ExpressionError(self.text, f"unknown name {name!r}", node.col_offset)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            op = _BINOPS[type(node.op)]
            left, right = self._compile(node.left), self._compile(node.right)
            return lambda env, xp: op(left(env, xp), right(env, xp))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            inner = self._compile(node.operand)
            if isinstance(node.op, ast.USub):
                return lambda env, xp: -inner(env, xp)
            return inner
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
                label = node.func.id if isinstance(node.func, ast.Name) else ast.dump(node.func)
                raise ExpressionError(self.text, f"function {label!r} not in {FUNCTIONS}", node.col_offset)
            if node.keywords:
                raise ExpressionError(self.text, "keyword arguments are not allowed", node.col_offset)
            name = node.func.id
            arity = 2 if name == "pow" else 1
            if len(node.args) != arity:
                raise ExpressionError(self.text, f"{name} takes {arity} argument(s)", node.col_offset)
            args = [self._compile(a) for a in node.args]
            if name == "pow":
                return lambda env, xp: xp.power(args[0](env, xp), args[1](env, xp))
            return lambda env, xp: getattr(xp, name)(args[0](env, xp))
        col = getattr(node, "col_offset", None)
        raise ExpressionError(self.text, f"unsupported syntax {type(node).__name__}", col)

    def __call__(self, env, xp=jnp):
        missing = [v for v in self.names if v not in env]
        if missing:
            raise KeyError(f"expression {self.text!r} needs values for {missing}")
        return self._root(env, xp)

    def at_point(self, x):
        """Evaluate at a coordinate vector ordered like ``variables`` (jax-traceable)."""
        return self._root({name: x[i] for i, name in enumerate(self.variables)}, jnp)

    def on_grid(self, **arrays):
        """Evaluate with numpy arrays; constant expressions broadcast to the grid shape."""
        value = self._root(arrays, np)
        shape = np.broadcast_shapes(*(np.shape(a) for a in arrays.values())) if arrays else ()
        return np.broadcast_to(np.asarray(value, dtype=float), shape).copy()

    def __repr__(self):
        return f"Expression({self.text!r})"
