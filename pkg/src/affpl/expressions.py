"""Closed expression vocabulary for CLI problem definitions.

Expressions are parsed with the ast module and evaluated vectorized over
node coordinates x1, x2. Allowed: numbers, x1, x2, + - * / ** and unary
minus, and the functions abs, sqrt, exp, min, max, hypot. No names,
attributes, or calls outside this list, so configs stay reproducible and
safe to share.
"""

from __future__ import annotations

import ast

import numpy as np

from .errors import ConfigError

_FUNCS = {
    "abs": np.abs,
    "sqrt": np.sqrt,
    "exp": np.exp,
    "min": np.minimum,
    "max": np.maximum,
    "hypot": np.hypot,
}

_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


def compile_expression(text: str, key: str = "expression"):
    """Compile an expression into a vectorized function of nodes (N, 2)."""
    try:
        tree = ast.parse(str(text), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"{key}: cannot parse expression: {exc}") from exc

    def ev(node, x1, x2):
        if isinstance(node, ast.Expression):
            return ev(node.body, x1, x2)
        if isinstance(node, ast.Constant):
            if isinstance(node.value, (int, float)):
                return float(node.value)
            raise ConfigError(f"{key}: only numeric constants allowed")
        if isinstance(node, ast.Name):
            if node.id == "x1":
                return x1
            if node.id == "x2":
                return x2
            raise ConfigError(f"{key}: unknown name '{node.id}' (use x1, x2)")
        if isinstance(node, ast.BinOp):
            op = _BINOPS.get(type(node.op))
            if op is None:
                raise ConfigError(f"{key}: operator not allowed")
            return op(ev(node.left, x1, x2), ev(node.right, x1, x2))
        if isinstance(node, ast.UnaryOp):
            if isinstance(node.op, ast.USub):
                return -ev(node.operand, x1, x2)
            if isinstance(node.op, ast.UAdd):
                return ev(node.operand, x1, x2)
            raise ConfigError(f"{key}: unary operator not allowed")
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
                raise ConfigError(f"{key}: function not in the closed vocabulary")
            if node.keywords:
                raise ConfigError(f"{key}: keyword arguments not allowed")
            args = [ev(a, x1, x2) for a in node.args]
            fn = _FUNCS[node.func.id]
            if node.func.id in ("min", "max"):
                if len(args) < 2:
                    raise ConfigError(f"{key}: {node.func.id} needs two arguments")
                out = args[0]
                for a in args[1:]:
                    out = fn(out, a)
                return out
            if len(args) != (2 if node.func.id == "hypot" else 1):
                raise ConfigError(f"{key}: wrong argument count for {node.func.id}")
            return fn(*args)
        raise ConfigError(f"{key}: syntax element not allowed")

    def func(nodes: np.ndarray) -> np.ndarray:
        nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
        out = ev(tree, nodes[:, 0], nodes[:, 1])
        out = np.broadcast_to(np.asarray(out, dtype=float), (len(nodes),)).copy()
        if not np.all(np.isfinite(out)):
            raise ConfigError(f"{key}: expression evaluates non-finitely")
        return out

    return func
