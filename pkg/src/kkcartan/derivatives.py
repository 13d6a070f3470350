"""Pointwise derivative operators for tensor-valued functions of a chart point.

A *point function* has the signature ``fn(x, params) -> array`` where ``x`` is a
coordinate vector and ``params`` is any pytree of numeric parameters.  Passing
parameters explicitly (instead of closing over them) lets one jit-compiled
pipeline serve a whole family of metrics.

Two backends produce a new point function whose output gains a trailing axis
holding the partial derivatives:

``"ad"``
    forward-mode automatic differentiation, exact up to rounding.
``"fd"``
    fourth-order central differences with a fixed step.
"""

from __future__ import annotations

import jax
import jax.numpy as jnp

MODES = ("ad", "fd")

# (offset, weight) pairs of the 4th-order central first-derivative stencil
FD_STENCIL = ((-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0))
FD_REACH = 2  # stencil half-width in units of the step


def fd_partial(fn, x, params, axis, step):
    """Fourth-order central difference of ``fn`` along coordinate ``axis``."""
    e = jnp.zeros(x.shape[0]).at[axis].set(step)
    acc = 0.0
    for k, w in FD_STENCIL:
        acc = acc + w * fn(x + k * e, params)
    return acc / step


def jacobian(fn, mode="ad", step=1e-3, batched=True):
    """Return ``x, params -> d fn / dx`` with derivatives on the last axis.

    In ``"fd"`` mode with ``batched`` the whole stencil is evaluated through
    one ``vmap``; this keeps traces of nested differences small.  Plain
    (non-jax) callables need ``batched=False``.
    """
    if mode == "ad":
        return jax.jacfwd(fn, argnums=0)
    if mode != "fd":
        raise ValueError(f"unknown derivative mode {mode!r}; expected one of {MODES}")

    if not batched:
        def jac(x, params):
            cols = [fd_partial(fn, x, params, mu, step) for mu in range(x.shape[0])]
            return jnp.stack(cols, axis=-1)

        return jac

    offsets = jnp.array([k for k, _ in FD_STENCIL], dtype=float)
    weights = jnp.array([w for _, w in FD_STENCIL])

    def jac(x, params):
        n = x.shape[0]
        shifts = (jnp.eye(n)[:, None, :] * offsets[None, :, None] * step).reshape(-1, n)
        vals = jax.vmap(lambda y: fn(y, params))(x[None, :] + shifts)
        vals = vals.reshape((n, offsets.shape[0]) + vals.shape[1:])
        d = jnp.tensordot(weights, vals, axes=([0], [1])) / step
        return jnp.moveaxis(d, 0, -1)

    return jac


def scalar_gradient_fd(f, x, step):
    """Fourth-order FD gradient of a plain scalar callable ``f(x)``."""
    return jacobian(lambda y, _: f(y), "fd", step, batched=False)(jnp.asarray(x, dtype=float), None)


def stencil_reach(step, levels):
    """Largest coordinate excursion of ``levels`` nested FD stencils."""
    return FD_REACH * step * levels
