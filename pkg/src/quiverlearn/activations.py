"""Activation catalog: value maps on framing blocks with forward and reverse derivatives.

Inputs are ``(n, samples)`` arrays, one column per sample.  Reverse
derivatives use the complex encoding ``G = dC/dRe + i dC/dIm``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class Activation:
    name: str
    value: Callable
    jvp: Callable
    vjp: Callable


def _split(f, df):
    """Lift a real scalar function to act on real and imaginary parts separately."""

    def value(u):
        if np.iscomplexobj(u):
            return f(u.real) + 1j * f(u.imag)
        return f(u)

    def jvp(u, du):
        if np.iscomplexobj(u) or np.iscomplexobj(du):
            u = np.asarray(u, dtype=complex)
            du = np.asarray(du, dtype=complex)
            return df(u.real) * du.real + 1j * df(u.imag) * du.imag
        return df(u) * du

    def vjp(u, g):
        if np.iscomplexobj(u) or np.iscomplexobj(g):
            u = np.asarray(u, dtype=complex)
            g = np.asarray(g, dtype=complex)
            return df(u.real) * g.real + 1j * df(u.imag) * g.imag
        return df(u) * g

    return value, jvp, vjp


def _identity():
    return Activation("identity", lambda u: u, lambda u, du: du, lambda u, g: g)


def _tanh():
    value, jvp, vjp = _split(np.tanh, lambda x: 1.0 - np.tanh(x) ** 2)
    return Activation("tanh", value, jvp, vjp)


def softplus_activation(sharpness=20.0) -> Activation:
    """Smoothed relu ``log(1 + exp(k x)) / k``."""
    k = float(sharpness)

    def f(x):
        return np.logaddexp(0.0, k * x) / k

    def df(x):
        return 0.5 * (1.0 + np.tanh(0.5 * k * x))

    value, jvp, vjp = _split(f, df)
    return Activation(f"softplus{k:g}", value, jvp, vjp)


def _hyperbolic_sigma():
    # z / sqrt(1 + |z|^2) with |z| the norm of each column.
    def r2(u):
        return np.sum(np.abs(u) ** 2, axis=0, keepdims=True)

    def value(u):
        return u / np.sqrt(1.0 + r2(u))

    def jvp(u, du):
        t = 1.0 + r2(u)
        s, ds = t ** -0.5, -0.5 * t ** -1.5
        return s * du + u * (ds * 2.0 * np.real(np.sum(np.conj(u) * du, axis=0, keepdims=True)))

    def vjp(u, g):
        t = 1.0 + r2(u)
        s, ds = t ** -0.5, -0.5 * t ** -1.5
        return s * g + u * (2.0 * ds * np.real(np.sum(np.conj(g) * u, axis=0, keepdims=True)))

    return Activation("hyperbolic_sigma", value, jvp, vjp)


def hyperbolic_sigma(z):
    """``z / sqrt(1 + |z|^2)`` for a single vector or columns of vectors."""
    z = np.asarray(z)
    if z.ndim == 1:
        return z / np.sqrt(1.0 + np.sum(np.abs(z) ** 2))
    return _hyperbolic_sigma().value(z)


def default_catalog() -> dict:
    """Built-in activations keyed by the ids used in algorithm text."""
    return {0: _identity(), 1: _tanh(), 2: softplus_activation(20.0), 3: _hyperbolic_sigma()}


def self_test(act: Activation, shape=(3, 4), seed=0, complex_mode=True, h=1e-6) -> float:
    """Largest mismatch between ``jvp``/``vjp`` and central differences of ``value``."""
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(shape)
    du = rng.standard_normal(shape)
    g = rng.standard_normal(shape)
    if complex_mode:
        u = u + 1j * rng.standard_normal(shape)
        du = du + 1j * rng.standard_normal(shape)
        g = g + 1j * rng.standard_normal(shape)
    fd = (act.value(u + h * du) - act.value(u - h * du)) / (2 * h)
    jv = act.jvp(u, du)
    # <g, J du> must equal <J^T g, du> under the real inner product.
    lhs = np.real(np.sum(np.conj(g) * jv))
    rhs = np.real(np.sum(np.conj(act.vjp(u, g)) * du))
    return float(max(np.max(np.abs(fd - jv)), abs(lhs - rhs)))
