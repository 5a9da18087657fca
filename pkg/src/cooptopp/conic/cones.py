"""Vectorized algebra on products of a nonnegative orthant and Lorentz cones.

Vectors are laid out as ``[orthant (l entries) | SOC blocks]`` with blocks of
equal dimension stored contiguously, so each group is handled as one
``(count, dim)`` array.
"""

from __future__ import annotations

from typing import List, NamedTuple

import numpy as np


class SocGroup(NamedTuple):
    dim: int
    count: int
    start: int

    @property
    def stop(self) -> int:
        return self.start + self.dim * self.count


class ConeProduct:
    def __init__(self, l: int, soc_dims):
        self.l = int(l)
        groups: List[SocGroup] = []
        pos = self.l
        dims = list(soc_dims)
        for q in sorted(set(dims)):
            cnt = dims.count(q)
            groups.append(SocGroup(q, cnt, pos))
            pos += q * cnt
        if list(soc_dims) != [g.dim for g in groups for _ in range(g.count)]:
            raise ValueError("second-order blocks must be sorted by dimension")
        self.groups = groups
        self.size = pos
        self.degree = self.l + sum(g.count for g in groups)

    def blocks(self, v, g: SocGroup):
        return v[g.start:g.stop].reshape(g.count, g.dim)

    def identity(self) -> np.ndarray:
        e = np.zeros(self.size)
        e[:self.l] = 1.0
        for g in self.groups:
            self.blocks(e, g)[:, 0] = 1.0
        return e

    def min_eig(self, v) -> float:
        """Smallest 'eigenvalue' ``min(v_orthant, t - ||u||)``; positive iff interior."""
        vals = [np.min(v[:self.l])] if self.l else []
        for g in self.groups:
            B = self.blocks(v, g)
            vals.append(np.min(B[:, 0] - np.linalg.norm(B[:, 1:], axis=1)))
        return float(min(vals)) if vals else np.inf

    def product(self, u, v) -> np.ndarray:
        out = np.empty(self.size)
        out[:self.l] = u[:self.l] * v[:self.l]
        for g in self.groups:
            U, V = self.blocks(u, g), self.blocks(v, g)
            O = self.blocks(out, g)
            O[:, 0] = np.einsum("ij,ij->i", U, V)
            O[:, 1:] = U[:, :1] * V[:, 1:] + V[:, :1] * U[:, 1:]
        return out

    def divide(self, lam, r) -> np.ndarray:
        """Solve ``lam o x = r`` for ``x``."""
        out = np.empty(self.size)
        out[:self.l] = r[:self.l] / lam[:self.l]
        for g in self.groups:
            L, R = self.blocks(lam, g), self.blocks(r, g)
            O = self.blocks(out, g)
            l0, l1 = L[:, 0], L[:, 1:]
            det = l0 * l0 - np.einsum("ij,ij->i", l1, l1)
            x0 = (l0 * R[:, 0] - np.einsum("ij,ij->i", l1, R[:, 1:])) / det
            O[:, 0] = x0
            O[:, 1:] = (R[:, 1:] - l1 * x0[:, None]) / l0[:, None]
        return out

    def max_step(self, v, dv) -> float:
        """Largest ``alpha >= 0`` with ``v + alpha dv`` in the cone (``inf`` if unbounded)."""
        alpha = np.inf
        if self.l:
            neg = dv[:self.l] < 0
            if np.any(neg):
                alpha = min(alpha, float(np.min(-v[:self.l][neg] / dv[:self.l][neg])))
        for g in self.groups:
            V, D = self.blocks(v, g), self.blocks(dv, g)
            a = D[:, 0] ** 2 - np.einsum("ij,ij->i", D[:, 1:], D[:, 1:])
            b = V[:, 0] * D[:, 0] - np.einsum("ij,ij->i", V[:, 1:], D[:, 1:])
            c = np.maximum(V[:, 0] ** 2 - np.einsum("ij,ij->i", V[:, 1:], V[:, 1:]), 0.0)
            disc = np.maximum(b * b - a * c, 0.0)
            root = np.full(g.count, np.inf)
            # a < 0: exactly one positive root
            m = a < 0
            root[m] = (-b[m] - np.sqrt(disc[m])) / a[m]
            # a > 0 with b < 0: two positive roots, take the smaller one
            m = (a > 0) & (b < 0) & (b * b >= a * c)
            root[m] = c[m] / (-b[m] + np.sqrt(disc[m]))
            m = (a == 0) & (b < 0)
            root[m] = -c[m] / (2 * b[m])
            # the apex branch: height must stay nonnegative as well
            m = D[:, 0] < 0
            root[m] = np.minimum(root[m], -V[m, 0] / D[m, 0])
            alpha = min(alpha, float(np.min(root)) if g.count else np.inf)
        return max(alpha, 0.0)


class NTScaling:
    """Nesterov-Todd scaling ``W`` (symmetric) with ``W z = W^{-1} s = lambda``."""

    def __init__(self, cones: ConeProduct, s, z):
        self.cones = cones
        l = cones.l
        self.d = np.sqrt(s[:l] / z[:l])
        self.eta = []
        self.w = []
        for g in cones.groups:
            S, Z = cones.blocks(s, g), cones.blocks(z, g)
            sn = np.sqrt(S[:, 0] ** 2 - np.einsum("ij,ij->i", S[:, 1:], S[:, 1:]))
            zn = np.sqrt(Z[:, 0] ** 2 - np.einsum("ij,ij->i", Z[:, 1:], Z[:, 1:]))
            Sb, Zb = S / sn[:, None], Z / zn[:, None]
            gamma = np.sqrt(0.5 * (1.0 + np.einsum("ij,ij->i", Sb, Zb)))
            Zb_j = Zb.copy()
            Zb_j[:, 1:] *= -1.0
            w = (Sb + Zb_j) / (2.0 * gamma[:, None])
            self.eta.append(np.sqrt(sn / zn))
            self.w.append(w)
        self.lam = self.apply(z)

    def _hyper(self, w, V, inverse):
        w0, w1 = w[:, 0], w[:, 1:]
        if inverse:
            w1 = -w1
        v0, v1 = V[:, 0], V[:, 1:]
        dot = np.einsum("ij,ij->i", w1, v1)
        out = np.empty_like(V)
        out[:, 0] = w0 * v0 + dot
        out[:, 1:] = v1 + (v0 + dot / (1.0 + w0))[:, None] * w1
        return out

    def apply(self, v, inverse: bool = False) -> np.ndarray:
        cones = self.cones
        out = np.empty(cones.size)
        out[:cones.l] = v[:cones.l] / self.d if inverse else v[:cones.l] * self.d
        for g, eta, w in zip(cones.groups, self.eta, self.w):
            O = self.blocks_out(out, g)
            H = self._hyper(w, cones.blocks(v, g), inverse)
            O[:] = H / eta[:, None] if inverse else H * eta[:, None]
        return out

    def blocks_out(self, out, g):
        return out[g.start:g.stop].reshape(g.count, g.dim)

    def inverse_blocks(self):
        """Dense ``(count, dim, dim)`` blocks of ``W^{-1}``, one array per group."""
        out = []
        for g, eta, w in zip(self.cones.groups, self.eta, self.w):
            w0, w1 = w[:, 0], -w[:, 1:]
            q = g.dim
            H = np.empty((g.count, q, q))
            H[:, 0, 0] = w0
            H[:, 0, 1:] = w1
            H[:, 1:, 0] = w1
            H[:, 1:, 1:] = (np.eye(q - 1)[None] + np.einsum("bi,bj->bij", w1, w1)
                            / (1.0 + w0)[:, None, None])
            out.append(H / eta[:, None, None])
        return out
