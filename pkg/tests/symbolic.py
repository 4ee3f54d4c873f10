"""Symbolic reference geometry (sympy), written independently of the grid code.

R^l_kij = d_i G^l_jk - d_j G^l_ik + G^l_im G^m_jk - G^l_jm G^m_ik, Ric_jk = R^i_kij.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import sympy as sp


@dataclass
class SymbolicGeometry:
    coords: tuple
    g: sp.Matrix

    def __post_init__(self):
        n = len(self.coords)
        x = self.coords
        gi = sp.simplify(self.g.inv()) if n <= 2 else self.g.inv()
        self.g_inv = gi
        self.gamma = [
            [
                [
                    sum(gi[k, l] * (sp.diff(self.g[j, l], x[i]) + sp.diff(self.g[i, l], x[j]) - sp.diff(self.g[i, j], x[l]))
                        for l in range(n)) / 2
                    for j in range(n)
                ]
                for i in range(n)
            ]
            for k in range(n)
        ]
        G = self.gamma
        self.ricci = sp.zeros(n, n)
        for j in range(n):
            for k in range(n):
                self.ricci[j, k] = sum(
                    sp.diff(G[i][j][k], x[i]) - sp.diff(G[i][i][k], x[j])
                    + sum(G[i][i][m] * G[m][j][k] - G[i][j][m] * G[m][i][k] for m in range(n))
                    for i in range(n)
                )
        self.scalar = sum(gi[j, k] * self.ricci[j, k] for j in range(n) for k in range(n))

    def hessian(self, f):
        n = len(self.coords)
        x = self.coords
        return sp.Matrix(n, n, lambda i, j: sp.diff(f, x[i], x[j]) - sum(self.gamma[k][i][j] * sp.diff(f, x[k])
                                                                           for k in range(n)))

    def laplacian(self, f):
        """Positive-spectrum convention: -tr Hess f."""
        H = self.hessian(f)
        n = len(self.coords)
        return -sum(self.g_inv[i, j] * H[i, j] for i in range(n) for j in range(n))

    def evaluate(self, expr, mesh):
        fn = sp.lambdify(self.coords, expr, "numpy")
        return np.broadcast_to(np.asarray(fn(*mesh), dtype=float), mesh[0].shape)

    def metric_values(self, mesh):
        n = len(self.coords)
        return np.array([[self.evaluate(self.g[i, j], mesh) for j in range(n)] for i in range(n)])
