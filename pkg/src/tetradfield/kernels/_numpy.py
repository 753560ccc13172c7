"""Reference numpy implementation of the batched tensor kernels.

Every function takes arrays with a leading batch axis and returns new arrays.
Index layout: ``frame[N, i, A]``, ``dcoframe[N, A, j, k] = d_k coframe^A_j``,
``S[N, i, j, k] = S^i_jk``.
"""
import numpy as np


def connection_from_jet(frame, dcoframe):
    return np.einsum("niA,nAjk->nijk", frame, dcoframe)


def torsion_from_jet(frame, dcoframe):
    g = np.einsum("niA,nAjk->nijk", frame, dcoframe)
    return 0.5 * (g - g.swapaxes(-1, -2))


def killing(S):
    g = 4.0 * np.einsum("nkim,nmjk->nij", S, S)
    return 0.5 * (g + g.swapaxes(-1, -2))


def trace_vector(S):
    return 2.0 * np.einsum("nkik->ni", S)


def killing_pullback(G, S):
    Gs = G + G.swapaxes(-1, -2)
    return 4.0 * np.einsum("nqb,nrbp->npqr", Gs, S)
