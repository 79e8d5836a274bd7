"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The backend is chosen once at import from the ``SIPL_BACKEND`` environment
variable: ``numba`` (default when numba imports cleanly), or ``numpy``.
Both implementations of every kernel are importable directly so the
benchmark suite can compare them on identical inputs.

Shapes: nF = number of free cells, nJ = nF**2 joint states, A = 6 actions.
Joint state s = si * nF + sj.
"""

from __future__ import annotations

import os

import numpy as np

_ENV_FLAG = "SIPL_BACKEND"


def _pick_backend() -> str:
    choice = os.environ.get(_ENV_FLAG, "").strip().lower()
    if choice not in ("", "numba", "numpy"):
        raise ValueError(f"{_ENV_FLAG} must be 'numba' or 'numpy', got {choice!r}")
    if choice == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        if choice == "numba":
            raise
        return "numpy"
    return "numba"


_BACKEND = _pick_backend()


def backend() -> str:
    """Active kernel backend, 'numba' or 'numpy'."""
    return _BACKEND


# ---------------------------------------------------------------------------
# numpy implementations


def two_step_backup_numpy(t_i: np.ndarray, t_j: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Non-interactive expected utility, agent-j factor applied first.

    t_i, t_j: [nF, A, nF] row-stochastic; u: [nF, nF] utility over (si', sj').
    Returns [nF, nF, A, A] with axes (si, sj, a_i, a_j).
    """
    # w[si', sj, a_j] = sum_{sj'} t_j[sj, a_j, sj'] * u[si', sj']
    w = np.einsum("jbn,mn->mjb", t_j, u)
    # v[si, sj, a_i, a_j] = sum_{si'} t_i[si, a_i, si'] * w[si', sj, a_j]
    return np.einsum("iam,mjb->ijab", t_i, w)


def gather_expected_numpy(int_prob: np.ndarray, int_succ: np.ndarray,
                          u_flat: np.ndarray) -> np.ndarray:
    """Interactive expected utility: sum_k prob[..., k] * u[succ[..., k]].

    int_prob/int_succ: [nJ, A, A, 4]; u_flat: [nJ]. Returns [nJ, A, A].
    """
    return np.einsum("sabk,sabk->sab", int_prob, u_flat[int_succ])


def scatter_interactive_numpy(weights: np.ndarray, int_prob_a: np.ndarray,
                              int_succ_a: np.ndarray) -> np.ndarray:
    """Push per-state mass through interactive successor lists.

    weights: [nJ] source mass; int_prob_a/int_succ_a: [nJ, 4] for one fixed
    joint action. Returns destination mass, [nJ].
    """
    contrib = weights[:, None] * int_prob_a
    return np.bincount(int_succ_a.ravel(), weights=contrib.ravel(),
                       minlength=weights.shape[0])


# ---------------------------------------------------------------------------
# numba implementations

try:
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    njit = None

if njit is not None:

    @njit(cache=True)
    def _two_step_backup_nb(t_i, t_j, u):
        nf, na, _ = t_i.shape
        w = np.zeros((nf, nf, na))
        for sjp in range(nf):
            for sj in range(nf):
                for b in range(na):
                    acc = 0.0
                    for sjn in range(nf):
                        acc += t_j[sj, b, sjn] * u[sjp, sjn]
                    w[sjp, sj, b] = acc
        out = np.zeros((nf, nf, na, na))
        for si in range(nf):
            for a in range(na):
                for sj in range(nf):
                    for b in range(na):
                        acc = 0.0
                        for m in range(nf):
                            acc += t_i[si, a, m] * w[m, sj, b]
                        out[si, sj, a, b] = acc
        return out

    @njit(cache=True)
    def _gather_expected_nb(int_prob, int_succ, u_flat):
        nj, na, nb, kk = int_prob.shape
        out = np.zeros((nj, na, nb))
        for s in range(nj):
            for a in range(na):
                for b in range(nb):
                    acc = 0.0
                    for k in range(kk):
                        acc += int_prob[s, a, b, k] * u_flat[int_succ[s, a, b, k]]
                    out[s, a, b] = acc
        return out

    @njit(cache=True)
    def _scatter_interactive_nb(weights, int_prob_a, int_succ_a):
        nj, kk = int_prob_a.shape
        out = np.zeros(nj)
        for s in range(nj):
            w = weights[s]
            if w != 0.0:
                for k in range(kk):
                    out[int_succ_a[s, k]] += w * int_prob_a[s, k]
        return out

    def two_step_backup_numba(t_i, t_j, u):
        return _two_step_backup_nb(np.ascontiguousarray(t_i),
                                   np.ascontiguousarray(t_j),
                                   np.ascontiguousarray(u))

    def gather_expected_numba(int_prob, int_succ, u_flat):
        return _gather_expected_nb(np.ascontiguousarray(int_prob),
                                   np.ascontiguousarray(int_succ),
                                   np.ascontiguousarray(u_flat))

    def scatter_interactive_numba(weights, int_prob_a, int_succ_a):
        return _scatter_interactive_nb(np.ascontiguousarray(weights),
                                       np.ascontiguousarray(int_prob_a),
                                       np.ascontiguousarray(int_succ_a))


if _BACKEND == "numba":
    two_step_backup = two_step_backup_numba
    gather_expected = gather_expected_numba
    scatter_interactive = scatter_interactive_numba
else:
    two_step_backup = two_step_backup_numpy
    gather_expected = gather_expected_numpy
    scatter_interactive = scatter_interactive_numpy


__all__ = [
    "backend", "two_step_backup", "gather_expected", "scatter_interactive",
    "two_step_backup_numpy", "gather_expected_numpy", "scatter_interactive_numpy",
]
