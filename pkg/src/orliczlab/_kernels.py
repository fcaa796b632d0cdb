"""Grid stencil kernels with a numba path and a pure-numpy path.

The numba kernels are used when numba imports cleanly and the environment
variable ``ORLICZ_NO_NUMBA`` is unset (or ``0``).  Both paths compute the
same quantities; ``tests/test_kernels.py`` checks them against each other and
``benchmarks/bench_kernels.py`` times them.

Conventions: 2-D nodal arrays are indexed ``u[i, j]`` with ``i`` along x.
Each cell ``(i, j)`` is split into two triangles,

* lower triangle ``(i,j), (i+1,j), (i,j+1)``  -> forward differences at (i,j)
* upper triangle ``(i+1,j+1), (i,j+1), (i+1,j)`` -> backward differences at
  (i+1,j+1)

so that the gradient is exact for linear functions and the quadratic energy
reproduces the 5-point Laplacian.
"""

import os

import numpy as np

_DISABLED = os.environ.get("ORLICZ_NO_NUMBA", "0") not in ("", "0", "false", "False")

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _DISABLED


# ---------------------------------------------------------------- numpy path


def np_tri_gradients(u, hx, hy):
    gx1 = (u[1:, :-1] - u[:-1, :-1]) / hx
    gy1 = (u[:-1, 1:] - u[:-1, :-1]) / hy
    gx2 = (u[1:, 1:] - u[:-1, 1:]) / hx
    gy2 = (u[1:, 1:] - u[1:, :-1]) / hy
    return gx1, gy1, gx2, gy2


def np_tri_scatter(fx1, fy1, fx2, fy2, hx, hy):
    nx, ny = fx1.shape
    out = np.zeros((nx + 1, ny + 1))
    ax1, ay1, ax2, ay2 = fx1 / hx, fy1 / hy, fx2 / hx, fy2 / hy
    out[:-1, :-1] -= ax1 + ay1
    out[1:, :-1] += ax1
    out[:-1, 1:] += ay1
    out[1:, 1:] += ax2 + ay2
    out[:-1, 1:] -= ax2
    out[1:, :-1] -= ay2
    return out


def np_cell_average_2d(u):
    return 0.25 * (u[:-1, :-1] + u[1:, :-1] + u[:-1, 1:] + u[1:, 1:])


def np_cell_scatter_2d(c):
    nx, ny = c.shape
    out = np.zeros((nx + 1, ny + 1))
    q = 0.25 * c
    out[:-1, :-1] += q
    out[1:, :-1] += q
    out[:-1, 1:] += q
    out[1:, 1:] += q
    return out


def np_cell_average_1d(u):
    return 0.5 * (u[:-1] + u[1:])


def np_cell_scatter_1d(c):
    out = np.zeros(c.shape[0] + 1)
    out[:-1] += 0.5 * c
    out[1:] += 0.5 * c
    return out


def np_diff_1d(u, h):
    return (u[1:] - u[:-1]) / h


def np_diff_scatter_1d(f, h):
    out = np.zeros(f.shape[0] + 1)
    out[:-1] -= f / h
    out[1:] += f / h
    return out


# ---------------------------------------------------------------- numba path

if HAVE_NUMBA:

    @numba.njit(cache=True)
    def nb_tri_gradients(u, hx, hy):
        nx = u.shape[0] - 1
        ny = u.shape[1] - 1
        gx1 = np.empty((nx, ny))
        gy1 = np.empty((nx, ny))
        gx2 = np.empty((nx, ny))
        gy2 = np.empty((nx, ny))
        for i in range(nx):
            for j in range(ny):
                u00 = u[i, j]
                u10 = u[i + 1, j]
                u01 = u[i, j + 1]
                u11 = u[i + 1, j + 1]
                gx1[i, j] = (u10 - u00) / hx
                gy1[i, j] = (u01 - u00) / hy
                gx2[i, j] = (u11 - u01) / hx
                gy2[i, j] = (u11 - u10) / hy
        return gx1, gy1, gx2, gy2

    @numba.njit(cache=True)
    def nb_tri_scatter(fx1, fy1, fx2, fy2, hx, hy):
        nx, ny = fx1.shape
        out = np.zeros((nx + 1, ny + 1))
        for i in range(nx):
            for j in range(ny):
                ax1 = fx1[i, j] / hx
                ay1 = fy1[i, j] / hy
                ax2 = fx2[i, j] / hx
                ay2 = fy2[i, j] / hy
                out[i, j] -= ax1 + ay1
                out[i + 1, j] += ax1 - ay2
                out[i, j + 1] += ay1 - ax2
                out[i + 1, j + 1] += ax2 + ay2
        return out

    @numba.njit(cache=True)
    def nb_cell_average_2d(u):
        nx = u.shape[0] - 1
        ny = u.shape[1] - 1
        out = np.empty((nx, ny))
        for i in range(nx):
            for j in range(ny):
                out[i, j] = 0.25 * (u[i, j] + u[i + 1, j] + u[i, j + 1] + u[i + 1, j + 1])
        return out

    @numba.njit(cache=True)
    def nb_cell_scatter_2d(c):
        nx, ny = c.shape
        out = np.zeros((nx + 1, ny + 1))
        for i in range(nx):
            for j in range(ny):
                q = 0.25 * c[i, j]
                out[i, j] += q
                out[i + 1, j] += q
                out[i, j + 1] += q
                out[i + 1, j + 1] += q
        return out

    @numba.njit(cache=True)
    def nb_cell_average_1d(u):
        n = u.shape[0] - 1
        out = np.empty(n)
        for i in range(n):
            out[i] = 0.5 * (u[i] + u[i + 1])
        return out

    @numba.njit(cache=True)
    def nb_cell_scatter_1d(c):
        n = c.shape[0]
        out = np.zeros(n + 1)
        for i in range(n):
            out[i] += 0.5 * c[i]
            out[i + 1] += 0.5 * c[i]
        return out

    @numba.njit(cache=True)
    def nb_diff_1d(u, h):
        n = u.shape[0] - 1
        out = np.empty(n)
        for i in range(n):
            out[i] = (u[i + 1] - u[i]) / h
        return out

    @numba.njit(cache=True)
    def nb_diff_scatter_1d(f, h):
        n = f.shape[0]
        out = np.zeros(n + 1)
        for i in range(n):
            out[i] -= f[i] / h
            out[i + 1] += f[i] / h
        return out


class _Namespace:
    def __init__(self, **kw):
        self.__dict__.update(kw)


numpy_kernels = _Namespace(
    tri_gradients=np_tri_gradients,
    tri_scatter=np_tri_scatter,
    cell_average_2d=np_cell_average_2d,
    cell_scatter_2d=np_cell_scatter_2d,
    cell_average_1d=np_cell_average_1d,
    cell_scatter_1d=np_cell_scatter_1d,
    diff_1d=np_diff_1d,
    diff_scatter_1d=np_diff_scatter_1d,
)

if HAVE_NUMBA:
    numba_kernels = _Namespace(
        tri_gradients=nb_tri_gradients,
        tri_scatter=nb_tri_scatter,
        cell_average_2d=nb_cell_average_2d,
        cell_scatter_2d=nb_cell_scatter_2d,
        cell_average_1d=nb_cell_average_1d,
        cell_scatter_1d=nb_cell_scatter_1d,
        diff_1d=nb_diff_1d,
        diff_scatter_1d=nb_diff_scatter_1d,
    )
else:  # pragma: no cover
    numba_kernels = None

active = numba_kernels if USE_NUMBA else numpy_kernels


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
