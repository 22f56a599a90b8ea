"""ARX input-output model and its block observable canonical form (BOCF).

The model relates the current output to the last ``n_hat`` outputs and
inputs,

    y_k = -sum_i F_i y_{k-i} + sum_i G_i u_{k-i},

with coefficient matrices F_i (p x p) and G_i (p x m) stacked into a single
parameter vector theta = [vec[F_1 ... F_n] ; vec[G_1 ... G_n]].  The same
coefficients define a block-companion state-space realization whose state is
an explicit function of past data, which is what makes full-state receding
horizon control implementable from output measurements alone.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ModelDims:
    """Model order and signal dimensions."""

    n_hat: int
    p: int = 1
    m: int = 1

    def __post_init__(self):
        if self.n_hat < 1:
            raise ValueError("model order n_hat must be >= 1")
        if self.p < 1 or self.m < 1:
            raise ValueError("signal dimensions p, m must be >= 1")

    @property
    def n_theta(self) -> int:
        """Length of the stacked parameter vector."""
        return self.n_hat * self.p * (self.m + self.p)

    @property
    def n_state(self) -> int:
        """Dimension of the BOCF state."""
        return self.n_hat * self.p


class IoHistory:
    """Fixed-length buffer of the ``n_hat`` most recent outputs and inputs.

    Row 0 holds the newest sample (y_{k-1}, u_{k-1}) and row n_hat-1 the
    oldest.  Pre-start samples are zero, matching the model's zero
    initialization.  ``push`` returns a new history; instances are treated
    as immutable values.
    """

    __slots__ = ("y_past", "u_past")

    def __init__(self, y_past: np.ndarray, u_past: np.ndarray):
        y_past = np.atleast_2d(np.asarray(y_past, dtype=float))
        u_past = np.atleast_2d(np.asarray(u_past, dtype=float))
        if y_past.shape[0] != u_past.shape[0]:
            raise ValueError("output and input history lengths differ")
        self.y_past = y_past
        self.u_past = u_past

    @classmethod
    def zeros(cls, dims: ModelDims) -> "IoHistory":
        return cls(np.zeros((dims.n_hat, dims.p)), np.zeros((dims.n_hat, dims.m)))

    @property
    def n_hat(self) -> int:
        return self.y_past.shape[0]

    def push(self, y: np.ndarray, u: np.ndarray) -> "IoHistory":
        """Shift in (y_k, u_k), dropping the oldest pair."""
        y = np.asarray(y, dtype=float).reshape(1, -1)
        u = np.asarray(u, dtype=float).reshape(1, -1)
        return IoHistory(
            np.vstack([y, self.y_past[:-1]]),
            np.vstack([u, self.u_past[:-1]]),
        )

    def check_dims(self, dims: ModelDims) -> None:
        if self.y_past.shape != (dims.n_hat, dims.p):
            raise ValueError(
                f"output history shape {self.y_past.shape} does not match "
                f"({dims.n_hat}, {dims.p})"
            )
        if self.u_past.shape != (dims.n_hat, dims.m):
            raise ValueError(
                f"input history shape {self.u_past.shape} does not match "
                f"({dims.n_hat}, {dims.m})"
            )


def build_regressor(history: IoHistory, dims: ModelDims) -> np.ndarray:
    """Regressor phi_k = [-y_{k-1}' ... -y_{k-n}'  u_{k-1}' ... u_{k-n}'] kron I_p.

    Returns a (p, n_hat*p*(m+p)) matrix such that phi_k @ theta reproduces
    the ARX prediction for the stacked coefficient layout.
    """
    history.check_dims(dims)
    row = np.concatenate([-history.y_past.ravel(), history.u_past.ravel()])
    if dims.p == 1:
        return row.reshape(1, -1)
    return np.kron(row.reshape(1, -1), np.eye(dims.p))


def predict_output(theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """One-step prediction y_hat = phi @ theta."""
    theta = np.asarray(theta, dtype=float)
    if phi.shape[1] != theta.shape[0]:
        raise ValueError(
            f"regressor width {phi.shape[1]} does not match theta length "
            f"{theta.shape[0]}"
        )
    return phi @ theta


def split_coefficients(theta: np.ndarray, dims: ModelDims):
    """Unpack theta into coefficient stacks F (n_hat, p, p) and G (n_hat, p, m).

    The layout is column-major vec of the horizontal concatenations
    [F_1 ... F_n] and [G_1 ... G_n].
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (dims.n_theta,):
        raise ValueError(
            f"theta length {theta.shape} does not match expected ({dims.n_theta},)"
        )
    n, p, m = dims.n_hat, dims.p, dims.m
    f_flat = theta[: n * p * p].reshape(p, n * p, order="F")
    g_flat = theta[n * p * p :].reshape(p, n * m, order="F")
    F = np.stack([f_flat[:, i * p : (i + 1) * p] for i in range(n)])
    G = np.stack([g_flat[:, i * m : (i + 1) * m] for i in range(n)])
    return F, G


def pack_coefficients(F: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Inverse of :func:`split_coefficients`."""
    F = np.asarray(F, dtype=float)
    G = np.asarray(G, dtype=float)
    f_flat = np.hstack(list(F))
    g_flat = np.hstack(list(G))
    return np.concatenate([f_flat.ravel(order="F"), g_flat.ravel(order="F")])


def assemble_bocf(theta_next: np.ndarray, dims: ModelDims):
    """Build (A, B, C) of the block observable canonical form.

    ``theta_next`` holds the coefficient estimate used for the realization
    at the current step (the freshly updated one).  A is block companion
    with -F_i in the first block column and identity superdiagonal blocks,
    B stacks the G_i, and C reads the first state block.
    """
    F, G = split_coefficients(theta_next, dims)
    n, p, m = dims.n_hat, dims.p, dims.m
    A = np.zeros((n * p, n * p))
    for i in range(n):
        A[i * p : (i + 1) * p, :p] = -F[i]
    for j in range(n - 1):
        A[j * p : (j + 1) * p, (j + 1) * p : (j + 2) * p] = np.eye(p)
    B = G.reshape(n * p, m)
    C = np.zeros((p, n * p))
    C[:, :p] = np.eye(p)
    return A, B, C


def compute_bocf_state(
    history: IoHistory, y_now: np.ndarray, theta_next: np.ndarray, dims: ModelDims
) -> np.ndarray:
    """Explicit BOCF state at the current step.

    Block 1 is the current measurement; block j >= 2 collects the tail of
    the ARX convolution not yet absorbed into the output:

        x(j) = -sum_{i=1}^{n-j+1} F_{i+j-1} y_{k-i} + sum G_{i+j-1} u_{k-i}.
    """
    history.check_dims(dims)
    y_now = np.asarray(y_now, dtype=float).reshape(-1)
    if y_now.shape != (dims.p,):
        raise ValueError(f"y_now shape {y_now.shape} does not match p={dims.p}")
    n, p = dims.n_hat, dims.p
    if p == 1 and dims.m == 1:
        # SISO fast path used inside the sample loop.
        theta_next = np.asarray(theta_next, dtype=float)
        f = theta_next[:n]
        g = theta_next[n:]
        yp = history.y_past[:, 0]
        up = history.u_past[:, 0]
        x = np.empty(n)
        x[0] = y_now[0]
        for j in range(2, n + 1):
            x[j - 1] = -f[j - 1 :] @ yp[: n - j + 1] + g[j - 1 :] @ up[: n - j + 1]
        return x
    F, G = split_coefficients(theta_next, dims)
    x = np.zeros(n * p)
    x[:p] = y_now
    for j in range(2, n + 1):
        block = np.zeros(p)
        for i in range(1, n - j + 2):
            block += -F[i + j - 2] @ history.y_past[i - 1]
            block += G[i + j - 2] @ history.u_past[i - 1]
        x[(j - 1) * p : j * p] = block
    return x
