"""Monotonic alignment between text tokens and latent frames.

Dynamic programming over per-(token, frame) Gaussian log-likelihoods:
maximizes the summed likelihood over all monotone surjective alignments
mapping frames 1..T onto tokens 1..T_text with steps of 0 or 1, starting at
the first token and ending at the last. Ties prefer staying on the current
token.
"""

from __future__ import annotations

import numpy as np

from .errors import TooFewFramesError

_LOG_2PI = float(np.log(2.0 * np.pi))


def gaussian_loglik_matrix(
    z: np.ndarray, mean: np.ndarray, log_std: np.ndarray
) -> np.ndarray:
    """log N(z[:, j]; mean[:, i], exp(log_std[:, i])) for every (i, j).

    z is [D x T]; mean/log_std are [D x T_text]; result is [T_text x T].
    """
    z = np.asarray(z, dtype=np.float64)
    mean = np.asarray(mean, dtype=np.float64)
    log_std = np.asarray(log_std, dtype=np.float64)
    inv_var = np.exp(-2.0 * log_std)  # [D x I]
    # Expand (z - mean)^2 * inv_var summed over D without materializing D x I x T.
    const = -0.5 * (_LOG_2PI * z.shape[0]) - log_std.sum(axis=0)  # [I]
    quad = (
        -0.5 * (inv_var.T @ (z**2))
        + (mean * inv_var).T @ z
        - 0.5 * ((mean**2) * inv_var).sum(axis=0)[:, None]
    )
    return const[:, None] + quad


def mas_align(loglik: np.ndarray) -> np.ndarray:
    """Best monotone surjective alignment for a [T_text x T] likelihood matrix.

    Returns a length-T integer array a with a[j] the 0-based token index of
    frame j; a[0] == 0, a[-1] == T_text - 1, steps in {0, 1}.
    """
    loglik = np.asarray(loglik, dtype=np.float64)
    n_tokens, n_frames = loglik.shape
    if n_tokens < 1 or n_frames < 1:
        raise TooFewFramesError("empty alignment problem")
    if n_frames < n_tokens:
        raise TooFewFramesError(
            f"{n_frames} frames cannot cover {n_tokens} tokens surjectively"
        )

    q = np.full((n_tokens, n_frames), -np.inf)
    q[0, 0] = loglik[0, 0]
    for j in range(1, n_frames):
        prev = q[:, j - 1]
        # stay on token i, or advance from token i-1
        stay = prev
        advance = np.concatenate(([-np.inf], prev[:-1]))
        # ties prefer staying on the current token
        q[:, j] = np.where(stay >= advance, stay, advance) + loglik[:, j]

    path = np.empty(n_frames, dtype=np.int64)
    path[-1] = n_tokens - 1
    for j in range(n_frames - 2, -1, -1):
        i = path[j + 1]
        if i == 0:
            path[j] = 0
        elif q[i, j] >= q[i - 1, j]:
            path[j] = i
        else:
            path[j] = i - 1
    return path


def path_durations(path: np.ndarray, n_tokens: int) -> np.ndarray:
    """Frames spent on each token; sums to the frame count."""
    return np.bincount(path, minlength=n_tokens).astype(np.int64)


def expand_by_duration(values: np.ndarray, durations: np.ndarray) -> np.ndarray:
    """Repeat [D x T_text] columns by per-token durations -> [D x sum(d)]."""
    return np.repeat(values, durations, axis=1)
