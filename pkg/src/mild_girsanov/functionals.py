"""Built-in bounded path functionals and terminal state functions.

Path functionals act on batched grid paths (B, d, N+1); state functions
act on terminal values (B, d).  Both return one float per sample.
"""

from __future__ import annotations

from typing import Callable, Dict

import numpy as np

from .paths import TimeGrid

__all__ = ["PATH_FUNCTIONALS", "STATE_FUNCTIONS", "path_functional", "state_function"]


def _terminal_coord(z: np.ndarray, grid: TimeGrid) -> np.ndarray:
    return z[:, 0, -1]


def _terminal_sqnorm(z: np.ndarray, grid: TimeGrid) -> np.ndarray:
    return np.sum(z[:, :, -1] ** 2, axis=1)


def _running_sup(z: np.ndarray, grid: TimeGrid) -> np.ndarray:
    return z[:, 0, :].max(axis=1)


def _time_avg(z: np.ndarray, grid: TimeGrid) -> np.ndarray:
    w = np.full(grid.N + 1, grid.dt)
    w[0] = w[-1] = 0.5 * grid.dt
    return (z[:, 0, :] @ w) / grid.T


PATH_FUNCTIONALS: Dict[str, Callable[[np.ndarray, TimeGrid], np.ndarray]] = {
    "terminal_coord": _terminal_coord,
    "terminal_sqnorm": _terminal_sqnorm,
    "running_sup": _running_sup,
    "time_avg": _time_avg,
}


def _xi(d: int) -> np.ndarray:
    # fixed frequency vector for the characteristic-function check
    return 1.0 / np.arange(1.0, d + 1.0)


STATE_FUNCTIONS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "one": lambda zT: np.ones(zT.shape[0]),
    "coord": lambda zT: zT[:, 0],
    "sqnorm": lambda zT: np.sum(zT**2, axis=1),
    "char_fn": lambda zT: np.cos(zT @ _xi(zT.shape[1])),
}


def path_functional(name: str) -> Callable[[np.ndarray, TimeGrid], np.ndarray]:
    try:
        return PATH_FUNCTIONALS[name]
    except KeyError:
        raise KeyError(f"unknown path functional {name!r}; have {sorted(PATH_FUNCTIONALS)}")


def state_function(name: str) -> Callable[[np.ndarray], np.ndarray]:
    try:
        return STATE_FUNCTIONS[name]
    except KeyError:
        raise KeyError(f"unknown state function {name!r}; have {sorted(STATE_FUNCTIONS)}")


def char_fn_frequencies(d: int) -> np.ndarray:
    return _xi(d)
