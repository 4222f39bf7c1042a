"""Optimizer - Quasi-Newton BFGS dengan line search backtracking dan fallback simplex."""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize

logger = logging.getLogger(__name__)

ARMIJO = 1e-4
MIN_STEP = 1e-12
MAX_LINE_SEARCH_FAILURES = 3


@dataclass
class OptimizeOutcome:
    x: np.ndarray
    value: float
    gradient: np.ndarray
    converged: bool
    iterations: int
    method: str = "bfgs"
    line_search_failures: int = 0
    messages: list = field(default_factory=list)

    @property
    def gradient_norm(self) -> float:
        return float(np.max(np.abs(self.gradient))) if self.gradient.size else 0.0


def _bfgs_update(h_inv: np.ndarray, s: np.ndarray, y: np.ndarray) -> np.ndarray:
    sy = float(s @ y)
    if sy <= math.sqrt(np.finfo(float).eps) * np.linalg.norm(s) * np.linalg.norm(y):
        return h_inv
    rho = 1.0 / sy
    identity = np.eye(len(s))
    left = identity - rho * np.outer(s, y)
    return left @ h_inv @ left.T + rho * np.outer(s, s)


def _backtrack(objective: Callable, x: np.ndarray, value: float, gradient: np.ndarray,
               direction: np.ndarray) -> tuple[float, np.ndarray, float] | None:
    slope = float(gradient @ direction)
    step = 1.0
    while step >= MIN_STEP:
        candidate = x + step * direction
        candidate_value = objective(candidate)
        if math.isfinite(candidate_value) and candidate_value <= value + ARMIJO * step * slope:
            return step, candidate, candidate_value
        step *= 0.5
    return None


def minimize_bfgs(objective: Callable[[np.ndarray], float], gradient: Callable[[np.ndarray], np.ndarray],
                  x0: np.ndarray, max_iterations: int = 500, gtol: float = 1e-8,
                  rtol: float = 1e-12) -> OptimizeOutcome:
    """Minimumkan ``objective`` dari ``x0``.

    Berhenti bila norma L-inf gradien < gtol atau perubahan relatif nilai < rtol.
    Setelah tiga kegagalan line search, pencarian dilanjutkan dengan Nelder-Mead
    dari titik terbaik yang sudah dicapai.
    """
    x = np.array(x0, dtype=float)
    value = objective(x)
    grad = gradient(x)
    h_inv = np.eye(len(x))
    failures = 0
    messages: list[str] = []

    for iteration in range(1, max_iterations + 1):
        if np.max(np.abs(grad), initial=0.0) < gtol:
            return OptimizeOutcome(x, value, grad, True, iteration - 1, line_search_failures=failures)
        direction = -h_inv @ grad
        if float(direction @ grad) >= 0:
            h_inv = np.eye(len(x))
            direction = -grad
        found = _backtrack(objective, x, value, grad, direction)
        if found is None:
            failures += 1
            messages.append(f"line search gagal pada iterasi {iteration}")
            logger.debug(f"Line search gagal ({failures}x) pada iterasi {iteration}")
            if failures >= MAX_LINE_SEARCH_FAILURES:
                return _simplex_fallback(objective, gradient, x, value, iteration, failures, messages,
                                         max_iterations, gtol)
            h_inv = np.eye(len(x))
            continue
        step, x_new, value_new = found
        grad_new = gradient(x_new)
        h_inv = _bfgs_update(h_inv, x_new - x, grad_new - grad)
        change = abs(value_new - value)
        x, value, grad = x_new, value_new, grad_new
        logger.debug(f"Iterasi {iteration}: nilai={value:.10g}, langkah={step:.3g}")
        if change <= rtol * max(abs(value), 1.0):
            converged = True
            return OptimizeOutcome(x, value, grad, converged, iteration, line_search_failures=failures)

    messages.append("batas iterasi tercapai")
    return OptimizeOutcome(x, value, grad, False, max_iterations, line_search_failures=failures, messages=messages)


def _simplex_fallback(objective, gradient, x, value, iteration, failures, messages, max_iterations, gtol):
    logger.warning("Line search gagal berulang, beralih ke Nelder-Mead")
    result = optimize.minimize(
        objective, x, method="Nelder-Mead",
        options={"maxiter": max(max_iterations * 20, 1000), "xatol": 1e-10, "fatol": 1e-12},
    )
    x_best, value_best = (result.x, float(result.fun)) if result.fun <= value else (x, value)
    grad = gradient(x_best)
    converged = bool(result.success or np.max(np.abs(grad), initial=0.0) < gtol)
    messages.append(f"fallback nelder-mead: {result.message}")
    return OptimizeOutcome(x_best, value_best, grad, converged, iteration + int(result.nit),
                           method="nelder-mead", line_search_failures=failures, messages=messages)
