# hocpde/analysis.py
import logging
import math
from typing import Iterable, List, Tuple

import numpy as np

from .assembly import max_stable_dt, step_theta_periodic
from .exceptions import DomainError, SingularAmplificationError
from .schemas import ConstantCoefficients, DispersionSample, StabilityReport, StabilitySample

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# characteristics of the mixed derivative, evaluated at h = k = 1
# ---------------------------------------------------------------------------


def characteristic_exact(k1h, k2k):
    return -np.multiply(k1h, k2k)


def characteristic_4oc_m(k1h, k2k):
    return -np.sin(k1h) * np.sin(k2k) * (3.0 / (2.0 + np.cos(k1h)) + 3.0 / (2.0 + np.cos(k2k)) - 1.0)


def characteristic_2oc(k1h, k2k):
    return -np.sin(k1h) * np.sin(k2k)


def characteristic_4ow(k1h, k2k):
    return -np.sin(k1h) * np.sin(k2k) * (4.0 - np.cos(k1h)) * (4.0 - np.cos(k2k)) / 9.0


def dispersion_table(samples: Iterable[float] = (0.5, 1.0, 1.5, 2.0), resolution: int = 101) -> List[DispersionSample]:
    """Four characteristics over kappa1 h in [0, pi] for each requested kappa2 k."""
    rows: List[DispersionSample] = []
    k1 = np.linspace(0.0, np.pi, resolution)
    for k2 in samples:
        values = zip(
            k1,
            characteristic_exact(k1, k2),
            characteristic_4oc_m(k1, k2),
            characteristic_2oc(k1, k2),
            characteristic_4ow(k1, k2),
        )
        rows += [
            DispersionSample(kappa1_h=a, kappa2_k=k2, lambda_exact=e, lambda_4oc_m=m, lambda_2oc=s, lambda_4ow=w)
            for a, e, m, s, w in values
        ]
    return rows


# ---------------------------------------------------------------------------
# von Neumann symbol
# ---------------------------------------------------------------------------


def R_function(theta_x, theta_y):
    cx, cy = np.cos(theta_x), np.cos(theta_y)
    numerator = 2.0 * (8.0 + cx + cy - cx * cy) * np.cos(theta_x / 2.0) * np.cos(theta_y / 2.0)
    return numerator / np.sqrt((5.0 + cx) * (2.0 + cx) * (5.0 + cy) * (2.0 + cy))


def diffusion_quadratic_form(alpha1: float, alpha2: float, beta: float, A, B, r):
    """alpha1 A^2 + alpha2 B^2 + beta A B r, positive for |r| <= 1 and positive definite diffusion."""
    return alpha1 * A**2 + alpha2 * B**2 + beta * A * B * r


def _check(coeffs: ConstantCoefficients) -> None:
    if not coeffs.positive_definite():
        raise DomainError(f"beta^2 < 4 alpha1 alpha2 fails for {coeffs}")


def _convection_symbol(coeffs: ConstantCoefficients, h: float, k: float, theta_x, theta_y):
    return coeffs.c1 * 3.0 * np.sin(theta_x) / (h * (2.0 + np.cos(theta_x))) + coeffs.c2 * 3.0 * np.sin(theta_y) / (
        k * (2.0 + np.cos(theta_y))
    )


def symbol_F(coeffs: ConstantCoefficients, h: float, k: float, theta_x, theta_y) -> Tuple[np.ndarray, np.ndarray]:
    """(F_R, F_I) of the compact operator, d excluded, from the factored form."""
    _check(coeffs)
    cx, cy = np.cos(theta_x), np.cos(theta_y)
    A = math.sqrt(2.0) / h * np.sin(theta_x / 2.0) * np.sqrt((5.0 + cx) / (2.0 + cx))
    B = math.sqrt(2.0) / k * np.sin(theta_y / 2.0) * np.sqrt((5.0 + cy) / (2.0 + cy))
    F_R = diffusion_quadratic_form(coeffs.alpha1, coeffs.alpha2, coeffs.beta, A, B, R_function(theta_x, theta_y))
    return F_R, _convection_symbol(coeffs, h, k, theta_x, theta_y)


def symbol_F_expanded(coeffs: ConstantCoefficients, h: float, k: float, theta_x, theta_y) -> Tuple[np.ndarray, np.ndarray]:
    """Same symbol assembled term by term from the central differences and the Padé multipliers."""
    _check(coeffs)
    sx, sy = np.sin(theta_x), np.sin(theta_y)
    cx, cy = np.cos(theta_x), np.cos(theta_y)
    gx = 3.0 * sx / (h * (2.0 + cx))
    gy = 3.0 * sy / (k * (2.0 + cy))
    a1, a2, b = coeffs.alpha1, coeffs.alpha2, coeffs.beta
    F_R = (
        2.0 * a1 * (2.0 - 2.0 * cx) / h**2
        + 2.0 * a2 * (2.0 - 2.0 * cy) / k**2
        - b * sx * sy / (h * k)
        + (-a1 * sx / h + b * sy / k) * gx
        + (-a2 * sy / k + b * sx / h) * gy
    )
    return F_R, _convection_symbol(coeffs, h, k, theta_x, theta_y)


def amplification(coeffs: ConstantCoefficients, h: float, k: float, dt: float, iota: float, theta_x, theta_y):
    F_R, F_I = symbol_F(coeffs, h, k, theta_x, theta_y)
    F = F_R + coeffs.d + 1j * F_I
    denominator = 1.0 + iota * dt * F
    if np.any(np.abs(denominator) == 0.0):
        raise SingularAmplificationError(f"1 + iota dt F vanishes for dt={dt}, iota={iota}")
    return np.abs((1.0 - (1.0 - iota) * dt * F) / denominator)


def stability_sample(coeffs: ConstantCoefficients, h: float, k: float, dt: float, iota: float, theta_x: float, theta_y: float) -> StabilitySample:
    F_R, F_I = symbol_F(coeffs, h, k, theta_x, theta_y)
    G = amplification(coeffs, h, k, dt, iota, theta_x, theta_y)
    return StabilitySample(
        theta_x=theta_x, theta_y=theta_y, F_R=float(F_R), F_I=float(F_I), G_magnitude=float(G), coefficients=coeffs, h=h, k=k, dt=dt, iota=iota
    )


def stability_scan(coeffs: ConstantCoefficients, h: float, k: float, dt: float, iota: float, grid_resolution: int = 64) -> StabilityReport:
    """Largest |G| over a uniform phase grid on [0, 2 pi)^2 and where it occurs."""
    if grid_resolution < 8:
        raise DomainError(f"stability scan needs a resolution of at least 8, got {grid_resolution}")
    theta = 2.0 * np.pi * np.arange(grid_resolution) / grid_resolution
    TX, TY = np.meshgrid(theta, theta, indexing="ij")
    G = amplification(coeffs, h, k, dt, iota, TX, TY)
    flat = int(np.argmax(G))
    ix, iy = np.unravel_index(flat, G.shape)
    max_G = float(G[ix, iy])
    bound = max_stable_dt(coeffs.d, iota)
    admissible = iota >= 0.5 and (coeffs.d >= 0.0 or dt < bound)
    logger.debug(f"stability scan: max|G|={max_G:.15g} at ({theta[ix]:.4f}, {theta[iy]:.4f})")
    return StabilityReport(
        max_G=max_G,
        theta_x=float(theta[ix]),
        theta_y=float(theta[iy]),
        resolution=grid_resolution,
        growth_rate=(max_G - 1.0) / dt,
        admissible=admissible,
        dt_bound=bound,
    )


def empirical_amplification(
    coeffs: ConstantCoefficients, h: float, k: float, dt: float, iota: float, mode: Tuple[int, int], n: int = 16
) -> float:
    """Amplitude ratio after one periodic theta step of cos(theta_x i + theta_y j), theta = 2 pi mode / n."""
    theta_x, theta_y = 2.0 * np.pi * mode[0] / n, 2.0 * np.pi * mode[1] / n
    I, J = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    phi0 = np.cos(theta_x * I + theta_y * J)
    phi1 = step_theta_periodic(phi0, coeffs, h, k, dt, iota)
    return float(np.linalg.norm(phi1) / np.linalg.norm(phi0))
