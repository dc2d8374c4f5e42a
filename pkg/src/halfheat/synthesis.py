"""Constructive synthesis of bounded Dirichlet boundary controls.

The control acts on the boundary of the half-plane heat equation and is built
in four stages:

1.  Expand the residual target (target minus free evolution at the terminal
    time) over the odd-in-x1 tensor Hermite basis: coefficients W[n, m].
2.  Convert to pulse-family coefficients g[p, m] = sum_{n >= p} W[n, m] * h[p, n],
    where h[p, n] rewrites each odd basis transform as a combination of the
    elementary spectra i*lam^(2p+1) * exp(-T*lam^2).
3.  Replace each idealized derivative-of-delta time profile by the bounded
    staircase pulse v_l^p, a finite-difference approximation with resolution l.
4.  Evaluate the resulting control u(x2, xi) and its exact spectral response in
    closed form; no time stepping is involved anywhere.

A three-term error budget bounds the terminal L2 miss: basis truncation in M,
coefficient tail in N, and pulse resolution in l.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from mpmath import mp

from .hermite import hermite_eval, hermite_gauss_table, _psi_value
from .spectral import GridSpec, PhysicalField, SpectralField

__all__ = [
    "ControlParams",
    "CoefficientSet",
    "ErrorBudget",
    "SynthesizedControl",
    "AdmissibilityReport",
    "admissibility_profile",
    "assemble_control_response",
    "closed_form_coefficients",
    "compute_Wnm_quadrature",
    "compute_g_pm",
    "compute_h_pn",
    "delta_moment_residual",
    "error_budget",
    "example_Wnm",
    "example_g_pm",
    "phi_eval",
    "phi_l_eval",
    "pulse_eval",
    "quadrature_coefficients",
    "synthesize",
    "target_coefficient_matrix",
    "z_response",
    "z_terminal",
]

CONTROL_FORMAT_VERSION = 1

# Order guard for the log-domain coefficient ladder; beyond this the
# exponentiated magnitudes leave the double range.
MAX_COEFFICIENT_ORDER = 60

_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)

# Terminal-error budget constants frozen for the reference configuration
# (T, Tstar) = (2, 6); for any other pair the budget is evaluated from its
# general closed form.
FROZEN_SCALES = (2.0, 6.0)
FROZEN_BASIS_CONST = 2.622851155438146
FROZEN_COEFF_CONST = 2.350732202502537
FROZEN_PULSE_CONST = 15.31493739172921


@dataclass(frozen=True)
class ControlParams:
    """Synthesis parameters: horizon T, auxiliary scale Tstar > T, truncation
    orders N (x1 direction) and M (x2 direction), pulse resolution l."""

    T: float
    Tstar: float
    N: int
    M: int
    l: int

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("control time T must be positive")
        if not self.Tstar > self.T:
            raise ValueError("auxiliary scale Tstar must exceed T")
        if self.N < 0 or self.M < 0:
            raise ValueError("truncation orders must be nonnegative")
        if self.N > MAX_COEFFICIENT_ORDER:
            raise ValueError(f"N exceeds the coefficient overflow guard {MAX_COEFFICIENT_ORDER}")
        if self.l < 1:
            raise ValueError("pulse resolution l must be a positive integer")

    @property
    def delta_T(self) -> float:
        return self.Tstar - self.T

    @property
    def pulse_guard_bound(self) -> float:
        """Smallest l for which the budget's pulse term is guaranteed."""
        return 2.0 * (self.N + 2) / self.T

    @property
    def satisfies_pulse_guard(self) -> bool:
        return self.l >= self.pulse_guard_bound

    def require_pulse_guard(self) -> None:
        if not self.satisfies_pulse_guard:
            raise ValueError(
                f"pulse resolution l={self.l} violates the error-budget guard "
                f"l >= 2*(N+2)/T = {self.pulse_guard_bound:g}"
            )

    def to_dict(self) -> dict:
        return {"T": self.T, "Tstar": self.Tstar, "N": self.N, "M": self.M, "l": self.l}

    @classmethod
    def from_dict(cls, d: dict) -> "ControlParams":
        return cls(float(d["T"]), float(d["Tstar"]), int(d["N"]), int(d["M"]), int(d["l"]))


# ---------------------------------------------------------------------------
# Pulses and their spectra
# ---------------------------------------------------------------------------

def _pulse_coefficients(p: int, l: int) -> np.ndarray:
    # C(p, j) * l^(p+1) stays exactly representable for l <= 200, p <= 16.
    return np.array(
        [(-1.0) ** (p - j) * math.comb(p, j) * float(l) ** (p + 1) for j in range(p + 1)]
    )


def pulse_eval(p: int, l: int, xi) -> "np.ndarray | float":
    """Staircase pulse approximating the p-th derivative of a delta at time 0.

    Piecewise constant, equal to (-1)^(p-j) * C(p, j) * l^(p+1) on the j-th
    subinterval [j/l, (j+1)/l) for j = 0..p and zero elsewhere; breakpoint
    values are taken right-continuously.
    """
    if p < 0:
        raise ValueError("pulse order must be nonnegative")
    if p > MAX_COEFFICIENT_ORDER:
        raise ValueError(f"pulse order exceeds the overflow guard {MAX_COEFFICIENT_ORDER}")
    if l < 1:
        raise ValueError("pulse resolution must be a positive integer")
    xi_arr = np.asarray(xi, dtype=float)
    coeffs = _pulse_coefficients(p, l)
    j = np.floor(xi_arr * l).astype(int)
    inside = (xi_arr >= 0) & (j <= p) & (j >= 0)
    values = np.where(inside, coeffs[np.clip(j, 0, p)], 0.0)
    if np.isscalar(xi) or xi_arr.ndim == 0:
        return float(values)
    return values


def pulse_support_end(p: int, l: int) -> float:
    return (p + 1) / l


def delta_moment_residual(p: int, l: int, q_coeffs) -> float:
    """|integral of v_l^p * q over [0, T] - q^(p)(0)| for a polynomial q.

    q_coeffs are ascending-degree coefficients, degree at most 6.  Each
    monomial is integrated exactly per subinterval; the inner alternating
    binomial sums are integer-exact, so degrees below p cancel identically
    and the degree-(p+1) residual is an exact multiple of 1/l.
    """
    coeffs = np.atleast_1d(np.asarray(q_coeffs, dtype=float))
    if coeffs.size - 1 > 6:
        raise ValueError("polynomial degree must be at most 6")
    total = 0.0
    for d, c in enumerate(coeffs):
        if c == 0.0:
            continue
        s = sum(
            (-1) ** (p - j) * math.comb(p, j) * ((j + 1) ** (d + 1) - j ** (d + 1))
            for j in range(p + 1)
        )
        total += c * s * float(l) ** (p - d) / (d + 1)
    expected = math.factorial(p) * coeffs[p] if p < coeffs.size else 0.0
    return abs(total - expected)


def phi_eval(p: int, T: float, lam) -> "np.ndarray | complex":
    """Elementary odd spectrum i * lam^(2p+1) * exp(-T * lam^2)."""
    lam_arr = np.asarray(lam, dtype=float)
    result = 1j * lam_arr ** (2 * p + 1) * np.exp(-T * lam_arr**2)
    if np.isscalar(lam) or lam_arr.ndim == 0:
        return complex(result)
    return result


def phi_l_eval(p: int, l: int, T: float, lam) -> "np.ndarray | complex":
    """Pulse-smoothed spectrum: phi_eval times ((exp(x) - 1)/x)^(p+1), x = lam^2/l.

    A short series replaces the ratio for x < 1e-6 to avoid cancellation; for
    large x the whole product is evaluated in the log domain so that the
    growing ratio never overflows before the Gaussian kills it.
    """
    lam_arr = np.asarray(lam, dtype=float)
    x = lam_arr * lam_arr / l
    out = np.empty(lam_arr.shape, dtype=complex)

    small = x < 1e-6
    mid = (~small) & (x <= 30.0)
    big = x > 30.0

    if np.any(small):
        xs = x[small]
        ratio = 1.0 + xs / 2.0 + xs * xs / 6.0
        out[small] = (
            1j
            * lam_arr[small] ** (2 * p + 1)
            * np.exp(-T * lam_arr[small] ** 2)
            * ratio ** (p + 1)
        )
    if np.any(mid):
        xm = x[mid]
        ratio = np.expm1(xm) / xm
        out[mid] = (
            1j
            * lam_arr[mid] ** (2 * p + 1)
            * np.exp(-T * lam_arr[mid] ** 2)
            * ratio ** (p + 1)
        )
    if np.any(big):
        xb = x[big]
        ab = np.abs(lam_arr[big])
        log_ratio = xb + np.log1p(-np.exp(-xb)) - np.log(xb)
        log_mag = (2 * p + 1) * np.log(ab) - T * ab * ab + (p + 1) * log_ratio
        with np.errstate(over="ignore"):
            out[big] = 1j * np.sign(lam_arr[big]) * np.exp(log_mag)

    if np.isscalar(lam) or lam_arr.ndim == 0:
        return complex(out)
    return out


def _pulse_time_integral_mp(p: int, l: int, t: float, sigma: float, dps: int = 40) -> complex:
    """Pulse response spectrum at time t by explicit per-subinterval integration.

    Each constant piece of v_l^p contributes
        c_j * (exp(-(t - b_j) s^2) - exp(-(t - a_j) s^2)) / s^2,
    a_j = j/l, b_j = min((j+1)/l, t).  The alternating sum cancels up to
    ~16 digits for large p and l, so the terms are formed and summed in
    extended precision and only the final value is rounded to double.
    """
    if sigma == 0.0 or t <= 0.0:
        return 0.0 + 0.0j
    with mp.workdps(dps):
        s2 = mp.mpf(sigma) ** 2
        lm = mp.mpf(l)
        step = s2 / lm
        full_seg = mp.expm1(step)
        grow = mp.exp(step)
        base = mp.exp(-mp.mpf(t) * s2)
        scale = lm ** (p + 1)
        acc = mp.mpf(0)
        e_aj = mp.mpf(1)
        for j in range(p + 1):
            if j / l >= t:
                break
            if (j + 1) / l <= t:
                seg = full_seg
            else:
                seg = mp.expm1((mp.mpf(t) - mp.mpf(j) / lm) * s2)
            sign = -1.0 if (p - j) % 2 else 1.0
            acc += sign * math.comb(p, j) * scale * base * e_aj * seg / s2
            e_aj *= grow
        imag = -_SQRT_2_OVER_PI * sigma * float(acc)
    return complex(0.0, imag)


def z_terminal(p: int, l: int, T: float, sigma1) -> "np.ndarray | complex":
    """Terminal value of the 1-d pulse response spectrum at time T.

    Always evaluated by per-subinterval integration (see
    _pulse_time_integral_mp); algebraically it telescopes to
    -sqrt(2/pi) * phi_l_eval(p, l, T, sigma1), which the tests verify.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    sig_arr = np.atleast_1d(np.asarray(sigma1, dtype=float))
    out = np.array([_pulse_time_integral_mp(p, l, T, s) for s in sig_arr])
    if np.isscalar(sigma1) or np.asarray(sigma1).ndim == 0:
        return complex(out[0])
    return out


def z_response(p: int, l: int, t: float, sigma1) -> np.ndarray:
    """Pulse response spectrum at an arbitrary time t in [0, T].

    Once the pulse has switched off (t >= (p+1)/l) the per-subinterval sum
    telescopes exactly to -sqrt(2/pi) times the smoothed spectrum with decay
    time t, which is the stable form used here; mid-pulse times fall back to
    extended-precision subinterval summation.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    sig_arr = np.asarray(sigma1, dtype=float)
    if t == 0:
        return np.zeros(sig_arr.shape, dtype=complex)
    if t >= pulse_support_end(p, l):
        return -_SQRT_2_OVER_PI * np.asarray(phi_l_eval(p, l, t, sig_arr), dtype=complex)
    flat = np.atleast_1d(sig_arr)
    out = np.array([_pulse_time_integral_mp(p, l, t, s) for s in flat])
    return out.reshape(sig_arr.shape)


# ---------------------------------------------------------------------------
# Coefficient algebra
# ---------------------------------------------------------------------------

def compute_h_pn(p: int, n: int, T: float) -> float:
    """Ladder coefficient h[p, n] converting basis expansions to pulse spectra.

    h[p, n] = (2T/pi)^(1/4) * (-1)^(p+1) * (2*sqrt(2T))^(2p+1)
              / ((n-p)! (2p+1)!) * sqrt((2n+1)! / 2^(2n+1)),
    evaluated as sign times an exponentiated log magnitude.
    """
    if not 0 <= p <= n:
        raise ValueError("need 0 <= p <= n")
    if n > MAX_COEFFICIENT_ORDER:
        raise ValueError(f"order {n} exceeds the overflow guard {MAX_COEFFICIENT_ORDER}")
    if T <= 0:
        raise ValueError("T must be positive")
    log_mag = (
        0.25 * math.log(2.0 * T / math.pi)
        + (2 * p + 1) * math.log(2.0 * math.sqrt(2.0 * T))
        - math.lgamma(n - p + 1)
        - math.lgamma(2 * p + 2)
        + 0.5 * (math.lgamma(2 * n + 2) - (2 * n + 1) * math.log(2.0))
    )
    return (-1.0) ** (p + 1) * math.exp(log_mag)


def _h_matrix(params: ControlParams) -> np.ndarray:
    N = params.N
    h = np.zeros((N + 1, N + 1))
    for p in range(N + 1):
        for n in range(p, N + 1):
            h[p, n] = compute_h_pn(p, n, params.T)
    return h


def compute_g_pm(W_nm, params: ControlParams) -> np.ndarray:
    """Pulse coefficients g[p, m] = sum_{n=p}^{N} W[n, m] * h[p, n]."""
    W = np.asarray(W_nm, dtype=float)
    if W.shape != (params.N + 1, params.M + 1):
        raise ValueError(
            f"W_nm shape {W.shape} does not match orders ({params.N + 1}, {params.M + 1})"
        )
    h = _h_matrix(params)
    g = np.zeros_like(W)
    for p in range(params.N + 1):
        g[p, :] = h[p, p:] @ W[p:, :]
    return g


def example_Wnm(n: int, m: int, T: float, Tstar: float) -> float:
    """Closed-form target coefficient for the built-in benchmark case.

    The benchmark residual target separates, and its expansion coefficients
    reduce to a Hermite value at sqrt(2*T*Tstar / (Tstar^2 - T^2)) with
    explicit factorial prefactors.
    """
    if not Tstar > T > 0:
        raise ValueError("need Tstar > T > 0")
    if n < 0 or m < 0:
        raise ValueError("indices must be nonnegative")
    dT, S = Tstar - T, Tstar + T
    arg = math.sqrt(2.0 * T * Tstar / (Tstar**2 - T**2))
    lead = math.sqrt(math.sqrt(2.0 * math.pi * Tstar) / (math.e * S)) * math.exp(Tstar / S)
    fn = math.exp(-(2 * n + 1) * math.log(2.0) - 0.5 * math.lgamma(2 * n + 2))
    fm = math.exp(
        -0.5 * (m * math.log(2.0) + math.lgamma(m + 1)) + 0.5 * m * math.log(dT / S)
    )
    return lead * fn * fm * (-1.0) ** (m + 1) * hermite_eval(m, arg)


def example_g_pm(p: int, m: int, N: int, T: float, Tstar: float) -> float:
    """Closed-form pulse coefficient for the built-in benchmark case.

    Collapses the n-sum of compute_g_pm over the closed-form target
    coefficients; the finite tail sum_{n=p}^{N} 1 / (2^(3n) (n-p)!) is kept
    explicit.
    """
    if not 0 <= p <= N:
        raise ValueError("need 0 <= p <= N")
    if not Tstar > T > 0:
        raise ValueError("need Tstar > T > 0")
    dT, S = Tstar - T, Tstar + T
    arg = math.sqrt(2.0 * T * Tstar / (Tstar**2 - T**2))
    lead = math.sqrt(2.0 * math.sqrt(T**3 * Tstar) / (math.e * S)) * math.exp(Tstar / S)
    fm = math.exp(
        -0.5 * (m * math.log(2.0) + math.lgamma(m + 1)) + 0.5 * m * math.log(dT / S)
    )
    fp = math.exp(p * math.log(8.0 * T) - math.lgamma(2 * p + 2))
    tail = math.fsum(
        1.0 / (2.0 ** (3 * nn) * math.factorial(nn - p)) for nn in range(p, N + 1)
    )
    return lead * fm * fp * tail * (-1.0) ** (m + p) * hermite_eval(m, arg)


def _quadrature_tables(params: ControlParams, rule):
    from .hermite import basis_box_halfwidth, gauss_legendre_rule

    if rule is None:
        rule = gauss_legendre_rule(basis_box_halfwidth(params.T, params.Tstar))
    psi1 = np.stack(
        [_psi_value(params.T, 2 * n + 1, rule.nodes) for n in range(params.N + 1)]
    )
    psi2 = np.stack([_psi_value(params.Tstar, m, rule.nodes) for m in range(params.M + 1)])
    return rule, psi1, psi2


def target_coefficient_matrix(residual, params: ControlParams, rule=None) -> np.ndarray:
    """All coefficients W[n, m] of a residual target at once.

    residual may be a callable residual(x1_mesh, x2_mesh) -> array, integrated
    with a tensor Gauss-Legendre rule on the truncation box, or a sampled
    PhysicalField, integrated with the midpoint rule of its own grid.
    """
    if isinstance(residual, PhysicalField):
        g = residual.grid
        x1, x2 = g.x1(), g.x2()
        values = residual.values
        w1 = np.full(x1.shape, g.h1)
        w2 = np.full(x2.shape, g.h2)
        psi1 = np.stack([_psi_value(params.T, 2 * n + 1, x1) for n in range(params.N + 1)])
        psi2 = np.stack([_psi_value(params.Tstar, m, x2) for m in range(params.M + 1)])
        edge = float(
            max(
                np.max(np.abs(values[0, :])),
                np.max(np.abs(values[-1, :])),
                np.max(np.abs(values[:, 0])),
                np.max(np.abs(values[:, -1])),
            )
        )
        interior = float(np.max(np.abs(values)))
    else:
        rule, psi1, psi2 = _quadrature_tables(params, rule)
        x1 = x2 = rule.nodes
        w1 = w2 = rule.weights
        X1, X2 = np.meshgrid(x1, x2, indexing="ij")
        values = np.asarray(residual(X1, X2), dtype=float)
        hw = rule.domain_halfwidth
        probes_x1 = np.array([-hw, -hw, hw, hw, 0.0, 0.0, -hw, hw])
        probes_x2 = np.array([-hw, hw, -hw, hw, -hw, hw, 0.0, 0.0])
        edge = float(np.max(np.abs(np.asarray(residual(probes_x1, probes_x2), dtype=float))))
        interior = float(np.max(np.abs(values)))
    if not np.all(np.isfinite(values)):
        raise ArithmeticError("residual target has non-finite samples")
    if edge > 1e-10 * (1.0 + interior):
        warnings.warn(
            f"residual target does not decay at the integration boundary "
            f"(edge magnitude {edge:.3e}); coefficients may be inaccurate",
            stacklevel=2,
        )
    weighted = values * np.outer(w1, w2)
    return psi1 @ weighted @ psi2.T


def compute_Wnm_quadrature(residual, params: ControlParams, n: int, m: int, rule=None) -> float:
    """Single target coefficient W[n, m] by 2-d quadrature; see
    target_coefficient_matrix for the residual conventions."""
    if not (0 <= n <= params.N and 0 <= m <= params.M):
        raise ValueError("indices outside the truncation orders")
    return float(target_coefficient_matrix(residual, params, rule)[n, m])


@dataclass(frozen=True)
class CoefficientSet:
    """Target coefficients, the conversion ladder, and the pulse coefficients.

    provenance holds a per-entry tag for W_nm, either "quadrature" or
    "closed-form".
    """

    W_nm: np.ndarray
    h_pn: np.ndarray
    g_pm: np.ndarray
    provenance: np.ndarray

    def __post_init__(self):
        for name in ("W_nm", "h_pn", "g_pm"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, arr)
        prov = np.asarray(self.provenance)
        if prov.shape != self.W_nm.shape:
            raise ValueError("provenance must tag every W_nm entry")
        object.__setattr__(self, "provenance", prov)

    @property
    def orders(self) -> "tuple[int, int]":
        return self.W_nm.shape[0] - 1, self.W_nm.shape[1] - 1


def _make_coefficient_set(W: np.ndarray, params: ControlParams, tag: str) -> CoefficientSet:
    return CoefficientSet(
        W_nm=W,
        h_pn=_h_matrix(params),
        g_pm=compute_g_pm(W, params),
        provenance=np.full(W.shape, tag),
    )


def closed_form_coefficients(params: ControlParams) -> CoefficientSet:
    """Coefficient set for the built-in benchmark case from its closed forms."""
    W = np.array(
        [
            [example_Wnm(n, m, params.T, params.Tstar) for m in range(params.M + 1)]
            for n in range(params.N + 1)
        ]
    )
    return _make_coefficient_set(W, params, "closed-form")


def quadrature_coefficients(residual, params: ControlParams, rule=None) -> CoefficientSet:
    """Coefficient set for an arbitrary residual target by quadrature."""
    W = target_coefficient_matrix(residual, params, rule)
    return _make_coefficient_set(W, params, "quadrature")


# ---------------------------------------------------------------------------
# The synthesized control and its exact spectral response
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SynthesizedControl:
    """Closed-form boundary control: pulse coefficients plus parameters.

    Evaluable at any (x2, xi) with xi in [0, T]; piecewise smooth in xi with
    breakpoints at j/l.
    """

    params: ControlParams
    g_pm: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.g_pm, dtype=float)
        if g.shape != (self.params.N + 1, self.params.M + 1):
            raise ValueError("g_pm shape does not match the truncation orders")
        if not np.all(np.isfinite(g)):
            raise ValueError("g_pm must be finite")
        object.__setattr__(self, "g_pm", g)

    @property
    def support_end(self) -> float:
        """Time after which every pulse is off and the control vanishes."""
        return min((self.params.N + 1) / self.params.l, self.params.T)

    def breakpoints(self) -> np.ndarray:
        bps = np.arange(self.params.N + 2) / self.params.l
        return bps[bps <= self.params.T]

    def _pulse_weights(self, xi: float) -> np.ndarray:
        return np.array(
            [pulse_eval(p, self.params.l, xi) for p in range(self.params.N + 1)]
        )

    def eval(self, x2, xi: float) -> "np.ndarray | float":
        """Control value u(x2, xi).

        u = -(pi*Tstar/2)^(1/4) * sum_m [sum_p g[p, m] v_l^p(xi)]
            * (2^m m!)^(-1/2) * exp(-x2^2 / (4*(dT + xi))) / sqrt(2*(dT + xi))
            * ((Tstar + T - xi) / (dT + xi))^(m/2) * H_m(y),
        y = x2 * sqrt(Tstar / (2*(dT + xi)*(Tstar + T - xi))),  dT = Tstar - T.
        """
        pr = self.params
        if not 0.0 <= xi <= pr.T:
            raise ValueError(f"xi={xi:g} outside the control horizon [0, {pr.T:g}]")
        x2_arr = np.asarray(x2, dtype=float)
        weights = self.g_pm.T @ self._pulse_weights(xi)
        if not np.any(weights):
            result = np.zeros(x2_arr.shape)
            return float(result) if np.isscalar(x2) or x2_arr.ndim == 0 else result
        dt = pr.delta_T + xi
        back = pr.Tstar + pr.T - xi
        rho = back / dt
        y = x2_arr * math.sqrt(pr.Tstar / (2.0 * dt * back))
        gauss = x2_arr**2 / (4.0 * dt)
        # B_m = H_m(y) (2^m m!)^(-1/2) rho^(m/2) exp(-gauss), by the normalized
        # recurrence with sqrt(rho) folded per step.
        sqrho = math.sqrt(rho)
        b_prev = np.exp(-gauss)
        acc = weights[0] * b_prev
        if pr.M >= 1:
            b_cur = sqrho * math.sqrt(2.0) * y * b_prev
            acc = acc + weights[1] * b_cur
            for m in range(1, pr.M):
                b_cur, b_prev = (
                    sqrho * math.sqrt(2.0 / (m + 1)) * y * b_cur
                    - rho * math.sqrt(m / (m + 1.0)) * b_prev,
                    b_cur,
                )
                acc = acc + weights[m + 1] * b_cur
        result = -((math.pi * pr.Tstar / 2.0) ** 0.25) / math.sqrt(2.0 * dt) * acc
        if np.isscalar(x2) or x2_arr.ndim == 0:
            return float(result)
        return result

    def eval_spectral(self, sigma2, xi: float) -> "np.ndarray | complex":
        """x2-transform of the control at time xi:
        -sqrt(pi/2) * sum_m sum_p g[p, m] * v_l^p(xi) * f_m(sigma2, xi)."""
        pr = self.params
        if not 0.0 <= xi <= pr.T:
            raise ValueError(f"xi={xi:g} outside the control horizon [0, {pr.T:g}]")
        sig_arr = np.asarray(sigma2, dtype=float)
        weights = self.g_pm.T @ self._pulse_weights(xi)
        fm = _fm_table(pr, sig_arr, xi)
        result = -math.sqrt(math.pi / 2.0) * np.tensordot(weights.astype(complex), fm, axes=(0, 0))
        if np.isscalar(sigma2) or sig_arr.ndim == 0:
            return complex(result)
        return result

    def to_json_dict(self) -> dict:
        return {
            "format_version": CONTROL_FORMAT_VERSION,
            "params": self.params.to_dict(),
            "g_pm": self.g_pm.tolist(),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "SynthesizedControl":
        if d.get("format_version") != CONTROL_FORMAT_VERSION:
            raise ValueError("unsupported control format version")
        return cls(ControlParams.from_dict(d["params"]), np.asarray(d["g_pm"], dtype=float))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "SynthesizedControl":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


def synthesize(params: ControlParams, coeffs: CoefficientSet) -> SynthesizedControl:
    """Bundle pulse coefficients into the closed-form control object."""
    if coeffs.orders != (params.N, params.M):
        raise ValueError(
            f"coefficient orders {coeffs.orders} do not match params ({params.N}, {params.M})"
        )
    return SynthesizedControl(params, coeffs.g_pm)


def _fm_table(params: ControlParams, sigma2: np.ndarray, t: float) -> np.ndarray:
    """Rows f_m(sigma2, t) = exp((T - t) sigma2^2) * psi_hat_m at scale Tstar.

    The growing factor is combined analytically with the Gaussian of the basis
    transform: f_m = (2*Tstar/pi)^(1/4) * (-i)^m * H_m(sqrt(2*Tstar) sigma2)
    * (2^m m!)^(-1/2) * exp(-(dT + t) sigma2^2), which decays for all t <= T.
    """
    y = math.sqrt(2.0 * params.Tstar) * sigma2
    expo = (params.delta_T + t) * sigma2 * sigma2
    table = hermite_gauss_table(params.M, y, expo).astype(complex)
    scale = (2.0 * params.Tstar / math.pi) ** 0.25
    for m in range(params.M + 1):
        table[m] *= scale * (-1j) ** m
    return table


def assemble_control_response(
    params: ControlParams, coeffs: CoefficientSet, grid: GridSpec, t: float
) -> SpectralField:
    """Exact transform of the control response at time t in (0, T].

    V(sigma, t) = -sqrt(pi/2) * sum_p sum_m g[p, m] * z_p(sigma1, t) * f_m(sigma2, t)
    with z_p the per-pulse response spectrum (closed-form time integrals) and
    f_m the x2 factor of _fm_table.  t = 0 returns the zero field.
    """
    if coeffs.orders != (params.N, params.M):
        raise ValueError("coefficient orders do not match params")
    if t < 0 or t > params.T:
        raise ValueError(f"response time t={t:g} outside [0, {params.T:g}]")
    if t == 0:
        return SpectralField(grid, np.zeros((grid.n1, grid.n2), dtype=complex), 0.0)
    sig1 = grid.sigma1()
    z_rows = [z_response(p, params.l, t, sig1) for p in range(params.N + 1)]
    f_rows = _fm_table(params, grid.sigma2(), t)
    values = np.zeros((grid.n1, grid.n2), dtype=complex)
    # p-major, m-minor accumulation order, fixed for reproducibility.
    for p in range(params.N + 1):
        for m in range(params.M + 1):
            g = coeffs.g_pm[p, m]
            if g != 0.0:
                values += g * np.outer(z_rows[p], f_rows[m])
    values *= -math.sqrt(math.pi / 2.0)
    return SpectralField(grid, values, t)


# ---------------------------------------------------------------------------
# Admissibility and the error budget
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AdmissibilityReport:
    """Per-x2 supremum profile of |u| over time and its aggregates."""

    x2: np.ndarray
    sup_profile: np.ndarray
    sup_abs: float
    sup_l2: float


def admissibility_profile(
    control: SynthesizedControl, xi_samples: int, x2=None
) -> AdmissibilityReport:
    """Profile g(x2) = sup_xi |u(x2, xi)| sampled over a pulse-resolving grid.

    The xi grid covers every pulse subinterval with interior samples plus
    one-sided values just inside each breakpoint; outside the pulse support
    the control vanishes identically, so no samples are needed there.
    """
    pr = control.params
    required = 4 * (pr.N + 1) * pr.l
    if xi_samples < required:
        raise ValueError(
            f"xi_samples={xi_samples} cannot resolve every pulse subinterval "
            f"(need at least {required})"
        )
    if x2 is None:
        x2 = GridSpec.default().x2()
    x2 = np.asarray(x2, dtype=float)
    spacing = float(x2[1] - x2[0])

    n_sub = pr.N + 1
    per_interval = max(4, int(math.ceil(xi_samples / (n_sub * pr.l))))
    shift = 1.0 / pr.l * 1e-9
    sup = np.zeros(x2.shape)
    for j in range(min(n_sub, int(math.floor(pr.T * pr.l)) + 1)):
        a = j / pr.l + shift
        b = min((j + 1) / pr.l, pr.T) - shift
        if b <= a:
            continue
        for xi in np.linspace(a, b, per_interval):
            np.maximum(sup, np.abs(control.eval(x2, xi)), out=sup)
    sup_l2 = float(np.sqrt(np.sum(sup**2) * spacing))
    return AdmissibilityReport(x2=x2, sup_profile=sup, sup_abs=float(np.max(sup)), sup_l2=sup_l2)


@dataclass(frozen=True)
class ErrorBudget:
    """Guaranteed three-term bound on the terminal L2 miss."""

    basis_truncation_term: float
    coefficient_tail_term: float
    pulse_term: float

    def __post_init__(self):
        for name in ("basis_truncation_term", "coefficient_tail_term", "pulse_term"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @property
    def total(self) -> float:
        return self.basis_truncation_term + self.coefficient_tail_term + self.pulse_term

    def to_dict(self) -> dict:
        return {
            "basis_truncation_term": self.basis_truncation_term,
            "coefficient_tail_term": self.coefficient_tail_term,
            "pulse_term": self.pulse_term,
            "total": self.total,
        }


def _coefficient_tail_denominator(N: int) -> float:
    # 2^(2N+3) * sqrt((2N+3)!) in the log domain.
    return math.exp((2 * N + 3) * math.log(2.0) + 0.5 * math.lgamma(2 * N + 4))


def error_budget(params: ControlParams) -> ErrorBudget:
    """Terminal-error budget for the built-in benchmark target.

    For (T, Tstar) = (2, 6) the three frozen decimal constants are used; any
    other admissible pair evaluates the same chain in closed form (there the
    basis term carries the sharper exponent (M+1)/2).  Requires the pulse
    guard l >= 2*(N+2)/T.
    """
    params.require_pulse_guard()
    N, M, l = params.N, params.M, params.l
    if (params.T, params.Tstar) == FROZEN_SCALES:
        return ErrorBudget(
            basis_truncation_term=FROZEN_BASIS_CONST * 0.5 ** (M / 2.0),
            coefficient_tail_term=FROZEN_COEFF_CONST / _coefficient_tail_denominator(N),
            pulse_term=FROZEN_PULSE_CONST / l,
        )
    T, Ts = params.T, params.Tstar
    dT, S = params.delta_T, Ts + T
    growth = math.exp(Ts**2 / (Ts**2 - T**2))
    lead = (math.pi * Ts / 2.0) ** 0.25 * growth / math.sqrt(T)
    basis = lead * math.exp(-0.375) * (dT / S) ** ((M + 1) / 2.0)
    coeff = lead * math.sqrt(math.cosh(0.25) / math.e) / _coefficient_tail_denominator(N)
    pulse = (
        11.0
        * Ts**0.25
        * math.exp(0.875)
        * growth
        / (2.0 * T * math.sqrt(2.0 * math.pi) * (math.sqrt(S) - math.sqrt(dT)))
        / l
    )
    return ErrorBudget(basis, coeff, pulse)
