"""A priori solution estimates: derived constants, interval functionals,
supremum/p-variation bounds, two-solution bounds, the deterministic
comparison, the block-chain estimate and the discrete Gronwall lemma.

Every bound operation returns (empirical, bound) pairs so the verification
suites can assert empirical <= bound with explicit slack.  Block
partitions used inside bounds are the certified ones (per-block driver
seminorm <= gamma on the grid), which is the smallness condition the
estimates rest on; the first-crossing greedy count and its counting bound
are reported alongside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ParameterError, PreconditionError
from .noise import GammaEstimate
from .paths import SamplePath, certified_blocks, greedy_times, p_variation
from .solver import SemigroupConstants, YdeSystem
from .young import yl_constant

__all__ = [
    "StabilityConstants",
    "IntervalFunctionals",
    "derive_constants",
    "interval_functionals",
    "functionals_from_seminorm",
    "BoundCheck",
    "BoundReport",
    "apriori_bounds",
    "two_solution_bounds",
    "deterministic_comparison",
    "ytest_chain_bound",
    "discrete_gronwall",
]


@dataclass(frozen=True)
class StabilityConstants:
    """All scalars feeding the estimates and the stability criterion."""

    p: float
    C_A: float
    lambda_A: float
    opnorm_A: float
    C_f: float
    C_g: float
    C_g_prime: float
    L: float
    L_f: float
    lam: float
    K: float
    alpha: float
    gamma_greedy: float
    M0: float
    M1: float
    M2: float
    G_hat: float
    Gamma_p: float
    gamma_stderr: float
    f0_norm: float
    g0_norm: float
    g_sup: Optional[float]
    linear_g: bool
    dissipative: bool


def derive_constants(
    system: YdeSystem,
    semi: SemigroupConstants,
    gamma_p,
    p: float,
) -> StabilityConstants:
    """Assemble the constants pipeline from a system, its semigroup decay
    pair and a driver-moment estimate (GammaEstimate or plain float).

    With C_g = 0 the greedy budget is infinite and the noise share of M0
    is dropped by convention; a nonpositive spectral gap lam flags the
    dissipativity condition lambda_A > C_A C_f as violated.
    """
    if not 1 < p < 2:
        raise ParameterError(f"p must lie in (1, 2), got {p}")
    if isinstance(gamma_p, GammaEstimate):
        Gamma_p, gamma_stderr = gamma_p.value, gamma_p.stderr
    else:
        Gamma_p, gamma_stderr = float(gamma_p), 0.0
    if Gamma_p < 0:
        raise ParameterError("Gamma(p) must be nonnegative")
    C_A, lambda_A, opnorm_A = semi.C_A, semi.lambda_A, semi.opnorm_A
    C_f, C_g = system.C_f, system.C_g
    L = opnorm_A + C_f
    L_f = C_A * C_f
    lam = lambda_A - L_f
    K = yl_constant(p)
    alpha = math.log(1.0 + 1.0 / (K + 1.0))
    gamma_greedy = 1.0 / (2.0 * (K + 1.0) * C_g) if C_g > 0 else math.inf
    f0_norm = float(np.linalg.norm(system.f0))
    g0_norm = float(np.linalg.norm(system.g0))
    M0 = f0_norm / L + (g0_norm / ((K + 1.0) * C_g) if C_g > 0 else 0.0)
    M1 = K * C_A * math.exp(lambda_A) * (1.0 + opnorm_A)
    decay_share = C_A * (math.expm1(lam) / lam if lam != 0 else 1.0)
    M2 = max(decay_share, M1 * C_g / L + M1 / (K + 1.0), M1 * C_g) * max(f0_norm, g0_norm)
    u = 2.0 * (K + 1.0) * C_g * Gamma_p
    G_hat = C_A * (1.0 + opnorm_A) * math.exp(lambda_A + 2.0 * L) * (u**p + u)
    return StabilityConstants(
        p=float(p),
        C_A=C_A,
        lambda_A=lambda_A,
        opnorm_A=opnorm_A,
        C_f=C_f,
        C_g=C_g,
        C_g_prime=system.C_g_prime,
        L=L,
        L_f=L_f,
        lam=lam,
        K=K,
        alpha=alpha,
        gamma_greedy=gamma_greedy,
        M0=M0,
        M1=M1,
        M2=M2,
        G_hat=G_hat,
        Gamma_p=Gamma_p,
        gamma_stderr=gamma_stderr,
        f0_norm=f0_norm,
        g0_norm=g0_norm,
        g_sup=system.g_sup,
        linear_g=system.linear_g,
        dissipative=bool(lam > 0),
    )


@dataclass(frozen=True)
class IntervalFunctionals:
    """F, Lambda0, Lambda1, Lambda2, G, H of a driver seminorm on an interval."""

    seminorm: float
    length: float
    F: float
    Lambda0: float
    Lambda1: float
    Lambda2: float
    G: float
    H: float


def functionals_from_seminorm(
    seminorm: float, length: float, constants: StabilityConstants
) -> IntervalFunctionals:
    p = constants.p
    s = float(seminorm)
    bracket = 2.0 * (constants.K + 1.0) * constants.C_g
    F = math.exp(
        constants.alpha * (1.0 + (bracket * s) ** p) + 2.0 * constants.L * length
    )
    lam0 = (1.0 + (bracket * s) ** p) * F
    lam1 = (1.0 + bracket ** (p - 1.0) * s ** (p - 1.0)) * F
    lam2 = 2.0 ** ((p - 1.0) / p) * (1.0 + bracket ** (2.0 * p - 1.0) * s ** (2.0 * p - 1.0)) * F
    return IntervalFunctionals(
        seminorm=s,
        length=float(length),
        F=F,
        Lambda0=lam0,
        Lambda1=lam1,
        Lambda2=lam2,
        G=s * lam1,
        H=1.0 + s * (1.0 + lam2),
    )


def interval_functionals(
    x: SamplePath, interval, constants: StabilityConstants
) -> IntervalFunctionals:
    a, b = float(interval[0]), float(interval[1])
    s = p_variation(x, constants.p, (a, b))
    return functionals_from_seminorm(s, b - a, constants)


@dataclass(frozen=True)
class BoundCheck:
    name: str
    empirical: float
    bound: float

    @property
    def slack(self) -> float:
        return self.bound - self.empirical

    @property
    def ok(self) -> bool:
        return self.empirical <= self.bound * (1.0 + 1e-9) + 1e-12


@dataclass(frozen=True)
class BoundReport:
    interval: tuple
    n_blocks: int
    n_greedy: int
    nest_bound: float
    x_seminorm: float
    resolved: bool
    checks: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def check(self, name: str) -> BoundCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def _block_partition(x: SamplePath, constants: StabilityConstants, a: float, b: float):
    """Certified blocks at the canonical budget, plus the greedy count and
    its counting bound for reporting."""
    gamma = constants.gamma_greedy
    s_x = p_variation(x, constants.p, (a, b))
    if not math.isfinite(gamma):
        return np.array([a, b]), True, 1, 1.0, s_x
    taus, resolved = certified_blocks(x, constants.p, gamma, (a, b))
    part = greedy_times(x, constants.p, gamma, (a, b))
    nest = 1.0 + (s_x / gamma) ** constants.p
    return taus, resolved, part.count, nest, s_x


def apriori_bounds(
    y: SamplePath, x: SamplePath, constants: StabilityConstants, interval
) -> BoundReport:
    """Supremum and p-variation bounds for a solution on [a, b].

    Evaluates the exponential-in-N bounds on the certified block count
    (every block seminorm <= gamma on the grid) together with the
    empirical norms of the trajectory.  Requires C_g > 0 or g(0) = 0: the
    greedy budget does not control purely additive noise.
    """
    a, b = float(interval[0]), float(interval[1])
    if constants.C_g == 0 and constants.g0_norm > 0:
        raise PreconditionError(
            "additive noise with C_g = 0 is outside the greedy-budget estimates"
        )
    taus, resolved, n_greedy, nest, s_x = _block_partition(x, constants, a, b)
    N = len(taus) - 1
    sub = y.restrict(a, b)
    norms = np.linalg.norm(sub.values, axis=1)
    ya = float(norms[0])
    sup_emp = float(np.max(norms))
    pvar_emp = ya + p_variation(y, constants.p, (a, b))
    span = b - a
    p = constants.p
    grow = math.exp(constants.alpha * N + 2.0 * constants.L * span)
    base = (ya + constants.M0 * N) * grow
    checks = [
        BoundCheck("estx", sup_emp, base),
        BoundCheck("estx2", pvar_emp, base * N ** ((p - 1.0) / p)),
    ]
    share = constants.f0_norm / constants.L
    yq = (
        (ya + max(share, 2.0 * constants.g0_norm) * (1.0 + s_x) * N)
        * grow
        * N ** ((p - 1.0) / p)
    )
    checks.append(BoundCheck("yqvar", pvar_emp, yq))
    if constants.g_sup is not None:
        ey = (
            (ya + max(share, 2.0 * constants.g_sup) * (1.0 + s_x) * N)
            * math.exp(2.0 * constants.L * span)
            * N ** ((p - 1.0) / p)
        )
        checks.append(BoundCheck("esty2", pvar_emp, ey))
    return BoundReport(
        interval=(a, b),
        n_blocks=N,
        n_greedy=n_greedy,
        nest_bound=nest,
        x_seminorm=s_x,
        resolved=resolved,
        checks=checks,
    )


def two_solution_bounds(
    y1: SamplePath, y2: SamplePath, x: SamplePath, constants: StabilityConstants, interval
) -> BoundReport:
    """Difference bounds for two solutions driven by the same path.

    The general bound uses the counting estimate N' built from the driver
    seminorm and the first solution's p-variation; the linear-g case adds
    the sharper exponential bound on the certified block count.
    """
    if len(y1.times) != len(y2.times) or np.max(np.abs(y1.times - y2.times)) > 1e-12:
        raise ParameterError("two-solution bounds require a common trajectory grid")
    a, b = float(interval[0]), float(interval[1])
    taus, resolved, n_greedy, nest, s_x = _block_partition(x, constants, a, b)
    N = len(taus) - 1
    z = SamplePath(y1.times, y2.values - y1.values)
    za = float(np.linalg.norm(z.at(a)))
    z_emp = za + p_variation(z, constants.p, (a, b))
    p = constants.p
    span = b - a
    s_y1 = p_variation(y1, p, (a, b))
    cg = max(constants.C_g, constants.C_g_prime)
    n_prime = 1.0 + (2.0 * (constants.K + 1.0) * cg) ** p * s_x**p * (1.0 + s_y1) ** p
    z_gen = (
        za * n_prime ** ((p - 1.0) / p) * 2.0**n_prime * math.exp(2.0 * constants.L * span)
    )
    checks = [BoundCheck("z.gen", z_emp, z_gen)]
    if constants.linear_g:
        z_lin = za * math.exp(constants.alpha * N + 2.0 * constants.L * span)
        checks.append(BoundCheck("z.lin", z_emp, z_lin))
    return BoundReport(
        interval=(a, b),
        n_blocks=N,
        n_greedy=n_greedy,
        nest_bound=nest,
        x_seminorm=s_x,
        resolved=resolved,
        checks=checks,
    )


@dataclass(frozen=True)
class ComparisonReport:
    """Distance of the solution to the noise-free flow started at the same
    point, with the scale-free ratio statistics of the structural bounds
    (their absolute constant is generic, so only ratios are reported)."""

    h_inf: float
    h_pvar: float
    ratio_inf: float
    ratio_pvar: float
    x_seminorm: float
    n_blocks: int
    y_a_norm: float


def deterministic_comparison(
    y: SamplePath, x: SamplePath, system: YdeSystem, constants: StabilityConstants, interval
) -> ComparisonReport:
    """Compare the solution with mu' = A mu + f(mu), mu_a = y_a.

    Requires bounded g.  The comparison flow is integrated by a
    high-accuracy adaptive RK45 on the trajectory grid; h = y - mu is
    reported in supremum and p-variation norms together with the ratio
    statistics normalized by (||y_a||^{1/p} + 1), the driver seminorm and
    the block count.
    """
    if constants.g_sup is None:
        raise PreconditionError("deterministic comparison requires bounded g")
    a, b = float(interval[0]), float(interval[1])
    sub = y.restrict(a, b)
    ya = np.asarray(sub.values[0], dtype=float)
    sol = solve_ivp(
        lambda t, u: system.A @ u + system.drift.fn(u),
        (a, b),
        ya,
        t_eval=sub.times,
        rtol=1e-10,
        atol=1e-12,
        method="RK45",
    )
    if not sol.success:
        raise PreconditionError(f"comparison flow integration failed: {sol.message}")
    mu_vals = sol.y.T
    h = SamplePath(sub.times, sub.values - mu_vals)
    h_inf = float(np.max(np.linalg.norm(h.values, axis=1)))
    h_pvar = float(np.linalg.norm(h.values[0])) + p_variation(h, constants.p, (a, b))
    taus, _, _, _, s_x = _block_partition(x, constants, a, b)
    N = len(taus) - 1
    p = constants.p
    ya_norm = float(np.linalg.norm(ya))
    scale = (ya_norm ** (1.0 / p) + 1.0) * max(s_x, 1e-300)
    return ComparisonReport(
        h_inf=h_inf,
        h_pvar=h_pvar,
        ratio_inf=h_inf / (scale * N),
        ratio_pvar=h_pvar / (scale * N ** ((2.0 * p - 1.0) / p)),
        x_seminorm=s_x,
        n_blocks=N,
        y_a_norm=ya_norm,
    )


def ytest_chain_bound(
    y: SamplePath, x: SamplePath, constants: StabilityConstants, n: int
):
    """Both sides of the weighted block-chain estimate on [0, n+1].

    lhs_k = ||y_k|| e^{lam k}; rhs_k assembles the drift share and the
    noise sum over unit blocks [j, j+1] from the empirical per-block
    p-variation data of x and y.  Returns (lhs, rhs, dissipative flag);
    the bound is evaluated even when lam <= 0 (flag False).
    """
    if n < 0:
        raise ParameterError("n must be nonnegative")
    if not (y.covers(0.0, n + 1.0) and x.covers(0.0, n + 1.0)):
        raise ParameterError(f"paths must cover [0, {n + 1}]")
    p = constants.p
    lam = constants.lam
    y0_norm = float(np.linalg.norm(y.at(0.0)))
    block_terms = np.empty(n + 1)
    for k in range(n + 1):
        s_x = p_variation(x, p, (k, k + 1.0))
        y_norm_block = float(np.linalg.norm(y.at(float(k)))) + p_variation(y, p, (k, k + 1.0))
        block_terms[k] = (
            constants.M1
            * s_x
            * math.exp(lam * k)
            * (constants.C_g * y_norm_block + constants.g0_norm)
        )
    ks = np.arange(n + 1, dtype=float)
    drift = constants.C_A * constants.f0_norm * (
        np.expm1(lam * ks) / lam if lam != 0 else ks
    )
    noise = np.concatenate([[0.0], np.cumsum(block_terms)[:-1]])
    rhs = constants.C_A * y0_norm + drift + noise
    lhs = np.array(
        [float(np.linalg.norm(y.at(float(k)))) * math.exp(lam * k) for k in range(n + 1)]
    )
    return lhs, rhs, constants.dissipative


def discrete_gronwall(a: float, u0: float, alphas, betas) -> np.ndarray:
    """Majorant T_n = max{a, u0} prod (1+alpha_k) + sum beta_k prod_{j>k}
    (1+alpha_j) for n = 1..len, dominating any nonnegative sequence with
    u_n <= a + sum alpha_k u_k + sum beta_k."""
    alphas = np.asarray(alphas, dtype=float)
    betas = np.asarray(betas, dtype=float)
    if alphas.shape != betas.shape or alphas.ndim != 1 or len(alphas) == 0:
        raise ParameterError("alphas and betas must be equal-length non-empty sequences")
    if a < 0 or u0 < 0 or np.any(alphas < 0) or np.any(betas < 0):
        raise ParameterError("discrete Gronwall inputs must be nonnegative")
    out = np.empty(len(alphas))
    t = max(a, u0)
    for k in range(len(alphas)):
        t = t * (1.0 + alphas[k]) + betas[k]
        out[k] = t
    return out
