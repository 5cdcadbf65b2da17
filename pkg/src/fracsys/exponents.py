"""Exponent calculus and existence-regime classification for the coupled
fractional system

    du_i/dt = rho_i t^(rho_i - 1) Delta_{alpha_i} u_i + t^(sigma_i) u_j^(beta_i),

i in {1, 2}, j = 3 - i.  From the eight constants and the dimension this
module derives the admissible window for the auxiliary parameter Delta, the
initial-data and solution integrability orders (r_i, s_i), the decay rate
xi_i of t^(xi_i) ||u_i(t)||_{s_i}, the kernel singularity exponents delta_i,
the essential-boundedness caps (k_hat), and the self-similar-envelope rates
(theta), and classifies the parameter set into a global-existence regime.

All arithmetic runs over exact rationals (every input float is taken at its
exact binary value), so the internal consistency identities hold to machine
precision by construction; near-cancelling combinations at window edges
lose nothing.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

__all__ = [
    "SystemParams", "Window", "WindowInfo", "NormExponents",
    "AdmissibilityCheck", "ExponentReport",
    "REGIME_SMALL_DATA", "REGIME_SMALL_DATA_BOUNDED",
    "REGIME_SELF_SIMILAR", "REGIME_NO_GUARANTEE",
    "compute_window", "derive_norm_exponents", "check_admissibility",
    "compute_k_hat", "theorem3_check", "classify",
    "eta_theta_residuals", "DeltaOutsideWindow", "InadmissibleParams",
]

REGIME_SMALL_DATA = "GlobalSmallData"
REGIME_SMALL_DATA_BOUNDED = "GlobalSmallDataBounded"
REGIME_SELF_SIMILAR = "Theorem3SelfSimilar"
REGIME_NO_GUARANTEE = "NoGuarantee"


class DeltaOutsideWindow(ValueError):
    """Requested Delta does not lie strictly inside the admissible window."""


class InadmissibleParams(ValueError):
    """Parameter/Delta combination yields a nonpositive norm-order denominator."""


@dataclass(frozen=True)
class SystemParams:
    """The eight PDE constants (alpha_i, beta_i, rho_i, sigma_i) plus dimension."""

    alpha: tuple
    beta: tuple
    rho: tuple
    sigma: tuple
    dim: int

    def __post_init__(self):
        for name, pair in (("alpha", self.alpha), ("beta", self.beta),
                           ("rho", self.rho), ("sigma", self.sigma)):
            if len(pair) != 2:
                raise ValueError(f"{name} must be a pair")
        for a in self.alpha:
            if not 0.0 < a <= 2.0:
                raise ValueError(f"alpha must lie in (0, 2], got {a}")
        for b in self.beta:
            if not b > 1.0:
                raise ValueError(f"beta must exceed 1, got {b}")
        for r in self.rho:
            if not r > 0.0:
                raise ValueError(f"rho must be positive, got {r}")
        for s in self.sigma:
            if not s > -1.0:
                raise ValueError(f"sigma must exceed -1, got {s}")
        if self.dim < 1 or self.dim != int(self.dim):
            raise ValueError(f"dim must be a positive integer, got {self.dim}")

    @property
    def a_index(self) -> int:
        """Index (1 or 2) of the smaller stability index; ties go to 1."""
        return 1 if self.alpha[0] <= self.alpha[1] else 2

    def swapped(self) -> "SystemParams":
        """The same system with the component labels exchanged."""
        return SystemParams(self.alpha[::-1], self.beta[::-1],
                            self.rho[::-1], self.sigma[::-1], self.dim)


@dataclass(frozen=True)
class Window:
    """Open interval (lo, hi); empty when lo >= hi."""

    lo: float
    hi: float

    @property
    def empty(self) -> bool:
        return not self.lo < self.hi

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x: float) -> bool:
        return self.lo < x < self.hi


@dataclass(frozen=True)
class WindowInfo:
    x_tilde: tuple
    rho_tilde: tuple
    k_tilde: tuple
    window: Window


@dataclass(frozen=True)
class NormExponents:
    r: tuple
    s: tuple
    xi: tuple
    delta_small: tuple


@dataclass(frozen=True)
class AdmissibilityCheck:
    name: str
    role_i: int            # which component plays the first role (1 or 2)
    satisfied: bool
    margin: float


class _Calc:
    """Exact-rational evaluation of every derived exponent.

    Index convention: arrays are 0-based internally, i and j = 1 - i label
    the two components.
    """

    def __init__(self, params: SystemParams):
        self.p = params
        self.al = [Fraction(float(a)) for a in params.alpha]
        self.be = [Fraction(float(b)) for b in params.beta]
        self.ro = [Fraction(float(r)) for r in params.rho]
        self.si = [Fraction(float(s)) for s in params.sigma]
        self.d = Fraction(int(params.dim))
        self.bb1 = self.be[0] * self.be[1] - 1   # beta_i beta_j - 1 > 0

    def x_tilde(self, i):
        j = 1 - i
        return (1 + self.be[i] + self.si[i] * (1 - self.be[i] * self.be[j])) \
            / (self.be[i] * (1 + self.be[j]))

    def rho_tilde(self, i):
        return self.ro[i] - self.si[i]

    def k_tilde(self, i):
        j = 1 - i
        num = self.d * self.ro[i] * self.ro[j] * self.bb1 \
            - (self.al[j] * self.ro[i] * self.si[j]
               + self.al[i] * self.be[j] * self.ro[j] * self.si[i]) * self.be[i]
        den = self.be[i] * (self.al[j] * self.ro[i] + self.al[i] * self.be[j] * self.ro[j])
        return num / den

    def k_hat(self, i):
        j = 1 - i
        num = (self.al[i] / self.d) * (self.d * self.ro[i] * self.ro[j] * self.bb1) \
            - (self.al[j] * self.ro[i] * self.si[j]
               + self.al[i] * self.be[j] * self.ro[j] * self.si[i]) * self.be[i]
        den = self.be[i] * (self.al[j] * self.ro[i] + self.al[i] * self.be[j] * self.ro[j])
        return num / den

    def window_bounds(self):
        lo = max(self.x_tilde(0), self.x_tilde(1))
        hi = min(Fraction(1), self.rho_tilde(0), self.rho_tilde(1),
                 max(self.k_tilde(0), self.k_tilde(1)))
        return lo, hi

    def bounded_window_bounds(self):
        lo = max(self.x_tilde(0), self.x_tilde(1))
        hi = min(Fraction(1), self.rho_tilde(0), self.rho_tilde(1),
                 max(min(self.k_tilde(0), self.k_hat(0)),
                     min(self.k_tilde(1), self.k_hat(1))))
        return lo, hi

    def r_denominator(self, i, delta):
        j = 1 - i
        return self.al[i] * self.ro[j] * (1 + self.be[i]) \
            + self.al[i] * self.ro[j] * self.si[i] \
            + self.be[i] * self.al[j] * self.ro[i] * self.si[j] \
            + self.be[i] * (self.al[j] * self.ro[i] - self.al[i] * self.ro[j]) * delta

    def s_denominator(self, i, delta):
        j = 1 - i
        return self.al[i] * self.ro[j] * self.si[i] \
            + self.be[i] * self.al[j] * self.ro[i] * self.si[j] \
            + (self.al[i] * self.ro[j] + self.be[i] * self.al[j] * self.ro[i]) * delta

    def norm_numerator(self, i):
        j = 1 - i
        return self.d * self.ro[i] * self.ro[j] * self.bb1

    def r_value(self, i, delta):
        den = self.r_denominator(i, delta)
        if den <= 0:
            raise InadmissibleParams(
                f"r_{i + 1} denominator {float(den):.6g} is nonpositive at delta={float(delta):.17g}")
        return self.norm_numerator(i) / den

    def s_value(self, i, delta):
        den = self.s_denominator(i, delta)
        if den <= 0:
            raise InadmissibleParams(
                f"s_{i + 1} denominator {float(den):.6g} is nonpositive at delta={float(delta):.17g}")
        return self.norm_numerator(i) / den

    def xi_value(self, i, delta):
        # printed form; reduces to (1 - delta)(1 + beta_i)/(beta_i beta_j - 1)
        j = 1 - i
        num = self.al[i] * self.ro[j] - delta * self.al[i] * self.ro[j] \
            + self.al[i] * self.be[i] * self.ro[j] - delta * self.al[i] * self.be[i] * self.ro[j]
        return num / (self.al[i] * self.ro[j] * self.bb1)

    def delta_small_value(self, i, delta):
        j = 1 - i
        return (self.d / self.al[i]) * (self.be[i] / self.s_value(j, delta) - 1 / self.s_value(i, delta))

    def r_lower_bound_interval(self, lo, hi):
        """Intersect (lo, hi) with {delta : r_1 >= 1 and r_2 >= 1}.

        Each constraint is linear in delta with positive denominator inside
        the window, so the intersection stays an interval.  The local-existence
        argument needs integrability orders >= 1; the printed window alone
        does not always provide that.
        """
        for i in (0, 1):
            j = 1 - i
            # numerator - denominator >= 0, affine in delta
            coef = -self.be[i] * (self.al[j] * self.ro[i] - self.al[i] * self.ro[j])
            const = self.norm_numerator(i) - self.r_denominator(i, Fraction(0))
            if coef == 0:
                if const < 0:
                    return lo, lo  # empty
            elif coef > 0:
                lo = max(lo, -const / coef)
            else:
                hi = min(hi, -const / coef)
        return lo, hi

    def theta3(self, i):
        j = 1 - i
        return (1 + self.si[i] + self.be[i] * (1 + self.si[j])) / self.bb1

    def theorem3_applicable(self):
        if self.al[0] != self.al[1] or self.ro[0] != self.ro[1] or self.ro[0] > 1:
            return False
        lhs = (1 + max(self.si[0] + self.be[0] * (1 + self.si[1]),
                       self.si[1] + self.be[1] * (1 + self.si[0]))) / self.bb1
        return lhs < self.d * self.ro[0] / self.al[0]


def _pair(fn) -> tuple:
    return (float(fn(0)), float(fn(1)))


def compute_window(params: SystemParams) -> WindowInfo:
    """All Theorem-level exponent pairs and the open admissibility window
    for Delta.  The window may be empty; that is a valid answer."""
    c = _Calc(params)
    lo, hi = c.window_bounds()
    return WindowInfo(
        x_tilde=_pair(c.x_tilde),
        rho_tilde=_pair(c.rho_tilde),
        k_tilde=_pair(c.k_tilde),
        window=Window(float(lo), float(hi)),
    )


def derive_norm_exponents(params: SystemParams, delta: float) -> NormExponents:
    """Integrability orders r_i, s_i, decay rates xi_i and kernel exponents
    delta_i for a Delta strictly inside the admissibility window.

    Raises :class:`DeltaOutsideWindow` for Delta outside, and
    :class:`InadmissibleParams` if a norm-order denominator is nonpositive.
    """
    c = _Calc(params)
    lo, hi = c.window_bounds()
    dlt = Fraction(float(delta))
    if not lo < dlt < hi:
        raise DeltaOutsideWindow(
            f"delta={delta!r} outside the admissible window ({float(lo):.17g}, {float(hi):.17g})")
    return NormExponents(
        r=(float(c.r_value(0, dlt)), float(c.r_value(1, dlt))),
        s=(float(c.s_value(0, dlt)), float(c.s_value(1, dlt))),
        xi=(float(c.xi_value(0, dlt)), float(c.xi_value(1, dlt))),
        delta_small=(float(c.delta_small_value(0, dlt)), float(c.delta_small_value(1, dlt))),
    )


def check_admissibility(params: SystemParams, r: tuple, s: tuple) -> list:
    """Evaluate the fixed-point and local-existence inequalities with their
    margins, under both role assignments (i, j) = (1, 2) and (2, 1)."""
    out = []
    d = float(params.dim)
    for i in (0, 1):
        j = 1 - i
        bi, bj = params.beta[i], params.beta[j]
        ai = params.alpha[i]
        checks = [
            (f"s_{i + 1} >= r_{i + 1}", s[i] - r[i], False),
            (f"s_{j + 1} >= beta_{i + 1}", s[j] - bi, False),
            (f"s_{i + 1}*beta_{i + 1} >= s_{j + 1}", s[i] * bi - s[j], False),
            (f"beta_{i + 1}/s_{j + 1} - 1/s_{i + 1} < alpha_{i + 1}/d",
             ai / d - (bi / s[j] - 1.0 / s[i]), True),
            (f"s_{j + 1} >= r_{j + 1}", s[j] - r[j], False),
            (f"s_{j + 1}*beta_{j + 1} >= r_{i + 1}", s[j] * bj - r[i], False),
            (f"r_{i + 1} >= 1", r[i] - 1.0, False),
            (f"r_{j + 1} >= 1", r[j] - 1.0, False),
        ]
        for name, margin, strict in checks:
            satisfied = margin > 0.0 if strict else margin >= 0.0
            out.append(AdmissibilityCheck(name=name, role_i=i + 1,
                                          satisfied=satisfied, margin=margin))
    return out


def compute_k_hat(params: SystemParams):
    """Essential-boundedness caps k_hat and the tightened window whose
    nonemptiness upgrades the regime to essentially bounded solutions."""
    c = _Calc(params)
    lo, hi = c.bounded_window_bounds()
    return _pair(c.k_hat), Window(float(lo), float(hi))


def theorem3_check(params: SystemParams):
    """Gate and rates for the self-similar envelope bound: requires equal
    stability indices, equal time exponents with rho <= 1, and the strict
    rate inequality.  The theta pair is returned either way."""
    c = _Calc(params)
    return c.theorem3_applicable(), _pair(c.theta3)


def eta_theta_residuals(params: SystemParams, delta: float,
                        xi: tuple, delta_small: tuple) -> tuple:
    """The two window-derivation combinations

        eta_i   = xi_i + sigma_i - beta_i xi_j - delta_i rho_i + 1
        theta_i = sigma_i + [sigma_j - beta_j xi_i - delta_j rho_j + 1] beta_i
                  - delta_i rho_i + xi_i + 1

    evaluated in plain floats from already-derived xi and delta_small; both
    vanish identically when the norm orders are consistent.
    """
    eta = []
    theta = []
    for i in (0, 1):
        j = 1 - i
        si, sj = params.sigma[i], params.sigma[j]
        bi, bj = params.beta[i], params.beta[j]
        ri, rj = params.rho[i], params.rho[j]
        eta.append(xi[i] + si - bi * xi[j] - delta_small[i] * ri + 1.0)
        theta.append(si + (sj - bj * xi[i] - delta_small[j] * rj + 1.0) * bi
                     - delta_small[i] * ri + xi[i] + 1.0)
    return tuple(eta), tuple(theta)


@dataclass(frozen=True)
class ExponentReport:
    """Every derived exponent plus the regime verdict for one parameter set."""

    a_index: int
    x_tilde: tuple
    rho_tilde: tuple
    k_tilde: tuple
    k_hat: tuple
    window: Window
    window_bounded: Window
    delta: Optional[float]
    r: Optional[tuple]
    s: Optional[tuple]
    xi: Optional[tuple]
    delta_small: Optional[tuple]
    theta3: tuple
    theorem3_applicable: bool
    regime: str
    role_i: Optional[int]          # role assignment whose admissibility holds
    admissibility: tuple

    def flat_items(self) -> list:
        """Key/value pairs for the text and CSV serializations."""
        def p(v):
            return "" if v is None else f"{v:.17g}"

        items = [
            ("regime", self.regime),
            ("a_index", str(self.a_index)),
            ("window_lo", p(self.window.lo)), ("window_hi", p(self.window.hi)),
            ("window_bounded_lo", p(self.window_bounded.lo)),
            ("window_bounded_hi", p(self.window_bounded.hi)),
            ("delta", p(self.delta)),
            ("theorem3_applicable", str(self.theorem3_applicable).lower()),
            ("role_i", "" if self.role_i is None else str(self.role_i)),
        ]
        for name, pair in (("x_tilde", self.x_tilde), ("rho_tilde", self.rho_tilde),
                           ("k_tilde", self.k_tilde), ("k_hat", self.k_hat),
                           ("r", self.r), ("s", self.s), ("xi", self.xi),
                           ("delta_small", self.delta_small), ("theta3", self.theta3)):
            for idx in (0, 1):
                items.append((f"{name}_{idx + 1}", p(None if pair is None else pair[idx])))
        return items


def _choose_role(params: SystemParams, r: tuple, s: tuple) -> Optional[int]:
    checks = check_admissibility(params, r, s)
    for role in (1, 2):
        if all(c.satisfied for c in checks if c.role_i == role):
            return role
    return None


def classify(params: SystemParams, delta: Optional[float] = None) -> ExponentReport:
    """Assemble the full exponent report and the existence-regime verdict.

    Regime is ``GlobalSmallDataBounded`` when the tightened window admits a
    Delta with integrability orders >= 1, else ``GlobalSmallData`` when the
    main window does, else ``Theorem3SelfSimilar`` when only the self-similar
    envelope hypothesis holds, else ``NoGuarantee``.  The default Delta is
    the midpoint of the applicable (refined) window; a user-supplied Delta
    must lie strictly inside the main window.
    """
    c = _Calc(params)
    lo, hi = c.window_bounds()
    blo, bhi = c.bounded_window_bounds()
    rlo, rhi = c.r_lower_bound_interval(lo, hi)
    rblo, rbhi = c.r_lower_bound_interval(blo, bhi)
    t3_ok = c.theorem3_applicable()

    if rblo < rbhi:
        regime = REGIME_SMALL_DATA_BOUNDED
        dlt = (rblo + rbhi) / 2
    elif rlo < rhi:
        regime = REGIME_SMALL_DATA
        dlt = (rlo + rhi) / 2
    elif t3_ok:
        regime = REGIME_SELF_SIMILAR
        dlt = None
    else:
        regime = REGIME_NO_GUARANTEE
        dlt = None

    if delta is not None:
        given = Fraction(float(delta))
        if not lo < given < hi:
            raise DeltaOutsideWindow(
                f"delta={delta!r} outside the admissible window ({float(lo):.17g}, {float(hi):.17g})")
        dlt = given

    r = s = xi = dsm = None
    role = None
    admissibility = ()
    if dlt is not None:
        r = (float(c.r_value(0, dlt)), float(c.r_value(1, dlt)))
        s = (float(c.s_value(0, dlt)), float(c.s_value(1, dlt)))
        xi = (float(c.xi_value(0, dlt)), float(c.xi_value(1, dlt)))
        dsm = (float(c.delta_small_value(0, dlt)), float(c.delta_small_value(1, dlt)))
        admissibility = tuple(check_admissibility(params, r, s))
        role = _choose_role(params, r, s)

    return ExponentReport(
        a_index=params.a_index,
        x_tilde=_pair(c.x_tilde),
        rho_tilde=_pair(c.rho_tilde),
        k_tilde=_pair(c.k_tilde),
        k_hat=_pair(c.k_hat),
        window=Window(float(lo), float(hi)),
        window_bounded=Window(float(blo), float(bhi)),
        delta=None if dlt is None else float(dlt),
        r=r, s=s, xi=xi, delta_small=dsm,
        theta3=_pair(c.theta3),
        theorem3_applicable=t3_ok,
        regime=regime,
        role_i=role,
        admissibility=admissibility,
    )
