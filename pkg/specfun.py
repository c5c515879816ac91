"""
HDHN 폐형식에 쓰는 특수함수.

처리량 식에 필요한 경우만 다룬다. 실수 z < 1 의 2F1(1, b; c; z), 주로 음수인 s > -1 의
Gamma(s, x), erfcx, 그리고 이를 바탕으로 한 적분 I0 / I1.
모든 함수는 순수 함수이며 EvalResult (값, 절대 오차 한계) 를 반환한다.
"""
import math
import logging
from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.integrate import quad

from errors import DomainError, ConvergenceError

logger = logging.getLogger(__name__)

MAX_TERMS = 100_000
SERIES_TOL = 1e-16
EPS = np.finfo(float).eps

# c-1-b 가 정수에 이만큼 가까우면 선형 변환 대신 Euler 적분 사용
DEGENERATE_GAP = 1e-6


@dataclass(frozen=True)
class EvalResult:
    value: float
    abs_error_bound: float

    def __float__(self):
        return float(self.value)


def _require_finite(**args):
    for name, v in args.items():
        if not math.isfinite(v):
            raise DomainError(f"{name} must be finite, got {v}")


def _series_one(b, c, z):
    """Direct series of 2F1(1, b; c; z); intended for |z| <= 0.5."""
    term = 1.0
    total = 1.0
    abs_sum = 1.0
    for n in range(MAX_TERMS):
        term *= (b + n) / (c + n) * z
        total += term
        abs_sum += abs(term)
        # 다음 항 비율이 1보다 작아야 꼬리 합을 기하급수로 묶을 수 있음
        q = abs((b + n + 1) / (c + n + 1) * z)
        if q < 1.0 and abs(term) <= SERIES_TOL * abs(total):
            tail = abs(term) * q / (1.0 - q)
            return total, tail + 4 * (n + 2) * EPS * abs_sum
    raise ConvergenceError(
        f"2F1(1,{b};{c};{z}) series did not converge in {MAX_TERMS} terms"
    )


def _euler_integral_one(b, c, z):
    """(c-1) * int_0^1 (1-t)^(c-2) (1-zt)^(-b) dt, valid for c > 1."""
    if c <= 1.0:
        raise ConvergenceError(
            f"2F1(1,{b};{c};{z}): degenerate transform and c <= 1, no fallback"
        )
    value, err = quad(lambda t: (1.0 - z * t) ** (-b), 0.0, 1.0,
                      weight='alg', wvar=(0.0, c - 2.0),
                      epsabs=1e-14, epsrel=1e-12, limit=200)
    return (c - 1.0) * value, (c - 1.0) * err


def _hyp2f1_one(b, c, z):
    if abs(z) <= 0.5:
        return _series_one(b, c, z)

    if z < -0.5:
        # Pfaff: F(1,b;c;z) = (1-z)^-1 F(1,c-b;c;z/(z-1))
        w = z / (z - 1.0)
        value, err = _hyp2f1_one(c - b, c, w)
        return value / (1.0 - z), err / (1.0 - z)

    # 0.5 < z < 1: 1-z 쪽으로 선형 변환
    gap = c - 1.0 - b
    if abs(gap - round(gap)) < DEGENERATE_GAP:
        logger.warning(f"⚠️ 2F1(1,{b:.6g};{c:.6g};{z:.6g}) 퇴화 파라미터 - Euler 적분으로 계산")
        return _euler_integral_one(b, c, z)

    w = 1.0 - z
    first, first_err = _series_one(b, b + 2.0 - c, w)
    coef1 = (c - 1.0) / gap
    coef2 = (special.gamma(c) * special.gamma(1.0 + b - c) * special.rgamma(b)
             * w ** gap * z ** (1.0 - c))
    value = coef1 * first + coef2
    err = abs(coef1) * first_err + 8 * EPS * (abs(coef1 * first) + abs(coef2))
    return value, err


def hyp2f1_one(b, c, z):
    """Gauss hypergeometric 2F1(1, b; c; z) for real z < 1."""
    _require_finite(b=b, c=c, z=z)
    if z >= 1.0:
        raise DomainError(f"2F1(1,b;c;z) needs z < 1, got z={z}")
    if c <= 0 and float(c).is_integer():
        raise DomainError(f"2F1 undefined for non-positive integer c={c}")
    if z == 0.0:
        return EvalResult(1.0, 0.0)
    value, err = _hyp2f1_one(float(b), float(c), float(z))
    if not math.isfinite(value):
        raise ConvergenceError(f"2F1(1,{b};{c};{z}) evaluated to {value}")
    return EvalResult(value, err)


def _gamma_positive(s, x):
    if x == 0.0:
        return special.gamma(s)
    return special.gammaincc(s, x) * special.gamma(s)


def upper_inc_gamma(s, x):
    """상부 불완전 감마 Gamma(s, x). 음수 s 는 하향 점화식으로"""
    _require_finite(s=s, x=x)
    if x < 0:
        raise DomainError(f"Gamma(s, x) needs x >= 0, got x={x}")
    if s > 0:
        value = _gamma_positive(s, x)
        return EvalResult(value, 4 * EPS * abs(value))
    if x == 0.0:
        raise DomainError(f"Gamma({s}, 0) diverges for s <= 0")

    # s+n > 0 (또는 s+n == 0) 에서 시작해서 아래로 내려감
    n = math.ceil(-s)
    start = s + n
    if start == 0.0:
        g = special.exp1(x)
    else:
        g = _gamma_positive(start, x)
    err = 4 * EPS * abs(g)
    ex = math.exp(-x)
    for k in range(n, 0, -1):
        t = s + k - 1
        corr = x ** t * ex
        g = (g - corr) / t
        err = (err + 4 * EPS * (abs(g * t) + abs(corr))) / abs(t)
    return EvalResult(g, err)


def erfcx(x):
    """Scaled complementary error function exp(x^2) * erfc(x) for x >= 0."""
    _require_finite(x=x)
    if x < 0:
        raise DomainError(f"erfcx is only used for x >= 0, got {x}")
    value = float(special.erfcx(x))
    return EvalResult(value, 2 * EPS * value)


def integral_i1(x, y, z, nu):
    """
    I1(x, y, z, nu) = int_0^inf t^(x-1) e^(-y t) Gamma(z, nu t) dt

    closed form: nu^z Gamma(x+z) / (x (y+nu)^(x+z)) * 2F1(1, x+z; x+1; y/(y+nu))
    """
    _require_finite(x=x, y=y, z=z, nu=nu)
    if not (x > 0 and y > 0 and nu > 0 and x + z > 0):
        raise DomainError(
            f"I1 needs x > 0, y > 0, nu > 0, x+z > 0; got x={x}, y={y}, z={z}, nu={nu}"
        )
    a = x + z
    f = hyp2f1_one(a, x + 1.0, y / (y + nu))
    log_pref = z * math.log(nu) + special.gammaln(a) - math.log(x) - a * math.log(y + nu)
    pref = math.exp(log_pref)
    value = pref * f.value
    return EvalResult(value, pref * f.abs_error_bound + 8 * EPS * abs(value))


def integral_i1_quadrature(x, y, z, nu):
    """t = e^v 로 치환해 I1 정의식을 직접 적분 (검증용)"""
    if not (x > 0 and y > 0 and nu > 0 and x + z > 0):
        raise DomainError(f"I1 oracle: invalid arguments x={x}, y={y}, z={z}, nu={nu}")

    def integrand(v):
        if abs(v) > 690.0:
            return 0.0
        t = math.exp(v)
        if nu * t == 0.0:
            return 0.0
        g = upper_inc_gamma(z, nu * t).value
        return math.exp(x * v - y * t) * g

    # 피크 근처에서 분할해서 적분
    v0 = -math.log(y + nu)
    left, e1 = quad(integrand, -math.inf, v0, epsabs=0.0, epsrel=1e-11, limit=400)
    right, e2 = quad(integrand, v0, math.inf, epsabs=0.0, epsrel=1e-11, limit=400)
    return EvalResult(left + right, e1 + e2)


def integral_i0(y, z, nu):
    """
    I0(y, z, nu) = int_{z^(1/nu)}^inf u / (1 + y u^nu) du
                 = z^(2/nu-1) / ((nu-2) y) * 2F1(1, 1-2/nu; 2-2/nu; -1/(z y))
    """
    _require_finite(y=y, z=z, nu=nu)
    if nu <= 2:
        raise DomainError(f"I0 diverges for nu <= 2, got nu={nu}")
    if y <= 0 or z <= 0:
        raise DomainError(f"I0 needs y > 0 and z > 0; got y={y}, z={z}")
    d = 2.0 / nu
    f = hyp2f1_one(1.0 - d, 2.0 - d, -1.0 / (z * y))
    pref = z ** (d - 1.0) / ((nu - 2.0) * y)
    value = pref * f.value
    return EvalResult(value, pref * f.abs_error_bound + 8 * EPS * abs(value))


def integral_i0_quadrature(y, z, nu):
    """I0 정의식 직접 적분 (검증용)"""
    if nu <= 2 or y <= 0 or z <= 0:
        raise DomainError(f"I0 oracle: invalid arguments y={y}, z={z}, nu={nu}")
    lower = z ** (1.0 / nu)
    value, err = quad(lambda u: u ** (1.0 - nu) / (u ** (-nu) + y), lower, math.inf,
                      epsabs=0.0, epsrel=1e-11, limit=400)
    return EvalResult(value, err)
