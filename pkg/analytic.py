"""
HDHN 해석 엔진: 연결 확률, 간섭 Laplace 변환, 전송 성공 확률(STP),
처리량, 최적 FD 비율.

표기는 model.py 를 따른다. tier k 사용자에서 본 tier i 에 대해
    A_ik  HD 간섭 항, B_ik FD 간섭 항,
    M_ik = tau_ik^(2/alpha_i) / 2 + (1 - delta_i) A_ik + delta_i B_ik
A_ik, B_ik 는 delta 와 무관하므로 캐시하고 최적화는 이를 다시 섞기만 한다.
"""
import math
import logging
import itertools
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from concurrent.futures import ProcessPoolExecutor

from scipy import special
from scipy.integrate import quad
from scipy.optimize import brentq

import settings
from errors import DomainError, ConvergenceError, PreconditionError, DegenerateNetworkError
from model import DuplexMode, Direction, LinkQuery, query_violations, target_sirs
from specfun import integral_i0, integral_i1, erfcx

logger = logging.getLogger(__name__)

# 동일 전력 분기 기준 (상대 차이)
EQUAL_POWER_RTOL = 1e-9

# s max(P) d^-alpha 가 이보다 작으면 폐형식 대신 직접 적분 (d^2 상쇄로 정밀도 손실)
SMALL_S_RATIO = 1e-3

# STP 피적분함수가 피크 대비 1e-14 아래로 떨어지는 지점에서 절단
_LOG_TAIL = math.log(1e14)


class StpMethod(str, Enum):
    GENERAL_INTEGRAL = "general_integral"
    ALPHA4_CLOSED_FORM = "alpha4_closed_form"
    PERFECT_IC_CLOSED_FORM = "perfect_ic_closed_form"


@dataclass(frozen=True)
class StpBreakdown:
    value: float
    method: StpMethod
    quadrature_error: float = 0.0


@dataclass(frozen=True)
class ThroughputReport:
    per_tier: tuple     # S_k [bits/sec/Hz/m^2]
    total: float        # S
    per_cell: float     # S^c [bits/sec/Hz/cell]

    @classmethod
    def from_per_tier(cls, per_tier, total_density):
        per_tier = tuple(float(v) for v in per_tier)
        total = sum(per_tier)
        per_cell = total / total_density if total_density > 0 else 0.0
        return cls(per_tier=per_tier, total=total, per_cell=per_cell)


# ===== 연관 확률 / 링크 거리 =====

def _require_density(config):
    if config.num_tiers == 0 or config.total_density <= 0:
        raise DegenerateNetworkError("every tier density is zero; no AP to associate with")


def _association_exponents(config, k):
    """(b_i, e_i) 목록. u = x^2 에서 더 강한 AP 가 없을 확률이 exp(-sum b_i u^e_i)"""
    alpha_k = config.tiers[k].pathloss_exp
    terms = []
    for i, tier in enumerate(config.tiers):
        if tier.density == 0:
            continue
        tau = config.bias_ratio(i, k)
        terms.append((math.pi * tier.density * tau ** (2.0 / tier.pathloss_exp),
                      alpha_k / tier.pathloss_exp))
    return terms


def _integrate_decay(phi, max_u=None):
    """phi(0) = 0 인 증가함수 phi 에 대한 int_0^inf exp(-phi(u)) du"""
    max_u = settings.STP_MAX_U if max_u is None else max_u
    upper = 1.0
    while phi(upper) < _LOG_TAIL:
        upper *= 2.0
        if upper > max_u:
            raise ConvergenceError(
                f"integrand still above 1e-14 of its peak at u={upper:.3g} (bound {max_u:.3g})"
            )
    cut = brentq(lambda u: phi(u) - _LOG_TAIL, 0.0, upper, xtol=1e-14, rtol=1e-12)
    value, err = quad(lambda u: math.exp(-phi(u)), 0.0, cut,
                      epsabs=1e-15, epsrel=1e-11, limit=400)
    # 절단된 꼬리: exp(-phi) <= 1e-14 이고 phi가 증가하므로 대략 cut*1e-14 이하
    return value, err + cut * 1e-14


@lru_cache(maxsize=4096)
def _association_integral(config, k):
    """int_0^inf exp(-pi sum_i lambda_i tau_ik^(2/alpha_i) u^(alpha_k/alpha_i)) du"""
    terms = _association_exponents(config, k)
    if config.equal_alpha:
        return 1.0 / sum(b for b, _ in terms)
    value, _ = _integrate_decay(lambda u: sum(b * u ** e for b, e in terms))
    return value


def association_probability(config, tier, mode):
    """전형적 사용자가 tier `tier` 의 `mode` 모드 AP 에 연결될 확률"""
    _require_density(config)
    lam = config.tiers[tier].mode_density(mode)
    if lam == 0:
        return 0.0
    return math.pi * lam * _association_integral(config, tier)


def association_probabilities(config):
    """(P_HD, P_FD) 를 tier 별로 K 행; 전체 합은 1"""
    return [
        (association_probability(config, k, DuplexMode.HD),
         association_probability(config, k, DuplexMode.FD))
        for k in range(config.num_tiers)
    ]


def link_distance_pdf(config, tier, x):
    """tier `tier` 사용자와 서빙 AP 사이 거리의 PDF (두 모드 공통)"""
    if x < 0:
        raise DomainError(f"link distance must be >= 0, got {x}")
    _require_density(config)
    u = x * x
    decay = sum(b * u ** e for b, e in _association_exponents(config, tier))
    return 2.0 * x * math.exp(-decay) / _association_integral(config, tier)


# ===== 결합 이득 / Laplace 변환 =====

def _equal_powers(p_ap, p_user):
    return abs(p_ap - p_user) / max(p_ap, p_user) < EQUAL_POWER_RTOL


def gi_moment(p_ap, p_user, delta):
    """G = P_a h1 + P_u h2 (h1, h2 ~ Exp(1)) 의 E[G^delta]. 전력이 같으면 Erlang"""
    if delta <= -1:
        raise DomainError(f"E[G^delta] diverges for delta <= -1, got {delta}")
    if p_ap <= 0 or p_user <= 0:
        raise DomainError(f"powers must be > 0, got P_a={p_ap}, P_u={p_user}")
    if _equal_powers(p_ap, p_user):
        return p_ap ** delta * special.gamma(2.0 + delta)
    return (special.gamma(1.0 + delta)
            * (p_user ** (delta + 1) - p_ap ** (delta + 1)) / (p_user - p_ap))


@lru_cache(maxsize=65536)
def hd_mean_field(alpha, p_ap, s, d_min):
    """int_{d_min}^inf x / (1 + x^alpha / (s P_a)) dx; 단위 밀도당 HD Laplace 지수 / 2pi"""
    if s == 0:
        return 0.0
    return integral_i0(1.0 / (s * p_ap), d_min ** alpha, alpha).value


def _fd_mean_field_quadrature(alpha, p_ap, p_user, s, d_min):
    """x = d_min t 로 치환한 정의식 적분; 1 - 1/((1+a)(1+b)) 를 (a+b+ab)/((1+a)(1+b)) 로 써서 상쇄 없음"""
    scale = s / d_min ** alpha
    e_ap, e_user = scale * p_ap, scale * p_user

    def integrand(t):
        w = t ** -alpha
        a, b = e_ap * w, e_user * w
        return (a + b + a * b) / ((1.0 + a) * (1.0 + b)) * t

    value, _ = quad(integrand, 1.0, math.inf, epsabs=0.0, epsrel=1e-11, limit=400)
    return d_min ** 2 * value


@lru_cache(maxsize=65536)
def fd_mean_field(alpha, p_ap, p_user, s, d_min):
    """FD 셀 간섭의 평균장 int_{d_min}^inf (1 - E[exp(-s G x^-alpha)]) x dx (G: AP + 사용자 결합 이득)"""
    if s == 0:
        return 0.0
    if s * max(p_ap, p_user) / d_min ** alpha < SMALL_S_RATIO:
        return _fd_mean_field_quadrature(alpha, p_ap, p_user, s, d_min)
    delta = 2.0 / alpha
    nu = s / d_min ** alpha
    # Gamma(1 - delta) = pi csc(pi delta) / Gamma(delta)
    gamma_one_minus = math.pi / math.sin(math.pi * delta) / special.gamma(delta)
    if _equal_powers(p_ap, p_user):
        tail = integral_i1(delta + 2.0, 1.0 / p_ap, -delta, nu).value / p_ap ** 2
    else:
        i_ap = integral_i1(delta + 1.0, 1.0 / p_ap, -delta, nu).value
        i_user = integral_i1(delta + 1.0, 1.0 / p_user, -delta, nu).value
        tail = (i_user - i_ap) / (p_user - p_ap)
    moment = gi_moment(p_ap, p_user, delta)
    return max(0.0, 0.5 * (-d_min ** 2 + s ** delta * (gamma_one_minus * moment + delta * tail)))


def _check_laplace_args(tier, s, d_min):
    if s < 0 or not math.isfinite(s):
        raise DomainError(f"Laplace argument s must be finite and >= 0, got {s}")
    if not d_min > 0:
        raise DomainError(f"d_min must be > 0, got {d_min}")
    if not tier.pathloss_exp > 2:
        raise DomainError(f"pathloss exponent must be > 2, got {tier.pathloss_exp}")


def laplace_fd(tier, s, d_min):
    """d_min 바깥 FD 셀 간섭(AP + 같은 위치의 사용자)의 Laplace 변환"""
    _check_laplace_args(tier, s, d_min)
    lam = tier.fd_density
    if s == 0 or lam == 0:
        return 1.0
    field = fd_mean_field(tier.pathloss_exp, tier.ap_power, tier.user_power, s, d_min)
    return math.exp(-2.0 * math.pi * lam * field)


def laplace_hd(tier, s, d_min):
    """d_min 바깥 HD 셀 간섭의 Laplace 변환"""
    _check_laplace_args(tier, s, d_min)
    lam = tier.hd_density
    if s == 0 or lam == 0:
        return 1.0
    field = hd_mean_field(tier.pathloss_exp, tier.ap_power, s, d_min)
    return math.exp(-2.0 * math.pi * lam * field)


# ===== STP =====

def aggregation_terms(config, i, k, p_t, theta):
    """간섭 tier i, 서빙 tier k 의 (A_ik, B_ik, M_ik)"""
    tier = config.tiers[i]
    alpha = tier.pathloss_exp
    tau = config.bias_ratio(i, k)
    d = tau ** (1.0 / alpha)
    s = theta / p_t
    a_term = hd_mean_field(alpha, tier.ap_power, s, d)
    b_term = fd_mean_field(alpha, tier.ap_power, tier.user_power, s, d)
    delta = tier.fd_portion
    m_term = tau ** (2.0 / alpha) / 2.0 + (1.0 - delta) * a_term + delta * b_term
    return a_term, b_term, m_term


def _check_query(config, query):
    problems = query_violations(config, query)
    if problems:
        raise DomainError("invalid link query: " + "; ".join(problems))
    _require_density(config)


def _stp_exponents(config, query):
    """서빙 거리 지수 항. exp(-c u^(alpha_k/2) - sum a_i u^e_i) 의 (a_i, e_i) 목록과 c"""
    k = query.tier_index
    p_t, _ = query.powers(config)
    theta = query.target_sir
    alpha_k = config.tiers[k].pathloss_exp
    terms = []
    for i, tier in enumerate(config.tiers):
        if tier.density == 0:
            continue
        _, _, m_term = aggregation_terms(config, i, k, p_t, theta)
        terms.append((2.0 * math.pi * tier.density * m_term, alpha_k / tier.pathloss_exp))
    c = query.self_interference(config) * theta / p_t
    return terms, c, alpha_k / 2.0


def _clamp(v):
    return min(1.0, max(0.0, v))


def stp_general(config, query):
    """
    서빙 거리 적분을 적응 구적으로 계산한 STP.

    경로 손실 지수와 자기간섭 제거 수준에 제한이 없어 다른 경로의 기준값으로 쓴다.
    """
    _check_query(config, query)
    terms, c, e_c = _stp_exponents(config, query)

    def phi(u):
        return c * u ** e_c + sum(a * u ** e for a, e in terms)

    num, num_err = _integrate_decay(phi)
    den = _association_integral(config, query.tier_index)
    value = num / den
    logger.debug(f"STP general {query}: {value:.12g} (err {num_err / den:.2e})")
    return StpBreakdown(_clamp(value), StpMethod.GENERAL_INTEGRAL, num_err / den)


def _lambda_tau(config, k):
    """Lambda'_k = sum_i lambda_i tau_ik^(2/alpha) (alpha 동일)"""
    return sum(t.density * config.bias_ratio(i, k) ** (2.0 / t.pathloss_exp)
               for i, t in enumerate(config.tiers))


def _sum_lambda_m(config, k, p_t, theta):
    return sum(t.density * aggregation_terms(config, i, k, p_t, theta)[2]
               for i, t in enumerate(config.tiers) if t.density > 0)


def _perfect_ic_value(config, k, p_t, theta):
    return _lambda_tau(config, k) / (2.0 * _sum_lambda_m(config, k, p_t, theta))


def _alpha4_value(config, k, p_t, theta, residual):
    sum_m = _sum_lambda_m(config, k, p_t, theta)
    root = math.sqrt(residual * theta)
    x = math.pi * sum_m * math.sqrt(p_t) / root
    return (math.pi ** 1.5 * math.sqrt(p_t) * _lambda_tau(config, k)
            / (2.0 * root) * erfcx(x).value)


def stp_perfect_ic(config, query):
    """자기간섭 없는 폐형식 STP (alpha 동일). HD 질의는 항상 해당"""
    _check_query(config, query)
    if not config.equal_alpha:
        raise PreconditionError("perfect self-IC closed form needs equal pathloss exponents")
    if query.self_interference(config) > 0:
        raise PreconditionError("perfect self-IC closed form needs zero residual self-interference")
    p_t, _ = query.powers(config)
    value = _perfect_ic_value(config, query.tier_index, p_t, query.target_sir)
    return StpBreakdown(_clamp(value), StpMethod.PERFECT_IC_CLOSED_FORM)


def stp_alpha4(config, query):
    """모든 alpha = 4 일 때의 폐형식 STP; exp(x^2) erfc(x) 는 erfcx 로 묶음"""
    _check_query(config, query)
    if any(t.pathloss_exp != 4.0 for t in config.tiers):
        raise PreconditionError("alpha = 4 closed form needs every pathloss exponent equal to 4")
    residual = query.self_interference(config)
    if residual == 0:
        return stp_perfect_ic(config, query)
    p_t, _ = query.powers(config)
    value = _alpha4_value(config, query.tier_index, p_t, query.target_sir, residual)
    return StpBreakdown(_clamp(value), StpMethod.ALPHA4_CLOSED_FORM)


def stp(config, query):
    """질의에 쓸 수 있는 가장 빠른 STP 경로"""
    _check_query(config, query)
    if config.equal_alpha and query.self_interference(config) == 0:
        return stp_perfect_ic(config, query)
    if all(t.pathloss_exp == 4.0 for t in config.tiers):
        return stp_alpha4(config, query)
    return stp_general(config, query)


# ===== 처리량 =====

def _tier_rate(config, k, stp_fn, theta_a, theta_u):
    tier = config.tiers[k]
    delta = tier.fd_portion
    rate = 0.0
    if delta < 1.0:
        q = LinkQuery(k, DuplexMode.HD, Direction.DOWNLINK, theta_a)
        rate += (1.0 - delta) * config.rate_ap * stp_fn(config, q).value
    if delta > 0.0:
        down = LinkQuery(k, DuplexMode.FD, Direction.DOWNLINK, theta_a)
        up = LinkQuery(k, DuplexMode.FD, Direction.UPLINK, theta_u)
        rate += delta * (config.rate_ap * stp_fn(config, down).value
                         + config.rate_user * stp_fn(config, up).value)
    return rate


def throughput(config, stp_fn=stp):
    """tier 별 처리량과 전체/셀당 처리량. `stp_fn` 으로 STP 경로 선택 (기본값: 가장 빠른 경로)"""
    if config.total_density <= 0:
        return ThroughputReport.from_per_tier([0.0] * config.num_tiers, 0.0)
    theta_a, theta_u = target_sirs(config)
    per_tier = []
    for k, tier in enumerate(config.tiers):
        if tier.density == 0:
            per_tier.append(0.0)
            continue
        per_tier.append(tier.density * _tier_rate(config, k, stp_fn, theta_a, theta_u)
                        / config.bandwidth)
    return ThroughputReport.from_per_tier(per_tier, config.total_density)


def throughput_closed(config):
    """
    폐형식 처리량.

    alpha 가 같고 FD 를 쓰는 모든 tier 가 완전 제거면 완전 제거 식을 쓴다.
    그 밖에 모든 alpha = 4 이면 erfcx 식 (잔여 간섭이 0 인 항은 완전 제거 식).
    나머지 경우는 거부한다.
    """
    if config.total_density <= 0:
        return ThroughputReport.from_per_tier([0.0] * config.num_tiers, 0.0)
    theta_a, theta_u = target_sirs(config)

    perfect = config.equal_alpha and all(
        t.perfect_ic for t in config.tiers if t.fd_portion > 0)
    all_four = all(t.pathloss_exp == 4.0 for t in config.tiers)
    if not (perfect or all_four):
        raise PreconditionError(
            "closed-form throughput needs equal alpha with perfect self-IC, or alpha = 4 in every tier"
        )

    per_tier = []
    for k, tier in enumerate(config.tiers):
        if tier.density == 0:
            per_tier.append(0.0)
            continue
        lam_tau = _lambda_tau(config, k)
        p_a, p_u, delta = tier.ap_power, tier.user_power, tier.fd_portion
        down_m = _sum_lambda_m(config, k, p_a, theta_a)
        if perfect:
            # HD 와 FD 하향링크 STP가 같아짐
            s_k = config.rate_ap / down_m
            if delta > 0:
                s_k += delta * config.rate_user / _sum_lambda_m(config, k, p_u, theta_u)
            per_tier.append(tier.density * lam_tau * s_k / (2.0 * config.bandwidth))
            continue

        hd_ps = lam_tau / (2.0 * down_m)
        rate = (1.0 - delta) * config.rate_ap * hd_ps
        if delta > 0:
            c_down = tier.self_ic_residual(p_u)
            c_up = tier.self_ic_residual(p_a)
            down_ps = hd_ps if c_down == 0 else _alpha4_value(config, k, p_a, theta_a, c_down)
            if c_up == 0:
                up_ps = _perfect_ic_value(config, k, p_u, theta_u)
            else:
                up_ps = _alpha4_value(config, k, p_u, theta_u, c_up)
            rate += delta * (config.rate_ap * _clamp(down_ps) + config.rate_user * _clamp(up_ps))
        per_tier.append(tier.density * rate / config.bandwidth)
    return ThroughputReport.from_per_tier(per_tier, config.total_density)


def hd_tier_throughput(config, k):
    """tier k 의 모든 AP 가 HD 일 때의 S_k (완전 제거 식, alpha 동일)"""
    if not config.equal_alpha:
        raise PreconditionError("HD-mode tier throughput closed form needs equal pathloss exponents")
    tier = config.tiers[k]
    if tier.density == 0:
        return 0.0
    theta_a, _ = target_sirs(config)
    ps = _perfect_ic_value(config, k, tier.ap_power, theta_a)
    return tier.density * config.rate_ap * ps / config.bandwidth


def fd_over_hd_ratio(config, k):
    """S_k / S_k(delta_k = 0); tier k 에서 FD 모드 AP 가 주는 이득"""
    base = throughput(config.with_tier(k, fd_portion=0.0)).per_tier[k]
    if base <= 0:
        raise DegenerateNetworkError(f"tier {k} has zero HD-mode throughput; ratio undefined")
    return throughput(config).per_tier[k] / base


# ===== FD 비율 최적화 =====

def portion_values(grid_step):
    """{0, step, 2 step, ..., 1}; 1 은 항상 포함"""
    if not 0 < grid_step <= 0.5:
        raise DomainError(f"grid_step must lie in (0, 0.5], got {grid_step}")
    n = int(math.floor(1.0 / grid_step + 1e-9))
    values = [round(i * grid_step, 12) for i in range(n + 1)]
    if values[-1] < 1.0 - 1e-12:
        values.append(1.0)
    return values


def _grid_total(args):
    config, portions = args
    return throughput(config.with_fd_portions(portions)).total


def fd_portion_grid(config, grid_step=0.05, workers=1):
    """전체 delta 격자의 총 처리량 (비율 벡터의 사전순)"""
    values = portion_values(grid_step)
    points = list(itertools.product(values, repeat=config.num_tiers))
    tasks = [(config, p) for p in points]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            totals = list(pool.map(_grid_total, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        totals = [_grid_total(t) for t in tasks]
    logger.info(f"📊 FD 비율 격자 {len(points)}개 평가 완료 (step={grid_step}, K={config.num_tiers})")
    return list(zip(points, totals))


def grid_extrema(grid):
    """((argmax, max), (argmin, min)); 동률이면 사전순으로 작은 비율 벡터"""
    best = worst = grid[0]
    for point in grid[1:]:
        if point[1] > best[1]:
            best = point
        if point[1] < worst[1]:
            worst = point
    return best, worst


def optimal_fd_portions(config, grid_step=0.05, workers=1):
    """총 처리량을 최대화하는 FD 비율의 전수 격자 탐색"""
    (portions, value), _ = grid_extrema(fd_portion_grid(config, grid_step, workers))
    logger.info(f"✅ 최적 FD 비율: {portions} (S={value:.6g})")
    return list(portions), value
