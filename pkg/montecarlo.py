"""
HDHN 해석식 검증용 Monte Carlo 시뮬레이터.

실현마다 원점 중심 원판에 tier 별 AP PPP 를 뿌리고 확률 delta_k 로 FD 태그를 붙인다.
각 AP 의 사용자 오프셋은 서빙 거리 분포(각도 균일)에서 뽑는다.
난수는 (seed, 실현 번호, 개체) 로 키를 잡은 Philox 스트림에서 나오므로 작업자 분할과
무관하게 결과가 같고, EXACT/COLOCATED 배치가 AP 위치와 페이딩을 공유한다.
"""
import math
import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from concurrent.futures import ProcessPoolExecutor

import numpy as np

import settings
from errors import DomainError, DegenerateNetworkError, EmptyWindowError
from model import DuplexMode, Direction, target_sirs

logger = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1

# stream entity ids: tier k uses 16*k + slot
_POS, _TAG, _USER, _FADE_AP, _FADE_USER, _OBS_FADE = range(6)
_SERVING_FADE = 1 << 20
_USER_FIELD = (1 << 20) + 1
_LAP_POS, _LAP_FADE, _LAP_USER = (1 << 21), (1 << 21) + 1, (1 << 21) + 2

# 창 밖 간섭이 창 안 간섭의 0.1% 미만이 되도록
DEFAULT_TAIL_FRACTION = 1e-3

# 동률 판정 (associate)
_TIE_RTOL = 1e-12


class Approximation(str, Enum):
    """FD 셀 사용자가 간섭원으로서 어디에 있는지.

    COLOCATED 는 간섭하는 FD 사용자를 자기 AP 위치에 둔다. 해석식의 Laplace 변환과
    STP 가 쓰는 거리 근사와 같으므로 해석값과 직접 비교할 때 쓴다.
    EXACT 는 연결 거리 분포에서 뽑은 실제 사용자 오프셋을 유지한다.
    """
    EXACT = "exact"
    COLOCATED = "colocated"


@dataclass(frozen=True)
class SimSettings:
    window_radius: float = None     # None -> default_window_radius
    realizations: int = settings.REALIZATIONS
    seed: int = settings.SEED
    user_density: float = 0.0       # mu; > 0 draws a full user field
    approximation: Approximation = Approximation.EXACT
    workers: int = settings.WORKERS
    chunk: int = settings.CHUNK

    def __post_init__(self):
        object.__setattr__(self, "approximation", Approximation(self.approximation))
        if self.realizations <= 0:
            raise DomainError(f"realizations must be > 0, got {self.realizations}")
        if self.window_radius is not None and not self.window_radius > 0:
            raise DomainError(f"window_radius must be > 0, got {self.window_radius}")
        if self.user_density < 0:
            raise DomainError(f"user_density must be >= 0, got {self.user_density}")


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    n: int
    seed: int

    @classmethod
    def from_samples(cls, samples, seed):
        samples = np.asarray(samples, dtype=float)
        n = samples.size
        if n == 0:
            return cls(math.nan, math.nan, 0, seed)
        mean = float(np.mean(samples))
        stderr = float(np.std(samples, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return cls(mean, stderr, n, seed)

    def within(self, value, k=3.0, floor=1e-12):
        """|mean - value| 가 표준오차의 k 배 이내면 True"""
        return abs(self.mean - value) <= k * max(self.stderr, floor)


@dataclass(frozen=True)
class TierSnapshot:
    positions: np.ndarray       # (n, 2) AP coordinates [m]
    fd_mask: np.ndarray         # (n,) True = FD-mode AP
    user_offsets: np.ndarray    # (n, 2) user position relative to its AP
    colocated: bool = False

    @property
    def user_positions(self):
        """간섭원일 때 각 셀 사용자의 송신 위치"""
        if self.colocated:
            return self.positions
        return self.positions + self.user_offsets


@dataclass(frozen=True)
class NetworkRealization:
    tiers: tuple
    window_radius: float
    index: int


@dataclass(frozen=True)
class Association:
    tier: int
    mode: DuplexMode
    index: int
    distance: float


def _stream(seed, index, entity):
    bitgen = np.random.Philox(
        key=np.array([seed & _MASK64, index & _MASK64], dtype=np.uint64),
        counter=np.array([0, 0, 0, entity], dtype=np.uint64),
    )
    return np.random.Generator(bitgen)


def _entity(tier, slot):
    return 16 * tier + slot


def sample_ppp(density, radius, rng):
    """원점 중심 반경 radius 원판 위의 균일 PPP; (n, 2) 배열"""
    if density < 0:
        raise DomainError(f"density must be >= 0, got {density}")
    if not radius > 0:
        raise DomainError(f"radius must be > 0, got {radius}")
    if density == 0:
        return np.empty((0, 2))
    n = rng.poisson(density * math.pi * radius ** 2)
    r = radius * np.sqrt(rng.random(n))
    phi = 2.0 * math.pi * rng.random(n)
    return np.column_stack((r * np.cos(phi), r * np.sin(phi)))


# ===== 창 크기 =====

def _window_for(alphas, length, fraction):
    return max(length * fraction ** (-1.0 / (a - 2.0)) for a in alphas)


def default_window_radius(config, fraction=DEFAULT_TAIL_FRACTION, d_min=None):
    """
    창 바깥 간섭이 창 안쪽의 `fraction` 미만이 되는 원판 반경.

    R 바깥 꼬리는 (R/a)^(2-alpha) 로 줄어든다. a 는 전형적 최근접 거리
    1/(2 sqrt(sum lambda)) 이고, 간섭원을 d_min 으로 잘라내면 d_min.
    """
    alphas = [t.pathloss_exp for t in config.tiers if t.density > 0] or \
             [t.pathloss_exp for t in config.tiers]
    if d_min is not None:
        length = d_min
    elif config.total_density > 0:
        length = 1.0 / (2.0 * math.sqrt(config.total_density))
    else:
        length = 1.0
    return _window_for(alphas, length, fraction)


# ===== 링크 거리 샘플링 =====

@lru_cache(maxsize=256)
def _link_distance_table(config, k):
    """tier k 사용자 서빙 거리의 (equal_alpha_rate, u_grid, cdf); u = 거리^2"""
    alpha_k = config.tiers[k].pathloss_exp
    terms = [(math.pi * t.density * config.bias_ratio(i, k) ** (2.0 / t.pathloss_exp),
              alpha_k / t.pathloss_exp)
             for i, t in enumerate(config.tiers) if t.density > 0]
    if not terms:
        raise DegenerateNetworkError("every tier density is zero")
    if config.equal_alpha:
        return sum(b for b, _ in terms), None, None

    def phi(u):
        return sum(b * u ** e for b, e in terms)

    upper = 1.0
    while phi(upper) < 40.0:
        upper *= 2.0
    u = np.linspace(0.0, upper, 8193)
    pdf = np.exp(-sum(b * u ** e for b, e in terms))
    cdf = np.concatenate(([0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * np.diff(u))))
    return None, u, cdf / cdf[-1]


def sample_link_distances(config, k, n, rng):
    """tier k 사용자의 i.i.d. 서빙 거리 n 개"""
    rate, u, cdf = _link_distance_table(config, k)
    if rate is not None:
        return np.sqrt(rng.exponential(size=n) / rate)
    return np.sqrt(np.interp(rng.random(n), cdf, u))


# ===== 네트워크 생성 =====

def realize_network(config, sim, index, radius=None):
    """다중 tier 스냅샷 하나 (tier 별 AP 위치, FD 태그, 사용자 오프셋)"""
    radius = radius or sim.window_radius or default_window_radius(config)
    colocated = sim.approximation is Approximation.COLOCATED
    snapshots = []
    for k, tier in enumerate(config.tiers):
        pos = sample_ppp(tier.density, radius, _stream(sim.seed, index, _entity(k, _POS)))
        n = len(pos)
        fd = _stream(sim.seed, index, _entity(k, _TAG)).random(n) < tier.fd_portion
        rng = _stream(sim.seed, index, _entity(k, _USER))
        offsets = np.empty((0, 2))
        if n:
            d = sample_link_distances(config, k, n, rng)
            phi = 2.0 * math.pi * rng.random(n)
            offsets = np.column_stack((d * np.cos(phi), d * np.sin(phi)))
        snapshots.append(TierSnapshot(pos, fd, offsets, colocated))

    if sim.user_density > 0 and not colocated:
        snapshots = _users_from_field(config, snapshots, sim, index, radius)
    return NetworkRealization(tuple(snapshots), radius, index)


def _users_from_field(config, snapshots, sim, index, radius):
    """FD 셀 사용자 오프셋을 그 AP 에 실제로 연결된 사용자로 교체 (있을 때만)"""
    rng = _stream(sim.seed, index, _USER_FIELD)
    users = sample_ppp(sim.user_density, radius, rng)
    counts = [len(s.positions) for s in snapshots]
    if len(users) == 0 or sum(counts) == 0:
        return snapshots

    aps = np.concatenate([s.positions for s in snapshots])
    log_bias = np.concatenate([np.full(c, math.log(t.bias)) for c, t in zip(counts, config.tiers)])
    alpha = np.concatenate([np.full(c, t.pathloss_exp) for c, t in zip(counts, config.tiers)])
    dist = np.hypot(users[:, None, 0] - aps[None, :, 0], users[:, None, 1] - aps[None, :, 1])
    with np.errstate(divide="ignore"):
        metric = log_bias[None, :] - alpha[None, :] * np.log(dist)
    serving = np.argmax(metric, axis=1)

    order = np.argsort(serving, kind="stable")
    sorted_serving = serving[order]
    updated = []
    offset = 0
    for s, c in zip(snapshots, counts):
        offsets = s.user_offsets.copy()
        for j in np.flatnonzero(s.fd_mask):
            lo = np.searchsorted(sorted_serving, offset + j, side="left")
            hi = np.searchsorted(sorted_serving, offset + j, side="right")
            if hi > lo:
                pick = order[lo + rng.integers(hi - lo)]
                offsets[j] = users[pick] - s.positions[j]
        updated.append(TierSnapshot(s.positions, s.fd_mask, offsets, s.colocated))
        offset += c
    return updated


def associate(realization, config):
    """원점 사용자의 서빙 AP: argmax B_i D^-alpha_i. 동률이면 낮은 tier, 그다음 가까운 AP"""
    candidates = []
    for k, snap in enumerate(realization.tiers):
        if len(snap.positions) == 0:
            continue
        tier = config.tiers[k]
        d = np.hypot(snap.positions[:, 0], snap.positions[:, 1])
        with np.errstate(divide="ignore"):
            metric = math.log(tier.bias) - tier.pathloss_exp * np.log(d)
        j = int(np.argmax(metric))
        candidates.append((float(metric[j]), k, float(d[j]), j))
    if not candidates:
        raise EmptyWindowError(f"realization {realization.index}: no AP inside the window")

    best = max(c[0] for c in candidates)
    tol = _TIE_RTOL * max(1.0, abs(best)) if math.isfinite(best) else 0.0
    ties = [c for c in candidates if c[0] >= best - tol]
    _, k, dist, j = min(ties, key=lambda c: (c[1], c[2]))
    mode = DuplexMode.FD if realization.tiers[k].fd_mask[j] else DuplexMode.HD
    return Association(k, mode, j, dist)


def _interference_at_origin(config, net, seed, exclude):
    """원점에서의 HD + FD 간섭 합. 서빙 셀 `exclude` = (tier, index) 는 제외"""
    total = 0.0
    for i, snap in enumerate(net.tiers):
        n = len(snap.positions)
        if n == 0:
            continue
        tier = config.tiers[i]
        keep = np.ones(n, dtype=bool)
        if i == exclude[0]:
            keep[exclude[1]] = False
        h = _stream(seed, net.index, _entity(i, _FADE_AP)).exponential(size=n)
        d = np.hypot(snap.positions[:, 0], snap.positions[:, 1])
        with np.errstate(divide="ignore"):
            total += tier.ap_power * float(np.sum(h[keep] * d[keep] ** -tier.pathloss_exp))
            fd = snap.fd_mask & keep
            if fd.any():
                hu = _stream(seed, net.index, _entity(i, _FADE_USER)).exponential(size=n)
                up = snap.user_positions[fd]
                du = np.hypot(up[:, 0], up[:, 1])
                total += tier.user_power * float(np.sum(hu[fd] * du ** -tier.pathloss_exp))
    return total


# ===== 병렬 실행 =====

def _run_chunks(fn, args, sim):
    n = sim.realizations
    bounds = [(a, min(a + sim.chunk, n)) for a in range(0, n, sim.chunk)]
    if sim.workers and sim.workers > 1 and len(bounds) > 1:
        with ProcessPoolExecutor(max_workers=sim.workers) as pool:
            futures = [pool.submit(fn, *args, a, b) for a, b in bounds]
            return [f.result() for f in futures]
    return [fn(*args, a, b) for a, b in bounds]


# ===== STP =====

def _stp_chunk(config, query, sim, radius, start, stop):
    k = query.tier_index
    p_t, _ = query.powers(config)
    residual = query.self_interference(config)
    alpha_k = config.tiers[k].pathloss_exp
    out = []
    for index in range(start, stop):
        net = realize_network(config, sim, index, radius)
        try:
            assoc = associate(net, config)
        except EmptyWindowError:
            continue
        if assoc.tier != k:
            continue
        # 모드 태그는 위치와 독립이므로 서빙 셀의 모드는 질의 모드로 조건화
        h = _stream(sim.seed, index, _SERVING_FADE).exponential()
        with np.errstate(divide="ignore"):
            signal = p_t * h * assoc.distance ** -alpha_k
        interference = _interference_at_origin(config, net, sim.seed, (k, assoc.index))
        out.append(1.0 if signal >= query.target_sir * (residual + interference) else 0.0)
    return np.array(out)


def estimate_stp(config, query, sim):
    """수신기 SIR 이 목표에 도달한 tier k 실현의 비율"""
    if query.direction is Direction.UPLINK and query.mode is not DuplexMode.FD:
        raise DomainError("uplink STP is only defined for FD-mode cells")
    radius = sim.window_radius or default_window_radius(config)
    parts = _run_chunks(_stp_chunk, (config, query, sim, radius), sim)
    samples = np.concatenate(parts)
    if samples.size == 0:
        raise DegenerateNetworkError(f"no realization associated the typical user with tier {query.tier_index}")
    est = Estimate.from_samples(samples, sim.seed)
    logger.info(f"📊 MC STP {query.mode.value}/{query.direction.value} tier{query.tier_index}: "
                f"{est.mean:.5f} ± {est.stderr:.5f} (n={est.n})")
    return est


# ===== 연관 빈도 =====

def _association_chunk(config, sim, radius, start, stop):
    codes = np.full(stop - start, -1, dtype=np.int64)
    for j, index in enumerate(range(start, stop)):
        net = realize_network(config, sim, index, radius)
        try:
            a = associate(net, config)
        except EmptyWindowError:
            continue
        codes[j] = 2 * a.tier + (1 if a.mode is DuplexMode.FD else 0)
    return codes


def estimate_association(config, sim):
    """(tier, mode) 별 경험적 연결 빈도"""
    radius = sim.window_radius or default_window_radius(config)
    codes = np.concatenate(_run_chunks(_association_chunk, (config, sim, radius), sim))
    codes = codes[codes >= 0]
    result = {}
    for k in range(config.num_tiers):
        for m, bit in ((DuplexMode.HD, 0), (DuplexMode.FD, 1)):
            result[(k, m)] = Estimate.from_samples(codes == 2 * k + bit, sim.seed)
    return result


# ===== Laplace 변환 =====

def _laplace_chunk(tier, s, d_min, sim, radius, start, stop):
    lam = tier.fd_density
    alpha = tier.pathloss_exp
    out = np.empty(stop - start)
    for j, index in enumerate(range(start, stop)):
        pos = sample_ppp(lam, radius, _stream(sim.seed, index, _LAP_POS))
        d = np.hypot(pos[:, 0], pos[:, 1])
        keep = d >= d_min
        pos, d = pos[keep], d[keep]
        n = len(d)
        fade = _stream(sim.seed, index, _LAP_FADE)
        h_ap = fade.exponential(size=n)
        h_user = fade.exponential(size=n)
        if sim.approximation is Approximation.COLOCATED:
            du = d
        else:
            rng = _stream(sim.seed, index, _LAP_USER)
            r = np.sqrt(rng.exponential(size=n) / (math.pi * tier.density))
            phi = 2.0 * math.pi * rng.random(n)
            du = np.hypot(pos[:, 0] + r * np.cos(phi), pos[:, 1] + r * np.sin(phi))
        with np.errstate(divide="ignore"):
            interference = (tier.ap_power * np.sum(h_ap * d ** -alpha)
                            + tier.user_power * np.sum(h_user * du ** -alpha))
        out[j] = math.exp(-s * interference)
    return out


def estimate_laplace(tier, s, d_min, approximation, sim):
    """d_min 바깥 FD 셀 간섭 I 에 대한 exp(-s I) 표본 평균"""
    if not d_min > 0:
        raise DomainError(f"d_min must be > 0, got {d_min}")
    if s < 0:
        raise DomainError(f"s must be >= 0, got {s}")
    if s == 0:
        return Estimate(1.0, 0.0, sim.realizations, sim.seed)
    sim = SimSettings(sim.window_radius, sim.realizations, sim.seed, sim.user_density,
                      approximation, sim.workers, sim.chunk)
    radius = sim.window_radius or _window_for([tier.pathloss_exp], d_min, DEFAULT_TAIL_FRACTION)
    parts = _run_chunks(_laplace_chunk, (tier, s, d_min, sim, radius), sim)
    return Estimate.from_samples(np.concatenate(parts), sim.seed)


# ===== 처리량 =====

_ROW_BLOCK = 256


def _receiver_rates(config, k, net, rx, link_r, fading_rng, own, sir_target,
                    p_signal, residual):
    """수신기 `rx`, 링크 거리 `link_r` 인 tier k 링크들의 성공 지시값"""
    tiers = net.tiers
    aps = np.concatenate([s.positions for s in tiers])
    users = np.concatenate([s.user_positions for s in tiers])
    fd = np.concatenate([s.fd_mask for s in tiers])
    tier_of = np.concatenate([np.full(len(s.positions), i) for i, s in enumerate(tiers)])
    alpha = np.array([config.tiers[i].pathloss_exp for i in tier_of])
    p_ap = np.array([config.tiers[i].ap_power for i in tier_of])
    p_user = np.array([config.tiers[i].user_power for i in tier_of])
    tau_root = np.array([config.bias_ratio(i, k) ** (1.0 / config.tiers[i].pathloss_exp)
                         for i in tier_of])
    alpha_k = config.tiers[k].pathloss_exp

    success = np.zeros(len(rx), dtype=bool)
    for lo in range(0, len(rx), _ROW_BLOCK):
        hi = min(lo + _ROW_BLOCK, len(rx))
        r = link_r[lo:hi]
        d_ap = np.hypot(rx[lo:hi, None, 0] - aps[None, :, 0], rx[lo:hi, None, 1] - aps[None, :, 1])
        d_user = np.hypot(rx[lo:hi, None, 0] - users[None, :, 0], rx[lo:hi, None, 1] - users[None, :, 1])
        # 연관 규칙상 guard 반경 안에는 다른 AP가 없어야 함
        guard = tau_root[None, :] * r[:, None] ** (alpha_k / alpha[None, :])
        active = d_ap >= guard
        active[np.arange(hi - lo), own[lo:hi]] = False
        h_ap = fading_rng.exponential(size=d_ap.shape)
        h_user = fading_rng.exponential(size=d_ap.shape)
        h_sig = fading_rng.exponential(size=hi - lo)
        with np.errstate(divide="ignore", invalid="ignore"):
            i_ap = np.where(active, p_ap[None, :] * h_ap * d_ap ** -alpha[None, :], 0.0)
            i_user = np.where(active & fd[None, :],
                              p_user[None, :] * h_user * d_user ** -alpha[None, :], 0.0)
            signal = p_signal * h_sig * r ** -alpha_k
        interference = i_ap.sum(axis=1) + i_user.sum(axis=1)
        success[lo:hi] = signal >= sir_target * (residual[lo:hi] + interference)
    return success


def _throughput_chunk(config, sim, radius, start, stop):
    theta_a, theta_u = target_sirs(config)
    obs = radius / 2.0
    area = math.pi * obs ** 2
    out = np.zeros((stop - start, config.num_tiers))
    for j, index in enumerate(range(start, stop)):
        net = realize_network(config, sim, index, radius)
        counts = [len(s.positions) for s in net.tiers]
        offsets = np.concatenate(([0], np.cumsum(counts)))
        for k, tier in enumerate(config.tiers):
            snap = net.tiers[k]
            if counts[k] == 0:
                continue
            inside = np.flatnonzero(np.hypot(snap.positions[:, 0], snap.positions[:, 1]) <= obs)
            if inside.size == 0:
                continue
            fading = _stream(sim.seed, index, _entity(k, _OBS_FADE))
            ap = snap.positions[inside]
            off = snap.user_offsets[inside]
            link_r = np.hypot(off[:, 0], off[:, 1])
            own = offsets[k] + inside
            is_fd = snap.fd_mask[inside]

            # 하향링크: 수신기 = 사용자
            res_down = np.where(is_fd, tier.self_ic_residual(tier.user_power), 0.0)
            down = _receiver_rates(config, k, net, ap + off, link_r, fading, own,
                                   theta_a, tier.ap_power, res_down)
            rate = config.rate_ap * down.sum()

            # 상향링크 (FD 셀만): 수신기 = AP
            if is_fd.any():
                sel = np.flatnonzero(is_fd)
                res_up = np.full(sel.size, tier.self_ic_residual(tier.ap_power))
                up = _receiver_rates(config, k, net, ap[sel], link_r[sel], fading, own[sel],
                                     theta_u, tier.user_power, res_up)
                rate += config.rate_user * up.sum()
            out[j, k] = rate / (config.bandwidth * area)
    return out


def estimate_throughput(config, sim):
    """
    tier 별 처리량 추정.

    관측 원판 안 모든 AP 의 성공 지시값에 전송률을 곱해 단위 면적, 단위 대역폭으로 나눈다.
    """
    if config.total_density <= 0:
        return [Estimate(0.0, 0.0, sim.realizations, sim.seed) for _ in config.tiers]
    radius = sim.window_radius or 2.0 * default_window_radius(config)
    samples = np.concatenate(_run_chunks(_throughput_chunk, (config, sim, radius), sim))
    estimates = [Estimate.from_samples(samples[:, k], sim.seed) for k in range(config.num_tiers)]
    logger.info("📊 MC 처리량: " + ", ".join(
        f"S{k}={e.mean:.4e}±{e.stderr:.1e}" for k, e in enumerate(estimates)))
    return estimates
