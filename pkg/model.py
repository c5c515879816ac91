"""
K-tier 하이브리드 듀플렉스 네트워크 모델.

처리량 해석의 모든 파라미터를 담는다. tier 별로 밀도, 경로 손실 지수, 연결 바이어스,
AP/사용자 전력, FD 비율, 자기간섭 제거 성능이 있고 전역으로 전송률과 대역폭이 있다.
인스턴스는 불변이며 스윕은 ``with_tier`` 등으로 새 설정을 만든다.
"""
import math
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field, replace
from enum import Enum

from errors import ConfigError

logger = logging.getLogger(__name__)


class DuplexMode(str, Enum):
    HD = "hd"
    FD = "fd"


class Direction(str, Enum):
    DOWNLINK = "downlink"
    UPLINK = "uplink"


@dataclass(frozen=True)
class TierParams:
    density: float                  # lambda_k [nodes/m^2]
    pathloss_exp: float = 4.0       # alpha_k
    bias: float = 1.0               # B_k
    ap_power: float = 30.0          # P_a,k [W]
    user_power: float = 3.0         # P_u,k [W]
    fd_portion: float = 0.0         # delta_k
    self_ic_db: float = -math.inf   # beta_k [dB], -inf = perfect self-IC

    @property
    def hd_density(self):
        return self.density * (1.0 - self.fd_portion)

    @property
    def fd_density(self):
        return self.density * self.fd_portion

    def mode_density(self, mode):
        return self.fd_density if DuplexMode(mode) is DuplexMode.FD else self.hd_density

    @property
    def perfect_ic(self):
        return self.self_ic_db == -math.inf

    def self_ic_residual(self, rx_power):
        """C_k(P_r) = P_r * 10^(beta_k/10); zero for perfect cancellation."""
        if self.perfect_ic:
            return 0.0
        return rx_power * 10.0 ** (self.self_ic_db / 10.0)


@dataclass(frozen=True)
class HdhnConfig:
    tiers: tuple = field(default_factory=tuple)
    rate_ap: float = 1e4        # R_a [bits/sec]
    rate_user: float = 1e4      # R_u [bits/sec]
    bandwidth: float = 1e4      # W [Hz]
    symbol_time: float = 1e-4   # T_s [sec], 공식에는 쓰이지 않음

    def __post_init__(self):
        object.__setattr__(self, "tiers", tuple(self.tiers))

    @property
    def num_tiers(self):
        return len(self.tiers)

    @property
    def total_density(self):
        return sum(t.density for t in self.tiers)

    def bias_ratio(self, i, k):
        """tau_ik = B_i / B_k"""
        return self.tiers[i].bias / self.tiers[k].bias

    @property
    def equal_alpha(self):
        alphas = {t.pathloss_exp for t in self.tiers}
        return len(alphas) <= 1

    def with_tier(self, k, **changes):
        tiers = list(self.tiers)
        tiers[k] = replace(tiers[k], **changes)
        return replace(self, tiers=tuple(tiers))

    def with_fd_portions(self, portions):
        if len(portions) != self.num_tiers:
            raise ValueError(f"need {self.num_tiers} FD portions, got {len(portions)}")
        tiers = tuple(replace(t, fd_portion=float(d)) for t, d in zip(self.tiers, portions))
        return replace(self, tiers=tiers)

    @property
    def fd_portions(self):
        return tuple(t.fd_portion for t in self.tiers)


@dataclass(frozen=True)
class LinkQuery:
    tier_index: int
    mode: DuplexMode
    direction: Direction = Direction.DOWNLINK
    target_sir: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "mode", DuplexMode(self.mode))
        object.__setattr__(self, "direction", Direction(self.direction))

    def powers(self, config):
        """(P_t, P_r) for this link: downlink AP->user, uplink user->AP."""
        tier = config.tiers[self.tier_index]
        if self.direction is Direction.UPLINK:
            return tier.user_power, tier.ap_power
        return tier.ap_power, tier.user_power

    def self_interference(self, config):
        """Residual self-interference at the receiver; HD cells have none."""
        if self.mode is DuplexMode.HD:
            return 0.0
        _, p_r = self.powers(config)
        return config.tiers[self.tier_index].self_ic_residual(p_r)


def _positive(v):
    return isinstance(v, (int, float)) and math.isfinite(v) and v > 0


def validate(config):
    """모델 불변식 검사. 위반 내용 목록을 반환 (비어 있으면 유효)"""
    violations = []
    if config.num_tiers < 1:
        violations.append("tiers: at least one tier is required (K >= 1)")

    for k, t in enumerate(config.tiers):
        where = f"tiers[{k}]"
        if not (isinstance(t.density, (int, float)) and math.isfinite(t.density) and t.density >= 0):
            violations.append(f"{where}.density: must be a finite value >= 0 (got {t.density})")
        if not (isinstance(t.pathloss_exp, (int, float)) and math.isfinite(t.pathloss_exp)
                and t.pathloss_exp > 2):
            violations.append(
                f"{where}.pathloss_exp: must be > 2 for the interference integrals "
                f"to converge (got {t.pathloss_exp})"
            )
        if not _positive(t.bias):
            violations.append(f"{where}.bias: must be > 0 (got {t.bias})")
        if not _positive(t.ap_power):
            violations.append(f"{where}.ap_power: must be > 0 W (got {t.ap_power})")
        if not _positive(t.user_power):
            violations.append(f"{where}.user_power: must be > 0 W (got {t.user_power})")
        if not (isinstance(t.fd_portion, (int, float)) and 0.0 <= t.fd_portion <= 1.0):
            violations.append(f"{where}.fd_portion: must lie in [0, 1] (got {t.fd_portion})")
        if not (isinstance(t.self_ic_db, (int, float))
                and (math.isfinite(t.self_ic_db) or t.self_ic_db == -math.inf)):
            violations.append(f"{where}.self_ic_db: must be a finite dB value or -inf (got {t.self_ic_db})")

    for name in ("rate_ap", "rate_user", "bandwidth", "symbol_time"):
        value = getattr(config, name)
        if not _positive(value):
            violations.append(f"{name}: must be > 0 (got {value})")
    return violations


def query_violations(config, query):
    """Problems with a LinkQuery against a config (empty = valid)."""
    problems = []
    if not 0 <= query.tier_index < config.num_tiers:
        problems.append(f"tier_index: {query.tier_index} outside [0, {config.num_tiers})")
    if query.direction is Direction.UPLINK and query.mode is not DuplexMode.FD:
        problems.append("direction: uplink is only defined for FD-mode cells")
    if not (math.isfinite(query.target_sir) and query.target_sir > 0):
        problems.append(f"target_sir: must be > 0 (got {query.target_sir})")
    return problems


def target_sirs(config):
    """(theta_a, theta_u) = 2^(R/W) - 1 for the AP and user rates."""
    theta_a = 2.0 ** (config.rate_ap / config.bandwidth) - 1.0
    theta_u = 2.0 ** (config.rate_user / config.bandwidth) - 1.0
    return theta_a, theta_u


# ===== config 파일 (TOML) =====

# 파일 키 -> TierParams 필드
TIER_KEYS = {
    "density": "density",
    "alpha": "pathloss_exp",
    "bias": "bias",
    "p_ap_watts": "ap_power",
    "p_user_watts": "user_power",
    "fd_portion": "fd_portion",
    "self_ic_db": "self_ic_db",
}
GLOBAL_KEYS = {
    "rate_ap": "rate_ap",
    "rate_user": "rate_user",
    "bandwidth_hz": "bandwidth",
    "symbol_time_s": "symbol_time",
}


def _as_float(value, where, problems):
    if isinstance(value, str) and value.strip().lower() in ("-inf", "-infinity"):
        return -math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        problems.append(f"{where}: expected a number (got {value!r})")
        return None
    return float(value)


def config_from_mapping(data):
    """Build an HdhnConfig from a parsed TOML mapping; raises ConfigError on unknown keys or bad types."""
    problems = []
    tiers = []
    raw_tiers = data.get("tier", [])
    if not isinstance(raw_tiers, list):
        raise ConfigError("config: 'tier' must be an array of tables", ["tier: not an array of tables"])

    for k, raw in enumerate(raw_tiers):
        kwargs = {}
        for key, value in raw.items():
            if key not in TIER_KEYS:
                problems.append(f"tier[{k}].{key}: unknown key")
                continue
            number = _as_float(value, f"tier[{k}].{key}", problems)
            if number is not None:
                kwargs[TIER_KEYS[key]] = number
        if "density" not in kwargs:
            problems.append(f"tier[{k}].density: required key missing")
            continue
        tiers.append(TierParams(**kwargs))

    globals_ = {}
    for key, value in data.items():
        if key == "tier":
            continue
        if key not in GLOBAL_KEYS:
            problems.append(f"{key}: unknown key")
            continue
        number = _as_float(value, key, problems)
        if number is not None:
            globals_[GLOBAL_KEYS[key]] = number

    if problems:
        raise ConfigError("config: " + "; ".join(problems), problems)
    return HdhnConfig(tiers=tuple(tiers), **globals_)


def load_config(path):
    """TOML 네트워크 설정 읽기. 파싱 문제는 ConfigError, 불변식 검사는 validate() 몫"""
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except OSError as e:
        raise ConfigError(f"config: cannot read {path}: {e}", [f"file: {e}"]) from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"config: {path} is not valid TOML: {e}", [f"syntax: {e}"]) from e
    config = config_from_mapping(data)
    logger.debug(f"config 로드: {path} (K={config.num_tiers})")
    return config


def _toml_number(v):
    if v == -math.inf:
        return "-inf"
    return repr(float(v))


def config_to_toml(config):
    """Serialize a config in the same format load_config reads."""
    lines = []
    for key, attr in GLOBAL_KEYS.items():
        lines.append(f"{key} = {_toml_number(getattr(config, attr))}")
    for tier in config.tiers:
        lines.append("")
        lines.append("[[tier]]")
        for key, attr in TIER_KEYS.items():
            lines.append(f"{key} = {_toml_number(getattr(tier, attr))}")
    return "\n".join(lines) + "\n"


def default_config(num_tiers=2):
    """Default parameter set: two tiers (network 1 FD, network 2 HD), optional third tier."""
    tiers = [
        TierParams(density=1e-3, pathloss_exp=4.0, bias=1.0, ap_power=30.0,
                   user_power=3.0, fd_portion=1.0, self_ic_db=-40.0),
        TierParams(density=1e-3, pathloss_exp=4.0, bias=1.0, ap_power=30.0,
                   user_power=6.0, fd_portion=0.0, self_ic_db=-30.0),
        TierParams(density=5e-4, pathloss_exp=4.0, bias=1.0, ap_power=15.0,
                   user_power=3.0, fd_portion=0.0, self_ic_db=-20.0),
    ]
    if num_tiers not in (1, 2, 3):
        raise ValueError(f"default_config supports 1..3 tiers, got {num_tiers}")
    return HdhnConfig(tiers=tuple(tiers[:num_tiers]), rate_ap=1e4, rate_user=1e4,
                      bandwidth=1e4, symbol_time=1e-4)

