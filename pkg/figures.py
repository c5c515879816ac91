"""
그림 스윕.

그림 id 마다 이름 붙은 곡선(fig8/fig9 는 δ 격자)을 돌려주는 함수가 있다.
스윕하지 않는 파라미터는 불러온 설정을 따르고, 설정에 없는 tier 는 기본 파라미터로 채운다.
"""
import os
import csv
import math
import logging
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

import analytic
import montecarlo
from errors import DomainError
from model import LinkQuery, config_to_toml, default_config

logger = logging.getLogger(__name__)

BETA_GRID = [float(b) for b in range(-60, 1, 5)]
FIG3_LAMBDA2 = [0.0, 5e-4, 1e-3, 2e-3, 5e-3, 1e-2]
FIG3_SIM_BETAS = [-50.0, -30.0, -10.0]
FIG5_RATIOS = [0.1, 0.5, 1.0, 2.0, 4.0]
FIG6_USER_POWERS = [3.0, 15.0, 30.0]
FIG6_BETAS = [-30.0, -math.inf]
FIG9_SLICES = [0.0, 0.25, 0.5, 0.75, 1.0]
FIG10_TOTALS = [2e-3, 1e-2]
MODE_PAIRS = [(0, 0), (0, 1), (1, 0), (1, 1)]
REFERENCE_DENSITY = 1e-3


# ===== 일반 sweep =====

class SweepTarget(str, Enum):
    SELF_IC_DB = "self_ic_db"
    DENSITY = "density"
    FD_PORTION = "fd_portion"
    DENSITY_RATIO = "density_ratio"     # lambda_tier = value * lambda_reference
    POWER = "power"


class SweepOutput(str, Enum):
    STP = "stp"
    THROUGHPUT = "throughput"
    CELL_THROUGHPUT = "cell_throughput"
    LAPLACE = "laplace"


@dataclass(frozen=True)
class SweepSpec:
    target: SweepTarget
    tier: int
    values: tuple
    outputs: frozenset = frozenset({SweepOutput.THROUGHPUT})
    reference_tier: int = 1             # DENSITY_RATIO
    power_field: str = "user_power"     # POWER: "ap_power" or "user_power"
    query: LinkQuery = None             # STP output
    laplace_point: tuple = (1e3, 30.0)  # LAPLACE output: (s, d_min)

    def __post_init__(self):
        object.__setattr__(self, "target", SweepTarget(self.target))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "outputs", frozenset(SweepOutput(o) for o in self.outputs))
        if not self.values:
            raise DomainError("sweep values must not be empty")
        # self_ic_db 는 -inf 허용
        bad = [v for v in self.values if math.isnan(v) or v == math.inf
               or (v == -math.inf and self.target is not SweepTarget.SELF_IC_DB)]
        if bad:
            raise DomainError(f"sweep values must be finite, got {bad}")
        if self.power_field not in ("ap_power", "user_power"):
            raise DomainError(f"power_field must be ap_power or user_power, got {self.power_field}")
        if SweepOutput.STP in self.outputs and self.query is None:
            raise DomainError("an STP sweep needs a query")


def apply_target(config, spec, value):
    k = spec.tier
    if spec.target is SweepTarget.SELF_IC_DB:
        return config.with_tier(k, self_ic_db=value)
    if spec.target is SweepTarget.DENSITY:
        return config.with_tier(k, density=value)
    if spec.target is SweepTarget.FD_PORTION:
        return config.with_tier(k, fd_portion=value)
    if spec.target is SweepTarget.DENSITY_RATIO:
        return config.with_tier(k, density=value * config.tiers[spec.reference_tier].density)
    return config.with_tier(k, **{spec.power_field: value})


def run_sweep(config, spec):
    """spec.values 순서대로 [(x, {output: value})]"""
    rows = []
    for value in spec.values:
        cfg = apply_target(config, spec, value)
        result = {}
        if spec.outputs & {SweepOutput.THROUGHPUT, SweepOutput.CELL_THROUGHPUT}:
            report = analytic.throughput(cfg)
            result[SweepOutput.THROUGHPUT] = report.per_tier[spec.tier]
            result[SweepOutput.CELL_THROUGHPUT] = report.per_cell
        if SweepOutput.STP in spec.outputs:
            result[SweepOutput.STP] = analytic.stp(cfg, spec.query).value
        if SweepOutput.LAPLACE in spec.outputs:
            s, d_min = spec.laplace_point
            result[SweepOutput.LAPLACE] = analytic.laplace_fd(cfg.tiers[spec.tier], s, d_min)
        rows.append((value, {o: result[o] for o in spec.outputs}))
        logger.debug(f"sweep {spec.target.value}={value!r}: {rows[-1][1]}")
    return rows


# ===== 결과 타입 =====

@dataclass
class Curve:
    name: str
    x: list
    y: list
    stderr: list = None


@dataclass
class Grid:
    header: list                # ["delta1", ..., "S"]
    rows: list                  # [(portions..., S)]
    extrema: list = field(default_factory=list)   # [("max"|"min", portions, S)]


@dataclass(frozen=True)
class FigureOptions:
    grid_step: float = 0.05
    simulate: bool = False
    sim: montecarlo.SimSettings = None
    workers: int = 1
    points: int = 13            # log-grid resolution for density-ratio / s axes


def _ensure_tiers(config, count):
    if config.num_tiers >= count:
        return replace(config, tiers=config.tiers[:count])
    defaults = default_config(3).tiers
    logger.warning(f"⚠️ 설정의 tier 수({config.num_tiers})가 부족 - 기본 파라미터로 {count}개까지 채움")
    return replace(config, tiers=config.tiers + defaults[config.num_tiers:count])


def _label(v):
    if v == -math.inf:
        return "inf"
    return f"{v:g}"


def _log_grid(lo, hi, n):
    return [float(v) for v in np.logspace(math.log10(lo), math.log10(hi), n)]


def _sim(opts):
    return opts.sim or montecarlo.SimSettings(workers=opts.workers)


# ===== 그림별 sweep =====

def fig2(config, opts):
    """s 에 따른 FD 간섭 Laplace 변환"""
    base = replace(config.tiers[0], fd_portion=1.0)
    s_grid = _log_grid(1.0, 1e6, opts.points)
    curves = []
    for lam, d_min in [(1e-3, 10.0), (1e-3, 30.0), (1e-3, 50.0), (2e-3, 30.0)]:
        tier = replace(base, density=lam)
        name = f"lam{_label(lam)}_d{_label(d_min)}"
        curves.append(Curve(name, s_grid, [analytic.laplace_fd(tier, s, d_min) for s in s_grid]))
        if opts.simulate:
            sim = _sim(opts)
            for approx in (montecarlo.Approximation.COLOCATED, montecarlo.Approximation.EXACT):
                est = [montecarlo.estimate_laplace(tier, s, d_min, approx, sim) for s in s_grid]
                curves.append(Curve(f"{name}_mc_{approx.value}", s_grid,
                                    [e.mean for e in est], [e.stderr for e in est]))
    return curves


def _beta_sweep(config, opts, hd_per_lambda):
    curves = []
    spec = SweepSpec(SweepTarget.SELF_IC_DB, 0, BETA_GRID)
    for lam2 in FIG3_LAMBDA2:
        cfg = config.with_tier(1, density=lam2)
        fd = cfg.with_tier(0, fd_portion=1.0)
        rows = run_sweep(fd, spec)
        name = f"fd_lam2_{_label(lam2)}"
        curves.append(Curve(name, [x for x, _ in rows], [r[SweepOutput.THROUGHPUT] for _, r in rows]))
        if hd_per_lambda or lam2 == REFERENCE_DENSITY:
            hd = analytic.throughput(cfg.with_tier(0, fd_portion=0.0)).per_tier[0]
            hd_name = f"hd_lam2_{_label(lam2)}" if hd_per_lambda else "hd"
            curves.append(Curve(hd_name, list(BETA_GRID), [hd] * len(BETA_GRID)))
        if opts.simulate:
            sim = _sim(opts)
            est = [montecarlo.estimate_throughput(fd.with_tier(0, self_ic_db=b), sim)[0]
                   for b in FIG3_SIM_BETAS]
            curves.append(Curve(f"{name}_mc", list(FIG3_SIM_BETAS),
                                [e.mean for e in est], [e.stderr for e in est]))
    return curves


def fig3(config, opts):
    """FD 모드 network 1 의 beta1 에 따른 S1 (HD 기준선 포함)"""
    return _beta_sweep(_ensure_tiers(config, 2), opts, hd_per_lambda=False)


def fig4(config, opts):
    """P_a,1 = 9 W 인 fig3. 이때 HD 곡선이 lambda2 에 의존"""
    cfg = _ensure_tiers(config, 2).with_tier(0, ap_power=9.0)
    return _beta_sweep(cfg, opts, hd_per_lambda=True)


def fig5(config, opts):
    """밀도 비율별 delta1 에 따른 S1 / S1(delta1 = 0)"""
    cfg = _ensure_tiers(config, 2)
    deltas = [round(0.1 * i, 12) for i in range(11)]
    curves = []
    for orient in ("lam21", "lam12"):
        for ratio in FIG5_RATIOS:
            if orient == "lam21":
                c = cfg.with_tier(0, density=REFERENCE_DENSITY).with_tier(1, density=ratio * REFERENCE_DENSITY)
            else:
                c = cfg.with_tier(1, density=REFERENCE_DENSITY).with_tier(0, density=ratio * REFERENCE_DENSITY)
            ys = [analytic.fd_over_hd_ratio(c.with_tier(0, fd_portion=d), 0) for d in deltas]
            curves.append(Curve(f"{orient}_{_label(ratio)}", deltas, ys))
    return curves


def fig6(config, opts):
    """P_u,1, beta1 변형별 lambda1/lambda2 에 따른 S1"""
    cfg = _ensure_tiers(config, 2).with_tier(1, density=REFERENCE_DENSITY)
    ratios = _log_grid(0.1, 10.0, opts.points)
    spec = SweepSpec(SweepTarget.DENSITY_RATIO, 0, ratios, reference_tier=1)
    curves = []
    for p_user in FIG6_USER_POWERS:
        for beta in FIG6_BETAS:
            c = cfg.with_tier(0, fd_portion=1.0, user_power=p_user, self_ic_db=beta)
            rows = run_sweep(c, spec)
            curves.append(Curve(f"fd_pu{_label(p_user)}_beta{_label(beta)}", ratios,
                                [r[SweepOutput.THROUGHPUT] for _, r in rows]))
    rows = run_sweep(cfg.with_tier(0, fd_portion=0.0), spec)
    curves.append(Curve("hd", ratios, [r[SweepOutput.THROUGHPUT] for _, r in rows]))
    return curves


def _mode_pair_curves(cfg, spec, prefix=""):
    curves = []
    for d1, d2 in MODE_PAIRS:
        c = cfg.with_fd_portions((float(d1), float(d2)))
        rows = run_sweep(c, spec)
        curves.append(Curve(f"{prefix}d1_{d1}_d2_{d2}", list(spec.values),
                            [r[SweepOutput.CELL_THROUGHPUT] for _, r in rows]))
    return curves


def fig7(config, opts):
    """네 가지 모드 조합의 lambda2/lambda1 에 따른 셀 처리량"""
    cfg = _ensure_tiers(config, 2).with_tier(0, density=REFERENCE_DENSITY)
    spec = SweepSpec(SweepTarget.DENSITY_RATIO, 1, _log_grid(0.1, 10.0, opts.points),
                     {SweepOutput.CELL_THROUGHPUT}, reference_tier=0)
    return _mode_pair_curves(cfg, spec)


def fig10(config, opts):
    """총 밀도 고정, lambda1/lambda2 에 따른 셀 처리량"""
    cfg = _ensure_tiers(config, 2)
    ratios = _log_grid(0.1, 10.0, opts.points)
    curves = []
    for total in FIG10_TOTALS:
        for d1, d2 in MODE_PAIRS:
            ys = []
            for r in ratios:
                c = cfg.with_tier(0, density=total * r / (1.0 + r), fd_portion=float(d1)) \
                       .with_tier(1, density=total / (1.0 + r), fd_portion=float(d2))
                ys.append(analytic.throughput(c).per_cell)
            curves.append(Curve(f"lt{_label(total)}_d1_{d1}_d2_{d2}", ratios, ys))
    return curves


def _portion_grid(cfg, opts):
    grid = analytic.fd_portion_grid(cfg, opts.grid_step, opts.workers)
    best, worst = analytic.grid_extrema(grid)
    header = [f"delta{i + 1}" for i in range(cfg.num_tiers)] + ["S"]
    rows = [tuple(p) + (v,) for p, v in grid]
    return Grid(header, rows, [("max", best[0], best[1]), ("min", worst[0], worst[1])])


def fig8(config, opts):
    """(delta1, delta2) 격자의 총 처리량"""
    return _portion_grid(_ensure_tiers(config, 2), opts)


def fig9(config, opts):
    """3-tier delta 격자. delta3 가 단면 값인 행들이 등고선 패널이 됨"""
    return _portion_grid(_ensure_tiers(config, 3), opts)


FIGURES = {
    "fig2": fig2,
    "fig3": fig3,
    "fig4": fig4,
    "fig5": fig5,
    "fig6": fig6,
    "fig7": fig7,
    "fig8": fig8,
    "fig9": fig9,
    "fig10": fig10,
}

LOG_X = {"fig2", "fig6", "fig7", "fig10"}


# ===== 출력 =====

def _num(v):
    return repr(float(v))


def write_curve(out_dir, figure_id, curve):
    path = os.path.join(out_dir, f"{figure_id}_{curve.name}.csv")
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        header = ["x", "y", "curve"] + (["stderr"] if curve.stderr is not None else [])
        writer.writerow(header)
        for i, (x, y) in enumerate(zip(curve.x, curve.y)):
            row = [_num(x), _num(y), curve.name]
            if curve.stderr is not None:
                row.append(_num(curve.stderr[i]))
            writer.writerow(row)
    return path


def write_grid(out_dir, figure_id, grid):
    paths = [os.path.join(out_dir, f"{figure_id}_grid.csv"),
             os.path.join(out_dir, f"{figure_id}_extrema.csv")]
    with open(paths[0], "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(grid.header)
        for row in grid.rows:
            writer.writerow([_num(v) for v in row])
    with open(paths[1], "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["kind"] + grid.header)
        for kind, portions, value in grid.extrema:
            writer.writerow([kind] + [_num(v) for v in portions] + [_num(value)])
    return paths


def render_svg(out_dir, figure_id, result):
    """matplotlib Agg 로 그린 간단한 SVG 차트 (출력 결정적)"""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "hdhn"
    path = os.path.join(out_dir, f"{figure_id}.svg")

    if isinstance(result, Grid):
        n = len(result.header) - 1
        slices = FIG9_SLICES if n == 3 else [None]
        fig, axes = plt.subplots(1, len(slices), figsize=(4 * len(slices), 3.5), squeeze=False)
        for ax, d3 in zip(axes[0], slices):
            rows = [r for r in result.rows if d3 is None or abs(r[2] - d3) < 1e-9]
            if not rows:
                ax.set_visible(False)
                continue
            d1 = sorted({r[0] for r in rows})
            d2 = sorted({r[1] for r in rows})
            z = np.full((len(d2), len(d1)), np.nan)
            for r in rows:
                z[d2.index(r[1]), d1.index(r[0])] = r[-1]
            cs = ax.contourf(d1, d2, z, levels=12)
            fig.colorbar(cs, ax=ax)
            ax.set_xlabel("delta1")
            ax.set_ylabel("delta2")
            if d3 is not None:
                ax.set_title(f"delta3 = {d3:g}")
    else:
        fig, ax = plt.subplots(figsize=(6, 4))
        for c in result:
            if c.stderr is not None:
                ax.errorbar(c.x, c.y, yerr=[3 * e for e in c.stderr], fmt="o", ms=3, label=c.name)
            else:
                ax.plot(c.x, c.y, label=c.name)
        if figure_id in LOG_X:
            ax.set_xscale("log")
        ax.legend(fontsize=6)
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def run_figure(figure_id, config, out_dir, opts=None, svg=False):
    """그림을 계산해 CSV 와 실제 적용된 설정을 저장하고 저장 경로 목록을 반환"""
    if figure_id not in FIGURES:
        raise DomainError(f"unknown figure id {figure_id!r}; expected one of {', '.join(FIGURES)}")
    opts = opts or FigureOptions()
    os.makedirs(out_dir, exist_ok=True)
    logger.info(f"📊 {figure_id} 계산 시작")
    result = FIGURES[figure_id](config, opts)

    if isinstance(result, Grid):
        paths = write_grid(out_dir, figure_id, result)
    else:
        paths = [write_curve(out_dir, figure_id, c) for c in result]

    config_path = os.path.join(out_dir, f"{figure_id}_config.toml")
    with open(config_path, "w", encoding="utf-8") as f:
        f.write(config_to_toml(config))
    paths.append(config_path)

    if svg:
        paths.append(render_svg(out_dir, figure_id, result))
    logger.info(f"✅ {figure_id} 완료: 파일 {len(paths)}개 -> {out_dir}")
    return paths
