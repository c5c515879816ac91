"""
HDHN command-line front end.

    python hdhn_cli.py compute configs/default.toml --metric throughput
    python hdhn_cli.py figure fig8 configs/default.toml --out results
    python hdhn_cli.py validate configs/default.toml --quick

CSV goes to stdout, logs to stderr (and HDHN_LOG_FILE).
Exit codes: 0 ok, 1 validation check failed, 2 bad input, 3 numeric failure.
"""
import os
import sys
import csv
import math
import time
import argparse
import logging
import traceback
from dataclasses import replace

from scipy.integrate import quad
from scipy.stats import qmc

import settings
import analytic
import montecarlo
import figures
import specfun
from errors import ConfigError, ConvergenceError, DomainError, DegenerateNetworkError, HdhnError
from model import (DuplexMode, Direction, LinkQuery, load_config, validate, query_violations,
                   target_sirs, default_config)

logger = logging.getLogger("hdhn")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_BAD_INPUT = 2
EXIT_NUMERIC = 3

DEFAULT_TOL = 1e-6


class _ArgumentParser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; keep that but route through main()'s return value."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(f"{self.prog}: error: {message}", [message])


def _fmt(v):
    return repr(float(v))


def _writer():
    return csv.writer(sys.stdout, lineterminator="\n")


def _load(path):
    config = load_config(path)
    violations = validate(config)
    if violations:
        raise ConfigError(f"config: {path} violates {len(violations)} model invariant(s)", violations)
    return config


def _sim_settings(args):
    return montecarlo.SimSettings(
        realizations=args.realizations,
        seed=args.seed,
        workers=args.workers,
        approximation=montecarlo.Approximation(args.approximation),
    )


# ===== compute =====

def _queries(config, args):
    if args.tier is not None:
        modes = [DuplexMode(args.mode)] if args.mode else list(DuplexMode)
        directions = [Direction(args.direction)] if args.direction else list(Direction)
        tiers = [args.tier]
    else:
        modes, directions, tiers = list(DuplexMode), list(Direction), range(config.num_tiers)
    theta_a, theta_u = target_sirs(config)
    out = []
    for k in tiers:
        for m in modes:
            for d in directions:
                # HD 상향링크는 명시적으로 요청한 경우에만 (검증에서 거부됨)
                if d is Direction.UPLINK and m is DuplexMode.HD and args.mode != "hd":
                    continue
                theta = args.theta if args.theta is not None else (theta_u if d is Direction.UPLINK else theta_a)
                out.append(LinkQuery(k, m, d, theta))
    for q in out:
        problems = query_violations(config, q)
        if problems:
            raise ConfigError("query: " + "; ".join(problems), problems)
    return out


def cmd_compute(args):
    config = _load(args.config)
    w = _writer()
    sim = _sim_settings(args) if args.simulate else None
    mc_header = ["mc_mean", "mc_stderr"] if sim else []

    if args.metric == "throughput":
        report = analytic.throughput(config)
        estimates = montecarlo.estimate_throughput(config, sim) if sim else None
        w.writerow(["quantity", "value"] + mc_header)
        for k, s_k in enumerate(report.per_tier):
            row = [f"S_{k + 1}", _fmt(s_k)]
            if estimates:
                row += [_fmt(estimates[k].mean), _fmt(estimates[k].stderr)]
            w.writerow(row)
        w.writerow(["S", _fmt(report.total)] + ([""] * len(mc_header)))
        w.writerow(["S_c", _fmt(report.per_cell)] + ([""] * len(mc_header)))

    elif args.metric == "stp":
        w.writerow(["tier", "mode", "direction", "theta", "stp", "method"] + mc_header)
        for q in _queries(config, args):
            res = analytic.stp(config, q)
            row = [q.tier_index, q.mode.value, q.direction.value, _fmt(q.target_sir),
                   _fmt(res.value), res.method.value]
            if sim:
                est = montecarlo.estimate_stp(config, q, sim)
                row += [_fmt(est.mean), _fmt(est.stderr)]
            w.writerow(row)

    elif args.metric == "association":
        w.writerow(["tier", "mode", "probability"])
        for k, row in enumerate(analytic.association_probabilities(config)):
            for m, p in zip(DuplexMode, row):
                w.writerow([k, m.value, _fmt(p)])

    elif args.metric == "optimal":
        portions, value = analytic.optimal_fd_portions(config, args.grid_step, args.workers)
        w.writerow([f"delta{i + 1}" for i in range(len(portions))] + ["S"])
        w.writerow([_fmt(d) for d in portions] + [_fmt(value)])
    return EXIT_OK


# ===== figure =====

def cmd_figure(args):
    config = _load(args.config)
    opts = figures.FigureOptions(
        grid_step=args.grid_step,
        simulate=args.simulate,
        sim=_sim_settings(args) if args.simulate else None,
        workers=args.workers,
    )
    paths = figures.run_figure(args.figure, config, args.out, opts, svg=args.svg)
    w = _writer()
    w.writerow(["path"])
    for p in paths:
        w.writerow([p])
    return EXIT_OK


# ===== validate =====

def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def _with_alpha(config, alpha):
    return replace(config, tiers=tuple(replace(t, pathloss_exp=alpha) for t in config.tiers))


def _all_queries(config):
    theta_a, theta_u = target_sirs(config)
    out = []
    for k, t in enumerate(config.tiers):
        out.append(LinkQuery(k, DuplexMode.HD, Direction.DOWNLINK, theta_a))
        out.append(LinkQuery(k, DuplexMode.FD, Direction.DOWNLINK, theta_a))
        out.append(LinkQuery(k, DuplexMode.FD, Direction.UPLINK, theta_u))
    return out


def check_specfun_i1(config, args):
    n = 8 if args.quick else 32
    pts = qmc.Halton(d=4, scramble=False).random(n + 1)[1:]
    worst = 0.0
    for u in pts:
        x = 1.0 + 2.0 * u[0]
        y = 0.05 + 2.0 * u[1]
        z = -0.9 + 0.8 * u[2]
        nu = 10.0 ** (-3.0 + 7.0 * u[3])
        worst = max(worst, _rel(specfun.integral_i1(x, y, z, nu).value,
                                specfun.integral_i1_quadrature(x, y, z, nu).value))
    return worst < args.tol, f"max rel diff {worst:.3e} over {n} points"


def check_specfun_i0(config, args):
    n = 8 if args.quick else 32
    pts = qmc.Halton(d=3, scramble=False).random(n + 1)[1:]
    worst = 0.0
    for u in pts:
        y = 10.0 ** (-2.0 + 3.0 * u[0])
        z = 10.0 ** (4.0 * u[1])
        nu = 2.5 + 3.5 * u[2]
        worst = max(worst, _rel(specfun.integral_i0(y, z, nu).value,
                                specfun.integral_i0_quadrature(y, z, nu).value))
    return worst < args.tol, f"max rel diff {worst:.3e} over {n} points"


def check_alpha4_closed_form(config, args):
    cfg = _with_alpha(config, 4.0)
    worst = 0.0
    for q in _all_queries(cfg):
        worst = max(worst, _rel(analytic.stp_alpha4(cfg, q).value, analytic.stp_general(cfg, q).value))
    return worst < args.tol, f"max rel diff {worst:.3e}"


def check_perfect_ic_closed_form(config, args):
    alpha = config.tiers[0].pathloss_exp
    cfg = replace(config, tiers=tuple(replace(t, pathloss_exp=alpha, self_ic_db=-math.inf)
                                      for t in config.tiers))
    worst = 0.0
    for q in _all_queries(cfg):
        worst = max(worst, _rel(analytic.stp_perfect_ic(cfg, q).value, analytic.stp_general(cfg, q).value))
    return worst < args.tol, f"max rel diff {worst:.3e}"


def check_hd_reduction(config, args):
    alpha = config.tiers[0].pathloss_exp
    cfg = _with_alpha(config, alpha)
    worst = 0.0
    for k in range(cfg.num_tiers):
        hd = cfg.with_tier(k, fd_portion=0.0)
        if hd.tiers[k].density == 0:
            continue
        worst = max(worst, _rel(analytic.hd_tier_throughput(hd, k), analytic.throughput(hd, stp_fn=analytic.stp_general).per_tier[k]))
    return worst < args.tol, f"max rel diff {worst:.3e}"


def check_association_sum(config, args):
    total = sum(sum(row) for row in analytic.association_probabilities(config))
    return abs(total - 1.0) < args.tol, f"sum = {total!r}"


def check_link_pdf_normalisation(config, args):
    worst = 0.0
    for k, t in enumerate(config.tiers):
        if t.density == 0:
            continue
        pdf = lambda x: analytic.link_distance_pdf(config, k, x)
        split = 50.0 / math.sqrt(config.total_density)
        head, _ = quad(pdf, 0.0, split, epsabs=1e-12, epsrel=1e-10, limit=400)
        tail, _ = quad(pdf, split, math.inf, epsabs=1e-12, epsrel=1e-10, limit=400)
        mass = head + tail
        worst = max(worst, abs(mass - 1.0))
    return worst < args.tol, f"max |mass - 1| {worst:.3e}"


def check_bias_scaling(config, args):
    scaled = replace(config, tiers=tuple(replace(t, bias=t.bias * 7.3) for t in config.tiers))
    a = analytic.throughput(config).total
    b = analytic.throughput(scaled).total
    return _rel(b, a) < args.tol, f"rel diff {_rel(b, a):.3e}"


def check_power_scaling(config, args):
    scaled = replace(config, tiers=tuple(replace(t, ap_power=t.ap_power * 2.5, user_power=t.user_power * 2.5)
                                         for t in config.tiers))
    a = analytic.throughput(config).total
    b = analytic.throughput(scaled).total
    return _rel(b, a) < args.tol, f"rel diff {_rel(b, a):.3e}"


def check_mc_stp(config, args):
    sim = _sim_settings(args)
    theta_a, _ = target_sirs(config)
    q = LinkQuery(0, DuplexMode.FD, Direction.DOWNLINK, theta_a)
    value = analytic.stp(config, q).value
    est = montecarlo.estimate_stp(config, q, sim)
    return est.within(value), f"analytic {value:.5f}, MC {est.mean:.5f} ± {est.stderr:.5f}"


def check_mc_laplace(config, args):
    sim = _sim_settings(args)
    tier = replace(config.tiers[0], density=1e-3, fd_portion=1.0)
    bad = []
    for s in (1e2, 1e3, 1e4):
        value = analytic.laplace_fd(tier, s, 30.0)
        est = montecarlo.estimate_laplace(tier, s, 30.0, montecarlo.Approximation.COLOCATED, sim)
        if not est.within(value):
            bad.append(f"s={s:g}: {value:.5f} vs {est.mean:.5f}±{est.stderr:.5f}")
    return not bad, "; ".join(bad) or "all s within 3 stderr"


# 처리량 MC 는 관측 원판의 모든 AP 를 돌리므로 실현 횟수를 줄임
MC_THROUGHPUT_REALIZATIONS = 200


def check_mc_throughput(config, args):
    sim = replace(_sim_settings(args), realizations=min(args.realizations, MC_THROUGHPUT_REALIZATIONS))
    values = analytic.throughput(config).per_tier
    estimates = montecarlo.estimate_throughput(config, sim)
    bad = [f"S_{k + 1}: {v:.4e} vs {e.mean:.4e}±{e.stderr:.1e}"
           for k, (v, e) in enumerate(zip(values, estimates)) if not e.within(v)]
    return not bad, "; ".join(bad) or "all tiers within 3 stderr"


def check_mc_association(config, args):
    freq = montecarlo.estimate_association(config, _sim_settings(args))
    bad = []
    for k, row in enumerate(analytic.association_probabilities(config)):
        for m, value in zip((DuplexMode.HD, DuplexMode.FD), row):
            est = freq[(k, m)]
            if not est.within(value):
                bad.append(f"tier {k + 1} {m.value}: {value:.4f} vs {est.mean:.4f}±{est.stderr:.4f}")
    return not bad, "; ".join(bad) or "all (tier, mode) within 3 stderr"


def check_fig8_argmax(config, args):
    if config != default_config(2):
        return True, "skipped (config is not the default parameter set)"
    portions, value = analytic.optimal_fd_portions(config, args.grid_step, args.workers)
    return portions == [1.0, 0.0], f"argmax {portions} (S={value:.6g})"


# (이름, 함수, quick 포함 여부)
CHECKS = [
    ("specfun_i1_closed_form", check_specfun_i1, True),
    ("specfun_i0_closed_form", check_specfun_i0, True),
    ("stp_alpha4_vs_quadrature", check_alpha4_closed_form, True),
    ("stp_perfect_ic_vs_quadrature", check_perfect_ic_closed_form, True),
    ("hd_tier_reduction", check_hd_reduction, True),
    ("association_sum", check_association_sum, True),
    ("link_pdf_normalisation", check_link_pdf_normalisation, True),
    ("bias_scaling_invariance", check_bias_scaling, True),
    ("power_scaling_invariance", check_power_scaling, True),
    ("mc_stp_agreement", check_mc_stp, False),
    ("mc_laplace_agreement", check_mc_laplace, False),
    ("mc_throughput_agreement", check_mc_throughput, False),
    ("mc_association_agreement", check_mc_association, False),
    ("fig8_argmax", check_fig8_argmax, True),
]


def cmd_validate(args):
    config = _load(args.config)
    w = _writer()
    w.writerow(["check", "status", "detail"])
    failed = []
    for name, fn, quick in CHECKS:
        if args.quick and not quick:
            continue
        started = time.time()
        try:
            ok, detail = fn(config, args)
        except HdhnError as e:
            ok, detail = False, f"{type(e).__name__}: {e}"
        elapsed = time.time() - started
        w.writerow([name, "PASS" if ok else "FAIL", detail])
        if ok:
            logger.info(f"✅ {name} ({elapsed:.1f}s)")
        else:
            logger.error(f"❌ {name}: {detail}")
            failed.append(name)
    if failed:
        logger.error(f"❌ 검증 실패 {len(failed)}건: {', '.join(failed)}")
        return EXIT_CHECK_FAILED
    logger.info("✅ 모든 검증 통과")
    return EXIT_OK


# ===== 진입점 =====

def build_parser():
    parser = _ArgumentParser(description="HDHN throughput calculator")
    parser.add_argument("--log-level", default=None, help=f"로그 레벨 (기본값: {settings.LOG_LEVEL})")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    def common(p):
        p.add_argument("--simulate", action="store_true", help="Monte Carlo 추정치도 계산")
        p.add_argument("--realizations", type=int, default=settings.REALIZATIONS)
        p.add_argument("--seed", type=int, default=settings.SEED)
        p.add_argument("--workers", type=int, default=settings.WORKERS)
        p.add_argument("--approximation", choices=[a.value for a in montecarlo.Approximation],
                       default=montecarlo.Approximation.COLOCATED.value,
                       help="FD 간섭 사용자 위치 (colocated: AP 위치, exact: 실제 위치)")
        p.add_argument("--grid-step", type=float, default=0.05)

    p = sub.add_parser("compute", help="analytic quantities as CSV")
    p.add_argument("config")
    p.add_argument("--metric", choices=["throughput", "stp", "association", "optimal"], default="throughput")
    p.add_argument("--tier", type=int, default=None)
    p.add_argument("--mode", choices=[m.value for m in DuplexMode], default=None)
    p.add_argument("--direction", choices=[d.value for d in Direction], default=None)
    p.add_argument("--theta", type=float, default=None, help="target SIR (기본값: 2^(R/W)-1)")
    common(p)
    p.set_defaults(func=cmd_compute)

    p = sub.add_parser("figure", help="figure sweep CSVs")
    p.add_argument("figure", choices=list(figures.FIGURES))
    p.add_argument("config")
    p.add_argument("--out", default=settings.OUT_DIR)
    p.add_argument("--svg", action="store_true")
    common(p)
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("validate", help="cross-check suite")
    p.add_argument("config")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--quick", action="store_true", help="Monte Carlo 검사 생략")
    common(p)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as e:
        print(e, file=sys.stderr)
        return EXIT_BAD_INPUT
    if args.log_level:
        logging.getLogger().setLevel(getattr(logging, args.log_level.upper(), logging.INFO))

    try:
        return args.func(args)
    except ConfigError as e:
        logger.error(f"❌ {e}")
        for v in e.violations:
            print(v, file=sys.stderr)
        return EXIT_BAD_INPUT
    except DegenerateNetworkError as e:
        logger.error(f"❌ 입력 오류: {e}")
        return EXIT_BAD_INPUT
    except (ConvergenceError, DomainError) as e:
        logger.error(f"❌ 수치 계산 실패: {e}")
        return EXIT_NUMERIC


if __name__ == "__main__":
    settings.setup_logging()
    logger.info("=" * 60)
    logger.info(f"HDHN 계산 시작: {' '.join(sys.argv[1:])}")
    logger.info(f"작업 디렉토리: {os.getcwd()}")

    exit_code = EXIT_OK
    try:
        exit_code = main()
    except Exception as e:
        logger.error(f"❌ 치명적 오류 발생: {e}")
        logger.error(f"상세 오류:\n{traceback.format_exc()}")
        exit_code = EXIT_NUMERIC
    finally:
        logger.info(f"프로세스 종료 (exit_code: {exit_code})")
        logger.info("=" * 60)
        sys.exit(exit_code)
