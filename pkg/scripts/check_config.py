"""
config 파일 점검: 모델 불변식 검사 후 파생값(θ_a, θ_u, 연관 확률) 출력
"""
import sys
import os

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import analytic
from errors import ConfigError
from model import DuplexMode, load_config, validate, target_sirs


def main(path):
    try:
        config = load_config(path)
    except ConfigError as e:
        print(f"❌ {e}")
        return 2

    violations = validate(config)
    if violations:
        print(f"❌ 불변식 위반 {len(violations)}건")
        for v in violations:
            print(f"  - {v}")
        return 2

    theta_a, theta_u = target_sirs(config)
    print(f'=== {path} (K={config.num_tiers}) ===')
    print(f"θ_a = {theta_a:.6g}, θ_u = {theta_u:.6g}")
    for k, t in enumerate(config.tiers):
        beta = "perfect" if t.perfect_ic else f"{t.self_ic_db:g} dB"
        print(f"[tier {k}] λ={t.density:g} α={t.pathloss_exp:g} B={t.bias:g} "
              f"P_a={t.ap_power:g}W P_u={t.user_power:g}W δ={t.fd_portion:g} β={beta}")

    if config.total_density > 0:
        print('\n=== 연관 확률 ===')
        for k, row in enumerate(analytic.association_probabilities(config)):
            cells = ", ".join(f"{m.value}={p:.4f}" for m, p in zip(DuplexMode, row))
            print(f"[tier {k}] {cells}")
    print("\n✅ config 정상")
    return 0


if __name__ == "__main__":
    if len(sys.argv) != 2:
        print("사용법: python scripts/check_config.py <config.toml>")
        sys.exit(2)
    sys.exit(main(sys.argv[1]))
