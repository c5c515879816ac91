"""
fig2 ~ fig10 전체를 한 디렉토리에 생성 (run.sh 에서 호출)
"""
import sys
import os
import time

# Force unbuffered output
sys.stdout.reconfigure(line_buffering=True)

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import settings
import figures
from errors import HdhnError
from model import load_config, validate

if __name__ == "__main__":
    settings.setup_logging()
    config_path = sys.argv[1] if len(sys.argv) > 1 else "configs/default.toml"
    out_dir = sys.argv[2] if len(sys.argv) > 2 else settings.OUT_DIR

    print("=" * 70)
    print(f"🚀 그림 재현 시작: {config_path} -> {out_dir}")
    print("=" * 70)

    config = load_config(config_path)
    violations = validate(config)
    if violations:
        for v in violations:
            print(f"❌ {v}")
        sys.exit(2)

    opts = figures.FigureOptions(workers=settings.WORKERS)
    failed = []
    for figure_id in figures.FIGURES:
        started = time.time()
        try:
            figures.run_figure(figure_id, config, out_dir, opts, svg=True)
            print(f"✅ {figure_id} ({time.time() - started:.1f}s)")
        except HdhnError as e:
            print(f"❌ {figure_id}: {e}")
            failed.append(figure_id)

    print("=" * 70)
    if failed:
        print(f"⚠️ 실패: {', '.join(failed)}")
        sys.exit(3)
    print("✅ 전체 그림 재현 완료!")
    print("=" * 70)
