import os
import sys
import logging
from logging.handlers import RotatingFileHandler

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# 실행 환경 설정 (CLI 플래그가 있으면 플래그가 우선)
WORKERS = int(os.getenv("HDHN_WORKERS", 1))
SEED = int(os.getenv("HDHN_SEED", 2017))
REALIZATIONS = int(os.getenv("HDHN_REALIZATIONS", 20000))
OUT_DIR = os.getenv("HDHN_OUT_DIR", "results")
LOG_FILE = os.getenv("HDHN_LOG_FILE", "hdhn_log.txt")
LOG_LEVEL = os.getenv("HDHN_LOG_LEVEL", "INFO")

# STP 외부 적분 절단점 상한 (u = r^2 단위, 넘으면 수렴 실패로 처리)
STP_MAX_U = float(os.getenv("HDHN_STP_MAX_U", 1e12))

# 워커 하나가 한 번에 처리하는 realization 수
CHUNK = int(os.getenv("HDHN_CHUNK", 2000))

LOG_FORMAT = '%(asctime)s [%(levelname)s] %(message)s'


def setup_logging(log_file=None, level=None):
    """Root logger: rotating file (10MB x 10) plus stderr."""
    log_file = LOG_FILE if log_file is None else log_file
    level = level or LOG_LEVEL

    # stdout은 CSV 출력용이므로 콘솔 로그는 stderr로 보냄
    handlers = [logging.StreamHandler(sys.stderr)]
    if log_file:
        handlers.insert(0, RotatingFileHandler(
            log_file, maxBytes=10 * 1024 * 1024, backupCount=10,
            encoding='utf-8', delay=True
        ))

    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format=LOG_FORMAT,
        handlers=handlers
    )
    return logging.getLogger("hdhn")
