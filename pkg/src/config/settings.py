import os
from pathlib import Path
from dotenv import load_dotenv

load_dotenv()

# Paths
BASE_DIR = Path(__file__).parent.parent.parent
LOG_DIR = Path(os.getenv('WFSEC_LOG_DIR', str(BASE_DIR / 'logs')))
FIXTURES_DIR = BASE_DIR / 'fixtures'
DOCS_DIR = BASE_DIR / 'docs'
REPORT_SCHEMA_PATH = DOCS_DIR / 'report.schema.json'

# Bank fixture files
BANK_POLICY_PATH = FIXTURES_DIR / 'bank.policy'
BANK_RULES_PATH = FIXTURES_DIR / 'bank.rules'
TABLE2_DIR = FIXTURES_DIR / 'table2'
MUTATIONS_DIR = FIXTURES_DIR / 'mutations'
EXPECTED_REPORT_PATH = FIXTURES_DIR / 'expected.report'

# Exploration budgets
DEFAULT_NODE_BUDGET = 1_000_000
DEFAULT_PATH_BUDGET = 100_000

# Report formats
REPORT_SCHEMA_ID = 'wfsec-report/1'
MERGED_SCHEMA_ID = 'wfsec-merged/1'
INDEPENDENCE_SCHEMA_ID = 'wfsec-independence/1'

# Exit codes
EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VIOLATIONS = 2
EXIT_PARTIAL = 3


def _int_from_env(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == '':
        return default
    try:
        value = int(raw)
    except ValueError:
        # logger imports settings, so resolve it lazily
        from src.utils.logger import get_logger
        get_logger('app').warning(f"Ignoring non-integer {name}={raw!r}, using {default}")
        return default
    if value <= 0:
        from src.utils.logger import get_logger
        get_logger('app').warning(f"Ignoring non-positive {name}={value}, using {default}")
        return default
    return value


def budget_from_env() -> int:
    """Node budget, WFSEC_BUDGET overrides the default"""
    return _int_from_env('WFSEC_BUDGET', DEFAULT_NODE_BUDGET)


def path_budget_from_env() -> int:
    """Path budget per query, WFSEC_PATH_BUDGET overrides the default"""
    return _int_from_env('WFSEC_PATH_BUDGET', DEFAULT_PATH_BUDGET)
