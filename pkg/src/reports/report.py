"""Run reports: building, serializing, validating and merging"""

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Union

import jsonschema
import pandas as pd

from src.config.settings import (
    INDEPENDENCE_SCHEMA_ID, MERGED_SCHEMA_ID, REPORT_SCHEMA_ID, REPORT_SCHEMA_PATH
)
from src.policy.ast import PolicySpec
from src.policy.printer import print_policy
from src.rules.checker import RuleResult, Violation
from src.statespace.graph import Edge, StateGraph, cyclic_components
from src.statespace.workload import Workload
from src.utils.logger import get_logger

logger = get_logger('app')

TREND_COLUMNS = ['workload_name', 'node_count', 'edge_count', 'budget_status', 'violated_rules']


def policy_hash(policy: PolicySpec) -> str:
    """sha256 of the canonical printed policy"""
    return hashlib.sha256(print_policy(policy).encode('utf-8')).hexdigest()


def edge_to_dict(edge: Edge) -> Dict[str, Any]:
    label = edge.label
    return {
        'source': edge.source,
        'target': edge.target,
        'client': label.client,
        'user': label.user,
        'account': label.account,
        'action': label.action,
        'params': {key: value.to_json() for key, value in label.request.params.items()},
        'decision': label.decision.value,
    }


def violation_to_dict(violation: Violation) -> Dict[str, Any]:
    return {
        'insecure_state': violation.insecure_state,
        'accumulated': violation.accumulated,
        'witness': [edge_to_dict(edge) for edge in violation.witness],
    }


def rule_result_to_dict(result: RuleResult) -> Dict[str, Any]:
    return {
        'rule_id': result.rule_id,
        'notation': result.notation,
        'status': result.status,
        'violations': [violation_to_dict(v) for v in result.violations],
    }


@dataclass
class RunReport:
    policy_hash: str
    workload_name: str
    node_count: int
    edge_count: int
    scc_count: int
    budget_status: str
    rules: List[RuleResult] = field(default_factory=list)
    independence: List[Dict[str, Any]] = field(default_factory=list)
    timing_seconds: float = 0.0

    @property
    def has_violations(self) -> bool:
        return any(r.violations for r in self.rules)

    @property
    def is_partial(self) -> bool:
        return self.budget_status != 'complete' or any(r.partial for r in self.rules)

    def to_dict(self) -> Dict[str, Any]:
        return report_to_dict(self)


def build_run_report(policy: PolicySpec, workload: Workload, graph: StateGraph,
                     rule_results: Sequence[RuleResult] = (),
                     independence: Iterable[Dict[str, Any]] = (),
                     timing_seconds: float = 0.0) -> RunReport:
    return RunReport(
        policy_hash=policy_hash(policy),
        workload_name=workload.name,
        node_count=graph.node_count,
        edge_count=graph.edge_count,
        scc_count=len(cyclic_components(graph)),
        budget_status='complete' if graph.complete else 'exceeded',
        rules=list(rule_results),
        independence=list(independence),
        timing_seconds=round(timing_seconds, 3)
    )


def report_to_dict(report: RunReport) -> Dict[str, Any]:
    return {
        'schema': REPORT_SCHEMA_ID,
        'policy_hash': report.policy_hash,
        'workload_name': report.workload_name,
        'node_count': report.node_count,
        'edge_count': report.edge_count,
        'scc_count': report.scc_count,
        'budget_status': report.budget_status,
        'rules': [rule_result_to_dict(r) for r in report.rules],
        'independence': list(report.independence),
        'timing_seconds': report.timing_seconds,
    }


def independence_document(entry: Dict[str, Any]) -> Dict[str, Any]:
    """Standalone form of one independence entry, as written by the independence command"""
    return {'schema': INDEPENDENCE_SCHEMA_ID, **entry}


def dumps_report(data: Dict[str, Any]) -> str:
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + '\n'


def write_report(data: Dict[str, Any], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_report(data), encoding='utf-8')
    logger.info(f"Report written to {path}")
    return path


def load_schema() -> Dict[str, Any]:
    with open(REPORT_SCHEMA_PATH, 'r', encoding='utf-8') as f:
        return json.load(f)


def validate_report(data: Dict[str, Any]):
    """Raises jsonschema.ValidationError when data does not follow the published schema"""
    jsonschema.validate(instance=data, schema=load_schema())


def read_report(path: Union[str, Path]) -> Dict[str, Any]:
    with open(path, 'r', encoding='utf-8') as f:
        data = json.load(f)
    validate_report(data)
    return data


def trend_table(reports: Sequence[Dict[str, Any]]) -> pd.DataFrame:
    """One row per run: workload, graph size, budget status and violated rule count"""
    rows = [
        {
            'workload_name': r['workload_name'],
            'node_count': r['node_count'],
            'edge_count': r['edge_count'],
            'budget_status': r['budget_status'],
            'violated_rules': sum(1 for rule in r['rules'] if rule['status'] == 'violated'),
        }
        for r in reports
    ]
    return pd.DataFrame(rows, columns=TREND_COLUMNS)


def merge_reports(paths: Sequence[Union[str, Path]]) -> Dict[str, Any]:
    """Run and independence documents merged into one; merged inputs are flattened"""
    runs: List[Dict[str, Any]] = []
    independence: List[Dict[str, Any]] = []
    for path in paths:
        data = read_report(path)
        if data['schema'] == MERGED_SCHEMA_ID:
            runs.extend(data['runs'])
            independence.extend(data['independence'])
        elif data['schema'] == INDEPENDENCE_SCHEMA_ID:
            independence.append({k: v for k, v in data.items() if k != 'schema'})
        else:
            runs.append(data)
    table = trend_table(runs)
    merged = {
        'schema': MERGED_SCHEMA_ID,
        'runs': runs,
        'independence': independence,
        'trend': [
            {k: (int(v) if k in ('node_count', 'edge_count', 'violated_rules') else v)
             for k, v in row.items()}
            for row in table.to_dict(orient='records')
        ],
    }
    logger.info(f"Merged {len(runs)} runs and {len(independence)} independence results "
                f"from {len(paths)} files")
    return merged
