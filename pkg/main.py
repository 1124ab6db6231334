#!/usr/bin/env python3
"""Command-line entry point: simulate, explore, check, independence, report"""

import argparse
import sys
import time
from pathlib import Path
from typing import List, Optional

import jsonschema

from src.config.settings import (
    BANK_RULES_PATH, EXIT_ERROR, EXIT_OK, EXIT_PARTIAL, EXIT_VIOLATIONS, TABLE2_DIR,
    budget_from_env, path_budget_from_env
)
from src.fixtures.bank import build_bank_policy, mutate_policy
from src.policy.ast import PolicySpec
from src.policy.parser import parse_policy_file
from src.reports.report import (
    build_run_report, dumps_report, independence_document, merge_reports, trend_table,
    validate_report, write_report
)
from src.rules.checker import check_rules
from src.rules.notation import load_rules
from src.statespace.dot_export import write_dot
from src.statespace.explorer import explore
from src.statespace.graph import StateGraph
from src.statespace.workload import Workload, load_workload, simulate_workload, with_stop_on_deny
from src.subdivision.independence import (
    build_independence_report, report_to_dict, sample_states
)
from src.utils.errors import BudgetExceededError, WfsecError
from src.utils.logger import log_command, log_command_error, log_command_status

BANK = 'bank'


def load_policy(ref: str, mutation: Optional[str] = None) -> PolicySpec:
    """Policy file path, or 'bank' for the shipped fixture"""
    policy = build_bank_policy() if ref == BANK else parse_policy_file(ref)
    if mutation:
        policy = mutate_policy(policy, mutation)
    return policy


def resolve_workload(ref: str) -> Workload:
    """Workload file path, or the name of a Table II row"""
    path = Path(ref)
    if not path.exists():
        candidate = TABLE2_DIR / f'{ref}.workload'
        if candidate.exists():
            path = candidate
    return load_workload(path)


def explore_graph(policy: PolicySpec, workload: Workload, budget: int) -> StateGraph:
    """Graph of the workload; a budget overrun returns the partial graph"""
    try:
        return explore(policy, None, workload, budget)
    except BudgetExceededError as e:
        print(f"warning: {e}", file=sys.stderr)
        return e.partial


def emit(data: dict, out: Optional[str]):
    validate_report(data)
    if out:
        write_report(data, out)
    else:
        sys.stdout.write(dumps_report(data))


# sub-commands

def cmd_simulate(args) -> int:
    policy = load_policy(args.policy, args.mutation)
    workload = resolve_workload(args.workload)
    for _, response in simulate_workload(policy, workload):
        request = response.request
        payload = f" {response.payload}" if len(response.payload) else ''
        print(f"{request.client} {request.user} {request.action}{request.params} "
              f"-> {response.decision.value}{payload}")
    return EXIT_OK


def cmd_explore(args) -> int:
    policy = load_policy(args.policy, args.mutation)
    workload = resolve_workload(args.workload)
    if args.stop_on_deny:
        workload = with_stop_on_deny(workload, True)
    started = time.perf_counter()
    graph = explore_graph(policy, workload, args.budget or budget_from_env())
    report = build_run_report(policy, workload, graph, timing_seconds=time.perf_counter() - started)
    if args.dot:
        write_dot(graph, args.dot, workload.name)
    print(f"{workload.name}: {graph.node_count} nodes, {graph.edge_count} edges, "
          f"{report.scc_count} cyclic components, {report.budget_status}")
    if args.out:
        emit(report.to_dict(), args.out)
    return EXIT_PARTIAL if report.is_partial else EXIT_OK


def cmd_check(args) -> int:
    policy = load_policy(args.policy, args.mutation)
    workload = resolve_workload(args.workload)
    rules_path = args.rules or (str(BANK_RULES_PATH) if args.policy == BANK else None)
    if rules_path is None:
        raise WfsecError("check needs -r RULES unless the policy is 'bank'")
    rules = load_rules(rules_path)
    started = time.perf_counter()
    graph = explore_graph(policy, workload, args.budget or budget_from_env())
    results = check_rules(graph, rules, args.path_budget or path_budget_from_env())
    independence = []
    if args.task:
        states = sample_states(policy, workload, graph)
        independence = [report_to_dict(build_independence_report(policy, task, states))
                        for task in args.task]
    report = build_run_report(policy, workload, graph, results, independence,
                              timing_seconds=time.perf_counter() - started)
    emit(report.to_dict(), args.out)
    for result in results:
        print(f"{result.rule_id}: {result.status}", file=sys.stderr)
    if report.has_violations:
        return EXIT_VIOLATIONS
    return EXIT_PARTIAL if report.is_partial else EXIT_OK


def cmd_independence(args) -> int:
    policy = load_policy(args.policy)
    workload = resolve_workload(args.workload) if args.workload else Workload('empty')
    report = build_independence_report(policy, args.task, sample_states(policy, workload))
    emit(independence_document(report_to_dict(report)), args.out)
    return EXIT_OK


def cmd_report(args) -> int:
    merged = merge_reports(args.inputs)
    emit(merged, args.out)
    if args.csv:
        trend_table(merged['runs']).to_csv(args.csv, index=False, encoding='utf-8')
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='wfsec', description="Workflow security policy checker")
    sub = parser.add_subparsers(dest='command', required=True)

    simulate = sub.add_parser('simulate', help="deliver a workload in listed order")
    simulate.add_argument('-p', '--policy', required=True)
    simulate.add_argument('-w', '--workload', required=True)
    simulate.add_argument('--mutation')
    simulate.set_defaults(func=cmd_simulate)

    explore_cmd = sub.add_parser('explore', help="build the reachability graph")
    explore_cmd.add_argument('-p', '--policy', required=True)
    explore_cmd.add_argument('-w', '--workload', required=True)
    explore_cmd.add_argument('--stop-on-deny', action='store_true')
    explore_cmd.add_argument('--budget', type=int)
    explore_cmd.add_argument('--dot')
    explore_cmd.add_argument('--out')
    explore_cmd.add_argument('--mutation')
    explore_cmd.set_defaults(func=cmd_explore)

    check = sub.add_parser('check', help="check security rules over the reachability graph")
    check.add_argument('-p', '--policy', required=True)
    check.add_argument('-w', '--workload', required=True)
    check.add_argument('-r', '--rules')
    check.add_argument('--budget', type=int)
    check.add_argument('--path-budget', type=int)
    check.add_argument('--out')
    check.add_argument('--mutation')
    check.add_argument('-t', '--task', action='append', help="add an independence result for TASK")
    check.set_defaults(func=cmd_check)

    independence = sub.add_parser('independence', help="actions independent of a task")
    independence.add_argument('-p', '--policy', required=True)
    independence.add_argument('-t', '--task', required=True)
    independence.add_argument('-w', '--workload')
    independence.add_argument('--out')
    independence.set_defaults(func=cmd_independence)

    report = sub.add_parser('report', help="merge run reports")
    report.add_argument('inputs', nargs='+')
    report.add_argument('--out')
    report.add_argument('--csv')
    report.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    log_command(args.command, {k: v for k, v in vars(args).items() if k not in ('func', 'command')})
    try:
        status = args.func(args)
    except (WfsecError, OSError, jsonschema.ValidationError) as e:
        log_command_error(args.command, e)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    log_command_status(args.command, status)
    return status


if __name__ == "__main__":
    sys.exit(main())
