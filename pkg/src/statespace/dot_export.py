from pathlib import Path
from typing import List, Union

from src.statespace.graph import StateGraph
from src.utils.logger import get_logger

logger = get_logger('app')


def _quote(text: str) -> str:
    return '"' + text.replace('\\', '\\\\').replace('"', '\\"') + '"'


def to_dot(graph: StateGraph, name: str = 'statespace') -> str:
    """DOT text: node label is the node id, edge label is client/action/decision"""
    lines: List[str] = [f'digraph {_quote(name)} {{']
    for node in graph.nodes():
        shape = ' shape=doublecircle' if node == graph.root else ''
        lines.append(f'  n{node} [label="{node}"{shape}];')
    for edge in graph.edges:
        label = f"{edge.label.client}/{edge.label.action}/{edge.label.decision.value}"
        lines.append(f'  n{edge.source} -> n{edge.target} [label={_quote(label)}];')
    lines.append('}')
    return '\n'.join(lines) + '\n'


def write_dot(graph: StateGraph, path: Union[str, Path], name: str = 'statespace') -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(to_dot(graph, name), encoding='utf-8')
    logger.info(f"DOT graph written to {path}")
    return path
