"""Static read/write footprints of policy actions"""

from dataclasses import dataclass
from typing import FrozenSet, Iterable, List, Optional, Set

from src.policy.ast import (
    ActionSpec, ClearanceRef, CloseSession, Expr, Lit, OpenSession, ParamRef, ParamScope,
    SetClearance, SetSessParam, SetTaskParam, action_exprs, walk_expr
)

ANY_KEY = '*'

TASK = 'task'
CLEARANCE = 'clearance'
SESS = 'sess'


@dataclass(frozen=True, order=True)
class Access:
    """One storage location; key '*' stands for a key only known at run time"""
    kind: str
    task: Optional[str]
    key: str = ANY_KEY

    def overlaps(self, other: 'Access') -> bool:
        if self.kind != other.kind:
            return False
        if self.task is not None and other.task is not None and self.task != other.task:
            return False
        return self.key == ANY_KEY or other.key == ANY_KEY or self.key == other.key

    def __str__(self):
        where = f"{self.kind}:{self.task}" if self.task else self.kind
        return f"{where}[{self.key}]"


@dataclass(frozen=True)
class ActionFootprint:
    action: str
    task: str
    reads: FrozenSet[Access]
    writes: FrozenSet[Access]


def _static_key(expr: Expr) -> str:
    if isinstance(expr, Lit) and isinstance(expr.value, str):
        return expr.value
    return ANY_KEY


def _expr_reads(expr: Expr, own_task: str) -> Set[Access]:
    reads: Set[Access] = set()
    for node in walk_expr(expr):
        if isinstance(node, ParamRef):
            key = _static_key(node.key)
            if node.scope == ParamScope.TASK:
                reads.add(Access(TASK, own_task, key))
            elif node.scope == ParamScope.TASKOF:
                reads.add(Access(TASK, node.task, key))
            elif node.scope == ParamScope.SESS:
                reads.add(Access(SESS, None, key))
        elif isinstance(node, ClearanceRef):
            reads.add(Access(CLEARANCE, node.task, ANY_KEY))
    return reads


def action_footprint(action: ActionSpec) -> ActionFootprint:
    # the clearance check reads the action's own task clearance
    reads: Set[Access] = {Access(CLEARANCE, action.task, ANY_KEY)}
    writes: Set[Access] = set()
    for expr in action_exprs(action):
        reads |= _expr_reads(expr, action.task)
    for variant in (action.on_authorized, action.on_denied):
        for _, block in variant.blocks():
            for stmt in block.statements:
                if isinstance(stmt, SetTaskParam):
                    writes.add(Access(TASK, stmt.task, _static_key(stmt.key)))
                elif isinstance(stmt, SetClearance):
                    writes.add(Access(CLEARANCE, stmt.task, ANY_KEY))
                elif isinstance(stmt, SetSessParam):
                    writes.add(Access(SESS, None, _static_key(stmt.key)))
                elif isinstance(stmt, (OpenSession, CloseSession)):
                    writes.add(Access(SESS, None, ANY_KEY))
    return ActionFootprint(action.action, action.task, frozenset(reads), frozenset(writes))


def conflicting_writes(writer: ActionFootprint, readers: Iterable[ActionFootprint]) -> List[Access]:
    """Writes of `writer` that overlap a read of any reader, sorted"""
    hits: Set[Access] = set()
    for reader in readers:
        for write in writer.writes:
            if any(write.overlaps(read) for read in reader.reads):
                hits.add(write)
    return sorted(hits)
