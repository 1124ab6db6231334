from dataclasses import dataclass
from typing import Dict, Optional

from src.model.params import EMPTY_PARAMS, ParamSet
from src.model.state import Clearance


@dataclass(frozen=True)
class EvalContext:
    """Read-only inputs of one policy function call"""
    request_params: ParamSet
    session_params: ParamSet
    account_task_params: Dict[str, ParamSet]
    clearance_snapshot: Dict[str, Clearance]
    user: str
    account: Optional[int]
    task: str
    action: str = ''

    def task_params(self, task: str) -> ParamSet:
        return self.account_task_params.get(task, EMPTY_PARAMS)
