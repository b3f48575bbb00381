from farmsim.policy.algorithm import AssignmentPolicy
from farmsim.policy.factory import PolicyFactory
from farmsim.policy.jsq import JsqPolicy, jsq_assign, jsq_init
from farmsim.policy.pas import PasPolicy, pas_assign, pas_init, updating_upon_arrival, updating_upon_departure
from farmsim.policy.state import IndexedHeap, PolicyState

__all__ = [
    "AssignmentPolicy",
    "IndexedHeap",
    "JsqPolicy",
    "PasPolicy",
    "PolicyFactory",
    "PolicyState",
    "jsq_assign",
    "jsq_init",
    "pas_assign",
    "pas_init",
    "updating_upon_arrival",
    "updating_upon_departure",
]
