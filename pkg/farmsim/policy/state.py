from typing import Callable, TypeAlias

from farmsim.exceptions import InvariantViolation
from farmsim.model import Scenario, TieBreak, effective_energy_efficiency

HeapKey: TypeAlias = tuple[float, ...]


class IndexedHeap:
    """
    Binary min-heap over server ids 0..n-1 with a position index,
    so that servers can be removed or re-keyed in O(log n).
    """

    def __init__(self, capacity: int) -> None:
        self._items: list[int] = []
        self._keys: list[HeapKey | None] = [None] * capacity
        self._pos: list[int] = [-1] * capacity

    def __len__(self) -> int:
        return len(self._items)

    def __contains__(self, item: int) -> bool:
        return self._pos[item] >= 0

    def items(self) -> list[int]:
        return list(self._items)

    def key(self, item: int) -> HeapKey | None:
        return self._keys[item]

    def peek(self) -> int | None:
        return self._items[0] if self._items else None

    def build(self, items: list[int], key: Callable[[int], HeapKey]) -> None:
        if self._items:
            raise InvariantViolation("build() on a non-empty heap")
        for item in items:
            self._keys[item] = key(item)
            self._pos[item] = len(self._items)
            self._items.append(item)
        for i in reversed(range(len(self._items) // 2)):
            self._sift_down(i)

    def push(self, item: int, key: HeapKey) -> None:
        if self._pos[item] >= 0:
            raise InvariantViolation(f"server {item} is already in the heap")
        self._keys[item] = key
        self._pos[item] = len(self._items)
        self._items.append(item)
        self._sift_up(len(self._items) - 1)

    def remove(self, item: int) -> None:
        i = self._pos[item]
        if i < 0:
            raise InvariantViolation(f"server {item} is not in the heap")
        last = self._items.pop()
        self._pos[item] = -1
        self._keys[item] = None
        if i < len(self._items):
            self._items[i] = last
            self._pos[last] = i
            self._sift_down(i)
            self._sift_up(self._pos[last])

    def update(self, item: int, key: HeapKey) -> None:
        i = self._pos[item]
        if i < 0:
            raise InvariantViolation(f"server {item} is not in the heap")
        old = self._keys[item]
        self._keys[item] = key
        assert old is not None
        if key < old:
            self._sift_up(i)
        elif key > old:
            self._sift_down(i)

    def _less(self, a: int, b: int) -> bool:
        return self._keys[self._items[a]] < self._keys[self._items[b]]  # type: ignore[operator]

    def _swap(self, a: int, b: int) -> None:
        items = self._items
        items[a], items[b] = items[b], items[a]
        self._pos[items[a]] = a
        self._pos[items[b]] = b

    def _sift_up(self, i: int) -> None:
        while i > 0:
            parent = (i - 1) >> 1
            if not self._less(i, parent):
                break
            self._swap(i, parent)
            i = parent

    def _sift_down(self, i: int) -> None:
        n = len(self._items)
        while True:
            left = 2 * i + 1
            if left >= n:
                break
            child = left
            if left + 1 < n and self._less(left + 1, left):
                child = left + 1
            if not self._less(child, i):
                break
            self._swap(i, child)
            i = child

    def check(self) -> None:
        """Verify the heap property and the position index."""
        for i, item in enumerate(self._items):
            if self._pos[item] != i:
                raise InvariantViolation(f"position index of server {item} is stale")
            if i > 0 and self._less(i, (i - 1) >> 1):
                raise InvariantViolation(f"heap property violated at server {item}")


class PolicyState:
    """
    Per job type j: heap H_j of the non-full servers of S_j, and the indication vector entry
    (the root of H_j, None if every available server is full). Also tracks the occupancy n_s of every server.
    """

    def __init__(self, scenario: Scenario, key: Callable[["PolicyState", int], HeapKey]) -> None:
        self.scenario = scenario
        server_groups = scenario.server_groups
        self.occupancy: list[int] = [0] * len(server_groups)
        self.capacity: list[int] = [g.buffer for g in server_groups]
        self.efficiency: list[float] = [effective_energy_efficiency(g) for g in server_groups]
        types_by_group = {g.id: scenario.types_of_group(g.id) for g in scenario.groups}
        self.types_of_server: list[list[int]] = [types_by_group[g.id] for g in server_groups]
        self.heaps: dict[int, IndexedHeap] = {j: IndexedHeap(len(server_groups)) for j in scenario.type_ids}
        self.indication: dict[int, int | None] = {j: None for j in scenario.type_ids}
        self._key = key

    def key(self, server: int) -> HeapKey:
        return self._key(self, server)

    @property
    def num_servers(self) -> int:
        return len(self.occupancy)

    def is_full(self, server: int) -> bool:
        return self.occupancy[server] >= self.capacity[server]

    def refresh_indication(self, job_type: int) -> None:
        self.indication[job_type] = self.heaps[job_type].peek()

    def populate(self) -> None:
        for j, heap in self.heaps.items():
            heap.build([s for s in self.scenario.servers_of_type(j) if not self.is_full(s)], self.key)
            self.refresh_indication(j)

    def rekey(self, server: int) -> None:
        """Occupancy of a non-full server changed and the key depends on it."""
        key = self.key(server)
        for j in self.types_of_server[server]:
            self.heaps[j].update(server, key)
            self.refresh_indication(j)

    def check_consistency(self) -> None:
        """Full O(|S|) verification of heap contents, keys and indication vector."""
        for j, heap in self.heaps.items():
            heap.check()
            expected = {s for s in self.scenario.servers_of_type(j) if not self.is_full(s)}
            if set(heap.items()) != expected:
                raise InvariantViolation(f"heap of job type {j} does not hold exactly the non-full servers")
            for s in expected:
                if heap.key(s) != self.key(s):
                    raise InvariantViolation(f"stale key of server {s} in heap of job type {j}")
            if self.indication[j] != heap.peek():
                raise InvariantViolation(f"indication vector entry of job type {j} is not the heap root")


def lltb_key(state: PolicyState, server: int) -> HeapKey:
    return -state.efficiency[server], server


def sqtb_key(state: PolicyState, server: int) -> HeapKey:
    return -state.efficiency[server], state.occupancy[server], server


def shortest_queue_key(state: PolicyState, server: int) -> HeapKey:
    return state.occupancy[server], server


def efficiency_key(tie_break: TieBreak) -> Callable[[PolicyState, int], HeapKey]:
    return sqtb_key if tie_break == TieBreak.SQTB else lltb_key
