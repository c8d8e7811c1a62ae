"""In-process message passing with per-edge FIFO queues and byte counters."""

from collections import defaultdict, deque
from dataclasses import dataclass


@dataclass
class Message:
    src: str
    dst: str
    kind: str
    payload: bytes
    framing: int = 0


class Transport:
    """Named parties exchange byte messages.

    The first ``framing`` bytes of a message are a length prefix that only
    delimits it; they are counted apart from the content bytes.
    """

    def __init__(self):
        self._queues = defaultdict(deque)
        self.payload_bytes = defaultdict(int)
        self.framing_bytes = defaultdict(int)
        self.messages = defaultdict(int)

    def send(self, src, dst, kind, payload, framing=0):
        payload = bytes(payload)
        self._queues[(src, dst)].append(Message(src, dst, kind, payload, framing))
        self.payload_bytes[(src, dst, kind)] += len(payload) - framing
        self.framing_bytes[(src, dst, kind)] += framing
        self.messages[(src, dst, kind)] += 1

    def recv(self, dst, src, kind=None):
        queue = self._queues[(src, dst)]
        if not queue:
            raise LookupError(f"no message from {src} to {dst}")
        msg = queue.popleft()
        if kind is not None and msg.kind != kind:
            raise LookupError(f"expected {kind!r} from {src}, got {msg.kind!r}")
        return msg.payload

    def pending(self, dst=None):
        return sum(len(q) for (s, d), q in self._queues.items() if dst is None or d == dst)

    def bytes_of(self, kind):
        return sum(n for (s, d, k), n in self.payload_bytes.items() if k == kind)

    def counters(self):
        """Flat {"src>dst:kind": payload bytes} view, sorted for stable output."""
        return {f"{s}>{d}:{k}": n for (s, d, k), n in sorted(self.payload_bytes.items())}
