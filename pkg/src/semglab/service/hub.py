"""Fan-out of stream messages to subscribed clients.

Two planes: control messages (prompts, progress, results, status) are never
dropped; display messages (decimated signal frames) are dropped per-client
when that client's bounded queue is full, and the drop count rides along on
the next delivered display message.
"""

from __future__ import annotations

import itertools
import threading
from collections import deque


class Subscriber:
    def __init__(self, display_capacity: int = 512):
        self.control: deque = deque()
        self.display: deque = deque(maxlen=display_capacity)
        self.display_drops = 0
        self._ready = threading.Event()
        self._lock = threading.Lock()

    def put(self, message: dict, plane: str) -> None:
        with self._lock:
            if plane == "control":
                self.control.append(message)
            else:
                if len(self.display) == self.display.maxlen:
                    self.display_drops += 1
                self.display.append(message)
            self._ready.set()

    def get(self, timeout: float | None = 0.5) -> dict | None:
        """Next message (control first); None on timeout."""
        while True:
            with self._lock:
                if self.control:
                    return self.control.popleft()
                if self.display:
                    msg = self.display.popleft()
                    if self.display_drops:
                        msg = {**msg, "display_drops": self.display_drops}
                    return msg
                self._ready.clear()
            if not self._ready.wait(timeout=timeout):
                return None


class Hub:
    def __init__(self):
        self._subs: dict[int, Subscriber] = {}
        self._ids = itertools.count(1)
        self._lock = threading.Lock()

    def subscribe(self, display_capacity: int = 512) -> tuple[int, Subscriber]:
        sub = Subscriber(display_capacity)
        with self._lock:
            sid = next(self._ids)
            self._subs[sid] = sub
        return sid, sub

    def unsubscribe(self, sid: int) -> None:
        with self._lock:
            self._subs.pop(sid, None)

    def publish(self, message: dict, plane: str = "control") -> None:
        with self._lock:
            subs = list(self._subs.values())
        for sub in subs:
            sub.put(message, plane)

    @property
    def n_subscribers(self) -> int:
        with self._lock:
            return len(self._subs)
