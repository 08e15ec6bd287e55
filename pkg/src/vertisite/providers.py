"""Travel-time sources: a CSV-backed table or a JSON-over-HTTP routing service."""

from __future__ import annotations

import json
import logging
import os
import threading
import time
import urllib.error
import urllib.request
from typing import Iterable, Mapping, Protocol

from .models import Position, TravelTimeRecord

log = logging.getLogger(__name__)

DEFAULT_API_KEY_ENV = "VERTISITE_API_KEY"


class ProviderError(RuntimeError):
    pass


class MissingPairError(KeyError):
    code = "MISSING_PAIR"

    def __init__(self, dest_id, node_id):
        super().__init__((dest_id, node_id))
        self.dest_id, self.node_id = dest_id, node_id

    def __str__(self):
        return f"MISSING_PAIR: no travel time for destination {self.dest_id!r}, node {self.node_id!r}"


class TravelTimeProvider(Protocol):
    def query(self, dest_id: str, node_id: str) -> float: ...


class FileTravelTimeProvider:
    def __init__(self, records: Iterable[TravelTimeRecord]):
        self._table = {(r.dest_id, r.node_id): float(r.minutes) for r in records}

    @classmethod
    def from_csv(cls, path) -> "FileTravelTimeProvider":
        from .ingest import read_travel_times

        return cls(read_travel_times(path))

    def query(self, dest_id: str, node_id: str) -> float:
        try:
            return self._table[(dest_id, node_id)]
        except KeyError:
            raise MissingPairError(dest_id, node_id) from None


def file_travel_time_provider(csv_path) -> FileTravelTimeProvider:
    return FileTravelTimeProvider.from_csv(csv_path)


class HttpTravelTimeProvider:
    """POSTs ``{"origin": {x, y}, "destination": {x, y}}`` and reads ``{"minutes": float}``.

    Origin is the transport node, destination is the park. The API key is read
    from the environment and sent as ``X-API-Key``. Answers are memoized per
    pair under a lock so concurrent callers see one value per run.
    """

    def __init__(self, endpoint: str, destinations: Mapping[str, Position],
                 nodes: Mapping[str, Position], api_key_env: str = DEFAULT_API_KEY_ENV,
                 max_attempts: int = 3, backoff_s: float = 0.5, timeout_s: float = 30.0):
        key = os.environ.get(api_key_env)
        if not key:
            raise ProviderError(f"environment variable {api_key_env} with the API key is not set")
        self.endpoint = endpoint
        self._key = key
        self._dests = dict(destinations)
        self._nodes = dict(nodes)
        self.max_attempts = max_attempts
        self.backoff_s = backoff_s
        self.timeout_s = timeout_s
        self._cache: dict[tuple[str, str], float] = {}
        self._lock = threading.Lock()

    def query(self, dest_id: str, node_id: str) -> float:
        pair = (dest_id, node_id)
        with self._lock:
            if pair in self._cache:
                return self._cache[pair]
            if dest_id not in self._dests or node_id not in self._nodes:
                raise MissingPairError(dest_id, node_id)
            minutes = self._fetch(pair)
            self._cache[pair] = minutes
            return minutes

    def _fetch(self, pair) -> float:
        (ox, oy), (dx, dy) = self._nodes[pair[1]], self._dests[pair[0]]
        body = json.dumps({"origin": {"x": ox, "y": oy},
                           "destination": {"x": dx, "y": dy}}).encode()
        last = None
        for attempt in range(1, self.max_attempts + 1):
            req = urllib.request.Request(self.endpoint, data=body, method="POST", headers={
                "Content-Type": "application/json", "X-API-Key": self._key})
            try:
                with urllib.request.urlopen(req, timeout=self.timeout_s) as resp:
                    payload = resp.read()
                break
            except urllib.error.HTTPError as exc:
                if exc.code < 500 and exc.code != 429:
                    raise ProviderError(f"pair {pair}: HTTP {exc.code} from {self.endpoint}") from exc
                last = f"HTTP {exc.code}"
            except (urllib.error.URLError, TimeoutError, ConnectionError) as exc:
                last = str(exc)
            log.warning("travel-time request for %s failed (attempt %d/%d): %s",
                        pair, attempt, self.max_attempts, last)
            if attempt < self.max_attempts:
                time.sleep(self.backoff_s * 2 ** (attempt - 1))
        else:
            raise ProviderError(f"pair {pair}: giving up after {self.max_attempts} attempts ({last})")
        try:
            minutes = float(json.loads(payload)["minutes"])
        except (ValueError, KeyError, TypeError) as exc:
            raise ProviderError(f"pair {pair}: malformed response {payload[:200]!r}") from exc
        if not minutes >= 0:
            raise ProviderError(f"pair {pair}: invalid minutes {minutes!r}")
        return minutes


def http_travel_time_provider(endpoint, destinations, nodes, api_key_env=DEFAULT_API_KEY_ENV, **kw):
    return HttpTravelTimeProvider(endpoint, destinations, nodes, api_key_env, **kw)
