"""HTTP client for external change predictors.

The wire protocol is a single POST endpoint:

    POST {endpoint}/v1/predict
    {"id": str, "mode": "spm" | "mpm", "sentences": [str, ...],
     "boundary_offset": int | null}

    200 -> {"id": str, "probabilities": [float, ...]}

"spm" requests carry the context sentences plus the boundary offset and
get exactly one probability back; "mpm" requests carry a window and get
len(sentences) - 1 probabilities back. Any non-200 status or malformed
body is a protocol error. Transport failures (connection, timeout) are
retried with exponential backoff up to a configured count, then surface
as TransportError carrying the request identity so callers can report
which conversation/window died.
"""

from __future__ import annotations

import itertools
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import requests

from .errors import ConfigError, ProtocolError, TransportError, ValidationError
from .predictor import Predictor
from .transcript import Sentence
from .windowing import SpmContext

PREDICT_PATH = "/v1/predict"


class RemotePredictor(Predictor):
    """Predictor that defers to an HTTP service.

    Safe for concurrent use: requests carry unique ids and the underlying
    session is thread-safe, so windows of a conversation can be predicted
    in parallel with ``predict_windows``.
    """

    kind = "remote"

    def __init__(self, endpoint: str, mode: str, timeout: float = 10.0,
                 max_retries: int = 3, backoff_base: float = 0.25,
                 max_concurrency: int = 4, session=None):
        if not endpoint:
            raise ConfigError("remote predictor needs a non-empty endpoint")
        if mode not in ("spm", "mpm"):
            raise ConfigError(f"unknown predictor mode {mode!r}")
        if max_retries < 0:
            raise ConfigError("max_retries must be >= 0")
        if max_concurrency < 1:
            raise ConfigError("max_concurrency must be >= 1")
        self.endpoint = endpoint.rstrip("/")
        self.mode = mode
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.max_concurrency = max_concurrency
        self._session = session if session is not None else requests.Session()
        self._counter = itertools.count()
        self._lock = threading.Lock()

    def _next_id(self, tag: str) -> str:
        with self._lock:
            n = next(self._counter)
        return f"{tag}-{n}"

    def _call(self, request_id: str, sentences: Sequence[str],
              boundary_offset: int | None, expected: int) -> list[float]:
        payload = {
            "id": request_id,
            "mode": self.mode,
            "sentences": list(sentences),
            "boundary_offset": boundary_offset,
        }
        url = self.endpoint + PREDICT_PATH
        last_exc: Exception | None = None
        for attempt in range(self.max_retries + 1):
            try:
                resp = self._session.post(url, json=payload, timeout=self.timeout)
            except requests.RequestException as exc:
                last_exc = exc
                if attempt < self.max_retries:
                    time.sleep(self.backoff_base * (2 ** attempt))
                continue
            return self._check_response(request_id, resp, expected)
        raise TransportError(
            f"request {request_id}: transport failed after "
            f"{self.max_retries + 1} attempts: {last_exc}")

    def _check_response(self, request_id: str, resp, expected: int) -> list[float]:
        if resp.status_code != 200:
            raise ProtocolError(
                f"request {request_id}: predictor returned status "
                f"{resp.status_code}")
        try:
            body = resp.json()
        except ValueError as exc:
            raise ProtocolError(
                f"request {request_id}: response is not JSON: {exc}") from exc
        if not isinstance(body, dict):
            raise ProtocolError(f"request {request_id}: response is not an object")
        if body.get("id") != request_id:
            raise ProtocolError(
                f"request {request_id}: response id {body.get('id')!r} does "
                f"not match")
        probs = body.get("probabilities")
        if not isinstance(probs, list) or len(probs) != expected:
            got = len(probs) if isinstance(probs, list) else type(probs).__name__
            raise ProtocolError(
                f"request {request_id}: expected {expected} probabilities, "
                f"got {got}")
        out = []
        for p in probs:
            if not isinstance(p, (int, float)) or isinstance(p, bool) \
                    or not 0.0 <= float(p) <= 1.0:
                raise ProtocolError(
                    f"request {request_id}: probability {p!r} outside [0, 1]")
            out.append(float(p))
        return out

    def predict_boundary(self, ctx: SpmContext) -> float:
        if self.mode != "spm":
            raise ConfigError("predict_boundary needs mode='spm'")
        request_id = self._next_id(f"spm-{ctx.change_index}")
        probs = self._call(request_id, [s.text for s in ctx.sentences],
                           ctx.boundary_offset, expected=1)
        return probs[0]

    def predict_window(self, sentences: Sequence[Sentence]) -> list[float]:
        if self.mode != "mpm":
            raise ConfigError("predict_window needs mode='mpm'")
        sents = list(sentences)
        if len(sents) < 2:
            raise ValidationError("window must contain at least 2 sentences")
        request_id = self._next_id("mpm")
        return self._call(request_id, [s.text for s in sents], None,
                          expected=len(sents) - 1)

    def predict_windows(self, windows: Sequence[Sequence[Sentence]]
                        ) -> list[list[float]]:
        """Predict several windows concurrently, preserving order."""
        if len(windows) <= 1 or self.max_concurrency == 1:
            return [self.predict_window(w) for w in windows]
        with ThreadPoolExecutor(max_workers=self.max_concurrency) as pool:
            return list(pool.map(self.predict_window, windows))
