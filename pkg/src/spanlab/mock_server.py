"""Offline stand-in for a chat-completion model API.

Speaks both supported wire protocols on one port and answers from the canned
claim lists in `sample`, picking the claims whose forecast appears verbatim
in the user prompt.  Scenarios:

    valid      plain JSON claims
    fenced     the same JSON wrapped in a ```json code fence
    malformed  prose, not JSON
    flaky      HTTP 500 on the first call per example, then valid

Single-threaded request handling; callers are sequential anyway.
"""

from __future__ import annotations

import argparse
import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

from .sample import SAMPLE_CLAIMS, SAMPLE_FORECASTS

SCENARIOS = ("valid", "fenced", "malformed", "flaky")


class MockModelServer:
    def __init__(self, scenario: str = "valid", host: str = "127.0.0.1", port: int = 0):
        if scenario not in SCENARIOS:
            raise ValueError(f"scenario must be one of {', '.join(SCENARIOS)}, got {scenario!r}")
        self.scenario = scenario
        self.calls_per_example: dict[int, int] = {}
        self._lock = threading.Lock()
        self._httpd = HTTPServer((host, port), _make_handler(self))
        self.host, self.port = self._httpd.server_address[:2]
        self._thread: threading.Thread | None = None

    @property
    def base_url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def start(self) -> "MockModelServer":
        # short poll so shutdown() returns promptly
        self._thread = threading.Thread(
            target=self._httpd.serve_forever, kwargs={"poll_interval": 0.02},
            name="mock-model", daemon=True,
        )
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def __enter__(self) -> "MockModelServer":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()

    def serve_forever(self) -> None:
        self._httpd.serve_forever()

    def _respond(self, example_idx: int) -> tuple[int, str]:
        """(HTTP status, message content) for one call about one example."""
        with self._lock:
            n = self.calls_per_example.get(example_idx, 0) + 1
            self.calls_per_example[example_idx] = n
        if self.scenario == "malformed":
            return 200, "Here is what I found:\n- the numbers look off\n(sorry, no JSON today)"
        if self.scenario == "flaky" and n == 1:
            return 500, ""
        content = json.dumps({"annotations": SAMPLE_CLAIMS[example_idx]}, ensure_ascii=False)
        if self.scenario == "fenced":
            content = f"```json\n{content}\n```"
        return 200, content


def _detect_example(user_prompt: str) -> int:
    for i, forecast in enumerate(SAMPLE_FORECASTS):
        if forecast in user_prompt:
            return i
    return 0


def _make_handler(server: MockModelServer):
    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            if self.path not in ("/api/chat", "/v1/chat/completions"):
                self._send(404, {"error": f"no route {self.path}"})
                return
            try:
                length = int(self.headers.get("content-length") or 0)
                body = json.loads(self.rfile.read(length) or b"{}")
            except (ValueError, json.JSONDecodeError):
                self._send(400, {"error": "request body is not JSON"})
                return
            messages = body.get("messages") or []
            user_prompt = next(
                (m.get("content", "") for m in reversed(messages) if m.get("role") == "user"),
                "",
            )
            status, content = server._respond(_detect_example(user_prompt))
            if status != 200:
                self._send(status, {"error": "temporarily overloaded"})
                return
            model = body.get("model", "mock")
            if self.path == "/api/chat":
                reply = {
                    "model": model,
                    "message": {"role": "assistant", "content": content},
                    "done": True,
                }
            else:
                reply = {
                    "id": "mock-0",
                    "object": "chat.completion",
                    "model": model,
                    "choices": [{
                        "index": 0,
                        "message": {"role": "assistant", "content": content},
                        "finish_reason": "stop",
                    }],
                }
            self._send(200, reply)

        def _send(self, status: int, payload: dict) -> None:
            blob = json.dumps(payload, ensure_ascii=False).encode("utf-8")
            self.send_response(status)
            self.send_header("content-type", "application/json")
            self.send_header("content-length", str(len(blob)))
            self.end_headers()
            self.wfile.write(blob)

        def log_message(self, fmt, *args):
            pass

    return Handler


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(description="Offline mock of a chat-completion model API.")
    parser.add_argument("--scenario", choices=SCENARIOS, default="valid")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=11434)
    args = parser.parse_args(argv)
    server = MockModelServer(scenario=args.scenario, host=args.host, port=args.port)
    print(f"mock model server ({args.scenario}) listening on {server.base_url}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.stop()


if __name__ == "__main__":
    main()
