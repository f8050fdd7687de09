import json
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

import pytest

FIXTURES = Path(__file__).parent / "fixtures"


@dataclass
class FakeEndpoint:
    """Scripted read-only metrics endpoint; every request is recorded."""

    records: list
    census_rows: list = field(default_factory=list)
    fail_first: int = 0
    status: int = 503
    payload_override: object = None
    requests: list = field(default_factory=list)
    url: str = ""

    @property
    def metrics_url(self):
        return self.url + "/metrics"

    @property
    def census_url(self):
        return self.url + "/census"

    def respond(self, path, query, headers):
        self.requests.append({"path": path, "query": query, "auth": headers.get("Authorization")})
        if len(self.requests) <= self.fail_first:
            return self.status, {"error": "unavailable"}
        if self.payload_override is not None:
            return 200, self.payload_override
        if path == "/census":
            return 200, {"timestamp": "2023-08", "rows": self.census_rows}
        lo = query.get("start_date", [""])[0]
        hi = query.get("end_date", [""])[0]
        return 200, {"records": [r for r in self.records if lo <= r["date"] <= hi]}


def _handler(endpoint):
    class Handler(BaseHTTPRequestHandler):
        def do_GET(self):
            parsed = urlparse(self.path)
            status, doc = endpoint.respond(parsed.path, parse_qs(parsed.query), dict(self.headers))
            body = json.dumps(doc).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def log_message(self, *args):
            pass

    return Handler


@pytest.fixture
def endpoint():
    records = json.loads((FIXTURES / "filecoin_3day.json").read_text())["records"]
    ep = FakeEndpoint(records=records)
    server = ThreadingHTTPServer(("127.0.0.1", 0), _handler(ep))
    ep.url = f"http://127.0.0.1:{server.server_address[1]}"
    thread = threading.Thread(target=server.serve_forever, kwargs={"poll_interval": 0.02}, daemon=True)
    thread.start()
    yield ep
    server.shutdown()
    server.server_close()


@pytest.fixture
def fixtures():
    return FIXTURES


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
