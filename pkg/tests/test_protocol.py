"""Wire-protocol tests: framing, loopback fidelity, failure modes."""

import io
import json

import numpy as np
import pytest

from sillopt import oracle
from sillopt.design_space import ThicknessVector


@pytest.fixture(scope="module")
def server(oracle7):
    with oracle.OracleServer(oracle7) as srv:
        yield srv


class TestHandleRequestLine:
    def test_ok_response_echoes_id(self, oracle7, space7):
        t = space7.midpoint()
        line = json.dumps({"id": "req-1", "t": list(t.values)})
        resp = oracle.handle_request_line(oracle7, line)
        local = oracle.evaluate(oracle7, t)
        assert resp["id"] == "req-1"
        assert resp["status"] == "ok"
        assert resp["ea_ss"] == local.ea_ss
        assert resp["message"] is None

    def test_malformed_json(self, oracle7):
        resp = oracle.handle_request_line(oracle7, "{nope")
        assert resp["status"] == "invalid_request"
        assert "JSON" in resp["message"]

    def test_wrong_arity(self, oracle7):
        resp = oracle.handle_request_line(oracle7, json.dumps({"id": "x", "t": [1.0, 2.0]}))
        assert resp["status"] == "invalid_request"
        assert resp["id"] == "x"

    def test_missing_field(self, oracle7):
        resp = oracle.handle_request_line(oracle7, json.dumps({"id": "x"}))
        assert resp["status"] == "invalid_request"

    def test_non_finite_rejected(self, oracle7):
        resp = oracle.handle_request_line(
            oracle7, '{"id": "x", "t": [1.0, 2.0, 3.0, 1.0, 2.0, 3.0, Infinity]}'
        )
        assert resp["status"] == "invalid_request"


class TestStdio:
    def test_serves_lines_until_eof(self, oracle7, space7):
        t = space7.midpoint()
        requests = "\n".join(
            json.dumps({"id": f"q{i}", "t": list(t.values)}) for i in range(3)
        )
        stdin = io.StringIO(requests + "\n" + "garbage\n")
        stdout = io.StringIO()
        oracle.serve_stdio(oracle7, stdin=stdin, stdout=stdout)
        lines = stdout.getvalue().strip().splitlines()
        assert len(lines) == 4
        for i in range(3):
            assert json.loads(lines[i])["id"] == f"q{i}"
            assert json.loads(lines[i])["status"] == "ok"
        assert json.loads(lines[3])["status"] == "invalid_request"


class TestTcp:
    def test_loopback_matches_local_eval(self, server, oracle7, space7):
        rng = np.random.default_rng(17)
        with oracle.OracleClient(server.endpoint) as client:
            for _ in range(25):
                t = space7.random_grid_sample(rng)
                remote = client.query(t)
                local = oracle.evaluate(oracle7, t)
                assert remote.ea_ss == local.ea_ss
                assert remote.ea_f == local.ea_f
                assert remote.mass == local.mass
                assert remote.pcf == local.pcf

    def test_sequential_requests_in_order(self, server, space7):
        t = space7.midpoint()
        with oracle.OracleClient(server.endpoint) as client:
            first = client.query(t)
            second = client.query(ThicknessVector.of([p.max for p in space7.params]))
        assert first.mass < second.mass

    def test_one_shot_query(self, server, oracle7, space7):
        t = space7.midpoint()
        tri = oracle.query_external(server.endpoint, t)
        assert tri.mass == oracle.evaluate(oracle7, t).mass

    def test_invalid_request_raises(self, server, space7):
        with pytest.raises(oracle.OracleResponseError, match="invalid_request"):
            oracle.query_external(server.endpoint, ThicknessVector.of([1.0, 2.0]))

    def test_unreachable_endpoint(self):
        with pytest.raises(oracle.OracleTimeoutError):
            oracle.query_external("127.0.0.1:1", ThicknessVector.of([1.0]), timeout=0.3)

    def test_slow_server_times_out(self, oracle7, space7):
        slow = oracle.OracleConfig.from_json_obj({**oracle7.to_json_obj(), "latency": 0.5})
        with oracle.OracleServer(slow) as srv:
            with pytest.raises(oracle.OracleTimeoutError):
                oracle.query_external(srv.endpoint, space7.midpoint(), timeout=0.05)

    def test_bad_endpoint_string(self):
        with pytest.raises(ValueError):
            oracle.query_external("nonsense", ThicknessVector.of([1.0]))
