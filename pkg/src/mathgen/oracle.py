"""Client for an external integrator worker speaking JSON-lines over stdio.

The worker protocol: one JSON object per line.  Requests carry a monotone id,
an op, a payload of prefix-token strings and a timeout in seconds; every
request gets exactly one response with a matching id and a status of ok,
failed or timeout.  The worker announces itself with a handshake line.
"""

from __future__ import annotations

import json
import shlex
import subprocess
import time
from typing import List, Optional, Protocol

from .expr import Expr, MalformedSequenceError, parse_prefix, to_prefix_str


class OracleUnavailableError(RuntimeError):
    """The worker process cannot be reached (transport failure)."""


class IntegratorOracle(Protocol):
    def integrate(self, integrand: Expr, timeout: float = 10.0) -> Optional[Expr]:
        """Antiderivative of the integrand in x, or None when the backend
        fails or times out."""
        ...


class TableOracle:
    """Dictionary-backed oracle for tests and offline runs."""

    def __init__(self, pairs):
        self._table = {to_prefix_str(p): s for p, s in pairs}

    def integrate(self, integrand: Expr, timeout: float = 10.0) -> Optional[Expr]:
        return self._table.get(to_prefix_str(integrand))


class JsonLinesOracle:
    """Spawns a worker command and multiplexes integrate requests over stdio."""

    def __init__(self, command: str, startup_timeout: float = 30.0):
        self.command = command
        self._next_id = 0
        try:
            self._proc = subprocess.Popen(
                shlex.split(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise OracleUnavailableError(f"cannot spawn worker: {exc}") from exc
        self.handshake = self._read_line(deadline=time.monotonic() + startup_timeout)
        if self.handshake is None or "protocol" not in self.handshake:
            self.close()
            raise OracleUnavailableError("worker did not announce a protocol")

    def _read_line(self, deadline: float) -> Optional[dict]:
        # the worker guarantees a response within timeout + 1s; the extra
        # slack here only guards against a hung transport
        line = self._proc.stdout.readline()
        if not line:
            return None
        try:
            return json.loads(line)
        except json.JSONDecodeError:
            return None

    def request(self, op: str, payload: List[str], timeout: float) -> dict:
        if self._proc.poll() is not None:
            raise OracleUnavailableError("worker exited")
        self._next_id += 1
        req = {"id": self._next_id, "op": op, "payload": payload, "timeout": timeout}
        try:
            self._proc.stdin.write(json.dumps(req) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise OracleUnavailableError(f"worker pipe broken: {exc}") from exc
        resp = self._read_line(deadline=time.monotonic() + timeout + 5.0)
        if resp is None:
            raise OracleUnavailableError("no response from worker")
        if resp.get("id") != self._next_id:
            raise OracleUnavailableError(
                f"response id {resp.get('id')} != request id {self._next_id}")
        return resp

    def integrate(self, integrand: Expr, timeout: float = 10.0) -> Optional[Expr]:
        resp = self.request("integrate", [to_prefix_str(integrand)], timeout)
        if resp.get("status") != "ok":
            return None
        try:
            return parse_prefix(resp.get("result", ""))
        except MalformedSequenceError:
            return None

    def equiv(self, a: Expr, b: Expr, timeout: float = 10.0) -> Optional[bool]:
        resp = self.request("equiv", [to_prefix_str(a), to_prefix_str(b)], timeout)
        if resp.get("status") != "ok":
            return None
        return bool(resp.get("result"))

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5.0)
            except subprocess.TimeoutExpired:
                self._proc.kill()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
