"""JSON-lines stdio worker wrapping SymPy.

One JSON object per line in, one per line out.  Ops: integrate (antiderivative
in x), equiv (are two expressions equal), simplify-check (is the second
expression an equivalent form of the first).  Every request gets exactly one
response with a matching id; CAS exceptions and timeouts become failed/timeout
statuses, never crashes.  A handshake line announces the protocol and backend.
"""

from __future__ import annotations

import json
import signal
import sys

import sympy as sp

from .convert import ConversionError, X, prefix_to_sympy, sympy_to_prefix_str

PROTOCOL_VERSION = 1
DEFAULT_TIMEOUT = 10.0


class _Timeout(Exception):
    pass


def _alarm_handler(signum, frame):
    raise _Timeout()


class _deadline:
    """POSIX interval-timer guard around a CAS call."""

    def __init__(self, seconds: float):
        self.seconds = max(0.001, float(seconds))

    def __enter__(self):
        self._old = signal.signal(signal.SIGALRM, _alarm_handler)
        signal.setitimer(signal.ITIMER_REAL, self.seconds)

    def __exit__(self, *exc):
        signal.setitimer(signal.ITIMER_REAL, 0.0)
        signal.signal(signal.SIGALRM, self._old)
        return False


def _real_fn(e: sp.Expr, names):
    """Real-only evaluator: raises inside on any out-of-domain step, exactly
    the semantics under which dataset pairs are asserted (a complex
    intermediate on another branch may still produce a real number, which
    must not count as a surviving probe)."""
    import math

    symbols = [sp.Symbol(n) for n in names]
    try:
        fn = sp.lambdify(symbols, e, "math")
    except Exception:
        fn = None

    def call(values):
        if fn is not None:
            try:
                v = fn(*values)
            except (ValueError, OverflowError, ZeroDivisionError, TypeError):
                return None
        else:
            subs = dict(zip(symbols, (sp.Float(v) for v in values)))
            try:
                v = complex(e.evalf(subs=subs))
            except (TypeError, ValueError, ZeroDivisionError):
                return None
            if abs(v.imag) > 1e-9 * max(1.0, abs(v.real)):
                return None
            v = v.real
        if isinstance(v, complex) or not math.isfinite(v) or abs(v) >= 1e12:
            return None
        return float(v)

    return call


def _numeric_equal(a: sp.Expr, b: sp.Expr, tries: int = 48, needed: int = 3,
                   tol: float = 1e-8, guard: sp.Expr = None, seed: int = 7):
    """True / False / None (inconclusive: too few real-valued probe points).
    When ``guard`` is given, only probe points where it evaluates to a finite
    real (under real-only semantics) count: a dataset pair is asserted on its
    solution's real domain, and outside it branch choices legitimately differ
    between systems."""
    import random
    rng = random.Random(seed)
    names = sorted({s.name for s in (a.free_symbols | b.free_symbols
                                     | (guard.free_symbols if guard is not None
                                        else set()))})
    fa = _real_fn(a, names)
    fb = _real_fn(b, names)
    fguard = _real_fn(guard, names) if guard is not None else None
    ok = 0
    for _ in range(tries):
        # magnitude log-uniform over [1e-2, 1e1], random sign
        values = [10.0 ** rng.uniform(-2, 1) * rng.choice((-1, 1))
                  for _ in names]
        if fguard is not None and fguard(values) is None:
            continue
        va = fa(values)
        vb = fb(values)
        if va is None or vb is None:
            continue
        scale = max(1.0, abs(va), abs(vb))
        if abs(va - vb) > tol * scale:
            # confirm at high precision before ruling a mismatch; double
            # arithmetic on ill-conditioned arrangements loses digits
            ha = _evalf_real(a, names, values)
            hb = _evalf_real(b, names, values)
            if ha is None or hb is None:
                continue
            if abs(ha - hb) > tol * max(1.0, abs(ha), abs(hb)):
                return False
            va, vb = ha, hb
        ok += 1
        if ok >= needed:
            return True
    return None


def _evalf_real(e: sp.Expr, names, values):
    subs = {sp.Symbol(n): sp.Float(v, 30) for n, v in zip(names, values)}
    try:
        v = complex(e.evalf(30, subs=subs))
    except (TypeError, ValueError, ZeroDivisionError):
        return None
    if abs(v.imag) > 1e-12 * max(1.0, abs(v.real)) or not abs(v.real) < 1e12:
        return None
    return v.real


def _check_equiv(a: sp.Expr, b: sp.Expr) -> bool:
    diff = a - b
    try:
        if sp.simplify(diff) == 0:
            return True
    except Exception:
        pass
    return _numeric_equal(a, b) is True


def handle(request: dict) -> dict:
    rid = request.get("id")
    op = request.get("op")
    payload = request.get("payload") or []
    timeout = float(request.get("timeout") or DEFAULT_TIMEOUT)
    try:
        if op == "integrate":
            integrand = prefix_to_sympy(payload[0])
            with _deadline(timeout):
                anti = sp.integrate(integrand, X)
            if anti.has(sp.Integral):
                return {"id": rid, "status": "failed", "result": "",
                        "diagnostic": "no closed form found"}
            return {"id": rid, "status": "ok",
                    "result": sympy_to_prefix_str(anti), "diagnostic": ""}
        if op in ("equiv", "simplify-check"):
            a = prefix_to_sympy(payload[0])
            b = prefix_to_sympy(payload[1])
            with _deadline(timeout):
                same = _check_equiv(a, b)
            return {"id": rid, "status": "ok", "result": bool(same),
                    "diagnostic": ""}
        return {"id": rid, "status": "failed", "result": "",
                "diagnostic": f"unknown op {op!r}"}
    except _Timeout:
        return {"id": rid, "status": "timeout", "result": "",
                "diagnostic": f"no result within {timeout}s"}
    except ConversionError as exc:
        return {"id": rid, "status": "failed", "result": "",
                "diagnostic": f"conversion: {exc}"}
    except Exception as exc:  # CAS internals must never crash the worker
        return {"id": rid, "status": "failed", "result": "",
                "diagnostic": f"{type(exc).__name__}: {exc}"}


def serve(stdin=None, stdout=None) -> None:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout

    def emit(obj: dict) -> None:
        stdout.write(json.dumps(obj) + "\n")
        stdout.flush()

    emit({"protocol": PROTOCOL_VERSION, "cas": f"sympy-{sp.__version__}"})
    for line in stdin:
        if not line.strip():
            continue
        try:
            request = json.loads(line)
            if not isinstance(request, dict):
                raise ValueError("request must be an object")
        except ValueError as exc:
            emit({"id": None, "status": "failed", "result": "",
                  "diagnostic": f"protocol: {exc}"})
            continue
        emit(handle(request))
