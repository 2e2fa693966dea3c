"""Batch prediction over built-in analytic functions and external processes.

Every predictor satisfies one contract: k rows in, exactly k finite floats
out, order preserved. Built-ins are pure functions of the row. External
models run as child processes speaking a line protocol over stdin/stdout:

    parent: HELLO <P>\n            child: READY\n
    parent: <row as comma-separated floats>\n  (k times)
    parent: ##END##\n              child: <float>\n  (k times)
                                   child: ##END##\n

Floats cross the wire with 17 significant digits, which round-trips IEEE
doubles exactly. One request is in flight per child at any time.
"""

from __future__ import annotations

import math
import queue
import shlex
import subprocess
import threading
from abc import ABC, abstractmethod
from collections import deque

import numpy as np
from scipy.special import expit

TERMINATOR = "##END##"
DEFAULT_TIMEOUT = 60.0
_BUILTIN_BATCH_LIMIT = 1_000_000
_EXTERNAL_BATCH_LIMIT = 10_000


class PredictorError(RuntimeError):
    """A predictor broke its contract or could not be constructed."""


class Predictor(ABC):
    """Batch scoring contract shared by built-ins and external processes."""

    batch_limit: int = _BUILTIN_BATCH_LIMIT
    expected_features: int | None = None

    @abstractmethod
    def predict_batch(self, points: np.ndarray) -> np.ndarray:
        """Score one batch; predict() handles chunking and validation."""

    @abstractmethod
    def describe(self) -> str:
        """Canonical descriptor string, echoed in report manifests."""

    def close(self) -> None:
        pass

    def __enter__(self) -> "Predictor":
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()


def predict(predictor: Predictor, points: np.ndarray) -> np.ndarray:
    """Score k rows, chunked by the predictor's batch limit.

    Validates the contract on every chunk: matching row count, finite
    values. Raises PredictorError on any violation.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError(f"points must be 2-D, got ndim={points.ndim}")
    expected = predictor.expected_features
    if expected is not None and points.shape[1] != expected:
        raise PredictorError(
            f"{predictor.describe()} expects {expected} features, "
            f"got {points.shape[1]}"
        )
    k = points.shape[0]
    out = np.empty(k, dtype=np.float64)
    step = max(1, int(predictor.batch_limit))
    for start in range(0, k, step):
        chunk = points[start : start + step]
        values = np.asarray(predictor.predict_batch(chunk), dtype=np.float64)
        if values.shape != (chunk.shape[0],):
            raise PredictorError(
                f"{predictor.describe()} returned {values.shape} values "
                f"for a {chunk.shape[0]}-row batch"
            )
        if not np.isfinite(values).all():
            raise PredictorError(
                f"{predictor.describe()} returned non-finite predictions"
            )
        out[start : start + step] = values
    return out


class _BuiltinPredictor(Predictor):
    def __init__(self, spec: str) -> None:
        self._spec = spec

    def describe(self) -> str:
        return f"builtin:{self._spec}"


class _LinearPredictor(_BuiltinPredictor):
    """Dot product with fixed coefficients; rows may be wider (extra
    features get implicit zero coefficients) but never narrower."""

    def __init__(self, spec: str, coefs: np.ndarray, sigmoid: bool) -> None:
        super().__init__(spec)
        self._coefs = coefs
        self._sigmoid = sigmoid

    def predict_batch(self, points: np.ndarray) -> np.ndarray:
        width = points.shape[1]
        if width < self._coefs.size:
            raise PredictorError(
                f"{self.describe()} needs at least {self._coefs.size} features, got {width}"
            )
        score = points[:, : self._coefs.size] @ self._coefs
        return expit(score) if self._sigmoid else score


class _Friedman1Predictor(_BuiltinPredictor):
    """Standard nonlinear regression benchmark on the first five columns:
    10*sin(pi*x1*x2) + 20*(x3 - 0.5)^2 + 10*x4 + 5*x5."""

    def predict_batch(self, points: np.ndarray) -> np.ndarray:
        if points.shape[1] < 5:
            raise PredictorError(
                f"{self.describe()} needs at least 5 features, got {points.shape[1]}"
            )
        x = points
        return (
            10.0 * np.sin(np.pi * x[:, 0] * x[:, 1])
            + 20.0 * np.square(x[:, 2] - 0.5)
            + 10.0 * x[:, 3]
            + 5.0 * x[:, 4]
        )


class _StepPredictor(_BuiltinPredictor):
    """0/1 threshold on one feature; exactly at the cut scores 0."""

    def __init__(self, spec: str, feature: int, cut: float) -> None:
        super().__init__(spec)
        self._feature = feature
        self._cut = cut

    def predict_batch(self, points: np.ndarray) -> np.ndarray:
        if self._feature >= points.shape[1]:
            raise PredictorError(
                f"{self.describe()} indexes feature {self._feature}, "
                f"rows have {points.shape[1]}"
            )
        return (points[:, self._feature] > self._cut).astype(np.float64)


class _SumPredictor(_BuiltinPredictor):
    """Sum of all features; width-agnostic."""

    def predict_batch(self, points: np.ndarray) -> np.ndarray:
        return points.sum(axis=1)


def builtin_catalog() -> dict[str, str]:
    """Names and one-line descriptions of the built-in analytic functions."""
    return {
        "linear:<coefs>": "dot product with the given comma-separated coefficients",
        "logistic-linear:<coefs>": "sigmoid of the linear score",
        "friedman1": "10*sin(pi*x1*x2) + 20*(x3-0.5)^2 + 10*x4 + 5*x5",
        "step:<feature>:<cut>": "1.0 when the feature exceeds the cut, else 0.0",
        "sum": "sum of all feature values",
    }


def _parse_coefs(text: str, spec: str) -> np.ndarray:
    try:
        coefs = np.array([float(v) for v in text.split(",")], dtype=np.float64)
    except ValueError:
        raise PredictorError(f"bad coefficient list in builtin spec '{spec}'") from None
    if coefs.size == 0 or not np.isfinite(coefs).all():
        raise PredictorError(f"coefficients must be finite and non-empty in '{spec}'")
    return coefs


def make_builtin(spec: str) -> Predictor:
    """Construct a built-in predictor from its spec string, e.g. 'linear:1,2,0'."""
    name, _, rest = spec.partition(":")
    if name == "linear" or name == "logistic-linear":
        return _LinearPredictor(spec, _parse_coefs(rest, spec), name != "linear")
    if name == "friedman1":
        return _Friedman1Predictor(spec)
    if name == "sum":
        return _SumPredictor(spec)
    if name == "step":
        feature_text, _, cut_text = rest.partition(":")
        try:
            feature = int(feature_text)
            cut = float(cut_text)
        except ValueError:
            raise PredictorError(
                f"step spec must be step:<feature>:<cut>, got '{spec}'"
            ) from None
        if feature < 0 or not math.isfinite(cut):
            raise PredictorError(f"bad step parameters in '{spec}'")
        return _StepPredictor(spec, feature, cut)
    known = ", ".join(sorted(builtin_catalog()))
    raise PredictorError(f"unknown builtin '{name}'; available: {known}")


class ExternalPredictor(Predictor):
    """A child process speaking the line protocol, exclusive-access.

    The child is spawned lazily on first use, handshakes with HELLO/READY,
    and stays up across batches. All interaction is serialized by a lock, so
    one instance may be shared across threads. close() (or use as a context
    manager) shuts the child down.
    """

    batch_limit = _EXTERNAL_BATCH_LIMIT

    def __init__(
        self,
        argv: list[str],
        num_features: int,
        timeout: float = DEFAULT_TIMEOUT,
    ) -> None:
        if not argv:
            raise PredictorError("external predictor needs a non-empty command")
        if num_features < 1:
            raise PredictorError(f"num_features must be >= 1, got {num_features}")
        self._argv = list(argv)
        self.expected_features = int(num_features)
        self._timeout = float(timeout)
        self._lock = threading.Lock()
        self._proc: subprocess.Popen[str] | None = None
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._stderr_tail: deque[str] = deque(maxlen=30)

    def describe(self) -> str:
        return "cmd:" + shlex.join(self._argv)

    def _context(self) -> str:
        tail = "".join(self._stderr_tail).strip()
        return f" | child stderr: {tail}" if tail else ""

    def _pump_stdout(self, stream: object) -> None:
        for line in stream:  # type: ignore[attr-defined]
            self._lines.put(line)
        self._lines.put(None)

    def _pump_stderr(self, stream: object) -> None:
        for line in stream:  # type: ignore[attr-defined]
            self._stderr_tail.append(line)

    def _start(self) -> None:
        try:
            self._proc = subprocess.Popen(
                self._argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise PredictorError(f"cannot start {self.describe()}: {exc}") from exc
        threading.Thread(
            target=self._pump_stdout, args=(self._proc.stdout,), daemon=True
        ).start()
        threading.Thread(
            target=self._pump_stderr, args=(self._proc.stderr,), daemon=True
        ).start()
        self._send(f"HELLO {self.expected_features}\n")
        greeting = self._read_line("handshake")
        if greeting.strip() != "READY":
            self.close()
            raise PredictorError(
                f"{self.describe()} answered {greeting.strip()!r} instead of READY"
                + self._context()
            )

    def _send(self, text: str) -> None:
        assert self._proc is not None and self._proc.stdin is not None
        try:
            self._proc.stdin.write(text)
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            code = self._proc.poll()
            self.close()
            raise PredictorError(
                f"{self.describe()} closed its input (exit code {code})"
                + self._context()
            ) from exc

    def _read_line(self, phase: str) -> str:
        try:
            line = self._lines.get(timeout=self._timeout)
        except queue.Empty:
            self.close()
            raise PredictorError(
                f"{self.describe()} timed out after {self._timeout}s during {phase}"
                + self._context()
            ) from None
        if line is None:
            code = self._proc.poll() if self._proc else None
            self.close()
            raise PredictorError(
                f"{self.describe()} ended its output during {phase} "
                f"(exit code {code})" + self._context()
            )
        return line

    def predict_batch(self, points: np.ndarray) -> np.ndarray:
        k = points.shape[0]
        with self._lock:
            if self._proc is None:
                self._start()
            rows = [
                ",".join(f"{v:.17g}" for v in row) + "\n" for row in points
            ]
            self._send("".join(rows) + TERMINATOR + "\n")
            out = np.empty(k, dtype=np.float64)
            for i in range(k):
                line = self._read_line("prediction").strip()
                if line == TERMINATOR:
                    self.close()
                    raise PredictorError(
                        f"{self.describe()} returned {i} predictions for "
                        f"{k} rows" + self._context()
                    )
                try:
                    out[i] = float(line)
                except ValueError:
                    self.close()
                    raise PredictorError(
                        f"{self.describe()} wrote a malformed prediction "
                        f"line: {line!r}" + self._context()
                    ) from None
            closing = self._read_line("terminator").strip()
            if closing != TERMINATOR:
                self.close()
                raise PredictorError(
                    f"{self.describe()} kept writing after {k} predictions; "
                    f"got {closing!r} instead of the terminator" + self._context()
                )
            return out

    def close(self) -> None:
        proc, self._proc = self._proc, None
        if proc is None:
            return
        try:
            if proc.stdin is not None:
                proc.stdin.close()
            proc.wait(timeout=2.0)
        except (OSError, subprocess.TimeoutExpired):
            proc.kill()
            proc.wait(timeout=5.0)


def make_predictor(
    descriptor: str, num_features: int, timeout: float = DEFAULT_TIMEOUT
) -> Predictor:
    """Build a predictor from a CLI-style descriptor.

    'builtin:<spec>' constructs an analytic function; 'cmd:<argv>' launches
    an external process (the argv is split shell-style).
    """
    kind, _, rest = descriptor.partition(":")
    if kind == "builtin" and rest:
        return make_builtin(rest)
    if kind == "cmd" and rest:
        return ExternalPredictor(shlex.split(rest), num_features, timeout=timeout)
    raise PredictorError(
        f"predictor descriptor must be builtin:<spec> or cmd:<argv>, got '{descriptor}'"
    )
