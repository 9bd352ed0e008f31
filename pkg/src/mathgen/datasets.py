"""Dataset records, file formats, cleaning and statistics.

A dataset file is UTF-8 text, one example per line:
"problem-prefix-tokens TAB solution-prefix-tokens".  A sidecar JSON manifest
(<file>.manifest.json) carries the configuration snapshot, seed, content hash
and statistics of the run that produced it.
"""

from __future__ import annotations

import hashlib
import json
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, List, Optional, Tuple

from .calculus import is_valid_expression
from .expr import Expr, parse_prefix, to_prefix, to_prefix_str, MalformedSequenceError
from .simplify import simplify

MAX_TOKENS = 512

TASKS = ("fwd", "bwd", "ibp", "ode1", "ode2")


class FileMalformedError(ValueError):
    def __init__(self, path, line_no: int, reason: str):
        super().__init__(f"{path}:{line_no}: {reason}")
        self.line_no = line_no


@dataclass(frozen=True)
class Example:
    problem: Expr
    solution: Expr
    task: str

    @property
    def problem_tokens(self) -> List[str]:
        return to_prefix(self.problem)

    @property
    def solution_tokens(self) -> List[str]:
        return to_prefix(self.solution)

    @property
    def problem_length(self) -> int:
        return len(self.problem_tokens)

    @property
    def solution_length(self) -> int:
        return len(self.solution_tokens)

    def key(self) -> str:
        """Deduplication key: the canonical prefix form of the problem."""
        return to_prefix_str(self.problem)

    def to_line(self) -> str:
        return f"{to_prefix_str(self.problem)}\t{to_prefix_str(self.solution)}"

    @classmethod
    def from_line(cls, line: str, task: str) -> "Example":
        parts = line.rstrip("\n").split("\t")
        if len(parts) < 2:
            raise MalformedSequenceError("expected problem TAB solution")
        return cls(parse_prefix(parts[0]), parse_prefix(parts[1]), task)


def clean(example: Example, max_tokens: int = MAX_TOKENS) -> Optional[Example]:
    """Simplify both sides, drop invalid or oversized examples."""
    problem = simplify(example.problem)
    solution = simplify(example.solution)
    cleaned = Example(problem, solution, example.task)
    if cleaned.problem_length > max_tokens or cleaned.solution_length > max_tokens:
        return None
    if not is_valid_expression(problem) or not is_valid_expression(solution):
        return None
    return cleaned


@dataclass(frozen=True)
class DatasetStats:
    count: int
    input_mean: float
    input_std: float
    output_mean: float
    output_std: float
    length_ratio: float  # mean output length / mean input length
    input_max: int
    output_max: int

    def as_dict(self) -> dict:
        return {
            "count": self.count,
            "input_mean": self.input_mean,
            "input_std": self.input_std,
            "output_mean": self.output_mean,
            "output_std": self.output_std,
            "length_ratio": self.length_ratio,
            "input_max": self.input_max,
            "output_max": self.output_max,
        }


def _stats_from_lengths(ins: List[int], outs: List[int]) -> DatasetStats:
    return DatasetStats(
        count=len(ins),
        input_mean=statistics.fmean(ins),
        input_std=statistics.pstdev(ins),
        output_mean=statistics.fmean(outs),
        output_std=statistics.pstdev(outs),
        length_ratio=statistics.fmean(outs) / statistics.fmean(ins),
        input_max=max(ins),
        output_max=max(outs),
    )


def compute_stats(path) -> DatasetStats:
    """Exact token-count statistics of a dataset file."""
    ins: List[int] = []
    outs: List[int] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) < 2 or not parts[0].strip() or not parts[1].strip():
                raise FileMalformedError(path, line_no, "expected problem TAB solution")
            ins.append(len(parts[0].split()))
            outs.append(len(parts[1].split()))
    if not ins:
        raise FileMalformedError(path, 0, "empty dataset")
    return _stats_from_lengths(ins, outs)


def stats_of_examples(examples: Iterable[Example]) -> DatasetStats:
    ins, outs = [], []
    for ex in examples:
        ins.append(ex.problem_length)
        outs.append(ex.solution_length)
    return _stats_from_lengths(ins, outs)


# File IO ----------------------------------------------------------------------

def write_dataset(path, examples: Iterable[Example]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(ex.to_line() + "\n")
            n += 1
    return n


def read_dataset(path, task: str) -> Iterator[Example]:
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield Example.from_line(line, task)
            except MalformedSequenceError as exc:
                raise FileMalformedError(path, line_no, str(exc)) from exc


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def manifest_path(dataset_path) -> Path:
    return Path(str(dataset_path) + ".manifest.json")


def write_manifest(dataset_path, payload: dict) -> Path:
    p = manifest_path(dataset_path)
    with open(p, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return p


def split_bucket(key: str, fractions: Tuple[float, ...]) -> int:
    """Stable split assignment by hashing the dedup key."""
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    u = int.from_bytes(digest[:8], "big") / float(1 << 64)
    acc = 0.0
    for i, frac in enumerate(fractions):
        acc += frac
        if u < acc:
            return i
    return len(fractions) - 1


# Known-pair store (drives the integration-by-parts generator) -------------------

class PairStore:
    """Deduplicating store of (function -> antiderivative) pairs keyed by the
    canonical prefix form of the simplified function."""

    def __init__(self):
        self._pairs: dict = {}

    @staticmethod
    def key_of(problem: Expr) -> str:
        return to_prefix_str(problem)

    def insert(self, problem: Expr, solution: Expr) -> bool:
        """Insert if new; returns True when the pair was added."""
        key = self.key_of(problem)
        if key in self._pairs:
            return False
        self._pairs[key] = solution
        return True

    def get(self, problem: Expr) -> Optional[Expr]:
        return self._pairs.get(self.key_of(problem))

    def __contains__(self, problem: Expr) -> bool:
        return self.key_of(problem) in self._pairs

    def __len__(self) -> int:
        return len(self._pairs)

    def merge(self, other: "PairStore") -> None:
        """Associative set-union on canonical keys (first writer wins)."""
        for key, sol in other._pairs.items():
            self._pairs.setdefault(key, sol)

    def items(self):
        return self._pairs.items()
