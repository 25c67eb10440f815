"""Oracle-in-the-loop steering of the saliency scale lambda.

Each attempt runs the denoiser up to the evaluation timestep with saliency
``clip(lambda * S_original, 0, 1)``, asks an oracle to classify the early
snapshot, and then either finishes the run (success) or restarts from
timestep 0 with lambda moved down (neglect) or up (suppression).
"""
from __future__ import annotations

import enum
import os
import shlex
import subprocess
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Protocol

import numpy as np

from .errors import OracleTransportError, ValidationError
from .formats import to_gray8, write_jsonl, write_pgm
from .saliency import SaliencyMap, rescale_saliency

ORACLE_ENV = "LOOSEROPE_ORACLE_CMD"


class Verdict(str, enum.Enum):
    SUCCESS = "SUCCESS"
    NEGLECT = "NEGLECT"
    SUPPRESSION = "SUPPRESSION"

    @classmethod
    def parse(cls, text: str) -> "Verdict":
        try:
            return cls(text.strip().upper())
        except ValueError:
            raise ValidationError(f"not a verdict: {text!r}") from None


@dataclass(frozen=True)
class SteeringPolicy:
    lambda0: float = 0.83
    delta_down: float = 0.045
    delta_up: float = 0.05
    max_tries: int = 4
    eval_timestep: int = 2

    def __post_init__(self):
        if self.max_tries < 1:
            raise ValidationError("max_tries must be >= 1")
        if not (self.delta_down > 0 and self.delta_up > 0):
            raise ValidationError("lambda deltas must be positive")
        if self.eval_timestep < 0:
            raise ValidationError("eval_timestep must be >= 0")


def update_lambda(lam: float, verdict: Verdict, policy: SteeringPolicy) -> float:
    """Neglect lowers lambda, suppression raises it, success keeps it.

    Rounded to 10 decimals so repeated steps land on the decimal grid
    (0.83 - 0.045 gives 0.785, not 0.78499999...).
    """
    if verdict is Verdict.NEGLECT:
        lam = lam - policy.delta_down
    elif verdict is Verdict.SUPPRESSION:
        lam = lam + policy.delta_up
    return round(lam, 10)


@dataclass
class Observation:
    """What an oracle gets to see for one attempt."""

    attempt: int
    lam: float
    snapshot: np.ndarray
    snapshot_path: Optional[str] = None
    composite_path: Optional[str] = None
    ratio: Optional[float] = None


class ScriptedOracle:
    """Replays a fixed verdict list; the last verdict repeats if it runs out."""

    def __init__(self, verdicts):
        self.verdicts = [v if isinstance(v, Verdict) else Verdict.parse(v) for v in verdicts]
        if not self.verdicts:
            raise ValidationError("scripted oracle needs at least one verdict")
        self.calls = 0

    def __call__(self, obs: Observation) -> Verdict:
        v = self.verdicts[min(self.calls, len(self.verdicts) - 1)]
        self.calls += 1
        return v


class ThresholdOracle:
    """Classifies by the inward-outward ratio.

    Above ``hi`` the crop is mostly attending to itself (neglect), below
    ``lo`` it is swamped by context (suppression). The bands are heuristic.
    """

    def __init__(self, lo: float = 0.5, hi: float = 2.0):
        if lo > hi:
            raise ValidationError("threshold lo must not exceed hi")
        self.lo, self.hi = lo, hi

    def __call__(self, obs: Observation) -> Verdict:
        if obs.ratio is None:
            raise ValidationError("threshold oracle needs an inward-outward ratio")
        if obs.ratio > self.hi:
            return Verdict.NEGLECT
        if obs.ratio < self.lo:
            return Verdict.SUPPRESSION
        return Verdict.SUCCESS


class ExternalCommandOracle:
    """Runs ``<command> <composite_path> <snapshot_path>``.

    The last non-empty line of stdout must be SUCCESS, NEGLECT or
    SUPPRESSION. Without an explicit command, ``$LOOSEROPE_ORACLE_CMD`` is used.
    """

    def __init__(self, command: Optional[str] = None, timeout: float = 600.0):
        command = command or os.environ.get(ORACLE_ENV)
        if not command:
            raise ValidationError(f"no oracle command given and ${ORACLE_ENV} is unset")
        self.argv = shlex.split(command)
        self.timeout = timeout
        self.needs_snapshot_file = True

    def __call__(self, obs: Observation) -> Verdict:
        argv = self.argv + [obs.composite_path or "", obs.snapshot_path or ""]
        try:
            proc = subprocess.run(argv, capture_output=True, text=True, timeout=self.timeout)
        except (OSError, subprocess.TimeoutExpired) as e:
            raise OracleTransportError(f"oracle command failed: {e}") from e
        if proc.returncode != 0:
            raise OracleTransportError(
                f"oracle command exited with {proc.returncode}: {proc.stderr.strip()}")
        lines = [ln for ln in proc.stdout.splitlines() if ln.strip()]
        if not lines:
            raise OracleTransportError("oracle command printed nothing")
        try:
            return Verdict.parse(lines[-1])
        except ValidationError as e:
            raise OracleTransportError(str(e)) from None


def oracle_from_spec(spec: str):
    """Build an oracle from ``script:a,b,c``, ``threshold:lo,hi`` or ``command[:cmd]``."""
    kind, _, arg = spec.partition(":")
    if kind == "script":
        return ScriptedOracle([v for v in arg.split(",") if v])
    if kind == "threshold":
        if not arg:
            return ThresholdOracle()
        lo, hi = (float(x) for x in arg.split(","))
        return ThresholdOracle(lo, hi)
    if kind == "command":
        return ExternalCommandOracle(arg or None)
    raise ValidationError(f"unknown oracle spec {spec!r}")


class Run(Protocol):
    def advance_to(self, t: int) -> None: ...
    def snapshot(self) -> np.ndarray: ...
    def ratio(self) -> Optional[float]: ...
    def finish(self) -> Any: ...


# called as runner(saliency, lam=...) and must return a fresh Run
Runner = Callable[..., Run]


@dataclass
class AttemptRecord:
    attempt: int
    lam: float
    verdict: str
    ratio: Optional[float]
    snapshot_path: Optional[str]

    def to_json(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d


@dataclass
class SteeringTrace:
    attempts: list = field(default_factory=list)

    @property
    def lambdas(self) -> list:
        return [a.lam for a in self.attempts]

    @property
    def verdicts(self) -> list:
        return [a.verdict for a in self.attempts]

    def write_jsonl(self, path) -> None:
        write_jsonl(path, [a.to_json() for a in self.attempts])


@dataclass
class SteeringOutcome:
    result: Any
    trace: SteeringTrace
    resolved: bool


def steering_loop(runner: Runner, oracle, policy: SteeringPolicy, s_original: SaliencyMap,
                  snapshot_dir=None, composite_path=None) -> SteeringOutcome:
    """Run attempts until the oracle reports success or ``max_tries`` is spent.

    Every attempt rescales the *original* saliency with its own lambda. On
    success the same run continues to the end; otherwise a fresh run is
    started. If no attempt succeeds, the last run is finished and the
    outcome is flagged unresolved.
    """
    trace = SteeringTrace()
    lam = round(policy.lambda0, 10)
    tmp = None
    if snapshot_dir is None and getattr(oracle, "needs_snapshot_file", False):
        tmp = tempfile.TemporaryDirectory(prefix="looserope-")
        snapshot_dir = tmp.name
    try:
        run = None
        for attempt in range(1, policy.max_tries + 1):
            run = runner(rescale_saliency(s_original, lam), lam=lam)
            run.advance_to(policy.eval_timestep)
            snap = run.snapshot()
            snap_path = None
            if snapshot_dir is not None:
                snap_path = str(Path(snapshot_dir) / f"x0_attempt{attempt}.pgm")
                write_pgm(snap_path, to_gray8(snap))
            ratio = run.ratio()
            obs = Observation(attempt, lam, snap, snap_path,
                              None if composite_path is None else str(composite_path), ratio)
            verdict = oracle(obs)
            trace.attempts.append(AttemptRecord(attempt, lam, verdict.value, ratio, snap_path))
            if verdict is Verdict.SUCCESS:
                return SteeringOutcome(run.finish(), trace, True)
            if attempt < policy.max_tries:
                lam = update_lambda(lam, verdict, policy)
        return SteeringOutcome(run.finish(), trace, False)
    finally:
        if tmp is not None:
            tmp.cleanup()
