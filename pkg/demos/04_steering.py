"""
Steering the saliency scale with a judge in the loop
====================================================

The toy pipeline runs to an early timestep, a judge looks at the snapshot
and says success, neglect (object ignored) or suppression (object
overpowers). Neglect lowers lambda, suppression raises it, and after four
tries the last run is kept and flagged unresolved.
"""
import tempfile
from pathlib import Path

from looserope import PipelineConfig, ScriptedOracle, ThresholdOracle, steer_pipeline

cfg = PipelineConfig(seed=0, crop_fraction=0.75)

out = steer_pipeline(cfg, ScriptedOracle(["neglect", "neglect", "success"]))
for a in out.trace.attempts:
    print(f"attempt {a.attempt}: lambda = {a.lam}  verdict = {a.verdict}")
print("resolved:", out.resolved)

# a judge that reads the inward-outward ratio at the evaluation step instead:
# a crop that keeps most of its attention to itself is read as neglect. Lowering
# lambda moves the map only when a level crosses a rounding boundary, so the
# ratio barely moves here and the loop runs out of tries
out = steer_pipeline(cfg, ThresholdOracle(0.5, 1.3))
print("threshold judge lambdas:", out.trace.lambdas, "resolved:", out.resolved)

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "trace.jsonl"
    out.trace.write_jsonl(path)
    print(path.read_text())

last = out.result.diagnostics[-1]
print("final record:", {k: last[k] for k in ("t", "layer", "active", "ratio")})
