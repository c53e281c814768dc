"""
Files and the command line
==========================

Every stage reads and writes plain files: JSON Lines for detections,
annotations and verdicts, binary PGM for masks.  The ``snfusion`` command
chains them; here it is driven through ``main`` in a scratch directory.
"""

# %%
import tempfile
from pathlib import Path

from snfusion.cli import main

work = Path(tempfile.mkdtemp())
sim = work / "sim"
main(["simulate", "--out", str(sim), "--frames", "50", "--seed", "1",
      "--classifier", "resnet:0.9:0.1", "--oracle", "--mask-quality", "0.9"])
print(sorted(p.name for p in sim.iterdir()))
print((sim / "detections.jsonl").read_text().splitlines()[0])

# %%
# Fuse one classifier and the masks, then evaluate.
main(["fuse", "--detections", str(sim / "detections.jsonl"),
      "--verdicts", str(sim / "verdicts_resnet.jsonl"), "--masks", str(sim / "masks"),
      "--annotations", str(sim / "annotations.jsonl"), "--frames", str(sim / "frames.txt"),
      "--out", str(work / "fused.jsonl"), "--curve-out", str(work / "curve.csv")])
print((work / "fused.jsonl").read_text().splitlines()[0])

# %%
# L-AMR under every evaluation setting.
main(["eval", "--detections", str(work / "fused.jsonl"), "--annotations", str(sim / "annotations.jsonl"),
      "--frames", str(sim / "frames.txt"), "--setting", "every"])
