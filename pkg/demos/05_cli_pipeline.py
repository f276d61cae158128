"""
The command-line pipeline, end to end
=====================================

Everything the library does is reachable from the ``psda`` command:
synthesize a corpus, train on it, score a trial list, evaluate. This
script shells out exactly the way a user would.
"""

import subprocess
import sys
import tempfile
from pathlib import Path


def run(*args):
    cmd = [sys.executable, "-m", "psda.cli", *args]
    print("$ psda", " ".join(args))
    out = subprocess.run(cmd, capture_output=True, text=True, check=True)
    print(out.stdout)
    return out.stdout


tmp = Path(tempfile.mkdtemp(prefix="psda_demo_"))

# 1. A synthetic corpus: 50 speakers, 8 segments each, d = 32, with a
#    trial list (500 target + 5000 nontarget) and the generating model
#    saved for reference.
run(
    "synth", "-o", str(tmp / "emb.tsv"), "--labels-out", str(tmp / "labels.tsv"),
    "--dim", "32", "--w", "40", "--b", "3", "--speakers", "50", "--n-per", "8",
    "--seed", "29", "--model-out", str(tmp / "truth.txt"),
    "--trials-out", str(tmp / "trials.txt"), "--enroll-map-out", str(tmp / "enroll.txt"),
    "--num-targets", "500", "--num-nontargets", "5000",
)

# 2. Train a model from the labeled embeddings.
run("train", str(tmp / "emb.tsv"), str(tmp / "labels.tsv"), "-o", str(tmp / "model.txt"))

# 3. Inspect it.
run("info", str(tmp / "model.txt"))

# 4. Score the trial list and evaluate, writing DET points as well.
run(
    "score", str(tmp / "model.txt"), str(tmp / "emb.tsv"),
    str(tmp / "enroll.txt"), str(tmp / "trials.txt"), "-o", str(tmp / "scores.txt"),
)
run("eval", str(tmp / "scores.txt"), "--det-out", str(tmp / "det.txt"))

det = (tmp / "det.txt").read_text().splitlines()
print(f"DET curve: {len(det)} operating points, first={det[0]!r}, last={det[-1]!r}")
print(f"\nartifacts left in {tmp}")
