"""
Reproducible runs from the command line
=======================================

Every command that writes a file leaves a manifest next to it.  Replaying
the manifest must reproduce the output byte for byte, also with several
worker processes.
"""

import json
import tempfile
from pathlib import Path

from confevade.cli import main

with tempfile.TemporaryDirectory() as tmp:
    out = str(Path(tmp) / "rq1.json")
    main(["rq1", "--t-grid", "1e-4,1,1e4", "--disp", "20", "--reps", "2", "--attacks", "100",
          "--balanced", "no", "--seed", "3", "--jobs", "2", "--out", out])

    manifest = json.loads(Path(out + ".manifest.json").read_text())
    print("manifest keys:", sorted(manifest))
    print("argv:", " ".join(manifest["argv"]))

    print("rerun exit code:", main(["rerun", out + ".manifest.json"]))

    main(["report", "--in", out, "--out", str(Path(tmp) / "summary.csv")])
    print(Path(tmp, "summary.csv").read_text().splitlines()[:6])

# a bad input gives a distinct exit code instead of a traceback
print("missing file exit code:", main(["model", "inspect", "/nonexistent.json"]))
