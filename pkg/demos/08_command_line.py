"""
The command-line pipeline
=========================

``polarpms synth | estimate | fuse | eval | ablate`` covers the whole
pipeline on disk. This script drives it through ``polarpms.cli.main`` on a
small scene; the same arguments work from a shell.
"""

import csv
import tempfile
from pathlib import Path

from polarpms.cli import main

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    (tmp / "scene.cfg").write_text("[scene]\nwidth = 48\nheight = 48\n\n[sphere a]\nband = 30\n")
    (tmp / "run.cfg").write_text("[engine]\niterations = 3\n\n[fusion]\ntheta_fuse = 25\n")

    main(["synth", str(tmp / "scene.cfg"), str(tmp / "data")])
    main(["estimate", str(tmp / "data"), str(tmp / "maps"), "--config", str(tmp / "run.cfg"), "--threads", "2"])
    main(["fuse", str(tmp / "data"), str(tmp / "maps"), str(tmp / "cloud.ply"), "--config", str(tmp / "run.cfg")])
    main(["eval", str(tmp / "cloud.ply"), str(tmp / "data" / "gt"), str(tmp / "cloud.csv")])
    main(["eval", str(tmp / "maps"), str(tmp / "data" / "gt"), str(tmp / "maps.csv")])

    for name in ("cloud.csv", "maps.csv"):
        print(name, list(csv.reader(open(tmp / name))))

    # errors are reported on one line with a non-zero status
    print("exit status for a missing dataset:", main(["estimate", str(tmp / "missing"), str(tmp / "out")]))
