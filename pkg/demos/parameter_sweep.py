"""
Sweeping alpha and gamma through the experiment runner
======================================================

The runner reads a key=value spec file, fits every grid point and writes
a text report plus a CSV table. This script writes a small data set and a
spec to a temporary folder and runs it.
"""

import tempfile
from pathlib import Path

from smkl import cli
from smkl.data_io import write_dense_matrix, write_labels
from smkl.datasets import make_blobs

work = Path(tempfile.mkdtemp(prefix="smkl-sweep-"))
X, y = make_blobs(n=60, centers=3, seed=3)
write_dense_matrix(work / "blobs.csv", X)
write_labels(work / "blobs_labels.txt", y)

###############################################################################
# Grid values are listed explicitly; solver.* keys set everything else.

(work / "sweep.spec").write_text("""\
data=blobs.csv
labels=blobs_labels.txt
method=smkl
solver.c=3
solver.adaptive_alpha=false
sweep.alpha=0.1,1,10
sweep.gamma=0.1,1,10
""")

code = cli.main(["run", str(work / "sweep.spec")])
print("exit code", code)
print((work / "results" / "report.txt").read_text())
print((work / "results" / "report.csv").read_text())
