"""Generate a small corpus, convert it, and score the results.

Run from the repository root:

    python3 demos/end_to_end.py [workdir]

Everything goes through the CLI entry points, so this mirrors exactly what
`schemnet synth / batch / eval` do from a shell.
"""

import json
import sys
import tempfile
from pathlib import Path

from schemnet.cli import main


def run(workdir: Path) -> None:
    corpus = workdir / "corpus"
    pred = workdir / "pred"

    print("== synth: 10 schematics ==")
    assert main(["synth", "-o", str(corpus), "--seed-start", "0",
                 "--count", "10"]) == 0

    print("\n== batch convert ==")
    assert main(["batch", str(corpus), "-o", str(pred)]) == 0

    print("\n== eval ==")
    assert main(["eval", str(corpus), str(pred), "-o", str(workdir)]) == 0

    report = json.loads((workdir / "report.json").read_text())
    print("\nreport.json netlist block:")
    print(json.dumps(report["netlist"], indent=2))

    sample = (pred / "0" / "out.cir").read_text()
    print("\nconverted netlist for seed 0:")
    print(sample)


if __name__ == "__main__":
    if len(sys.argv) > 1:
        run(Path(sys.argv[1]))
    else:
        with tempfile.TemporaryDirectory() as d:
            run(Path(d))
