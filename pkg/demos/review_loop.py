"""Walk the review loop: a mislabeled detection is flagged, fixed with an
override through the HTTP API, and the netlist is regenerated.

    python3 demos/review_loop.py

Uses the in-process test client so no port is opened; `schemnet serve` exposes
the identical API over the network.
"""

import json
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from schemnet.cli import main
from schemnet.server import create_app


def run(workdir: Path) -> None:
    assert main(["synth", "-o", str(workdir), "--seed-start", "3",
                 "--count", "1"]) == 0

    # sabotage the external detections: call the first non-resistor a resistor
    det_path = workdir / "3" / "detections.json"
    det = json.loads(det_path.read_text())
    victim = next(c for c in det["components"]
                  if c["type"] not in ("ground", "resistor"))
    true_type, victim["type"] = victim["type"], "resistor"
    cid = det["components"].index(victim)
    det_path.write_text(json.dumps(det))

    client = TestClient(create_app(workdir))
    job = client.get("/api/jobs/3").json()
    print(f"status: {job['status']}")
    for f in job["flags"]:
        print(f"  flag {f['id']}: {f['kind']}: {f['detail']}")

    print(f"\napplying set_type(component={cid}, type={true_type!r}) ...")
    r = client.post("/api/jobs/3/overrides", json=[
        {"action": "set_type", "component": cid,
         "payload": {"type": true_type}}])
    r.raise_for_status()

    out = client.post("/api/jobs/3/regenerate").json()
    print(f"status after regenerate: {out['status']}")
    print("\nnetlist:")
    print(out["netlist"])


if __name__ == "__main__":
    with tempfile.TemporaryDirectory() as d:
        run(Path(d))
