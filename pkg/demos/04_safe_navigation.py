"""End-to-end safe navigation through the L-bend corridor, with SVG figures.

Runs the full loop (LiDAR, mapping, replanning, governor, controller) on the
corridor world, prints the verdict, and writes the margin/clearance/top-down
figures plus the telemetry log into demos/output/.
"""

import os
from pathlib import Path

from hamnav.cli import main as hamnav_cli
from hamnav.navigator import run_scenario, save_telemetry, telemetry_column
from hamnav.scenarios import corridor_world
from hamnav.world import save_world

out = Path(__file__).parent / "output"
out.mkdir(exist_ok=True)

scenario = corridor_world()
print("flying the L-bend corridor with the ground-truth model...")
telemetry, verdict = run_scenario(scenario)
print(verdict.summary())

margins = telemetry[:, telemetry_column("dE")]
clearance = telemetry[:, telemetry_column("d_p_obs")]
print(f"margin stayed >= {margins.min():.4f}, clearance >= {clearance.min():.3f} m")

save_telemetry(out / "corridor_telemetry.txt", telemetry)
save_world(out / "corridor_world.txt", scenario.obstacles)
os.environ["HAMNAV_OUTPUT_DIR"] = str(out)
rc = hamnav_cli([
    "plot", "--telemetry", str(out / "corridor_telemetry.txt"),
    "--world", str(out / "corridor_world.txt"),
])
assert rc == 0
print(f"figures written to {out}/")
