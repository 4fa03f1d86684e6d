"""
Two arms from one process: namespace isolation
==============================================

A bimanual profile clones the whole pipeline per namespace - planner,
bridge, simulated arm, cameras, recorder - from the same binaries, and
topic prefixes keep the two sides from ever seeing each other's
traffic.  Two scripted clients drive /left and /right in turn and each
side exports its own valid dataset.
"""

import tempfile
from pathlib import Path

from teleopkit.config import bimanual_toml, parse_profile
from teleopkit.pipeline import Pipeline, output_root_for
from teleopkit.replay import ReplayDriver, build_pick_place_script, parse_script
from teleopkit.validate import validate_dataset

workdir = Path(tempfile.mkdtemp(prefix="teleopkit-bimanual-"))
toml = (
    bimanual_toml()
    .replace('clock = "wall"', 'clock = "virtual"')
    .replace('root = "./dataset"', f'root = "{workdir}/out"')
    .replace('video_mode = "mp4"', 'video_mode = "images"')
)
profile = parse_profile(toml)
print(f"namespaces: {[arm.namespace for arm in profile.arms]}")

with Pipeline(profile, gateway_port=0) as pipeline:
    # one script, replayed into each namespace in turn; both arms run in
    # the same process on the same virtual clock.  Expect one planner
    # warning when the first client disconnects: losing a pose feed
    # re-engages that side's clutch, which is the safe thing to do.
    events = parse_script(build_pick_place_script())
    for ns in ("/left", "/right"):
        result = ReplayDriver(pipeline, namespace=ns, tail_s=0.5).run(events)
        assert not result.errors, result.errors
        print(f"{ns}: replayed {result.events_sent} events")

# each namespace owns a subtree under the output root
for ns in ("/left", "/right"):
    root = output_root_for(profile.output_root, ns)
    report = validate_dataset(root)
    print(f"{ns}: {report.summary()}")
print(f"(outputs left in {workdir})")
