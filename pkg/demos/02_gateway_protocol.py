"""
Speaking the gateway's WebSocket protocol by hand
=================================================

Every client - the phone app, the browser console, a script - talks to
the same JSON protocol: ``advertise`` a topic, ``publish`` messages to
it, request ``status``.  This runs a gateway on an ephemeral port and
walks one session through all three, including a deliberately bad frame
to show the error channel.
"""

import json

from websockets.sync.client import connect

from teleopkit.bus import MessageBus
from teleopkit.clock import VirtualClock
from teleopkit.gateway import PhoneGateway

clock = VirtualClock()
bus = MessageBus(clock)
gateway = PhoneGateway(bus, clock, port=0)
gateway.start()
print(f"gateway listening on {gateway.url}")

with connect(gateway.url) as ws:
    # announce intent to publish poses, then stream a few
    ws.send(json.dumps({"op": "advertise", "topic": "/teleop/phone_pose"}))
    for i in range(5):
        ws.send(json.dumps({
            "op": "publish",
            "topic": "/teleop/phone_pose",
            "msg": {
                "header": {"stamp": 20.0 * i},
                "pose": {
                    "position": {"x": 0.01 * i, "y": 0.0, "z": 0.0},
                    "orientation": {"w": 1.0, "x": 0.0, "y": 0.0, "z": 0.0},
                },
            },
        }))

    # a malformed frame gets an error reply; the session survives it
    ws.send("this is not json")
    reply = json.loads(ws.recv())
    print(f"error frame: {reply['op']}: {reply['reason'][:40]}...")

    # the status op reports accepted/rejected counts and the measured rate
    ws.send(json.dumps({"op": "status"}))
    while True:
        frame = json.loads(ws.recv())
        if frame["op"] == "status":
            break
    print(f"accepted={frame['accepted']} decode_errors={frame['decode_errors']}")

# everything accepted landed on the in-process bus, newest last
sub_count = bus.sequence("teleop/phone_pose")
print(f"poses on the bus: {sub_count}")
gateway.stop()
