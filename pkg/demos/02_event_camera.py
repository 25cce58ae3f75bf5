#!/usr/bin/env python3
"""Emulate the event camera on consecutive frames.

Each pixel holds a reference log-luminance and emits one signed event
per crossed contrast threshold; the residual stays in the reference, so
no brightness change is ever lost or double counted. Static scenes are
completely silent.
"""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from spiketrack import dvs
from spiketrack import scene as sc

scene = sc.validate_scene(sc.default_scene())
frames = [sc.render_frame(scene, k) for k in range(12)]

camera = dvs.init_reference(frames[0])
events = [dvs.emulate_step(camera, frames[k], k - 1) for k in range(1, 12)]
print("events per transition:", [len(e) for e in events])

# ON events (brightness up) trace the leading edges, OFF events the
# trailing edges of each moving shape.
img = np.zeros((scene.height, scene.width, 3))
for e in events[-1:]:
    img[e.y[e.p > 0], e.x[e.p > 0], 1] = 1.0   # ON -> green
    img[e.y[e.p < 0], e.x[e.p < 0], 0] = 1.0   # OFF -> red

fig, (a, b) = plt.subplots(1, 2, figsize=(9, 4.5))
a.imshow(frames[11], cmap="gray", vmin=0, vmax=1)
a.set_title("frame 11")
b.imshow(img)
b.set_title("events of the last transition")
for ax in (a, b):
    ax.set_axis_off()
fig.tight_layout()
fig.savefig("demo02_events.png", dpi=110)
print("wrote demo02_events.png")

# Feeding the same frame again: nothing changed, nothing fires.
print("replay of frame 11:", len(dvs.emulate_step(camera, frames[11], 11)), "events")
