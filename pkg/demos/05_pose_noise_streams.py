"""Perception noise: corrupt a clean pose stream like a real tracker would.

An episode samples an update period (1-3 steps), jitter and failure
probabilities, and fixed position/orientation biases; the stream then shows
temporal downsampling, repeated outputs, occasional random replacements,
and biased per-step noise.
"""

import numpy as np

from splatgen import Pose, PoseNoiseConfig, Stream, corrupt_stream, init_episode
from splatgen.noise import write_pose_stream
from splatgen.transforms import axis_angle_to_quat
from common import output_path

# a smooth circular trajectory as the clean input
steps = 120
clean = [
    Pose(
        np.array([0.05 * np.cos(t / 12), 0.05 * np.sin(t / 12), 0.4]),
        axis_angle_to_quat([0, 0, 1], t / 15),
    )
    for t in range(steps)
]

config = PoseNoiseConfig()  # table defaults: k in 1..3, failure up to 0.3, +/-12mm
rng = Stream(7)
state = init_episode(config, rng)
print(
    f"episode: update period={state.update_period}, jitter p={state.jitter_prob:.3f}, "
    f"failure p={state.failure_prob:.3f}"
)
print(f"position bias: {(state.position_bias_m * 1000).round(2)} mm")

noisy = corrupt_stream(clean, state, rng)

errors_mm = [np.linalg.norm(n.position - c.position) * 1000 for n, c in zip(noisy, clean)]
held = sum(
    1
    for i in range(1, steps)
    if np.array_equal(noisy[i].position, noisy[i - 1].position)
)
replaced = sum(1 for e in errors_mm if e > 50)  # far outside noise+bias budget
print(f"mean position error: {np.mean(errors_mm):.2f} mm")
print(f"held (repeated) outputs: {held}/{steps - 1}")
print(f"tracking-failure replacements: ~{replaced}")

write_pose_stream(output_path("clean_poses.jsonl"), clean)
write_pose_stream(output_path("noisy_poses.jsonl"), noisy)
print("wrote clean_poses.jsonl and noisy_poses.jsonl")
