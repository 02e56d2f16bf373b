# %% [markdown]
# # How long should the sequence be?
#
# A noisy opposing run (half the points dropped, pose drift of 2 cm per
# frame). Distance columns are computed once with a nearest-neighbour pass,
# then the sequence search is replayed for several window lengths.

# %%
import numpy as np

from spot_vpr.config import PipelineConfig
from spot_vpr.pipeline import describe_sequence, evaluate, run_queries, sequence_matches, sweep_w
from spot_vpr.synthworld import (
    FORWARD,
    REVERSE,
    TraversalSpec,
    WorldSpec,
    generate_traversal,
    generate_world,
    render_traversal,
    true_poses,
)

cfg = PipelineConfig(h_c=1.6).validate()
world = generate_world(WorldSpec(seed=4, length=1000.0))


def keyframes(spec):
    poses, gt = generate_traversal(world, spec, 1000.0)
    frames = render_traversal(world, true_poses(poses, gt, spec.camera_height), spec, cfg.r_d)
    return describe_sequence(poses, frames, cfg, gt)


ref = keyframes(TraversalSpec(FORWARD, seed=1))
query = keyframes(TraversalSpec(REVERSE, lateral_offset=5.0, dropout=0.5, pose_noise_std=0.02, seed=5))

# %%
nn_matches, runner = run_queries(np.stack([d.grid for d in ref.descriptors]), query.descriptors,
                                 cfg.replace(matcher="NN"))
nn = evaluate(nn_matches, query.ground_truth(), ref.ground_truth(), [15.0])[15.0]
print(f"single-keyframe NN: MR100={nn[1]:.3f} AUC={nn[2]:.3f}")

# %% [markdown]
# Every w is scored on the same queries (the window centres of the longest
# w), so differences come from the matcher and not from how many edge
# queries each window length gives up.

# %%
ws = [1, 5, 9, 15, 25, 51, 75]
for w, rep in sweep_w(runner.D, query.ground_truth(), ref.ground_truth(), cfg, ws).items():
    _, m, a = rep[15.0]
    print(f"w={w:3d}  MR100={m:.3f}  AUC={a:.3f}")

# %% [markdown]
# For comparison, counting every query (edges included as misses):

# %%
for w in (5, 75):
    rep = evaluate(sequence_matches(runner.D, cfg, w=w), query.ground_truth(), ref.ground_truth(), [15.0])
    print(f"w={w:3d}  all-query MR100={rep[15.0][1]:.3f}")
