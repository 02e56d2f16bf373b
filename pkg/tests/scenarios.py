"""Synthetic end-to-end runs shared by the acceptance tests."""

import time
from dataclasses import dataclass

import numpy as np

from spot_vpr.config import PipelineConfig
from spot_vpr.evaluation import auc, build_outcomes, mr100, pr_curve
from spot_vpr.pipeline import describe_sequence, run_queries
from spot_vpr.synthworld import route_traversal, generate_traversal, render_traversal, true_poses

CFG = PipelineConfig(h_c=1.6).validate()


def sequence(world, spec, length=None, waypoints=None, cfg=CFG):
    if waypoints is None:
        poses, gt = generate_traversal(world, spec, length)
    else:
        poses, gt = route_traversal(waypoints, spec)
    frames = render_traversal(world, true_poses(poses, gt, spec.camera_height), spec, cfg.r_d)
    return describe_sequence(poses, frames, cfg, gt)


@dataclass
class Run:
    ref: object
    query: object
    matches: list
    runner: object
    seconds: float

    def outcomes(self):
        return build_outcomes(self.matches, self.query.ground_truth(), self.ref.ground_truth())

    def non_edge(self, outcomes=None):
        half = self.runner.params.half
        outcomes = self.outcomes() if outcomes is None else outcomes
        return outcomes[half : len(outcomes) - half]

    def scores(self, outcomes, r_m=15.0):
        curve = pr_curve(outcomes, self.ref.ground_truth(), r_m)
        return curve, mr100(curve), auc(curve)


def run_pair(world, ref_spec, query_spec, length=None, query_waypoints=None, cfg=CFG):
    t0 = time.perf_counter()
    ref = sequence(world, ref_spec, length, cfg=cfg)
    query = sequence(world, query_spec, length, query_waypoints, cfg=cfg)
    grids = np.stack([d.grid for d in ref.descriptors])
    matches, runner = run_queries(grids, query.descriptors, cfg)
    return Run(ref, query, matches, runner, time.perf_counter() - t0)
