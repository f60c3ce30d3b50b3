#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""Lane-keeping stand-in experiments.

1) r_d,max sweep: tree (L=4) and simple loop (L=14) against the oracle, for
   measurable and non-measurable (lifted) curvature -> results/lane_keeping/sweep.csv
2) supervised curvature-step rollout, implicit set vs explicit maximal set
   -> results/lane_keeping/{trajectory.csv, trajectory.svg, simulation.json}
"""
import os, sys, argparse
sys.path.append(os.path.join(os.path.dirname(__file__), '..', 'src'))
import pandas as pd
from experiment_logger import ExperimentLogger
from linear_system import LANE_KEEPING_NOMINAL_GAIN
from maximal_rcis_oracle import maximal_rcis
from run_config import config_from_dict, initial_state, load_config, run_build, run_compare, write_json
from supervisor import (NominalPolicy, make_disturbance_trace, plot_trajectory_svg, simulate,
                        write_trajectory_csv)

R_D_MAX = [0.01, 0.015, 0.03, 0.05, 0.07]
ARMS = [
    {"kind": "tree", "L": 4, "label": "tree (L=4)"},
    {"kind": "simple_loop", "L": 14, "label": "simple loop (L=14)"},
]


def sweep(samples, seed, logger):
    frames = []
    for r_d_max in R_D_MAX:
        for mode in ('measurable', 'non_measurable'):
            cfg = config_from_dict({
                'name': f'lane_keeping_{mode}_{r_d_max}',
                'plant': {'preset': 'lane_keeping', 'r_d_max': r_d_max, 'disturbance': mode},
                'compare': {'machines': ARMS},
                'oracle': {'N_mc': samples, 'seed': seed},
            })
            table = run_compare(cfg).table()
            table.insert(0, 'disturbance', mode)
            table.insert(0, 'r_d_max', r_d_max)
            frames.append(table)
            logger.log('lane_keeping_sweep', {'r_d_max': r_d_max, 'disturbance': mode, 'samples': samples},
                       {'table': table.to_dict(orient='records')})
            print(table.to_string(index=False))
    return pd.concat(frames, ignore_index=True)


def curvature_step(cfg, out_dir, logger):
    sim = cfg.simulation
    outcome = run_build(cfg)
    plant = outcome.synth.plant
    print(f'{outcome.machine.label}: {outcome.rcis.kind.value}, built in {outcome.elapsed_s:.2f}s')

    C_max = maximal_rcis(outcome.synth.original, cfg.oracle).reported_set()
    d_trace = make_disturbance_trace(plant, sim['disturbance'], sim['T'], seed=cfg.seed)
    traj = simulate(plant, NominalPolicy(gain=LANE_KEEPING_NOMINAL_GAIN), outcome.rcis, d_trace,
                    initial_state(cfg, outcome), T=sim['T'], explicit_set=C_max, scenario=cfg.name)

    write_trajectory_csv(traj, os.path.join(out_dir, 'trajectory.csv'))
    plot_trajectory_svg(traj, os.path.join(out_dir, 'trajectory.svg'), plant=plant,
                        state_labels=sim.get('state_labels'), dt=sim.get('dt', 1.0))
    summary = traj.summary()
    write_json(summary, os.path.join(out_dir, 'simulation.json'))
    logger.log('lane_keeping_curvature_step', {'disturbance': sim['disturbance']}, summary)
    print(summary)


if __name__ == '__main__':
    ap = argparse.ArgumentParser()
    ap.add_argument('--samples', type=int, default=10000)
    ap.add_argument('--seed', type=int, default=0)
    ap.add_argument('--skip-sweep', action='store_true')
    args = ap.parse_args()

    root = os.path.join(os.path.dirname(__file__), '..')
    out_dir = os.path.join(root, 'results', 'lane_keeping')
    os.makedirs(out_dir, exist_ok=True)
    logger = ExperimentLogger()
    if not args.skip_sweep:
        sweep(args.samples, args.seed, logger).to_csv(os.path.join(out_dir, 'sweep.csv'), index=False)
    curvature_step(load_config(os.path.join(root, 'configs', 'lane_keeping.yaml')), out_dir, logger)
    print('Saved under', out_dir)
