#!/usr/bin/env python3
# -*- coding: utf-8 -*-
import os, sys, subprocess

ROOT = os.path.dirname(os.path.abspath(__file__))

def run(cmd, cwd):
    print('>>>', ' '.join(cmd))
    p = subprocess.Popen(cmd, cwd=cwd)
    p.wait()
    if p.returncode != 0:
        raise SystemExit(f'Command failed: {cmd} (code={p.returncode})')

if __name__ == '__main__':
    py = sys.executable  # current interpreter
    repo = os.path.abspath(os.path.join(ROOT, '..'))
    cli = os.path.join(repo, 'src', 'rcis_cli.py')

    # 1) Double integrator: build, explicit projection, membership
    run([py, cli, 'build', '--config', 'configs/integrator_n2.json', '--explicit'], repo)
    run([py, cli, 'check', '--rcis', 'results/rcis/integrator_n2/rcis.json', '--point', '0,0'], repo)

    # 2) Volume table for n = 2, 4
    run([py, os.path.join(ROOT, 'run_integrator_table.py')], repo)

    # 3) Supervised rollouts
    run([py, cli, 'simulate', '--config', 'configs/integrator_n2.json'], repo)
    run([py, os.path.join(ROOT, 'run_lane_keeping.py')], repo)

    # 4) Dominance report for the clashing machine
    run([py, cli, 'inspect-machine', '--config', 'configs/no_dominance.json', '--matrix'], repo)

    print('All artifacts generated under results/.')
