"""Distributed DTBH on a small field: mean m1/R and message counts."""

import argparse

import numpy as np

from snetfdr import experiments as E
from snetfdr.protocol import ProtocolConfig, run_distributed
from snetfdr.pvalues import survival_pvalue
from snetfdr.snet import Scenario, simulate

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--side", type=int, default=30)
    ap.add_argument("--gamma", type=float, default=0.15)
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--k-preset", type=int, default=0)
    ap.add_argument("--seed", type=int, default=105)
    a = ap.parse_args()
    sc = Scenario(grid_width=a.side, grid_height=a.side, num_objects=1)
    T = E.scenario_transform(sc)
    ratio, msgs = [], []
    for t in range(a.trials):
        rf, rt = E.trial_rngs(a.seed, t)
        fld = simulate(sc, rf)
        sel, trace = run_distributed(T(survival_pvalue(sc.null_noise, fld.observations), rt),
                                     ProtocolConfig(a.gamma, k_preset=a.k_preset))
        msgs.append(trace.messages)
        if sel.size:
            ratio.append(fld.m1 / sel.size)
    print(f"mean m1/R {np.mean(ratio):.3f} over {len(ratio)} trials with detections; "
          f"mean messages {np.mean(msgs):.1f} (m = {sc.m})")
