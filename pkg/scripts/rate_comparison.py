"""Compare the discrete time derivative of int f^{n/(n-1)} dmu with two analytic rate formulas.

The "stated" formula differentiates f along the normal as f' v; the
"geometric" one uses the first variation with f' / v.  Both are evaluated
along short MCF runs while dt and the grid spacing are halved together.
"""

import argparse

import numpy as np

from hypflows.flow import FlowState, MCFLaw, advance, flow_velocity
from hypflows.functionals import fpow_rate_geometric, fpow_rate_stated, weighted_power_integral
from hypflows.geometry import GraphHypersurface
from hypflows.profiles import profile_from_fhat
from hypflows.sphere import build_grid


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--t-end", type=float, default=0.05)
    parser.add_argument("--levels", type=int, default=3)
    args = parser.parse_args()

    profile = profile_from_fhat("r-1", 2, (0.5, 3.0))
    print(f"{'N':>4} {'dt':>9} {'stated err':>11} {'geometric err':>14}")
    for level in range(args.levels):
        N, dt = 16 * 2**level, 1e-3 / 2**level
        grid = build_grid("axisymmetric", 2, N)
        state = FlowState.initial(GraphHypersurface(grid, 1.2 + 0.1 * np.cos(2 * grid.theta)), MCFLaw(profile))
        ts, vals, stated, geometric = [], [], [], []
        for _ in range(int(round(args.t_end / dt)) + 1):
            geo = state.geometry
            ts.append(state.t)
            vals.append(weighted_power_integral(geo, profile.f(geo.r)))
            stated.append(fpow_rate_stated(geo, profile))
            geometric.append(fpow_rate_geometric(geo, profile, flow_velocity(state)))
            state = advance(state, dt)
        deriv = np.gradient(vals, ts, edge_order=2)
        print(f"{N:>4} {dt:>9.2e} {np.max(np.abs(deriv - stated)):>11.3e} "
              f"{np.max(np.abs(deriv - geometric)):>14.3e}")


if __name__ == "__main__":
    main()
