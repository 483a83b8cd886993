#!/usr/bin/env python3
"""Generates the bundled attacked-run scenarios, including the tabulated
bounded attack signal shared by the triggered runs."""
import json, math, sys

X0 = 7.33861
GRAPH = {
    "n_agents": 5,
    "edges": [[1, 2], [1, 3], [1, 5], [2, 3], [3, 4]],
    "leader_links": [1],
}
# attack signal: per-agent DC plus slow oscillation, |d(t)| <= ~0.91
C = [0.45, -0.35, 0.5, -0.3, 0.4]
OMEGA = [2.0, 2.6, 3.4, 1.7, 2.9]
PHI = [0.0, 1.1, 2.3, 0.7, 1.9]

def attack_table(horizon=20.0, step=0.25):
    times, values = [], []
    t = 0.0
    while t <= horizon + 1e-9:
        times.append(round(t, 6))
        values.append([
            C[i] * (0.6 + 0.4 * math.sin(OMEGA[i] * t + PHI[i])) for i in range(5)
        ])
        t += step
    return {"times": times, "values": values}

U = [0.9, -0.7, 0.3, -0.6, 0.2]
W = [-0.5, 0.8, -0.4, 0.6, -0.3]

def beta_run(beta, a0, d_bar):
    amp = a0 / math.sqrt(1.0 + beta * beta)
    return {
        "graph": GRAPH,
        "design": {
            "beta": beta,
            "d_bar": d_bar,
            "epsilon": 186.39439,
            "mu": 0.27775,
            "sigma1": 1.0,
            "sigma2": 1.0,
        },
        "attack": {"kind": "tabulated", "d_bar": 1.0, "table": attack_table()},
        "trigger": {"mode": "layerwise_dynamic"},
        "sim": {
            "dt": 1e-5,
            "horizon": 20.0,
            "x0": X0,
            "x_init": [X0 + amp * u for u in U],
            "z_init": [amp * w for w in W],
            "decimation": 100,
        },
    }

def sweep_scenario(d_bar):
    s = beta_run(1.0, 0.0, d_bar)
    s["sim"]["x_init"] = [X0] * 5
    s["sim"]["z_init"] = [0.0] * 5
    s["sweep"] = {"betas": [0.0, 1.0, 2.5, 5.0]}
    return s

def single_scenario(a0, d_bar):
    s = beta_run(1.0, a0, d_bar)
    s["design"]["kappa"] = 0.5
    s["trigger"] = {"mode": "single_state_based"}
    return s

def ultimate_bound_scenario(d_bar):
    s = beta_run(1.0, 0.0, d_bar)
    s["sim"]["x_init"] = [-40.0, -38.0, -42.0, -39.0, -41.0]
    s["sim"]["z_init"] = [0.0] * 5
    return s

if __name__ == "__main__":
    a0 = float(sys.argv[1]) if len(sys.argv) > 1 else 0.9
    d_bar = float(sys.argv[2]) if len(sys.argv) > 2 else 1.695
    out = sys.argv[3] if len(sys.argv) > 3 else "scenarios"
    scenarios = {
        "dynamic_beta1": beta_run(1.0, a0, d_bar),
        "dynamic_beta2_5": beta_run(2.5, a0, d_bar),
        "dynamic_beta5": beta_run(5.0, a0, d_bar),
        "beta_sweep": sweep_scenario(d_bar),
        "single_mode": single_scenario(a0, d_bar),
        "ultimate_bound": ultimate_bound_scenario(d_bar),
    }
    for name, scenario in scenarios.items():
        with open(f"{out}/{name}.json", "w") as f:
            json.dump(scenario, f, indent=2)
            f.write("\n")
    print(f"wrote {len(scenarios)} scenarios with a0={a0} d_bar={d_bar}")
