"""Smoke test for the pyfluctlat extension module.

Build and install first, e.g. `maturin develop -m crates/py/Cargo.toml`.
"""

import math
import tempfile
from pathlib import Path

import pyfluctlat as fl


def main():
    rate = fl.CylinderRate("constant")
    assert rate.range == 0
    assert rate.check_assumptions() == (True, True)
    assert abs(rate.creation(0.3) - 0.7) < 1e-15

    assert abs(fl.phi(2.0, 1.0, 1.0)) < 1e-12
    assert abs(fl.phi(0.7, 1.3, -2.0) - fl.phi_legendre_oracle(0.7, 1.3, -2.0)) < 1e-9
    assert fl.phi(0.0, 1.0, 0.5) == math.inf

    still = fl.solve_hydro(rate, "const 0.5", 0.2, 32)
    assert all(v == 0.5 for row in still.rho for v in row)

    traj = fl.solve_hydro(rate, "bump 0.5 0.25", 0.2, 32, g="poly 0.3", h="sine 0.2 1")
    breakdown = fl.evaluate_rate(traj, rate, gamma="bump 0.5 0.25")
    assert breakdown["feasible"] and breakdown["h_gamma"] == 0.0
    assert abs(fl.evaluate_j(traj, rate) - breakdown["i0"]) < 1e-10

    result = fl.contract(traj, rate, audits=3)
    assert 0.0 < result["f_rho"] <= breakdown["i0"] + 1e-12
    assert result["audit"]["passed"] == 3

    sim = fl.simulate(16, 0.1, rate, replicas=4, seed=3, samples=5)
    assert sim["run_count"] == 4 and len(sim["density"]) == 5 and len(sim["x"]) == 33

    moment = fl.exact_tilted_moment(2, 0.1, rate, g="const 0.3", h="poly 0 1")
    assert abs(moment - 1.0) < 1e-8

    with tempfile.TemporaryDirectory() as out:
        path = Path(out) / "fields.csv"
        traj.write_fields(str(path))
        back = fl.Trajectory.read_fields(str(path))
        assert back.rho == traj.rho and back.h == traj.h
        passed, summary = fl.run_experiment("mode = oracle\nsim.n = 2\nsim.t = 0.1\n", out)
        assert passed and abs(summary["moment"] - 1.0) < 1e-12

    assert fl.format_number(0.5) == "0.50000000000000000"
    print(f"pyfluctlat {fl.__version__}: smoke test passed")


if __name__ == "__main__":
    main()
