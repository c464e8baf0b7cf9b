"""Regenerate the bundled demo material, climate and config files.

Run from the repository root:  python3 tools/make_demo_data.py
"""

from pathlib import Path

import numpy as np

from hygrofem.appio import format_config, write_curve_csv, write_surface_csv

OUT = Path(__file__).resolve().parents[1] / "src" / "hygrofem" / "data"
RHO_W = 1000.0
THETA = np.linspace(250.0, 340.0, 91)


def sat_pressure(theta):
    """Magnus-type saturation vapour pressure over water (Pa)."""
    return 610.5 * np.exp(17.269 * (theta - 273.15) / (theta - 35.85))


def vapour_permeability(theta):
    """Vapour permeability of still air (kg m^-1 s^-1 Pa^-1)."""
    return 2.0e-7 * theta ** 0.81 / 101325.0


def phi_grid():
    # dense towards saturation where storage curves steepen
    tail = 1.0 - np.geomspace(0.1, 1e-4, 60)
    return np.unique(np.concatenate([np.linspace(0.0, 0.9, 91), tail, [1.0]]))


def storage(phi, w_f, b):
    """Volumetric water content (m3/m3) against relative humidity."""
    return w_f * (b - 1.0) * phi / (b - phi)


def storage_slope(phi, w_f, b):
    return w_f * (b - 1.0) * b / (b - phi) ** 2


def liquid_diffusivity(w_kg, w_f_kg, A):
    """Capillary transport coefficient (m2/s), exponential in water content."""
    return 3.8 * (A / w_f_kg) ** 2 * 1000.0 ** (w_kg / w_f_kg - 1.0)


def kunzel_material(name, rho0, c0, lam_dry, lam_w, mu, w_f, b, A):
    phi = phi_grid()
    w = storage(phi, w_f, b)
    write_curve_csv(OUT / f"{name}_h.csv", phi, w, ("phi", "w"))
    w_axis = np.linspace(0.0, w_f, 20)
    lam = np.array([[lam_dry * (1 + lam_w * wv) * (1 + 0.002 * (t - 283.0)) for t in THETA[::10]]
                    for wv in w_axis])
    write_surface_csv(OUT / f"{name}_lambda.csv", w_axis, THETA[::10], lam, "w/theta")
    dphi = liquid_diffusivity(RHO_W * w, RHO_W * w_f, A) * RHO_W * storage_slope(phi, w_f, b)
    theta2 = THETA[[0, -1]]
    write_surface_csv(OUT / f"{name}_dphi.csv", phi, theta2, np.column_stack([dphi, dphi]),
                      "phi/theta")
    mat = {
        "model": "kunzel", "rho0": rho0, "c0": c0, "rho_w": RHO_W, "c_w": 4186.0,
        "L_v": 2.5e6, "mu": mu, "alpha1": 25.0, "alpha2": 5e-5,
        "h_curve": f"{name}_h.csv", "p_s": "saturation_pressure.csv",
        "delta": "vapour_permeability.csv", "lam": f"{name}_lambda.csv",
        "D_phi_hat": f"{name}_dphi.csv",
    }
    (OUT / f"mat_{name}.cfg").write_text(f"# demo material: {name}\n" + format_config({"material": mat}))


def kiessl_brick():
    Phi = np.unique(np.concatenate([np.linspace(0.0, 0.01, 11), np.linspace(0.01, 2.0, 200)]))
    f = 0.01 * Phi + 0.08 * (Phi / 2.0) ** 3
    g = Phi / (1.0 + Phi ** 4) ** 0.25
    write_curve_csv(OUT / "kiessl_brick_f.csv", Phi, f, ("Phi", "w"))
    write_curve_csv(OUT / "kiessl_brick_g.csv", Phi, g, ("Phi", "phi"))
    rho_ps = sat_pressure(THETA) * 0.018015 / (8.314 * THETA)
    write_curve_csv(OUT / "kiessl_rho_ps.csv", THETA, rho_ps, ("theta", "rho_ps"))
    w_axis = np.linspace(0.0, 0.1, 21)
    th = THETA
    lam = np.array([[0.6 * (1 + 8 * wv) * (1 + 0.002 * (t - 283.0)) for t in th] for wv in w_axis])
    dw = np.array([[2e-8 * 1000.0 ** (wv / 0.1 - 1.0) for _ in th] for wv in w_axis])
    dphi = np.array([[vapour_permeability(t) / 10.0 * sat_pressure(t) for t in th] for _ in w_axis])
    dth = np.full((len(w_axis), len(th)), 1e-10)
    for tag, v in (("lambda", lam), ("dw", dw), ("dphi", dphi), ("dtheta", dth)):
        write_surface_csv(OUT / f"kiessl_brick_{tag}.csv", w_axis, th, v, "w/theta")
    mat = {
        "model": "kiessl", "rho0": 1650.0, "c0": 850.0, "rho_w": RHO_W, "c_w": 4186.0,
        "e": 0.3, "L_v": 2.5e6, "alpha1": 25.0, "alpha2": 5e-8,
        "f": "kiessl_brick_f.csv", "g": "kiessl_brick_g.csv", "rho_ps": "kiessl_rho_ps.csv",
        "lam": "kiessl_brick_lambda.csv", "D_w": "kiessl_brick_dw.csv",
        "D_phi": "kiessl_brick_dphi.csv", "D_theta": "kiessl_brick_dtheta.csv",
    }
    (OUT / "mat_kiessl_brick.cfg").write_text("# demo material: kiessl_brick\n" + format_config({"material": mat}))


def climates():
    t = np.arange(0.0, 48 * 3600.0 + 1, 3600.0)
    day = 2 * np.pi * t / 86400.0
    theta = 273.0 - 5.0 * np.cos(day)
    phi = 0.875 + 0.075 * np.cos(day)
    with open(OUT / "climate_outdoor.csv", "w") as fh:
        fh.write("t_s,sigma1,sigma2\n")
        for row in zip(t, theta, phi):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    (OUT / "climate_indoor.csv").write_text("t_s,sigma1,sigma2\n0.0,293.15,0.5\n")


def configs():
    wall = {
        "run": {"strategy": "picard", "h_target": 0.02, "h_t": 60.0, "t_end": 7200.0,
                "eps_fp": 1e-8, "k_max": 50, "solver_tol": 1e-12,
                "snapshot_times": [0.0, 3600.0, 7200.0]},
        "layer.brick": {"rect": [0.0, 0.0, 0.24, 0.24], "material": "brick", "initial": [293.15, 0.5]},
        "layer.insulation": {"rect": [0.24, 0.0, 0.34, 0.24], "material": "insulation",
                             "initial": [293.15, 0.5]},
        "material.brick": {"file": "mat_kunzel_brick.cfg"},
        "material.insulation": {"file": "mat_kunzel_insulation.cfg"},
        "boundary.west": {"alpha": [25.0, 5e-5], "climate": "climate_outdoor.csv"},
        "boundary.east": {"alpha": [8.0, 2.5e-5], "climate": "climate_indoor.csv"},
        "output": {"dir": "out_demo_wall", "vtk": True, "figures": True,
                   "probes": {"brick_outer": [0.0, 0.12], "brick_mid": [0.12, 0.12],
                              "interface": [0.24, 0.12], "indoor_surface": [0.34, 0.12]}},
    }
    (OUT / "demo_wall.cfg").write_text("# two-layer wall: brick with interior insulation\n"
                                      + format_config(wall))
    mms = {
        "run": {"h_target": 0.125, "h_t": 0.25, "t_end": 1.0},
        "layer.left": {"rect": [0.0, 0.0, 0.5, 1.0], "material": "lin1", "initial": [1.0, 0.5]},
        "layer.right": {"rect": [0.5, 0.0, 1.0, 1.0], "material": "lin2", "initial": [1.0, 0.5]},
        "material.lin1": {"model": "linear", "beta": [[1.0, 0.2], [0.1, 1.0]],
                          "kappa": [[1.0, 0.1], [0.1, 0.5]]},
        "material.lin2": {"model": "linear", "beta": [[1.0, 0.2], [0.1, 1.0]],
                          "kappa": [[2.0, 0.1], [0.1, 0.5]]},
        "output": {"dir": "out_mms", "vtk": False, "figures": True},
        "mms": {"case": "spatial", "h_list": [0.125, 0.0625, 0.03125], "ht_list": [0.25]},
    }
    (OUT / "mms_spatial.cfg").write_text("# manufactured-solution convergence study\n"
                                        + format_config(mms))


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    write_curve_csv(OUT / "saturation_pressure.csv", THETA, sat_pressure(THETA), ("theta", "p_s"))
    write_curve_csv(OUT / "vapour_permeability.csv", THETA, vapour_permeability(THETA),
                    ("theta", "delta"))
    kunzel_material("kunzel_brick", 1650.0, 850.0, 0.6, 8.0, 10.0, 0.19, 1.02, 0.4)
    kunzel_material("kunzel_insulation", 150.0, 2000.0, 0.045, 2.0, 5.0, 0.01, 1.05, 0.002)
    kiessl_brick()
    climates()
    configs()


if __name__ == "__main__":
    main()
