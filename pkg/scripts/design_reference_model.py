"""Regenerate the reference model A_m = A - B_m K_x stored in trms_base.json.

Parametric eigenstructure assignment: for each desired pole l_i pick a free
input direction f_i, set v_i = (l_i I - A)^-1 B_m f_i and K_x = -Re(F V^-1).
The free directions are searched by Nelder-Mead to minimize the cross-channel
ramp lag |C A_m^-2 B_m K_g| (decoupled, fast tracking) with a light penalty
on gain size. Poles are fixed at -20+-0.3i, -25+-0.5i, -27+-0.5i.

usage: python scripts/design_reference_model.py [--starts 30] [--write]
Needs scipy (offline design step only).
"""

import argparse
import json

import numpy as np
from scipy.optimize import minimize

from fuzzy_l1.config import data_dir
from fuzzy_l1.plant import PlantParams, decompose

POLES = (-20 + 0.3j, -25 + 0.5j, -27 + 0.5j)


def gain_from(p, A, B):
    F, V = [], []
    for i, lam in enumerate(POLES):
        f = p[4 * i:4 * i + 2] + 1j * p[4 * i + 2:4 * i + 4]
        v = np.linalg.solve(lam * np.eye(6) - A, B @ f)
        F += [f, f.conj()]
        V += [v, v.conj()]
    return -(np.array(F).T @ np.linalg.inv(np.array(V).T)).real


def cost(p, A, B, C):
    try:
        K = gain_from(p, A, B)
        Am = A - B @ K
        if np.linalg.eigvals(Am).real.max() > -19:
            return 1e9
        Ai = np.linalg.inv(Am)
        Kg = -np.linalg.inv(C @ Ai @ B)
        lag = C @ Ai @ Ai @ B @ Kg
    except np.linalg.LinAlgError:
        return 1e9
    return np.abs(lag).sum() + 1e-3 * np.log(np.abs(K).max())


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--starts", type=int, default=30)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--write", action="store_true", help="update the bundled trms_base.json")
    args = ap.parse_args()

    m = decompose(PlantParams())
    rng = np.random.default_rng(args.seed)
    best = None
    for _ in range(args.starts):
        res = minimize(cost, rng.normal(size=12), args=(m.A, m.B_m, m.C), method="Nelder-Mead",
                       options=dict(maxiter=20000, xatol=1e-10, fatol=1e-12))
        if best is None or res.fun < best.fun:
            best = res
    K = gain_from(best.x, m.A, m.B_m)
    Am = m.A - m.B_m @ K
    print("cost", best.fun)
    print("poles", np.sort_complex(np.linalg.eigvals(Am)))
    if args.write:
        path = data_dir() / "trms_base.json"
        cfg = json.loads(path.read_text())
        cfg["controller"]["A_m"] = Am.tolist()
        cfg["controller"]["baseline_gain"] = K.tolist()
        path.write_text(json.dumps(cfg, indent=2) + "\n")
        print("wrote", path)


if __name__ == "__main__":
    main()
