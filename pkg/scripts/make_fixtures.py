"""Regenerate the bundled fixture documents in src/qempc/fixtures/."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "qempc" / "fixtures"


def region(H, K, F, G, witness):
    return {"H": H, "K": K, "F": F, "G": G, "witness": witness}


def sat1d():
    box = {"lo": [-5.0], "hi": [5.0]}
    regions = [
        region([[1.0], [-1.0]], [-1.0, 5.0], [[0.0]], [-1.0], [-3.0]),
        region([[1.0], [-1.0]], [1.0, 1.0], [[1.0]], [0.0], [0.0]),
        region([[1.0], [-1.0]], [5.0, -1.0], [[0.0]], [1.0], [3.0]),
    ]
    return {"name": "SAT1D", "n": 1, "m": 1, "state_box": box, "regions": regions}


def gain2():
    box = {"lo": [-1.0], "hi": [1.0]}
    regions = [
        region([[1.0], [-1.0]], [0.0, 1.0], [[0.1]], [0.0], [-0.5]),
        region([[1.0], [-1.0]], [1.0, 0.0], [[0.9]], [0.0], [0.5]),
    ]
    return {"name": "GAIN2", "n": 1, "m": 1, "state_box": box, "regions": regions}


def box2():
    box = {"lo": [0.0, 0.0], "hi": [2.0, 1.0]}
    rows_left = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]
    rows_right = [[-1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]
    regions = [
        region(rows_left, [1.0, 0.0, 1.0, 0.0], [[0.5, 0.0]], [0.0], [0.5, 0.5]),
        region(rows_right, [-1.0, 2.0, 1.0, 0.0], [[1.0, 0.0]], [-0.5], [1.5, 0.5]),
    ]
    return {"name": "BOX2", "n": 2, "m": 1, "state_box": box, "regions": regions}


def het2():
    # Saturated law u = clip(phi(x), -1, 1) with phi switching gain across
    # the line s x = 0; phi_A - phi_B = 0.5 s keeps u continuous.
    s = np.array([1.0, -0.5])
    phi_a = np.array([0.75, 0.375])
    phi_b = np.array([0.25, 0.625])
    box_rows = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]
    box_k = [15.0] * 4

    def unit(h, k):
        nrm = float(np.linalg.norm(h))
        return (np.asarray(h) / nrm).tolist(), float(k) / nrm

    def make(rows, law_F, law_G, witness):
        H = [r[0] for r in rows] + box_rows
        K = [r[1] for r in rows] + box_k
        return region(H, K, [list(law_F)], [law_G], witness)

    side_b = unit(s, 0.0)  # s x <= 0
    side_a = unit(-s, 0.0)  # s x >= 0
    zero = [0.0, 0.0]
    regions = [
        make([side_b, unit(phi_b, -1.0)], zero, -1.0, [-10.0, 0.0]),
        make([side_b, unit(phi_b, 1.0), unit(-phi_b, 1.0)], phi_b, 0.0, [-1.0, 0.0]),
        make([side_b, unit(-phi_b, -1.0)], zero, 1.0, [0.0, 10.0]),
        make([side_a, unit(phi_a, -1.0)], zero, -1.0, [-5.0, -14.0]),
        make([side_a, unit(phi_a, 1.0), unit(-phi_a, 1.0)], phi_a, 0.0, [1.0, 0.0]),
        make([side_a, unit(-phi_a, -1.0)], zero, 1.0, [10.0, 0.0]),
    ]
    return {
        "name": "HET2",
        "n": 2,
        "m": 1,
        "state_box": {"lo": [-15.0, -15.0], "hi": [15.0, 15.0]},
        "regions": regions,
    }


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for make_doc in (sat1d, gain2, box2, het2):
        doc = make_doc()
        path = OUT / f"{doc['name'].lower()}.json"
        path.write_text(json.dumps(doc, indent=1) + "\n")
        print("wrote", path)


if __name__ == "__main__":
    main()
