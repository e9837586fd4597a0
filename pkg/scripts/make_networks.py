"""Regenerate the bundled network definition files.

net4: a 4-bus ring teaching case with two loads.
feeder30: a 30-bus radial feeder (main trunk plus laterals) with a load
on every non-slack bus. Impedances are seeded so the file is
reproducible from this script.
"""

import pathlib

import numpy as np

from hybridflow.netmodel import Bus, Line, make_network, save_network

OUT = pathlib.Path(__file__).resolve().parents[1] / "src" / "hybridflow" / "networks"


def net4():
    buses = [
        Bus(0, "slack"),
        Bus(1, "pq", load_attachment=0),
        Bus(2, "pq", load_attachment=1),
        Bus(3, "pq"),
    ]
    lines = [
        Line(0, 1, 0.01, 0.05),
        Line(1, 2, 0.02, 0.06),
        Line(2, 3, 0.015, 0.045),
        Line(3, 0, 0.01, 0.04),
    ]
    return make_network(buses, lines, name="net4")


def feeder30():
    rng = np.random.default_rng(2024)
    n = 30
    buses = [Bus(0, "slack")]
    buses += [Bus(i, "pq", load_attachment=i - 1) for i in range(1, n)]

    # main trunk 0-1-...-11, laterals hanging off trunk buses
    lines = []

    def add(i, j):
        r = float(rng.uniform(0.004, 0.010))
        x = float(rng.uniform(0.012, 0.030))
        lines.append(Line(i, j, round(r, 6), round(x, 6)))

    for i in range(11):
        add(i, i + 1)
    laterals = {2: [12, 13, 14], 4: [15, 16, 17], 6: [18, 19, 20, 21],
                8: [22, 23, 24], 10: [25, 26], 11: [27, 28, 29]}
    for root, chain in laterals.items():
        prev = root
        for node in chain:
            add(prev, node)
            prev = node
    return make_network(buses, lines, name="feeder30")


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    for net in (net4(), feeder30()):
        path = OUT / f"{net.name}.yaml"
        save_network(net, path)
        print(f"wrote {path} ({net.n_bus} buses, {len(net.lines)} lines, "
              f"{net.n_loads} loads)")
