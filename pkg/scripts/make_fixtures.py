"""Generate the synthetic .sm test fixtures under tests/fixtures/.

The files use the PSPLIB single-mode layout (header, PRECEDENCE
RELATIONS, REQUESTS/DURATIONS, RESOURCEAVAILABILITIES) with the standard
job-count classes (32/62/122 jobs including dummy source and sink).

Topology: chains of width-3 layers with full connection between
consecutive layers (every job has 3 successors, the usual PSPLIB cap)
and one shared duration per layer. That gives the networks many
near-equal parallel paths, so stochastic durations inflate the realized
makespan well beyond the deterministic one -- the regime where
propagating uncertainty through the network visibly matters, which is
what the experiment suite exercises. Everything is seeded; re-running
reproduces the files byte for byte.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

FIXTURES = [
    # name, real activities, layer width, generator seed
    ("j30_fix_a", 30, 3, 101),
    ("j30_fix_b", 30, 3, 202),
    ("j60_fix_a", 60, 3, 303),
    ("j60_fix_b", 60, 3, 404),
    ("j120_fix_a", 120, 3, 505),
    ("j120_fix_b", 120, 3, 606),
]

N_RESOURCES = 4


def build_instance(n_real: int, width: int, seed: int):
    """Layered DAG: job 1 dummy source, jobs 2..n-1 real, job n dummy sink.

    Returns (successors per job as a list of lists, durations list).
    """
    if n_real % width:
        raise ValueError("activity count must be a multiple of the layer width")
    rng = np.random.default_rng(seed)
    depth = n_real // width
    n_jobs = n_real + 2
    layer_jobs = [
        list(range(2 + d * width, 2 + (d + 1) * width)) for d in range(depth)
    ]

    successors: list[list[int]] = [[] for _ in range(n_jobs + 1)]
    successors[1] = list(layer_jobs[0])
    for d in range(depth - 1):
        for job in layer_jobs[d]:
            successors[job] = list(layer_jobs[d + 1])
    for job in layer_jobs[-1]:
        successors[job] = [n_jobs]

    layer_durations = rng.integers(2, 10, size=depth)
    durations = [0] + [
        int(layer_durations[d]) for d in range(depth) for _ in range(width)
    ] + [0]
    return [successors[j] for j in range(1, n_jobs + 1)], durations, rng


def render_sm(name: str, succ_lists, durations, rng) -> str:
    n_jobs = len(durations)
    requests = rng.integers(0, 11, size=(n_jobs, N_RESOURCES))
    requests[0] = 0
    requests[-1] = 0
    availability = requests.max(axis=0) + rng.integers(1, 5, size=N_RESOURCES)
    horizon = int(sum(durations))
    bar = "*" * 72

    lines = [
        bar,
        f"file with basedata            : {name}.bas",
        "initial value random generator: 20",
        bar,
        "projects                      :  1",
        f"jobs (incl. supersource/sink ):  {n_jobs}",
        f"horizon                       :  {horizon}",
        "RESOURCES",
        f"  - renewable                 :  {N_RESOURCES}   R",
        "  - nonrenewable              :  0   N",
        "  - doubly constrained        :  0   D",
        bar,
        "PROJECT INFORMATION:",
        "pronr.  #jobs  rel.date  duedate  tardcost  MPM-Time",
        f"    1     {n_jobs - 2}      0       {horizon}        0       {horizon}",
        bar,
        "PRECEDENCE RELATIONS:",
        "jobnr.    #modes  #successors   successors",
    ]
    for job in range(1, n_jobs + 1):
        succ = succ_lists[job - 1]
        row = f"{job:4d}{1:9d}{len(succ):13d}"
        if succ:
            row += "        " + "  ".join(f"{s:3d}" for s in succ)
        lines.append(row)
    lines += [
        bar,
        "REQUESTS/DURATIONS:",
        "jobnr. mode duration  "
        + "  ".join(f"R {k + 1}" for k in range(N_RESOURCES)),
        "-" * 72,
    ]
    for job in range(1, n_jobs + 1):
        req = "".join(f"{int(r):5d}" for r in requests[job - 1])
        lines.append(f"{job:4d}{1:6d}{durations[job - 1]:9d} {req}")
    lines += [
        bar,
        "RESOURCEAVAILABILITIES:",
        "  " + "  ".join(f"R {k + 1}" for k in range(N_RESOURCES)),
        "  " + "".join(f"{int(a):5d}" for a in availability),
        bar,
        "",
    ]
    return "\n".join(lines)


def main(out_dir: str) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, n_real, width, seed in FIXTURES:
        succ_lists, durations, rng = build_instance(n_real, width, seed)
        text = render_sm(name, succ_lists, durations, rng)
        (out / f"{name}.sm").write_text(text)
        print(f"wrote {out / f'{name}.sm'} ({n_real + 2} jobs)")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "tests/fixtures")
