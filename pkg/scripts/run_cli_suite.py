"""Run the fixed CLI command list into an output directory and write a sha256 manifest.

    python3 scripts/run_cli_suite.py OUTDIR [--seed N]

Every command writes through ``--out`` with a path relative to OUTDIR, so the
recorded options (and thus the file bytes) do not depend on where OUTDIR lives.
Exit status is nonzero if any command's exit code differs from the expected one.
"""
import argparse
import hashlib
import os
import sys
from pathlib import Path

from htkoop.cli import main as htkoop

GRIG = ["grigorchuk:a", "grigorchuk:b", "grigorchuk:c", "grigorchuk:d"]


def commands(seed: int) -> list[tuple[str, list[str], int]]:
    s = ["--seed", str(seed)]
    return [
        ("g1.json", ["ht", "gm", "--m", "1"], 0),
        ("g2_32.json", ["ht", "gm", "--n", "3", "--r", "2", "--m", "2"], 0),
        ("gma.json", ["ht", "gma", "--A", "1:0,2:3", "--m", "3"], 0),
        ("transporter.json", ["ht", "transporter", "--n", "3", "--I1", "2:1", "--I2", "3:7"], 0),
        ("compose.json", ["ht", "compose", "g1.json", "gma.json"], 0),
        ("validate_g1.json", ["ht", "validate", "g1.json"], 0),
        ("validate_compose.json", ["ht", "validate", "compose.json"], 0),
        ("kmat_g1.csv", ["ht", "koopman-matrix", "g1.json", "--k", "2"], 0),
        ("kmat_g2_32.csv", ["ht", "koopman-matrix", "g2_32.json", "--k", "1"], 0),
        ("converge_all.csv", ["ht", "converge", "--A", "all", "--m-max", "6"], 0),
        ("converge_half.csv", ["ht", "converge", "--A", "1:0", "--xi1", "1:1", "--m-max", "6"], 0),
        ("converge_random.csv", ["ht", "converge", "--n", "3", "--r", "2", "--A", "1:1,2:0",
                                 "--xi1", "random", "--xi2", "random", "--m-max", "5", *s], 0),
        ("converge_random.json", ["ht", "converge", "--A", "2:1", "--xi1", "random",
                                  "--xi2", "random", "--m-max", "4", "--format", "json", *s], 0),
        ("contract_pass.json", ["ht", "contract", "--A", "1:0", "--M", "3", "--eps", "1/16", "--m", "5"], 0),
        ("contract_fail.json", ["ht", "contract", "--A", "1:0", "--M", "3", "--eps", "1/16", "--m", "2"], 1),
        ("tree_activity_b.csv", ["tree", "activity", "grigorchuk:b", "--n-max", "20"], 0),
        ("tree_rn_a.json", ["tree", "rn", "grigorchuk:a", "--p", "1/3,2/3", "--word", "1"], 0),
        ("tree_koopman_a.json", ["tree", "koopman", "grigorchuk:a", "--p", "1/3,2/3"], 0),
        ("tree_koopman_b.json", ["tree", "koopman", "grigorchuk:b", "--p", "1/3,2/3",
                                 "--xi", "1:2,21", "--eta", "root", "--depth-cap", "10"], 0),
        ("tree_transitivity.csv", ["tree", "transitivity", *GRIG, "--n-max", "8"], 0),
        ("tree_subexp_d.csv", ["tree", "subexp", "grigorchuk:d", "--n-max", "20", "--gamma", "9/10"], 0),
    ]


def run(outdir: Path, seed: int) -> int:
    outdir.mkdir(parents=True, exist_ok=True)
    os.chdir(outdir)
    bad = 0
    names = []
    for name, argv, expected in commands(seed):
        code = htkoop([*argv, "--out", name])
        names.append(name)
        if code != expected:
            print(f"{name}: exit {code}, expected {expected}", file=sys.stderr)
            bad += 1
    with open("MANIFEST.sha256", "w", newline="") as fh:
        for name in names:
            fh.write(f"{hashlib.sha256(Path(name).read_bytes()).hexdigest()}  {name}\n")
    return 1 if bad else 0


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("outdir", type=Path)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    sys.exit(run(args.outdir.resolve(), args.seed))
