"""Median MaxMax2SB by b for Z=3, P=5 at desk scale (20 replications)."""

from _common import run_manifest

if __name__ == "__main__":
    run_manifest("desk_z3.txt", __doc__)
