"""Median MaxMax2SB for Z=5, P=5, b=0.5 at desk scale (20 replications)."""

from _common import run_manifest

if __name__ == "__main__":
    run_manifest("desk_z5.txt", __doc__)
