"""The full Z in {3,5} factorial design. Use --workers to spread replications over cores."""

from _common import run_manifest

if __name__ == "__main__":
    run_manifest("full_z35.txt", __doc__)
