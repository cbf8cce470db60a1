#!/usr/bin/env python3
"""QFI and measurement Fisher information vs bath temperature at alpha = 1/2
(figure 3 pipeline).  Writes fig3_sweep.csv (with the fitted low-T slope as a
footer) and SVG plots under results/fig3.
"""
import sys

from qubit_thermometry.cli import main

if __name__ == "__main__":
    sys.exit(main(["reproduce", "fig3", "--out", "results/fig3", *sys.argv[1:]]))
