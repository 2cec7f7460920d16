"""
Haupteinstiegspunkt des Gitter-Simulators.

Aufruf: python app.py <unterbefehl> [optionen], z.B. python app.py params --depths 5:24:1
"""

from __future__ import annotations

import sys

from controller.cli import main

if __name__ == "__main__":
    # Wiring der Schichten (Repository -> Service -> Controller -> View) in controller.cli.run
    sys.exit(main())
