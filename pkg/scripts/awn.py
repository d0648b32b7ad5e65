#!/usr/bin/env python3
"""
Script to run any-width network experiments.

    python scripts/awn.py train --experiment fashionmnist_awn_rs --epochs 5
    python scripts/awn.py sweep --checkpoint results/fashionmnist_awn_rs/model.ckpt
"""

import sys
from pathlib import Path

# Add project root to path
sys.path.append(str(Path(__file__).parent.parent))

from src.cli import main

if __name__ == "__main__":
    sys.exit(main())
