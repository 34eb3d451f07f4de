#!/usr/bin/env python3
"""
DepthDerain - Run Script
Loads .env (for DEPTHDERAIN_CONFIG and friends) and dispatches to the CLI.
"""

import sys
from pathlib import Path

# Add project root to path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from dotenv import load_dotenv

load_dotenv()

from cli import main

if __name__ == "__main__":
    sys.exit(main())
