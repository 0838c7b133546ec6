import sys
from pathlib import Path

# Add the repository root to the path for local imports
sys.path.insert(0, str(Path(__file__).parent))

from src.cli.app import main

if __name__ == "__main__":
    main()
