import sys

from fefferman_tractor.feffcheck.cli import main

if __name__ == "__main__":
    sys.exit(main())
