import sys

from nbreval.cli import main

sys.exit(main())
