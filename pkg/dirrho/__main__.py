import sys

from dirrho.cli import main

sys.exit(main())
