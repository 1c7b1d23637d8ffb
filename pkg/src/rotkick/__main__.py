import sys

from rotkick.cli import main

sys.exit(main())
