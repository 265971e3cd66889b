import sys

from interjection.cli import main

sys.exit(main())
