import sys

from rfcnn.cli import main

sys.exit(main())
