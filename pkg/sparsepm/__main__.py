# -*- coding: UTF-8 -*-
"""Allow ``python -m sparsepm``."""
import sys

from .cli import main

sys.exit(main())
