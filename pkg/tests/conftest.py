# -*- coding: utf-8 -*-
import os
import sys

# The scripts import their helpers as "utils.*", relative to src/.
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))
