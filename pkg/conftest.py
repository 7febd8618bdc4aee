import os
import sys

# keep test runs from writing log files; must happen before src.utils.logger is imported
os.environ.setdefault("GMC_LOG_TO_FILE", "0")
os.environ.setdefault("GMC_LOG_LEVEL", "WARNING")

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
