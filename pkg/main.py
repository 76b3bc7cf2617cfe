#!/usr/bin/env python3
"""
Agenda Topics - Main Entry Point

This script runs the agenda topic pipeline from the command line: text
preprocessing, seeded topic model training, agenda analysis, report
rendering and the acceptance suite.

Usage:
    python main.py preprocess --config config/run.yaml
    python main.py train --config config/run.yaml
    python main.py analyze --config config/run.yaml
    python main.py report --config config/run.yaml
    python main.py validate --quick
"""

import sys

from agenda_topics.cli import main

if __name__ == "__main__":
    sys.exit(main())
