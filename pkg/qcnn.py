#!/usr/bin/env python3
"""QCNN CLI entry point.

Re-exports the click group from qcnn_cli.py for ``python qcnn.py ...`` and
for tests that patch the harness through this module.
"""
from qcnn_cli import (
    cli,
    harness,
)

if __name__ == "__main__":
    cli()
