#!/usr/bin/env python3
"""Canned SMT-LIB responder used to exercise the external-process bridge."""
import sys
import time

answer = sys.argv[1] if len(sys.argv) > 1 else "unknown"
if answer == "hang":
    time.sleep(30)
    sys.exit(0)
data = sys.stdin.read()
if "(check-sat)" in data:
    print(answer)
