import os
import subprocess
import sys

here = os.path.dirname(os.path.abspath(__file__))
result = subprocess.run(
    [sys.executable, os.path.join(here, "challenge.py")],
    input="print(secret)\n",
    capture_output=True,
    text=True,
    cwd=here,
    timeout=30,
)
lines = [line for line in result.stdout.splitlines() if line.strip()]
print(lines[-1] if lines else "no output")
