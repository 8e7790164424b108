import os
import subprocess
import sys

here = os.path.dirname(os.path.abspath(__file__))
subprocess.run([sys.executable, "source.py"], cwd=here, check=True, timeout=30)
with open(os.path.join(here, "output.txt")) as handle:
    ciphertext = handle.read().splitlines()[1]
plain = "".join(
    chr((ord(ch) - 0x41 - i) % 26 + 0x41) if ch.isalpha() else ch
    for i, ch in enumerate(ciphertext)
)
print("HTB{" + plain + "}")
