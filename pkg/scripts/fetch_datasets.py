"""Download the LIBSVM binary datasets used by the DRO benchmark.

No checksums are pinned here.  The script prints the SHA-256 of every file
it writes so you can record it; pass ``--sha256 NAME=HEX`` to verify a
known digest on later downloads.
"""

import argparse
import hashlib
import sys
import urllib.request
from pathlib import Path

BASE = "https://www.csie.ntu.edu.tw/~cjlin/libsvmtools/datasets/binary/"
FILES = {"mushrooms": "mushrooms", "w8a": "w8a", "a9a": "a9a"}


def fetch(name, dest: Path, expected=None) -> str:
    url = BASE + FILES[name]
    with urllib.request.urlopen(url, timeout=60) as resp:
        data = resp.read()
    digest = hashlib.sha256(data).hexdigest()
    if expected is not None and digest != expected.lower():
        raise RuntimeError(f"{name}: sha256 {digest} does not match {expected}")
    dest.write_bytes(data)
    return digest


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("names", nargs="*", default=sorted(FILES), choices=sorted(FILES))
    ap.add_argument("--dir", default="data", help="output directory (default: ./data)")
    ap.add_argument("--sha256", action="append", default=[], metavar="NAME=HEX")
    args = ap.parse_args(argv)
    expected = dict(item.split("=", 1) for item in args.sha256)
    out = Path(args.dir)
    out.mkdir(parents=True, exist_ok=True)
    for name in args.names:
        dest = out / f"{name}.libsvm"
        try:
            digest = fetch(name, dest, expected.get(name))
        except (OSError, RuntimeError) as exc:
            print(f"{name}: {exc}", file=sys.stderr)
            return 1
        print(f"{dest}  sha256={digest}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
