#!/usr/bin/env python3
"""Recreate MovieLens-100k ``u.data`` from a locally reachable source.

The library never downloads data itself. This helper tries, in order:

1. ``--zip PATH`` pointing at an ``ml-100k.zip`` from grouplens.org;
2. the official zip URL;
3. the copy of the same 100,000 ratings that ships inside the RecBole
   wheel (``recbole/dataset_example/ml-100k/ml-100k.inter``), fetched with
   ``pip download``. That file holds the u.data columns behind a typed
   header line, in the original order.

The result is checked against the canonical counts (100,000 ratings,
943 users, 1,682 items) before being written.
"""
import argparse
import io
import subprocess
import sys
import tempfile
import urllib.request
import zipfile
from pathlib import Path

URL = "https://files.grouplens.org/datasets/movielens/ml-100k.zip"
DEFAULT_OUT = Path(__file__).resolve().parent.parent / "data" / "ml-100k" / "u.data"


def from_zip_bytes(raw):
    with zipfile.ZipFile(io.BytesIO(raw)) as zf:
        return zf.read("ml-100k/u.data").decode("ascii")


def from_recbole():
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "--no-deps", "-q", "recbole==1.2.1", "-d", tmp],
            check=True,
        )
        wheel = next(Path(tmp).glob("recbole-*.whl"))
        with zipfile.ZipFile(wheel) as zf:
            text = zf.read("recbole/dataset_example/ml-100k/ml-100k.inter").decode("ascii")
    lines = text.splitlines()
    if not lines[0].startswith("user_id"):
        raise RuntimeError("unexpected RecBole header")
    return "".join(line + "\n" for line in lines[1:] if line)


def verify(text):
    rows = [line.split("\t") for line in text.splitlines() if line]
    users = {r[0] for r in rows}
    items = {r[1] for r in rows}
    if (len(rows), len(users), len(items)) != (100_000, 943, 1682):
        raise RuntimeError(f"not MovieLens-100k: {len(rows)} ratings, {len(users)} users, {len(items)} items")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--zip", type=Path, help="local ml-100k.zip")
    ap.add_argument("--out", type=Path, default=DEFAULT_OUT)
    args = ap.parse_args()

    if args.zip:
        text = from_zip_bytes(args.zip.read_bytes())
    else:
        try:
            with urllib.request.urlopen(URL, timeout=20) as resp:
                text = from_zip_bytes(resp.read())
        except OSError as err:
            print(f"grouplens.org unreachable ({err}); using the RecBole copy", file=sys.stderr)
            text = from_recbole()
    verify(text)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(text, encoding="ascii", newline="\n")
    print(args.out)


if __name__ == "__main__":
    main()
