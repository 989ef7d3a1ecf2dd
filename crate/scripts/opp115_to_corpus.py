#!/usr/bin/env python3
"""Convert an OPP-115 style release into the privcomp policy corpus format.

Expects the release layout:
  sanitized_policies/<n>_<domain>.html   segments separated by "|||"
  annotations/<n>_<domain>.csv            one row per annotation; column 5 is
                                          the segment id, column 6 the category

Each segment becomes `#SEG s<k> <category>` under `#PROVIDER <domain>`, with
the most frequent annotated category (ties broken alphabetically). The
output carries no article annotations; write those separately as
`provider,segment,article` rows.
"""

import argparse
import csv
import html
import re
import sys
from collections import Counter
from pathlib import Path

TAG = re.compile(r"<[^>]+>")
PROVIDER_ID = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")


def segments(path: Path) -> list[str]:
    raw = path.read_text(encoding="utf-8", errors="replace")
    out = []
    for part in raw.split("|||"):
        text = html.unescape(TAG.sub(" ", part))
        out.append(" ".join(text.split()))
    return out


def categories(path: Path) -> dict[int, str]:
    counts: dict[int, Counter] = {}
    if not path.exists():
        return {}
    with path.open(newline="", encoding="utf-8", errors="replace") as f:
        for row in csv.reader(f):
            if len(row) < 6:
                continue
            try:
                seg = int(row[4])
            except ValueError:
                continue
            counts.setdefault(seg, Counter())[row[5].strip()] += 1
    return {
        seg: sorted(c.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]
        for seg, c in counts.items()
    }


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("release", type=Path, help="directory holding sanitized_policies/ and annotations/")
    ap.add_argument("--out", type=Path, help="output file (default: stdout)")
    args = ap.parse_args()

    policies = sorted((args.release / "sanitized_policies").glob("*.html"))
    if not policies:
        print(f"no policies under {args.release / 'sanitized_policies'}", file=sys.stderr)
        return 2

    lines = []
    seen = set()
    for p in policies:
        domain = p.stem.split("_", 1)[-1]
        if not PROVIDER_ID.match(domain) or domain in seen:
            print(f"skipping {p.name}: unusable or repeated provider id", file=sys.stderr)
            continue
        cats = categories(args.release / "annotations" / f"{p.stem}.csv")
        body = []
        for i, text in enumerate(segments(p)):
            if not text:
                continue
            body.append(f"#SEG s{i} {cats.get(i, '')}".rstrip())
            body.append(text)
        if not body:
            continue
        seen.add(domain)
        lines.append(f"#PROVIDER {domain} {domain}")
        lines.extend(body)

    text = "\n".join(lines) + "\n"
    if args.out:
        args.out.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    print(f"providers {len(seen)}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
