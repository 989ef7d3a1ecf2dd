#!/usr/bin/env python3
"""Count chapters, articles and paragraph chunks in a regulation source file.

Reads marker lines only, so the result does not depend on the Rust parser.
An article without #P markers counts as one chunk.
"""
import sys


def count(path):
    chapters = articles = chunks = 0
    paras = None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            tag = line.split(None, 1)[0] if line.strip() else ""
            if tag in ("#CH", "#ART"):
                if paras is not None:
                    chunks += max(1, paras)
                    paras = None
                if tag == "#CH":
                    chapters += 1
                else:
                    articles += 1
                    paras = 0
            elif tag == "#P" and paras is not None:
                paras += 1
    if paras is not None:
        chunks += max(1, paras)
    return chapters, articles, chunks


def main(argv):
    if len(argv) != 2:
        sys.exit(f"usage: {argv[0]} REGULATION_FILE")
    ch, art, chunks = count(argv[1])
    print(f"chapters {ch} articles {art} chunks {chunks}")


if __name__ == "__main__":
    main(sys.argv)
