#!/usr/bin/env python3
"""Run the full acceptance matrix and write the JSON report to a file.

Usage: python scripts/run_acceptance.py [report.json] [--fast]
"""

import sys

from cpverify.cli import main

if __name__ == "__main__":
    args = ["suite", "acceptance", "--timings"]
    out = None
    for a in sys.argv[1:]:
        if a == "--fast":
            args.append(a)
        else:
            out = a
    if out:
        import contextlib
        import io

        buf = io.StringIO()
        with contextlib.redirect_stdout(buf):
            code = main(args)
        with open(out, "w") as fh:
            fh.write(buf.getvalue())
        print(f"report written to {out}", file=sys.stderr)
        sys.exit(code)
    sys.exit(main(args))
