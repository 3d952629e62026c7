"""plot: render figures from minea-ergo output files.

    plot phase     --in scan.csv    --out fig.png --params '{"lambda": [1, 1, 1]}'
    plot histogram --in samples.csv --out fig.png --params '{"lam1": 1, "kappa": 2, "sigma": 1}'
    plot timeavg   --in traj.csv    --out fig.png --params '{"lam1": 1, "rho": 0.8}'

--params takes inline JSON or a path to a JSON file. Output format follows
the --out extension (PNG default, SVG supported). Exit codes: 0 success,
2 schema/parameter error (diagnostic on stderr).
"""

import argparse
import json
import os
import sys

from .figures import render_histogram, render_phase, render_timeavg
from .io import SchemaError

EXIT_OK = 0
EXIT_CONFIG = 2

REQUIRED_PARAMS = {
    "phase": ("lambda",),
    "histogram": ("lam1", "kappa", "sigma"),
    "timeavg": ("lam1", "rho"),
}


def _load_params(kind: str, raw: str | None) -> dict:
    if raw is None:
        raise SchemaError(
            f"plot {kind} needs --params with keys {list(REQUIRED_PARAMS[kind])}"
        )
    text = raw
    if not raw.lstrip().startswith("{"):
        try:
            with open(raw, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as err:
            raise SchemaError(f"cannot read params file {raw}: {err}") from None
    try:
        params = json.loads(text)
    except json.JSONDecodeError as err:
        raise SchemaError(f"params are not valid JSON: {err}") from None
    if not isinstance(params, dict):
        raise SchemaError("params must be a JSON object")
    required = REQUIRED_PARAMS[kind]
    missing = [k for k in required if k not in params]
    extra = [k for k in params if k not in required]
    if missing or extra:
        detail = []
        if missing:
            detail.append(f"missing {missing}")
        if extra:
            detail.append(f"unknown {extra}")
        raise SchemaError(f"params for {kind} must have exactly {list(required)}: {'; '.join(detail)}")
    for key, value in params.items():
        if isinstance(value, bool):
            raise SchemaError(f"param '{key}' must not be a boolean")
        if key == "lambda":
            if not isinstance(value, list) or any(isinstance(c, bool) for c in value):
                raise SchemaError("param 'lambda' must be a list of three numbers")
    return params


def _number(params: dict, key: str) -> float:
    value = params[key]
    if not isinstance(value, (int, float)):
        raise SchemaError(f"param '{key}' must be a number, got {value!r}")
    return float(value)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plot", description="Render figures from minea-ergo CSV outputs."
    )
    sub = parser.add_subparsers(dest="kind", required=True)
    specs = {
        "phase": "verdict heatmap of a phase-scan CSV with the threshold line",
        "histogram": "endpoint histogram with the analytic Gaussian overlay",
        "timeavg": "running time average of X with the lower-bound line",
    }
    for kind, help_text in specs.items():
        p = sub.add_parser(kind, help=help_text)
        p.add_argument("--in", dest="infile", required=True, help="input CSV file")
        p.add_argument("--out", required=True, help="output image (.png or .svg)")
        p.add_argument("--params", help="inline JSON or a JSON file")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        params = _load_params(args.kind, args.params)
        if args.kind == "phase":
            out = render_phase(args.infile, params["lambda"], args.out)
        elif args.kind == "histogram":
            out = render_histogram(
                args.infile,
                _number(params, "lam1"),
                _number(params, "kappa"),
                _number(params, "sigma"),
                args.out,
            )
        else:
            out = render_timeavg(
                args.infile, _number(params, "lam1"), _number(params, "rho"), args.out
            )
    except (SchemaError, ValueError) as err:
        print(f"plot {args.kind}: {err}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"plot {args.kind}: wrote {out} ({os.path.getsize(out)} bytes)")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
