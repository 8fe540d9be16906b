#!/usr/bin/env python3
"""Reads an LP file with HiGHS and optionally solves it.

Prints one JSON object. Exit status: 0 accepted (and matching, when
--objective is given), 1 mismatch or read failure, 2 highspy missing.
"""

import argparse
import json
import sys


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("lp")
    ap.add_argument("--columns", type=int)
    ap.add_argument("--rows", type=int)
    ap.add_argument("--solve", action="store_true", help="solve the MILP to optimality")
    ap.add_argument("--objective", type=float, help="expected optimum (implies --solve)")
    ap.add_argument("--tol", type=float, default=1e-6)
    ap.add_argument("--time-limit", type=float, default=300.0)
    args = ap.parse_args()

    try:
        import highspy
    except ImportError:
        print(json.dumps({"available": False}))
        return 2

    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    out = {"available": True}
    status = h.readModel(args.lp)
    out["read"] = status == highspy.HighsStatus.kOk
    lp = h.getLp()
    out["columns"] = lp.num_col_
    out["rows"] = lp.num_row_
    ok = out["read"]
    if args.columns is not None and lp.num_col_ != args.columns:
        ok = False
    if args.rows is not None and lp.num_row_ != args.rows:
        ok = False

    if ok and (args.solve or args.objective is not None):
        h.setOptionValue("mip_rel_gap", 0.0)
        h.setOptionValue("mip_abs_gap", 1e-9)
        h.setOptionValue("time_limit", args.time_limit)
        h.run()
        model_status = h.getModelStatus()
        out["status"] = h.modelStatusToString(model_status)
        if model_status == highspy.HighsModelStatus.kOptimal:
            out["objective"] = h.getInfo().objective_function_value
            if args.objective is not None:
                out["difference"] = abs(out["objective"] - args.objective)
                ok = out["difference"] <= args.tol
        elif args.objective is not None:
            ok = False

    out["ok"] = ok
    print(json.dumps(out))
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
