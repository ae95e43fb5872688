#!/usr/bin/env python3
"""Convert a MATPOWER radial feeder case (.m) into the gridflow JSON case schema.

Mapping:
  mpc.baseMVA            -> base_mva
  bus BASE_KV (bus 1)    -> base_kv (branch r/x stay in ohms)
  bus type 3             -> psp
  bus PD/QD              -> p_demand/q_demand in MW/MVAr (kW/kVAr / 1000;
                            kVA loads with the 0.85 pf note are split first)
  bus VMIN/VMAX          -> v_min/v_max (omitted when equal to 0.9/1.1 or for the psp)
  branch F_BUS/T_BUS/R/X -> from/to/r/x
  branch BR_STATUS = 0   -> normally_open
Every branch is marked switchable when --switchable is given.

Usage: matpower_to_case.py case33bw.m ieee33 --v0 1.05 --switchable > ieee33.json
"""
import argparse
import json
import math
import re


def block(txt, name):
    m = re.search(r"mpc\.%s\s*=\s*\[(.*?)\];" % name, txt, re.S)
    rows = []
    for line in m.group(1).split("\n"):
        line = line.split("%")[0].strip().rstrip(";")
        if line:
            rows.append([float(v) for v in line.split()])
    return rows


def sig12(v):
    return float("%.12g" % v)


def dump(doc):
    lines = ["{"]
    for key in ("name", "base_mva", "base_kv", "psp", "v0"):
        lines.append('  "%s": %s,' % (key, json.dumps(doc[key])))
    for key, end in (("buses", ","), ("branches", "")):
        lines.append('  "%s": [' % key)
        rows = ["    " + json.dumps(r) for r in doc[key]]
        lines.append(",\n".join(rows))
        lines.append("  ]" + end)
    lines.append("}")
    return "\n".join(lines)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("path")
    ap.add_argument("name")
    ap.add_argument("--v0", type=float, default=1.05)
    ap.add_argument("--switchable", action="store_true")
    args = ap.parse_args()
    txt = open(args.path).read()
    base = float(re.search(r"mpc\.baseMVA\s*=\s*([\d.]+)", txt).group(1))
    buses = block(txt, "bus")
    branches = block(txt, "branch")
    kva_pf = 0.85 if "power factor" in txt else None
    psp = None
    out_buses = []
    for b in buses:
        bid = int(b[0])
        rec = {"id": bid}
        pd, qd = b[2] / 1e3, b[3] / 1e3
        if kva_pf is not None:
            pd, qd = pd * kva_pf, pd * math.sin(math.acos(kva_pf))
        if pd != 0.0:
            rec["p_demand"] = sig12(pd)
        if qd != 0.0:
            rec["q_demand"] = sig12(qd)
        if int(b[1]) == 3:
            psp = bid
        else:
            if b[12] != 0.9:
                rec["v_min"] = b[12]
            if b[11] != 1.1:
                rec["v_max"] = b[11]
        out_buses.append(rec)
    out_branches = []
    for br in branches:
        rec = {"from": int(br[0]), "to": int(br[1]), "r": br[2], "x": br[3]}
        if args.switchable:
            rec["switchable"] = True
        if int(br[10]) == 0:
            rec["normally_open"] = True
            rec["switchable"] = True
        out_branches.append(rec)
    doc = {
        "name": args.name,
        "base_mva": base,
        "base_kv": buses[0][9],
        "psp": psp,
        "v0": args.v0,
        "buses": out_buses,
        "branches": out_branches,
    }
    print(dump(doc))


if __name__ == "__main__":
    main()
