"""Print parameter and state-slot counts for each architecture next to the reference counts."""

import argparse

from tecforecast.architectures import REFERENCE_PARAM_COUNTS, ArchKind, build_model


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cell", choices=["lstm", "gru"], default="lstm")
    args = ap.parse_args()
    print(f"{'arch':8s} {'params':>8s} {'reference':>10s} {'slots':>6s}")
    for kind in ArchKind:
        m = build_model(kind, cell=args.cell)
        print(f"{kind.value:8s} {m.count_params():8d} {REFERENCE_PARAM_COUNTS[kind]:10d} {len(m.slots):6d}")
        for name, t in m.parameters().items():
            print(f"    {name:28s} {str(t.shape):18s} {t.data.size:6d}")


if __name__ == "__main__":
    main()
