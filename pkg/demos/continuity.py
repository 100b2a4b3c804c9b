"""Bounds along the two canonical sequences: (x/i, 0) loses content, (x, y/i) keeps it.

Run: python demos/continuity.py
"""
from contentlab.cli import continuity_family, continuity_table

for family in ("shrink", "squash"):
    seq, limit = continuity_family(family, 8, 3)
    rows, lim, ok = continuity_table(seq, limit, 3)
    print(f"{family}: limit upper {lim['upper']:.4f}, limit lower {lim['lower']:.4f}, consistent {ok}")
    for r in rows:
        print(f"  i={r['i']:2d} dist {r['distance']:.4f} upper {r['upper']:.4f} "
              f"(<= {r['predicted_upper']:.4f}) lower {r['lower']:.4f} (>= {r['predicted_lower']:.4f})")
