"""Upper and lower mapping-content bounds across the example zoo.

Run: python demos/content_bounds.py
"""
from contentlab import zoo
from contentlab.content import faces_lower_bound, mapping_content_upper
from contentlab.zoo import NAMES

K = 4
print(f"{'map':20s} {'upper':>10s} {'slack':>10s} {'faces':>10s}")
for name in NAMES:
    f, _ = zoo(name, 1, 1, K)
    dp = mapping_content_upper(f, K)
    lower = faces_lower_bound(f).product
    print(f"{name:20s} {dp.value:10.5f} {dp.sampling_slack:10.5f} {lower:10.5f}")

print("\nsegment_tree (n=2, m=0): the area term collapses as the cover refines")
for L in range(1, 6):
    f, _ = zoo("segment_tree", 2, 0, L)
    print(f"  K = L_max = {L}: upper {mapping_content_upper(f, L).value:.5f}")
