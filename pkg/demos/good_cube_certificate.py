"""Find a good cube on the fold map, certify positive content, replay the certificate.

Run: python demos/good_cube_certificate.py
"""
import json

from contentlab import io, zoo
from contentlab.content import mapping_content_upper
from contentlab.seminorm import good_cube_search, positive_content_certificate
from contentlab.verify import verify

K = 5
f, _ = zoo("fold", 1, 1, K)

w = good_cube_search(f, eta=0.1, c=0.5, min_side=0.125)
print("good cube:", w.cube, "plane:", w.plane.round(6).tolist(), f"c = {w.c:.4f} ({w.plane_method})")
print(f"LP md {w.fit.info['lp_md']:.4g} <= matrix md {w.fit.md_value:.4g} ({w.fit.kind})")

cert = positive_content_certificate(f, w)
dp = mapping_content_upper(f, K)
print(f"sampled bound {cert.bound:.5f}, certified {cert.certified:.5f}, dyadic {cert.dyadic_bound:.5f}")
print(f"DP upper {dp.value:.5f} (+ slack {dp.sampling_slack:.5f})")

text = json.dumps(io.positive_certificate_to_dict(cert))
print("replay:", verify(json.loads(text), f))
