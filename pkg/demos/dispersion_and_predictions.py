"""How much source can a block of channel uses carry at a target error rate?

Walks through the dispersion calculator for a Gaussian source over an AWGN
channel, then for heavier- and lighter-tailed laws, and compares the joint
backoff with what separate source and channel codes would need.
"""

import math

from nnjscc import analytic as an
from nnjscc.model import make_noise, make_source

P, D, n = 3.0, 0.25, 200

print("Gaussian source, Gaussian noise, P = 3, D = 0.25")
rep = an.dispersion_report(3.0, 1.0, 3.0, P, D)
print(f"  capacity {rep.capacity:.4f} nats, rate-distortion {rep.rate_distortion:.4f} nats")
print(f"  rho* = {rep.rho_star:.4f} source symbols per channel use")
print(f"  V (spherical codebooks) = {rep.v_joint_sp:.4f}, V (i.i.d. codebooks) = {rep.v_joint_iid:.4f}")
for eps in (1e-3, 1e-2, 0.1, 0.5):
    print(f"  eps = {eps:<6g} k* = {an.second_order_k(n, eps, rep):7.2f}  (first-order {n * rep.rho_star:.0f})")

print("\nOther laws at the same operating point (unit source power, unit noise power)")
for src_kind in ("uniform", "laplace", "rademacher_scaled"):
    for noise_kind in ("gaussian", "laplace"):
        s, z = make_source(src_kind, {"sigma2": 1.0}), make_noise(noise_kind)
        r = an.dispersion_report(s.zeta_s, 1.0, z.zeta_c, P, D)
        print(f"  {src_kind:18s} over {noise_kind:8s}: V_s = {r.v_s:.3f}, V = {r.v_joint_sp:.3f}, "
              f"k*(0.01) = {an.second_order_k(n, 0.01, r):.1f}")

print("\nSeparate coding needs a larger backoff than joint coding (eps = 0.1)")
joint = math.sqrt(rep.v_joint_sp) * an.qfunc_inv(0.1)
sep = an.separate_second_order(0.1, rep)
print(f"  joint sqrt(V) Q^-1(eps) = {joint:.4f}, separate = {sep:.4f}")
print(f"  at n = {n}: {math.sqrt(n) * (sep - joint):.2f} fewer source symbols for the separate design")
