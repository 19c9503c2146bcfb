import math
import numpy as np

from fhec.noise.params import SchemeParams
from fhec.noise.model import propagate_noise, NoiseBound, AVG_CASE, WORST_CASE
from fhec.rlwe.modmath import prime_with_bits, next_prime_congruent_one
from fhec.rlwe.bgv import (
    SlotEncoding, get_encoding, bgv_keygen, bgv_encrypt, bgv_decrypt,
    bgv_add, bgv_sub, bgv_add_plain, bgv_mul, bgv_mul_plain, bgv_mul_const,
    bgv_rotate, bgv_relinearize, bgv_mod_reduce, measure_noise,
)


def toy_params(n=16, t=97, limb_bits=(40, 40)):
    avoid = [t]
    moduli = []
    for b in limb_bits:
        q = prime_with_bits(b, 2 * n, avoid)
        avoid.append(q)
        moduli.append(q)
    aux = next_prime_congruent_one(max(moduli) + 1, 2 * n, avoid)
    return SchemeParams(
        ring_dimension=n, moduli=tuple(moduli), plain_modulus=t, aux_modulus=aux
    )


# ---- 1. slot encoding roundtrip + automorphism shift at plaintext level ----
enc = SlotEncoding(16, 97)
rng = np.random.default_rng(0)
v = rng.integers(0, 97, 8)
coeffs = enc.encode(v)
assert np.array_equal(enc.decode(coeffs), v), (enc.decode(coeffs), v)

# automorphism X -> X^(5^1) on the plaintext polynomial shifts slots left by 1
from fhec.rlwe.poly import RingPoly
p = RingPoly(coeffs, 97)
shifted = enc.decode(p.automorphism(pow(5, 1, 32)).coeffs)
assert np.array_equal(shifted, np.roll(v, -1)), (shifted, np.roll(v, -1))
shifted3 = enc.decode(p.automorphism(pow(5, 3, 32)).coeffs)
assert np.array_equal(shifted3, np.roll(v, -3))
print("slot encoding + automorphism shift OK (X->X^(5^k) rolls left by k)")

# ---- 2. roundtrip + determinism ----
params = toy_params()
keys = bgv_keygen(params, seed=7, rotations=(1, 3))
ct = bgv_encrypt(v, keys)
assert ct.level == 1 and ct.key_degree == 1 and ct.scale == 1
out = bgv_decrypt(ct, keys)
assert np.array_equal(out, v), (out, v)

keys2 = bgv_keygen(params, seed=7, rotations=(1, 3))
ct2 = bgv_encrypt(v, keys2)
for p1, p2 in zip(ct.parts, ct2.parts):
    for l1, l2 in zip(p1.limbs, p2.limbs):
        assert np.array_equal(l1.coeffs, l2.coeffs)
keys3 = bgv_keygen(params, seed=8)
assert not np.array_equal(keys3.sk, keys.sk)
print("roundtrip + determinism OK")

# ---- 3. homomorphic identities ----
w = rng.integers(0, 97, 8)
ct_v = bgv_encrypt(v, keys)
ct_w = bgv_encrypt(w, keys)

assert np.array_equal(bgv_decrypt(bgv_add(ct_v, ct_w), keys), (v + w) % 97)
assert np.array_equal(bgv_decrypt(bgv_sub(ct_v, ct_w), keys), (v - w) % 97)
assert np.array_equal(bgv_decrypt(bgv_add_plain(ct_v, w, keys), keys), (v + w) % 97)
assert np.array_equal(bgv_decrypt(bgv_mul_plain(ct_v, w, keys), keys), (v * w) % 97)

prod = bgv_mul(ct_v, ct_w, keys)
assert prod.key_degree == 2
assert np.array_equal(bgv_decrypt(prod, keys), (v * w) % 97)
lin = bgv_relinearize(prod, keys)
assert lin.key_degree == 1
assert np.array_equal(bgv_decrypt(lin, keys), (v * w) % 97)
print("add/sub/plain/mul/relin OK")

# degree-3 product and its relinearization
u = rng.integers(0, 97, 8)
ct_u = bgv_encrypt(u, keys)
cubic = bgv_mul(prod, ct_u, keys)
assert cubic.key_degree == 3
assert np.array_equal(bgv_decrypt(cubic, keys), (v * w * u) % 97)
lin3 = bgv_relinearize(cubic, keys)
assert lin3.key_degree == 1
assert np.array_equal(bgv_decrypt(lin3, keys), (v * w * u) % 97)
print("degree-3 mul + relin OK")

# ---- 4. rotation ----
rot1 = bgv_rotate(ct_v, 1, keys)
got = bgv_decrypt(rot1, keys)
print("rotate(1):", got, "roll -1:", np.roll(v, -1), "roll +1:", np.roll(v, 1))
assert np.array_equal(got, np.roll(v, -1)) or np.array_equal(got, np.roll(v, 1))
rot3 = bgv_decrypt(bgv_rotate(ct_v, 3, keys), keys)
if np.array_equal(got, np.roll(v, -1)):
    assert np.array_equal(rot3, np.roll(v, -3))
    print("rotation direction: step k == np.roll(x, -k) (left)")
else:
    assert np.array_equal(rot3, np.roll(v, 3))
    print("rotation direction: step k == np.roll(x, +k) (right)")

# ---- 5. mod reduce + scale tracking ----
red = bgv_mod_reduce(lin, keys)
assert red.level == 0
assert red.scale == pow(params.moduli[1], -1, 97)
assert np.array_equal(bgv_decrypt(red, keys), (v * w) % 97)

adj = bgv_mul_const(red, 5, keys)
assert adj.scale == red.scale * 5 % 97
assert np.array_equal(bgv_decrypt(adj, keys), (v * w) % 97)
# add_plain respects the scale
assert np.array_equal(bgv_decrypt(bgv_add_plain(adj, w, keys), keys), (v * w + w) % 97)
print("mod_reduce scale tracking + scaled add_plain OK")

# ---- 6. noise measurement: fresh vs model, corrupted ciphertext ----
fresh_bits = measure_noise(ct_v, keys, v)
model_fresh = propagate_noise("fresh-pk", [], params, WORST_CASE).bits
print(f"fresh measured {fresh_bits:.1f} bits vs worst-case model {model_fresh:.1f}")
assert fresh_bits <= model_fresh

after_mul = measure_noise(lin, keys, (v * w) % 97)
b_v = propagate_noise("fresh-pk", [], params, WORST_CASE)
b_mul = propagate_noise("mul", [b_v, b_v], params, WORST_CASE)
b_lin = propagate_noise("relinearize", [b_mul], params, WORST_CASE, level=1)
print(f"mul+relin measured {after_mul:.1f} bits vs model {b_lin.bits:.1f}")
assert after_mul <= b_lin.bits

bits_bad = measure_noise(ct_v, keys3, v)  # wrong secret key
logq = sum(math.log2(q) for q in params.moduli)
print(f"wrong-key measured {bits_bad:.1f} bits, log2 Q = {logq:.1f}")
assert bits_bad > logq - 4

print("ALL BGV CHECKS PASSED")
