"""Independent reference values frozen into the C++ unit tests.

Everything here is computed from first principles with mpmath (50 digits)
or scikit-image, without touching the C++ code. Run it to regenerate the
numbers quoted in tests/unit/*.cpp.
"""

from fractions import Fraction

import mpmath as mp
import numpy as np

mp.mp.dps = 50

T = 1000
B0 = mp.mpf("1e-4")
B1 = mp.mpf("0.02")
betas = [B0 + (B1 - B0) * i / (T - 1) for i in range(T)]
abar = [mp.mpf(1)]
for b in betas:
    abar.append(abar[-1] * (1 - b))


def lam(a):
    return mp.log(a / (1 - a)) / 2


def a_from_lam(l):
    return 1 / (1 + mp.exp(-2 * l))


def show(name, v):
    print(f"{name} = {mp.nstr(v, 20)}")


print("# schedule")
for t in (1, 150, 500, 1000):
    show(f"abar[{t}]", abar[t])
show("log_snr(500)", lam(abar[500]))
show("abar_at(150.25)", mp.exp(mp.log(abar[150]) * 0.75 + mp.log(abar[151]) * 0.25))


def grid(origin, count):
    if count == 1:
        return [origin]
    out = []
    for i in range(count):
        v = Fraction((origin - 1) * i, count - 1)
        off = int(v) + (1 if v - int(v) >= Fraction(1, 2) else 0)
        out.append(origin - off)
    for i in range(1, len(out)):
        if out[i] >= out[i - 1]:
            out[i] = out[i - 1] - 1
    return out


print("# grids")
print("grid(1000,10) =", grid(1000, 10))
print("grid(150,7) =", grid(150, 7))
print("grid(10,4) =", grid(10, 4))

print("# ddpm posterior coefficients 500 -> 480")
a, ap = abar[500], abar[480]
ratio = a / ap
show("c0", mp.sqrt(ap) * (1 - ratio) / (1 - a))
show("ct", mp.sqrt(ratio) * (1 - ap) / (1 - a))
show("beta_tilde", (1 - ap) / (1 - a) * (1 - ratio))

print("# ddim step x=0.7 eps=0.2, 500 -> 480")
x, e = mp.mpf("0.7"), mp.mpf("0.2")
x0 = (x - mp.sqrt(1 - a) * e) / mp.sqrt(a)
show("ddim", mp.sqrt(ap) * x0 + mp.sqrt(1 - ap) * e)

m, s2 = mp.mpf("0.3"), mp.mpf("0.04")


def oracle_eps(x, a):
    return mp.sqrt(1 - a) * (x - mp.sqrt(a) * m) / (a * s2 + 1 - a)


def x0_of(x, a):
    return (x - mp.sqrt(1 - a) * oracle_eps(x, a)) / mp.sqrt(a)


print("# gaussian oracle m=0.3 s2=0.04 x=0.5 t=500")
show("eps", oracle_eps(mp.mpf("0.5"), abar[500]))

print("# dpm-solver-2 x=0.5 500 -> 400")
x = mp.mpf("0.5")
lt, ls = lam(abar[500]), lam(abar[400])
h = ls - lt
amid = a_from_lam(lt + h / 2)
u = mp.sqrt(amid / abar[500]) * x - mp.sqrt(1 - amid) * mp.expm1(h / 2) * oracle_eps(x, abar[500])
show("dpm2", mp.sqrt(abar[400] / abar[500]) * x - mp.sqrt(1 - abar[400]) * mp.expm1(h) * oracle_eps(u, amid))

steps = [600, 400, 200]

print("# dpm-solver++ 2M, grid", steps, "+ final hop, x=0.5")
x = mp.mpf("0.5")
prev = None
for i, t in enumerate(steps):
    tp = steps[i + 1] if i + 1 < len(steps) else 0
    d0 = x0_of(x, abar[t])
    if tp == 0:
        x = d0
        break
    l_t, l_p = lam(abar[t]), lam(abar[tp])
    h = l_p - l_t
    D = d0
    if prev is not None:
        r = (l_t - prev[0]) / h
        D = (1 + 1 / (2 * r)) * d0 - prev[1] / (2 * r)
    x = mp.sqrt((1 - abar[tp]) / (1 - abar[t])) * x - mp.sqrt(abar[tp]) * mp.expm1(-h) * D
    prev = (l_t, d0)
show("dpmpp", x)

print("# unipc bh1 order 2, same grid")
x = mp.mpf("0.5")
prev = None
landing = None
evals = 0
for i, t in enumerate(steps):
    tp = steps[i + 1] if i + 1 < len(steps) else 0
    if tp == 0:
        x = x0_of(x, abar[t])
        evals += 1
        break
    if landing is not None:
        m0 = landing
    else:
        m0 = x0_of(x, abar[t])
        evals += 1
    l_t, l_p = lam(abar[t]), lam(abar[tp])
    h = l_p - l_t
    hh = -h
    ap = mp.sqrt(abar[tp])
    base = mp.sqrt((1 - abar[tp]) / (1 - abar[t])) * x - ap * mp.expm1(hh) * m0
    if prev is None:
        xp = base
    else:
        r = (prev[0] - l_t) / h
        D1 = (prev[1] - m0) / r
        xp = base - ap * hh * 0.5 * D1
    mt = x0_of(xp, abar[tp])
    evals += 1
    if prev is None:
        x = base - ap * hh * mp.mpf("0.5") * (mt - m0)
    else:
        hphi = mp.expm1(hh) / hh - 1
        b1 = hphi / hh
        hphi = hphi / hh - mp.mpf("0.5")
        b2 = hphi * 2 / hh
        R = mp.matrix([[1, 1], [r, 1]])
        rho = mp.lu_solve(R, mp.matrix([b1, b2]))
        x = base - ap * hh * (rho[0] * D1 + rho[1] * (mt - m0))
    prev = (l_t, m0)
    landing = mt
show("unipc", x)
print("unipc evals =", evals)

print("# metrics")
from skimage.metrics import structural_similarity, peak_signal_noise_ratio

W, H = 24, 20
yy, xx = np.mgrid[0:H, 0:W].astype(np.float64)
ref = 0.5 + 0.4 * np.sin(0.3 * xx + 0.2 * yy)
test = ref + 0.05 * np.cos(0.7 * xx * yy / 5.0)
print("ssim =", repr(structural_similarity(ref, test, data_range=1.0, gaussian_weights=True,
                                           sigma=1.5, use_sample_covariance=False)))
print("psnr =", repr(peak_signal_noise_ratio(ref, test, data_range=1.0)))
print("rmse =", repr(float(np.sqrt(np.mean((ref - test) ** 2)))))
