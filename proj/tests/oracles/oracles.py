"""Independent reference values for the regression constants pinned in the unit tests.

Run: python3 tests/oracles/oracles.py
"""
import mpmath as mp
import numpy as np
from scipy import integrate, special

mp.mp.dps = 30


def ritz_gaussian_well(n_modes=4, B0=1.0):
    """mu_n = 2 <B psi_n, psi_n> / <psi_n, psi_n> for psi_n = z^n e^{-h}, b = -B0 e^{-r^2}.

    h(r) = B0 r^2/4 + int_0^r (1/s) int_0^s b(t) t dt ds = B0 r^2/4 - (B0/4) Ein(r^2).
    """
    def h(r):
        return B0 * r**2 / 4 - B0 / 4 * (mp.euler + mp.log(r**2) - mp.ei(-r**2)) if r > 0 else mp.mpf(0)

    def B(r):
        return B0 - B0 * mp.exp(-r**2)

    mus = []
    for n in range(n_modes):
        num = mp.quad(lambda r: 2 * B(r) * r**(2 * n + 1) * mp.exp(-2 * h(r)), [0, 2, 6, mp.inf])
        den = mp.quad(lambda r: r**(2 * n + 1) * mp.exp(-2 * h(r)), [0, 2, 6, mp.inf])
        mus.append(num / den)
    return sorted(mus)


def kernel_omega(d, z=1.0, B0=1.0):
    ap = -0.5 * ((z * z + B0) / B0 - 1)
    am = -0.5 * ((z * z - B0) / B0 - 1)
    t = 2 * (B0 * d * d / 4)
    pref = 1 / (4 * mp.pi)
    o11 = pref * z * mp.gamma(ap) * mp.hyperu(ap, 1, t)
    o22 = pref * z * mp.gamma(am) * mp.hyperu(am, 1, t)
    c = pref * B0 * mp.gamma(am) * mp.hyperu(am, 2, t) * d
    m = np.array([[float(o11), 1j * float(c)], [1j * float(c), float(o22)]])
    return np.linalg.svd(m, compute_uv=False)[0]


def born_integral(gamma=1.0, z=1.0, B0=1.0):
    f = lambda d: 2 * np.pi * d * d * np.exp(gamma * d - B0 * d * d / 4) * 1.1 * kernel_omega(d, z, B0)
    val, _ = integrate.quad(f, 0, 40, limit=400, epsabs=0, epsrel=1e-11)
    return val


if __name__ == "__main__":
    print("U(1,1,1) =", mp.nstr(mp.hyperu(1, 1, 1), 17))
    print("E1(1) =", mp.nstr(mp.e1(1), 17), " E1(0.5) =", mp.nstr(mp.e1(0.5), 17))
    print("ritz mu (b=-e^{-r^2}, N=4) =", [mp.nstr(m, 15) for m in ritz_gaussian_well()])
    I = born_integral()
    print("born integral (gamma=1,z=1,B0=1) =", repr(I), " threshold =", repr(1 / I))
    print("I_n(1), n=0..4 =", [repr(special.iv(n, 1.0)) for n in range(5)])
    print("r(j=0) =", repr(np.sqrt(4 * 1.1 * 0.5 / (0.81 - 0.25))))
