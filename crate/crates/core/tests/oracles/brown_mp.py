"""Reference values for the Brown waveform tests, evaluated with mpmath at 50 digits.

Re-run with `python3 brown_mp.py` and paste the output into tests/brown_oracle.rs.
"""
from mpmath import mp, mpf, erfc, exp, sqrt

mp.dps = 50

C = mpf("299792458")
T = mpf("3.125e-9")
SIGMA_P = mpf("0.513") * T
ALPHA = mpf("2.06e6")
K = 104


def sigma_c2(swh):
    return (mpf(swh) / (2 * C)) ** 2 + SIGMA_P ** 2


def brown(t, swh, tau_m, pu):
    sc2 = sigma_c2(swh)
    sc = sqrt(sc2)
    tau_s = 2 * mpf(tau_m) / C
    u = (t - tau_s - ALPHA * sc2) / (sqrt(2) * sc)
    env = exp(-ALPHA * (t - tau_s - ALPHA * sc2 / 2))
    return mpf(pu) / 2 * erfc(-u) * env


def main():
    print("// sigma_c^2 at swh = 2 m")
    print(f"const SIGMA_C2_SWH2: f64 = {mp.nstr(sigma_c2('2'), 25)};")
    tau_m = 31 * T * C / 2
    print(f"// tau = 31 gates = {mp.nstr(tau_m, 25)} m")
    vals = [brown(k * T, "2", tau_m, "130") for k in range(1, K + 1)]
    print("const BROWN_SWH2_TAU31_PU130: [f64; 104] = [")
    for v in vals:
        print(f"    {mp.nstr(v, 25)},")
    print("];")


if __name__ == "__main__":
    main()
