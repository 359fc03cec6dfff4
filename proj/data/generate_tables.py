#!/usr/bin/env python3
"""Regenerate the bundled attenuation tables and the approximate source spectrum.

Tables are two-column text (energy keV, linear attenuation 1/m) as consumed by
msct::load_material_table. Al/Si/O mass attenuation anchors follow standard
photon cross-section tabulations; Lu is synthesized from Klein-Nishina
incoherent scattering plus a fitted photoelectric term with the K-shell step at
63.31 keV (edge fine structure deliberately omitted). The spectrum is a
bending-magnet-like shape with aluminium filtration, tuned so the flat-field
chain lands near the published per-line gray-value targets.

Run from the repo root:  python3 data/generate_tables.py
"""

import numpy as np
from scipy.special import kv
from scipy.integrate import quad
from scipy.optimize import brentq

# ---------------------------------------------------------------- constants
KEV_PER_MEV = 1000.0
R_E_CM = 2.8179403262e-13          # classical electron radius, cm
N_A = 6.02214076e23
M_E_KEV = 510.99895

DENSITY = {"al": 2.699, "si": 2.330, "sio2": 2.650, "luag": 6.730}

# mass attenuation anchors, (keV, cm^2/g), standard tabulated values
AL_ANCHORS = [
    (10, 26.23), (15, 7.955), (20, 3.441), (30, 1.128), (40, 0.5685),
    (50, 0.3681), (60, 0.2778), (80, 0.2018), (100, 0.1704), (150, 0.1378),
    (200, 0.1223), (300, 0.1042), (400, 0.09276), (500, 0.08445), (600, 0.07802),
]
SI_ANCHORS = [
    (10, 33.89), (15, 10.34), (20, 4.464), (30, 1.436), (40, 0.7012),
    (50, 0.4385), (60, 0.3207), (80, 0.2228), (100, 0.1835), (150, 0.1448),
    (200, 0.1275), (300, 0.1082), (400, 0.09614), (500, 0.08748), (600, 0.08077),
]
O_ANCHORS = [
    (10, 5.952), (15, 1.836), (20, 0.8651), (30, 0.3779), (40, 0.2585),
    (50, 0.2132), (60, 0.1907), (80, 0.1678), (100, 0.1551), (150, 0.1361),
    (200, 0.1239), (300, 0.1070), (400, 0.09566), (500, 0.08729), (600, 0.08041),
]

LU_Z, LU_A, LU_KEDGE = 71, 174.97, 63.31
AL_Z, AL_A = 13, 26.98
SIO2_W_SI = 28.086 / 60.086
SIO2_W_O = 32.0 / 60.086
# Lu3Al5O12 mass fractions
LUAG_M = 3 * 174.97 + 5 * 26.98 + 12 * 16.0
LUAG_W = {"lu": 3 * 174.97 / LUAG_M, "al": 5 * 26.98 / LUAG_M, "o": 12 * 16.0 / LUAG_M}


def loglog_interp(anchors, e):
    xs = np.log([a[0] for a in anchors])
    ys = np.log([a[1] for a in anchors])
    return np.exp(np.interp(np.log(e), xs, ys))


def klein_nishina_mass(e_kev, z, a):
    """Incoherent (Klein-Nishina, free electrons) mass attenuation cm^2/g."""
    k = np.asarray(e_kev, dtype=float) / M_E_KEV
    t1 = (1 + k) / k**2 * (2 * (1 + k) / (1 + 2 * k) - np.log1p(2 * k) / k)
    t2 = np.log1p(2 * k) / (2 * k)
    t3 = (1 + 3 * k) / (1 + 2 * k) ** 2
    sigma = 2 * np.pi * R_E_CM**2 * (t1 + t2 + t3)  # cm^2 per electron
    return sigma * N_A * z / a


def fit_photo_coherent():
    """Fit tau = a*Z^4/(A*E^3.1) and coh = c*Z^2.5/(A*E^2) on Al at 30/100 keV."""
    e1, mu1 = 30.0, 1.128
    e2, mu2 = 100.0, 0.1704
    kn1 = klein_nishina_mass(e1, AL_Z, AL_A)
    kn2 = klein_nishina_mass(e2, AL_Z, AL_A)
    # linear 2x2 system in (a, c)
    p1, q1 = AL_Z**4 / (AL_A * e1**3.1), AL_Z**2.5 / (AL_A * e1**2)
    p2, q2 = AL_Z**4 / (AL_A * e2**3.1), AL_Z**2.5 / (AL_A * e2**2)
    rhs1, rhs2 = mu1 - kn1, mu2 - kn2
    det = p1 * q2 - p2 * q1
    a = (rhs1 * q2 - rhs2 * q1) / det
    c = (p1 * rhs2 - p2 * rhs1) / det
    return a, c


PHOTO_A, COH_C = fit_photo_coherent()
LU_KJUMP = 5.4  # typical K-shell jump ratio at Z ~ 71


def lu_mass_atten(e_kev):
    e = np.asarray(e_kev, dtype=float)
    tau = PHOTO_A * LU_Z**4 / (LU_A * e**3.1)
    tau = np.where(e < LU_KEDGE, tau / LU_KJUMP, tau)
    coh = COH_C * LU_Z**2.5 / (LU_A * e**2)
    return tau + klein_nishina_mass(e, LU_Z, LU_A) + coh


def mass_atten(material, e):
    if material == "al":
        return loglog_interp(AL_ANCHORS, e)
    if material == "si":
        return loglog_interp(SI_ANCHORS, e)
    if material == "o":
        return loglog_interp(O_ANCHORS, e)
    if material == "sio2":
        return SIO2_W_SI * mass_atten("si", e) + SIO2_W_O * mass_atten("o", e)
    if material == "luag":
        return (LUAG_W["lu"] * lu_mass_atten(e)
                + LUAG_W["al"] * mass_atten("al", e)
                + LUAG_W["o"] * mass_atten("o", e))
    raise KeyError(material)


def linear_atten_per_m(material, e):
    return mass_atten(material, e) * DENSITY[material] * 100.0


def write_table(path, material, energies, note):
    mu = linear_atten_per_m(material, energies)
    with open(path, "w") as f:
        f.write(f"# {note}\n")
        f.write("# columns: energy [keV]  linear attenuation [1/m]\n")
        for e, m in zip(energies, mu):
            f.write(f"{e:.4f} {m:.6e}\n")
    print(f"wrote {path} ({len(energies)} samples)")


# ---------------------------------------------------------------- spectrum
_G1_CACHE = {}


def g1(y):
    """y * integral_y^inf K_{5/3}(t) dt  (bending-magnet spectral shape)."""
    y = float(y)
    if y not in _G1_CACHE:
        val, _ = quad(lambda t: kv(5.0 / 3.0, t), y, max(y + 40.0, 60.0), limit=200)
        _G1_CACHE[y] = y * val
    return _G1_CACHE[y]


def spectral_density(e_kev, ec_kev, t_filter_m, amp):
    """photons per keV per pixel per exposure."""
    shape = np.array([g1(e / ec_kev) for e in np.atleast_1d(e_kev)]) / np.atleast_1d(e_kev)
    filt = np.exp(-linear_atten_per_m("al", np.atleast_1d(e_kev)) * t_filter_m)
    return amp * shape * filt


# ---------------------------------------------------------------- optics chain
def calibrated_c(alpha_p, n_pa, d, h_pixel, anchor_e=32.565, anchor_row=50.0):
    s = np.sin(alpha_p / 2)
    gamma0 = anchor_row * h_pixel / (2.0 * n_pa * d)
    delta0 = 1.0 - s / np.sin(gamma0 + alpha_p / 2)
    return delta0 * anchor_e**2


def row_of_e(e, c_delta, alpha_p, n_pa, d, h_pixel):
    s = np.sin(alpha_p / 2)
    gamma = np.arcsin(s / (1.0 - c_delta / e**2)) - alpha_p / 2
    return 2.0 * n_pa * gamma * d / h_pixel


def cell_bound_energy(row_b, c_delta, alpha_p, n_pa, d, h_pixel):
    f = lambda e: row_of_e(e, c_delta, alpha_p, n_pa, d, h_pixel) - row_b
    return brentq(f, 5.0, 2000.0, xtol=1e-12)


def flat_field_lines(ec, t_filter, amp, lines, pitch=0.01):
    """Expected DN for requested detector lines (cells [n-0.5, n+0.5))."""
    alpha_p, n_pa, d, h = np.deg2rad(60.0), 50, 10.0, 6.5e-6
    y_imp = 1e-4
    z = 2 * np.tan(alpha_p / 2) * y_imp * n_pa
    c_delta = calibrated_c(alpha_p, n_pa, d, h)
    dn = {}
    for n in lines:
        e_lo = cell_bound_energy(n + 0.5, c_delta, alpha_p, n_pa, d, h)
        e_hi = cell_bound_energy(n - 0.5, c_delta, alpha_p, n_pa, d, h)
        e_hi = min(e_hi, 400.0)
        e_lo = max(e_lo, 22.9)
        if e_hi <= e_lo:
            dn[n] = 0.0
            continue
        es = np.arange(e_lo + pitch / 2, e_hi, pitch)
        dens = spectral_density(es, ec, t_filter, amp) * pitch
        t_prism = np.exp(-linear_atten_per_m("si", es) * z)
        absorbed = 1.0 - np.exp(-linear_atten_per_m("luag", es) * 2e-3)
        e_mev = es / KEV_PER_MEV
        dn[n] = float(np.sum(dens * t_prism * absorbed * e_mev * 25000.0 / 4000.0 * 0.82 / 0.46))
    return dn


def tune_spectrum():
    targets = {1: 4931.0, 10: 41244.0, 50: 1603.0, 100: 37.0}
    best = None
    for ec in [24, 27, 30, 33, 36, 40]:
        for t_mm in [0.5, 1.0, 1.5, 2.0, 2.5]:
            dn = flat_field_lines(ec, t_mm * 1e-3, 1.0, list(targets))
            amp = targets[50] / dn[50]
            dn = {k: v * amp for k, v in dn.items()}
            err = sum((np.log(dn[k]) - np.log(targets[k])) ** 2 for k in targets)
            ok = dn[10] > dn[1] and dn[50] > dn[100]
            if ok and (best is None or err < best[0]):
                best = (err, ec, t_mm, amp, dn)
    err, ec, t_mm, amp, dn = best
    print(f"tuned: Ec={ec} keV, filter={t_mm} mm Al, amp={amp:.6e}, log-err={err:.3f}")
    for k in sorted(dn):
        print(f"  line {k:3d}: {dn[k]:10.1f} DN   (target {targets[k]:.0f})")
    return ec, t_mm * 1e-3, amp


def main():
    table_grid = np.unique(np.concatenate([
        np.geomspace(5.0, 450.0, 140),
        [LU_KEDGE - 0.01, LU_KEDGE + 0.01],  # bracket the Lu K step
    ]))
    smooth_grid = np.geomspace(5.0, 450.0, 140)
    write_table("data/al.txt", "al", smooth_grid,
                "aluminium, rho = 2.699 g/cm3, interpolated standard tabulation")
    write_table("data/si.txt", "si", smooth_grid,
                "silicon, rho = 2.330 g/cm3, interpolated standard tabulation")
    write_table("data/sio2.txt", "sio2", smooth_grid,
                "silicon dioxide (quartz), rho = 2.650 g/cm3, mass-fraction mix of Si and O")
    write_table("data/luag.txt", "luag", table_grid,
                "Lu3Al5O12, rho = 6.730 g/cm3, synthesized (KN + fitted photoelectric, K step at 63.31 keV, no fine structure)")

    ec, t_filter, amp = tune_spectrum()
    es = np.arange(22.9, 400.0 + 1e-9, 0.25)
    dens = spectral_density(es, ec, t_filter, amp) * 0.01  # photons per 10 eV bin
    with open("data/bm18_spectrum_approx.txt", "w") as f:
        f.write("# approximate filtered bending-magnet spectrum\n")
        f.write(f"# shape: G1(E/Ec), Ec = {ec} keV, {t_filter*1e3:.1f} mm Al filtration\n")
        f.write("# columns: energy [keV]  photons per 10 eV bin per pixel per exposure\n")
        f.write("# resampling onto a grid of pitch p multiplies by p/0.010\n")
        for e, v in zip(es, dens):
            f.write(f"{e:.4f} {v:.6e}\n")
    print(f"wrote data/bm18_spectrum_approx.txt ({len(es)} samples)")

    # -------- frozen oracle values for the test suite
    print("\n--- oracle values ---")
    lam_cm = 1.23984198e-7 / 32.565  # hc/E in cm
    n_e = 2.33 * 14 * N_A / 28.09    # electrons per cm^3
    delta_fe = R_E_CM * lam_cm**2 * n_e / (2 * np.pi)
    print(f"free-electron delta_Si(32.565 keV) = {delta_fe:.6e}")
    alpha_p, n_pa, d, h = np.deg2rad(60.0), 50, 10.0, 6.5e-6
    c_delta = calibrated_c(alpha_p, n_pa, d, h)
    print(f"calibrated C = {c_delta:.9e} keV^2, delta(32.565) = {c_delta/32.565**2:.6e}")
    for r in [0.5, 1.5, 9.5, 10.5, 49.5, 50.5, 99.5, 100.5]:
        e = cell_bound_energy(r, c_delta, alpha_p, n_pa, d, h)
        print(f"row {r:6.1f} boundary energy = {e:.4f} keV")
    print(f"row(22.98 keV) = {row_of_e(22.98, c_delta, alpha_p, n_pa, d, h):.4f}")
    print(f"row(74.30 keV) = {row_of_e(74.30, c_delta, alpha_p, n_pa, d, h):.4f}")
    delta_ex = 4.714e-7
    gamma_ex = np.arcsin(0.5 / (1 - delta_ex)) - np.pi / 6
    print(f"gamma(alpha_p=60deg, delta=4.714e-7) = {gamma_ex:.6e} rad")
    print(f"z(paper constants) = {2*np.tan(alpha_p/2)*1e-4*50:.9e} m")
    print(f"LuAG mu/rho sanity: 32.5 keV {mass_atten('luag',32.5):.3f}, "
          f"74 keV {mass_atten('luag',74.0):.3f}, 250 keV {mass_atten('luag',250.0):.4f} cm^2/g")

    # desk-scale flat field preview (64 rows, pitch 0.05)
    dn = flat_field_lines(ec, t_filter, amp, [1, 10, 30, 50, 63], pitch=0.05)
    print("desk rows (pitch 50 eV):", {k: round(v, 1) for k, v in dn.items()})


if __name__ == "__main__":
    main()
